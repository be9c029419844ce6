#include "fedluar/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedluar/errors.hpp"
#include "fedluar/rng.hpp"

namespace fedluar {

namespace {

// K class mean directions: seeded Gaussian vectors orthonormalized by
// Gram-Schmidt. When K > F the basis runs out; later directions are only
// normalized, which weakens the separation guarantee but stays well-defined.
std::vector<std::vector<double>> class_means(Rng& rng, std::size_t k, std::size_t f,
                                             double scale) {
    std::vector<std::vector<double>> dirs;
    dirs.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> v(f);
        for (auto& x : v) x = rng.normal();
        for (const auto& u : dirs) {
            double dot = 0.0;
            for (std::size_t i = 0; i < f; ++i) dot += v[i] * u[i];
            for (std::size_t i = 0; i < f; ++i) v[i] -= dot * u[i];
        }
        double norm = std::sqrt(l2_norm_sq(v));
        if (norm < 1e-9) {
            for (auto& x : v) x = rng.normal();
            norm = std::sqrt(l2_norm_sq(v));
        }
        for (auto& x : v) x /= norm;
        dirs.push_back(std::move(v));
    }
    for (auto& d : dirs) {
        for (auto& x : d) x *= scale;
    }
    return dirs;
}

}  // namespace

Dataset generate_synthetic(std::uint64_t seed, std::size_t n, std::size_t f,
                           std::size_t k, double class_separation) {
    if (f == 0 || k == 0) throw ConfigError("synthetic dataset needs F > 0 and K > 0");
    if (n < k) {
        throw ConfigError("synthetic dataset needs N >= K, got N=" + std::to_string(n) +
                          " K=" + std::to_string(k));
    }
    if (class_separation < 0.0) throw ConfigError("class_separation must be non-negative");

    Rng rng(derive_seed(seed, Stream::data_gen));
    // Orthonormal directions are sqrt(2) apart, so scaling by sep/sqrt(2)
    // puts pairwise mean distance at exactly class_separation.
    const double scale = class_separation / std::sqrt(2.0);
    auto means = class_means(rng, k, f, scale);

    Dataset ds;
    ds.features = Matrix(n, f);
    ds.labels.resize(n);
    ds.num_classes = static_cast<int>(k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % k;
        ds.labels[i] = static_cast<int>(label);
        double* row = ds.features.data.data() + i * f;
        const auto& mu = means[label];
        for (std::size_t j = 0; j < f; ++j) row[j] = mu[j] + rng.normal();
    }
    return ds;
}

std::vector<ClientShard> dirichlet_partition(const Dataset& dataset, std::size_t m,
                                             double alpha, std::uint64_t seed) {
    if (m == 0) throw ConfigError("dirichlet_partition: need at least one client");
    if (!(alpha > 0.0)) throw ConfigError("dirichlet_partition: alpha must be positive");
    const std::size_t n = dataset.size();
    const std::size_t k = static_cast<std::size_t>(dataset.num_classes);
    if (n < m) {
        throw ConfigError("dirichlet_partition: " + std::to_string(n) + " samples cannot cover " +
                          std::to_string(m) + " non-empty shards");
    }

    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = dataset.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw InputError("dirichlet_partition: label " + std::to_string(y) +
                             " out of range [0, " + std::to_string(k) + ")");
        }
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }

    Rng rng(derive_seed(seed, Stream::partition));
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<ClientShard> shards(m);
        for (std::size_t c = 0; c < m; ++c) shards[c].client_id = static_cast<int>(c);

        for (std::size_t cls = 0; cls < k; ++cls) {
            std::vector<std::size_t> idx = by_class[cls];
            for (std::size_t i = idx.size(); i > 1; --i) {
                std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
            }
            std::vector<double> props = rng.dirichlet_symmetric(alpha, m);

            const std::size_t nk = idx.size();
            std::vector<std::size_t> counts(m);
            std::vector<std::pair<double, std::size_t>> remainders(m);
            std::size_t assigned = 0;
            for (std::size_t c = 0; c < m; ++c) {
                const double exact = props[c] * static_cast<double>(nk);
                counts[c] = static_cast<std::size_t>(std::floor(exact));
                assigned += counts[c];
                remainders[c] = {exact - std::floor(exact), c};
            }
            // Largest remainder first; equal remainders go to the lower id.
            std::sort(remainders.begin(), remainders.end(),
                      [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });
            for (std::size_t r = 0; assigned < nk; ++r, ++assigned) {
                counts[remainders[r % m].second] += 1;
            }

            std::size_t cursor = 0;
            for (std::size_t c = 0; c < m; ++c) {
                auto& dst = shards[c].sample_indices;
                dst.insert(dst.end(), idx.begin() + cursor, idx.begin() + cursor + counts[c]);
                cursor += counts[c];
            }
        }

        const bool all_nonempty = std::all_of(
            shards.begin(), shards.end(),
            [](const ClientShard& s) { return !s.sample_indices.empty(); });
        if (all_nonempty) return shards;
    }
    throw GenerationError("dirichlet_partition: could not produce non-empty shards for m=" +
                          std::to_string(m) + " alpha=" + std::to_string(alpha) +
                          " after 100 attempts");
}

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("dataset file is empty: " + path);

    std::size_t f = 0;
    {
        std::stringstream header(line);
        std::string field;
        bool first = true;
        while (std::getline(header, field, ',')) {
            if (first) {
                if (field != "label") {
                    throw InputError("dataset header must start with 'label', got '" + field + "'");
                }
                first = false;
            } else {
                ++f;
            }
        }
        if (f == 0) throw InputError("dataset header declares no feature columns");
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        if (!std::getline(row, field, ',')) {
            throw InputError("dataset line " + std::to_string(line_no) + ": missing label");
        }
        int y = 0;
        try {
            y = std::stoi(field);
        } catch (const std::exception&) {
            throw InputError("dataset line " + std::to_string(line_no) + ": bad label '" + field + "'");
        }
        if (y < 0) throw InputError("dataset line " + std::to_string(line_no) + ": negative label");
        labels.push_back(y);
        max_label = std::max(max_label, y);
        std::size_t count = 0;
        while (std::getline(row, field, ',')) {
            try {
                values.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw InputError("dataset line " + std::to_string(line_no) + ": bad float '" + field + "'");
            }
            ++count;
        }
        if (count != f) {
            throw InputError("dataset line " + std::to_string(line_no) + ": expected " +
                             std::to_string(f) + " features, got " + std::to_string(count));
        }
    }
    if (labels.empty()) throw InputError("dataset file has no data rows: " + path);

    Dataset ds;
    ds.features = Matrix(labels.size(), f);
    ds.features.data = std::move(values);
    ds.labels = std::move(labels);
    ds.num_classes = max_label + 1;
    return ds;
}

DataSplit split_train_eval(std::size_t n, double eval_fraction, std::uint64_t seed) {
    if (eval_fraction < 0.0 || eval_fraction >= 1.0) {
        throw ConfigError("eval_fraction must be in [0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, Stream::eval_split));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    const std::size_t n_eval = static_cast<std::size_t>(
        std::floor(eval_fraction * static_cast<double>(n)));
    DataSplit split;
    split.train_indices.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_eval));
    split.eval_indices.assign(order.end() - static_cast<std::ptrdiff_t>(n_eval), order.end());
    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.eval_indices.begin(), split.eval_indices.end());
    return split;
}

Matrix gather_rows(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Matrix out(indices.size(), dataset.feature_dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t src = indices[r];
        if (src >= dataset.size()) throw InternalError("gather_rows: index out of range");
        std::copy_n(dataset.features.data.data() + src * dataset.feature_dim(),
                    dataset.feature_dim(), out.data.data() + r * dataset.feature_dim());
    }
    return out;
}

std::vector<int> gather_labels(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    std::vector<int> out(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= dataset.size()) throw InternalError("gather_labels: index out of range");
        out[r] = dataset.labels[indices[r]];
    }
    return out;
}

}  // namespace fedluar
