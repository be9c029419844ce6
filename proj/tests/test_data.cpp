#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "fedluar/data.hpp"
#include "fedluar/errors.hpp"
#include "oracle_helpers.hpp"

using namespace fedluar;

namespace {

double mean_shard_label_entropy(const Dataset& ds, const std::vector<ClientShard>& shards) {
    double total = 0.0;
    for (const auto& shard : shards) {
        std::vector<double> counts(static_cast<std::size_t>(ds.num_classes), 0.0);
        for (std::size_t i : shard.sample_indices) {
            counts[static_cast<std::size_t>(ds.labels[i])] += 1.0;
        }
        const double n = static_cast<double>(shard.sample_indices.size());
        double h = 0.0;
        for (double c : counts) {
            if (c > 0.0) h -= (c / n) * std::log(c / n);
        }
        total += h;
    }
    return total / static_cast<double>(shards.size());
}

void check_disjoint_cover(std::size_t n, const std::vector<ClientShard>& shards) {
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& s : shards) {
        CHECK_FALSE(s.sample_indices.empty());
        for (std::size_t i : s.sample_indices) {
            CHECK(i < n);
            seen.insert(i);
        }
        total += s.sample_indices.size();
    }
    CHECK(total == n);
    CHECK(seen.size() == n);
}

}  // namespace

TEST_CASE("synthetic generation is deterministic in the seed") {
    Dataset a = generate_synthetic(7, 100, 8, 4, 2.0);
    Dataset b = generate_synthetic(7, 100, 8, 4, 2.0);
    Dataset c = generate_synthetic(8, 100, 8, 4, 2.0);
    CHECK(a.features.data == b.features.data);
    CHECK(a.labels == b.labels);
    CHECK(a.features.data != c.features.data);
}

TEST_CASE("synthetic labels balance within one and hit every class") {
    Dataset ds = generate_synthetic(3, 103, 6, 4, 2.0);
    std::vector<int> counts(4, 0);
    for (int y : ds.labels) counts[static_cast<std::size_t>(y)]++;
    int lo = counts[0], hi = counts[0];
    for (int c : counts) {
        CHECK(c >= 1);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
    CHECK(ds.num_classes == 4);
    CHECK(ds.size() == 103);
    CHECK(ds.feature_dim() == 6);
}

TEST_CASE("synthetic generation rejects impossible shapes") {
    CHECK_THROWS_AS(generate_synthetic(1, 3, 8, 4, 2.0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(1, 10, 0, 4, 2.0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(1, 10, 8, 0, 2.0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(1, 10, 8, 4, -0.5), ConfigError);
}

TEST_CASE("zero separation is indistinguishable from chance for a linear probe") {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Dataset train = generate_synthetic(seed, 1000, 16, 4, 0.0);
        Dataset holdout = generate_synthetic(seed + 1000, 1000, 16, 4, 0.0);
        total += oracle::linear_probe_holdout_accuracy(train, holdout, 80, 0.5, seed);
    }
    CHECK(std::fabs(total / 5.0 - 0.25) < 0.05);
}

TEST_CASE("well-separated classes are nearly linearly separable") {
    Dataset ds = generate_synthetic(11, 1000, 16, 2, 6.0);
    CHECK(oracle::linear_probe_accuracy(ds, 80, 0.5, 11) > 0.95);
}

TEST_CASE("partitioning one client returns everything") {
    Dataset ds = generate_synthetic(5, 60, 4, 3, 2.0);
    auto shards = dirichlet_partition(ds, 1, 0.5, 9);
    REQUIRE(shards.size() == 1);
    CHECK(shards[0].client_id == 0);
    check_disjoint_cover(60, shards);
}

TEST_CASE("partitions are disjoint, covering, non-empty across concentrations") {
    Dataset ds = generate_synthetic(13, 500, 8, 5, 2.0);
    for (double alpha : {0.05, 0.5, 5.0}) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            auto shards = dirichlet_partition(ds, 8, alpha, seed);
            REQUIRE(shards.size() == 8);
            for (std::size_t c = 0; c < 8; ++c) CHECK(shards[c].client_id == static_cast<int>(c));
            check_disjoint_cover(500, shards);
        }
    }
}

TEST_CASE("huge concentration splits every class almost evenly") {
    Dataset ds = generate_synthetic(17, 2000, 8, 4, 2.0);
    const std::size_t m = 4;
    // 2000 samples, 4 classes, 4 clients: fair share is 125 per class per client
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto shards = dirichlet_partition(ds, m, 1e6, seed);
        for (const auto& shard : shards) {
            std::vector<int> counts(4, 0);
            for (std::size_t i : shard.sample_indices) {
                counts[static_cast<std::size_t>(ds.labels[i])]++;
            }
            for (int c : counts) {
                CHECK(std::fabs(static_cast<double>(c) - 125.0) <= 12.5);
            }
        }
    }
}

TEST_CASE("mean shard entropy grows with the concentration parameter") {
    Dataset ds = generate_synthetic(23, 1200, 8, 4, 2.0);
    double e_low = 0.0, e_mid = 0.0, e_high = 0.0;
    const int reps = 12;
    for (std::uint64_t seed = 0; seed < reps; ++seed) {
        e_low += mean_shard_label_entropy(ds, dirichlet_partition(ds, 6, 0.1, seed));
        e_mid += mean_shard_label_entropy(ds, dirichlet_partition(ds, 6, 1.0, seed));
        e_high += mean_shard_label_entropy(ds, dirichlet_partition(ds, 6, 1e6, seed));
    }
    CHECK(e_low < e_mid);
    CHECK(e_mid < e_high);
    // near-infinite concentration approaches the uniform label mix
    CHECK(e_high / reps > 0.99 * std::log(4.0));
}

TEST_CASE("partitioning is deterministic in the seed") {
    Dataset ds = generate_synthetic(29, 300, 8, 3, 2.0);
    auto a = dirichlet_partition(ds, 5, 0.3, 77);
    auto b = dirichlet_partition(ds, 5, 0.3, 77);
    auto c = dirichlet_partition(ds, 5, 0.3, 78);
    REQUIRE(a.size() == b.size());
    bool same = true, same_other = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].sample_indices == b[i].sample_indices;
        same_other = same_other && a[i].sample_indices == c[i].sample_indices;
    }
    CHECK(same);
    CHECK_FALSE(same_other);
}

TEST_CASE("partition argument validation") {
    Dataset ds = generate_synthetic(31, 20, 4, 2, 2.0);
    CHECK_THROWS_AS(dirichlet_partition(ds, 0, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(dirichlet_partition(ds, 4, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(dirichlet_partition(ds, 4, -1.0, 1), ConfigError);
    CHECK_THROWS_AS(dirichlet_partition(ds, 21, 0.5, 1), ConfigError);
}

TEST_CASE("csv loader round-trips a hand-written file") {
    oracle::TempDir dir("csv");
    const std::string path = dir.str() + "/tiny.csv";
    {
        std::ofstream out(path);
        out << "label,f0,f1,f2\n";
        out << "0,1.5,-2.25,0.125\n";
        out << "2,0,3.5,1e-3\n";
        out << "\n";  // blank lines are skipped
        out << "1,-1,-2,-3\n";
    }
    Dataset ds = load_csv_dataset(path);
    CHECK(ds.size() == 3);
    CHECK(ds.feature_dim() == 3);
    CHECK(ds.num_classes == 3);
    CHECK(ds.labels == std::vector<int>{0, 2, 1});
    CHECK(ds.features.at(0, 0) == 1.5);
    CHECK(ds.features.at(0, 1) == -2.25);
    CHECK(ds.features.at(1, 2) == 1e-3);
    CHECK(ds.features.at(2, 1) == -2.0);
}

TEST_CASE("csv loader rejects malformed files") {
    oracle::TempDir dir("csvbad");
    auto write = [&](const std::string& name, const std::string& body) {
        const std::string p = dir.str() + "/" + name;
        std::ofstream out(p);
        out << body;
        return p;
    };
    CHECK_THROWS_AS(load_csv_dataset(dir.str() + "/nope.csv"), IoError);
    CHECK_THROWS_AS(load_csv_dataset(write("empty.csv", "")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("hdr.csv", "id,f0\n0,1\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("nofeat.csv", "label\n0\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("norows.csv", "label,f0\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("badlabel.csv", "label,f0\nx,1\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("neg.csv", "label,f0\n-1,1\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("badfloat.csv", "label,f0\n0,abc\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("short.csv", "label,f0,f1\n0,1\n")), InputError);
    CHECK_THROWS_AS(load_csv_dataset(write("long.csv", "label,f0\n0,1,2\n")), InputError);
}

TEST_CASE("train/eval split partitions the index range deterministically") {
    DataSplit s = split_train_eval(100, 0.2, 5);
    CHECK(s.eval_indices.size() == 20);
    CHECK(s.train_indices.size() == 80);
    std::set<std::size_t> all(s.train_indices.begin(), s.train_indices.end());
    all.insert(s.eval_indices.begin(), s.eval_indices.end());
    CHECK(all.size() == 100);
    CHECK(*all.rbegin() == 99);
    CHECK(std::is_sorted(s.train_indices.begin(), s.train_indices.end()));
    CHECK(std::is_sorted(s.eval_indices.begin(), s.eval_indices.end()));

    DataSplit again = split_train_eval(100, 0.2, 5);
    CHECK(again.train_indices == s.train_indices);
    CHECK(again.eval_indices == s.eval_indices);
    DataSplit other = split_train_eval(100, 0.2, 6);
    CHECK(other.eval_indices != s.eval_indices);

    // the eval count floors: 7 * 0.1 -> 0 held out
    DataSplit tiny = split_train_eval(7, 0.1, 5);
    CHECK(tiny.eval_indices.empty());
    CHECK(tiny.train_indices.size() == 7);

    DataSplit none = split_train_eval(50, 0.0, 5);
    CHECK(none.eval_indices.empty());

    CHECK_THROWS_AS(split_train_eval(10, 1.0, 5), ConfigError);
    CHECK_THROWS_AS(split_train_eval(10, -0.1, 5), ConfigError);
}

TEST_CASE("gather helpers respect index order and bounds") {
    Dataset ds = generate_synthetic(37, 10, 3, 2, 2.0);
    Matrix rows = gather_rows(ds, {4, 1});
    CHECK(rows.rows == 2);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(rows.at(0, j) == ds.features.at(4, j));
        CHECK(rows.at(1, j) == ds.features.at(1, j));
    }
    std::vector<int> labels = gather_labels(ds, {4, 1});
    CHECK(labels[0] == ds.labels[4]);
    CHECK(labels[1] == ds.labels[1]);
    CHECK_THROWS_AS(gather_rows(ds, {10}), InternalError);
    CHECK_THROWS_AS(gather_labels(ds, {10}), InternalError);
}
