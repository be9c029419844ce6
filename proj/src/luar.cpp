#include "fedluar/luar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedluar/errors.hpp"
#include "fedluar/rng.hpp"

namespace fedluar {

RecyclerState RecyclerState::create(std::size_t num_layers, int delta) {
    if (delta < 0 || static_cast<std::size_t>(delta) > num_layers) {
        throw ConfigError("delta must be in [0, " + std::to_string(num_layers) + "], got " +
                          std::to_string(delta));
    }
    RecyclerState state;
    state.scores.assign(num_layers, 0.0);
    state.staleness.assign(num_layers, 0);
    state.delta = delta;
    return state;
}

std::vector<double> compute_scores(const LayerKeyedVector& applied_update,
                                   const LayerKeyedVector& global_params, double eps) {
    if (!same_structure(applied_update, global_params)) {
        throw InternalError("compute_scores: update and params structure mismatch");
    }
    std::vector<double> s;
    s.reserve(applied_update.size());
    auto iu = applied_update.begin();
    auto ip = global_params.begin();
    for (; iu != applied_update.end(); ++iu, ++ip) {
        const double num = std::sqrt(l2_norm_sq(iu->second));
        const double den = std::max(std::sqrt(l2_norm_sq(ip->second)), eps);
        s.push_back(num / den);
    }
    return s;
}

std::vector<double> selection_probabilities(const std::vector<double>& s, double eps) {
    if (s.empty()) throw InternalError("selection_probabilities: empty score vector");
    std::vector<double> inv(s.size());
    double total = 0.0;
    for (std::size_t l = 0; l < s.size(); ++l) {
        if (s[l] < 0.0 || !std::isfinite(s[l])) {
            throw InternalError("selection_probabilities: score " + std::to_string(l) +
                                " is negative or non-finite");
        }
        inv[l] = 1.0 / std::max(s[l], eps);
        total += inv[l];
    }
    for (double& v : inv) v /= total;
    return inv;
}

namespace {

// One pass of sequential weighted sampling without replacement. Each draw
// scans cumulative remaining weight against u * (remaining total), then
// removes the chosen index. Zero total weight degenerates to a uniform draw
// over the remaining indices.
std::set<int> weighted_sample_without_replacement(const std::vector<double>& w, int delta,
                                                  Rng& rng) {
    const std::size_t n = w.size();
    std::vector<char> taken(n, 0);
    std::set<int> result;
    for (int draw = 0; draw < delta; ++draw) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) total += w[i];
        }
        std::size_t chosen = n;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                cum += w[i];
                if (u < cum) {
                    chosen = i;
                    break;
                }
                chosen = i;  // rounding can leave u >= final cum; keep last
            }
        } else {
            std::size_t remaining = n - static_cast<std::size_t>(draw);
            std::size_t target = rng.uniform_index(remaining);
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                if (target == 0) {
                    chosen = i;
                    break;
                }
                --target;
            }
        }
        taken[chosen] = 1;
        result.insert(static_cast<int>(chosen));
    }
    return result;
}

}  // namespace

std::set<int> sample_recycle_set(const std::vector<double>& p, int delta,
                                 SelectionScheme scheme, std::uint64_t seed) {
    const std::size_t n = p.size();
    if (n == 0) throw InternalError("sample_recycle_set: empty weight vector");
    if (delta < 0 || static_cast<std::size_t>(delta) > n) {
        throw ConfigError("delta " + std::to_string(delta) + " out of range for " +
                          std::to_string(n) + " layers");
    }
    if (scheme == SelectionScheme::none || delta == 0) return {};

    std::set<int> all;
    if (static_cast<std::size_t>(delta) == n) {
        for (std::size_t i = 0; i < n; ++i) all.insert(static_cast<int>(i));
        return all;
    }

    switch (scheme) {
        case SelectionScheme::top_input_side: {
            std::set<int> r;
            for (int i = 0; i < delta; ++i) r.insert(i);
            return r;
        }
        case SelectionScheme::bottom_output_side: {
            std::set<int> r;
            for (std::size_t i = n - static_cast<std::size_t>(delta); i < n; ++i) {
                r.insert(static_cast<int>(i));
            }
            return r;
        }
        case SelectionScheme::deterministic_luar: {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&p](std::size_t a, std::size_t b) {
                if (p[a] != p[b]) return p[a] > p[b];
                return a < b;
            });
            std::set<int> r;
            for (int i = 0; i < delta; ++i) r.insert(static_cast<int>(order[i]));
            return r;
        }
        case SelectionScheme::uniform_random: {
            Rng rng(seed);
            std::vector<double> equal(n, 1.0 / static_cast<double>(n));
            return weighted_sample_without_replacement(equal, delta, rng);
        }
        case SelectionScheme::luar:
        case SelectionScheme::gradient_norm: {
            Rng rng(seed);
            return weighted_sample_without_replacement(p, delta, rng);
        }
        case SelectionScheme::none:
            return {};
    }
    throw InternalError("sample_recycle_set: unhandled scheme");
}

namespace {

ComposedUpdate compose_impl(const std::vector<LocalUpdate>& client_updates,
                            RecyclerState& state, AggregationMode mode) {
    if (client_updates.empty()) {
        throw ProtocolError("compose: no client updates for this round");
    }
    if (!state.current_set.empty() && !state.has_applied) {
        throw InternalError("compose: recycling set non-empty before any applied update");
    }

    // Universe of layer ids: the full set from a previous composition, or the
    // union of client layers on the very first round (R_0 is empty then).
    std::set<int> universe;
    if (state.has_applied) {
        for (const auto& [id, buf] : state.last_applied) universe.insert(id);
    } else {
        for (const auto& [id, buf] : client_updates.front().update) universe.insert(id);
    }

    std::set<int> expected_fresh;
    for (int id : universe) {
        if (state.current_set.count(id) == 0) expected_fresh.insert(id);
    }
    for (const auto& cu : client_updates) {
        std::set<int> got;
        for (const auto& [id, buf] : cu.update) got.insert(id);
        if (got != expected_fresh) {
            throw ProtocolError("client " + std::to_string(cu.client_id) +
                                " update covers the wrong layer set for this round");
        }
    }

    std::vector<std::size_t> order(client_updates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&client_updates](std::size_t a, std::size_t b) {
        return client_updates[a].client_id < client_updates[b].client_id;
    });

    ComposedUpdate out;
    out.noise_layers = state.current_set;

    // Fresh mean, accumulated in ascending client_id order.
    LayerKeyedVector mean;
    for (const auto& [id, buf] : client_updates[order[0]].update) {
        mean[id] = std::vector<double>(buf.size(), 0.0);
    }
    for (std::size_t oi : order) add_scaled(mean, client_updates[oi].update, 1.0);
    const double inv_a = 1.0 / static_cast<double>(client_updates.size());
    for (auto& [id, buf] : mean) {
        for (double& v : buf) v *= inv_a;
    }

    out.applied = std::move(mean);
    for (int id : state.current_set) {
        const auto& prev = state.last_applied.at(id);
        if (mode == AggregationMode::recycle) {
            out.applied[id] = prev;
        } else {
            out.applied[id] = std::vector<double>(prev.size(), 0.0);
        }
    }

    for (int id : universe) {
        auto& k = state.staleness[static_cast<std::size_t>(id)];
        k = state.current_set.count(id) ? k + 1 : 0;
    }
    state.last_applied = out.applied;
    state.has_applied = true;
    return out;
}

}  // namespace

ComposedUpdate compose_global_update(const std::vector<LocalUpdate>& client_updates,
                                     RecyclerState& state) {
    return compose_impl(client_updates, state, AggregationMode::recycle);
}

ComposedUpdate compose_dropping_update(const std::vector<LocalUpdate>& client_updates,
                                       RecyclerState& state) {
    return compose_impl(client_updates, state, AggregationMode::drop);
}

NoiseStats measure_noise(const LayerKeyedVector& applied,
                         const LayerKeyedVector& fresh_full_update,
                         const std::set<int>& noise_layers) {
    if (!same_structure(applied, fresh_full_update)) {
        throw InternalError("measure_noise: structure mismatch");
    }
    NoiseStats stats;
    stats.n_norm_sq = l2_norm_sq(difference(applied, fresh_full_update));
    const double total = l2_norm_sq(fresh_full_update);
    if (total > 0.0) {
        double recycled_energy = 0.0;
        for (int id : noise_layers) recycled_energy += l2_norm_sq(fresh_full_update.at(id));
        stats.kappa_hat = recycled_energy / total;
    }
    return stats;
}

void refresh_scores(RecyclerState& state, const LayerKeyedVector& applied,
                    const LayerKeyedVector& global_params, ScoreRefresh mode) {
    std::vector<double> fresh = compute_scores(applied, global_params);
    if (fresh.size() != state.scores.size()) {
        throw InternalError("refresh_scores: layer count mismatch");
    }
    for (std::size_t l = 0; l < fresh.size(); ++l) {
        if (mode == ScoreRefresh::frozen && state.current_set.count(static_cast<int>(l))) {
            continue;
        }
        state.scores[l] = fresh[l];
    }
}

}  // namespace fedluar
