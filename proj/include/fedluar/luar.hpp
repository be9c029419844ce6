#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "fedluar/client.hpp"
#include "fedluar/matrix.hpp"

namespace fedluar {

enum class SelectionScheme {
    luar,               // weighted by inverse score, sampled without replacement
    uniform_random,     // equal weights
    top_input_side,     // first delta layer ids
    bottom_output_side, // last delta layer ids
    gradient_norm,      // weighted by inverse applied-update norm
    deterministic_luar, // the delta lowest-score layers, no randomness
    none,               // never recycles (plain FedAvg)
};

enum class AggregationMode { recycle, drop };
enum class ScoreRefresh { applied, frozen };

// Server-side recycling state. scores and staleness are indexed by layer_id
// (ids are contiguous). last_applied is empty until the first composition.
struct RecyclerState {
    LayerKeyedVector last_applied;
    std::vector<double> scores;
    std::vector<int> staleness;
    std::set<int> current_set;
    int delta = 0;
    bool has_applied = false;

    static RecyclerState create(std::size_t num_layers, int delta);
};

inline constexpr double kScoreEps = 1e-12;

// s[l] = ||update[l]|| / max(||params[l]||, eps). Low score means the layer
// moved little relative to its magnitude.
std::vector<double> compute_scores(const LayerKeyedVector& applied_update,
                                   const LayerKeyedVector& global_params,
                                   double eps = kScoreEps);

// p[l] = (1/max(s[l],eps)) / sum_j (1/max(s[j],eps)). Sums to 1 within
// 1e-12, strictly positive, strictly decreasing in s above eps.
std::vector<double> selection_probabilities(const std::vector<double>& s,
                                            double eps = kScoreEps);

// Picks exactly delta distinct layer ids. Stochastic schemes (luar,
// uniform_random, gradient_norm) draw sequentially without replacement,
// renormalizing the remaining weights after each draw; the caller supplies
// the scheme's weight vector in p. top/bottom take the first/last delta ids.
// deterministic_luar takes the delta largest-p ids (equivalently smallest
// score, since p inverts s monotonically), ties broken by lower id. none
// always returns the empty set.
std::set<int> sample_recycle_set(const std::vector<double>& p, int delta,
                                 SelectionScheme scheme, std::uint64_t seed);

struct ComposedUpdate {
    LayerKeyedVector applied;
    std::set<int> noise_layers;  // the recycling set the composition used
};

// Fresh client mean on layers outside state.current_set, the previous
// applied update on layers inside it. Mutates staleness and last_applied.
// Client updates are folded in ascending client_id order no matter how the
// list is ordered.
ComposedUpdate compose_global_update(const std::vector<LocalUpdate>& client_updates,
                                     RecyclerState& state);

// Ablation variant: recycled layers get zeros instead of the previous
// update. Same state bookkeeping.
ComposedUpdate compose_dropping_update(const std::vector<LocalUpdate>& client_updates,
                                       RecyclerState& state);

struct NoiseStats {
    double n_norm_sq = 0.0;
    double kappa_hat = 0.0;
};

// n_norm_sq = ||applied - fresh||^2; kappa_hat = energy fraction of the
// fresh update that lives on the recycled layers, 0 when the fresh update
// vanishes entirely.
NoiseStats measure_noise(const LayerKeyedVector& applied,
                         const LayerKeyedVector& fresh_full_update,
                         const std::set<int>& noise_layers);

// Recomputes scores from the applied update and current (pre-apply) global
// params. In frozen mode, layers inside state.current_set keep their old
// scores until they next aggregate fresh updates.
void refresh_scores(RecyclerState& state, const LayerKeyedVector& applied,
                    const LayerKeyedVector& global_params, ScoreRefresh mode);

}  // namespace fedluar
