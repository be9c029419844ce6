#pragma once

#include <cstdint>
#include <set>

#include "fedluar/data.hpp"
#include "fedluar/nn.hpp"

namespace fedluar {

enum class RuleKind { sgd_momentum, sgd_momentum_proximal };

struct LocalUpdateRule {
    RuleKind kind = RuleKind::sgd_momentum;
    double learning_rate = 0.01;
    double momentum = 0.0;
    double proximal_mu = 0.0;  // used by the proximal kind only

    void validate() const;
};

struct LocalUpdate {
    int client_id = 0;
    LayerKeyedVector update;  // restricted to layers outside the recycling set
    int steps_taken = 0;
};

// Runs tau local mini-batch steps from global_params and returns the full
// displacement x_tau - x_0 over every layer. Momentum starts at zero each
// call; no state survives between rounds. Batches are drawn with replacement
// from the shard, except that a batch_size >= shard size takes the whole
// shard in index order without consuming randomness.
LayerKeyedVector local_update_full(const Model& model, const LayerKeyedVector& global_params,
                                   const Dataset& dataset, const ClientShard& shard,
                                   const LocalUpdateRule& rule, int tau,
                                   std::size_t batch_size, std::uint64_t seed);

// As above, then projects the displacement onto layers outside `recycled`.
// The trajectory itself never depends on the recycling set; only the
// transmitted update is filtered.
LocalUpdate local_train(const Model& model, const LayerKeyedVector& global_params,
                        const Dataset& dataset, const ClientShard& shard,
                        const LocalUpdateRule& rule, int tau, std::size_t batch_size,
                        const std::set<int>& recycled, std::uint64_t seed);

// Mean loss and top-1 accuracy over the first min(batch_limit, N) samples in
// index order; batch_limit = 0 means the whole dataset.
EvalMetrics local_loss_eval(const Model& model, const LayerKeyedVector& params,
                            const Dataset& dataset, std::size_t batch_limit);

// Drops the layers named in `recycled` from v, keeping the rest.
LayerKeyedVector project_out_layers(const LayerKeyedVector& v, const std::set<int>& recycled);

}  // namespace fedluar
