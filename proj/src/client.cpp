#include "fedluar/client.hpp"

#include <algorithm>
#include <string>

#include "fedluar/errors.hpp"
#include "fedluar/rng.hpp"

namespace fedluar {

void LocalUpdateRule::validate() const {
    // learning_rate == 0 is legal and yields the zero update.
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (proximal_mu < 0.0) throw ConfigError("proximal_mu must be non-negative");
}

LayerKeyedVector local_update_full(const Model& model, const LayerKeyedVector& global_params,
                                   const Dataset& dataset, const ClientShard& shard,
                                   const LocalUpdateRule& rule, int tau,
                                   std::size_t batch_size, std::uint64_t seed) {
    rule.validate();
    if (tau < 1) throw ConfigError("local_steps must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (shard.sample_indices.empty()) {
        throw InternalError("local_update_full: empty shard for client " +
                            std::to_string(shard.client_id));
    }

    const std::size_t shard_size = shard.sample_indices.size();
    const std::size_t effective_bs = std::min(batch_size, shard_size);
    const bool full_batch = effective_bs == shard_size;

    LayerKeyedVector x = global_params;
    LayerKeyedVector velocity;
    for (const auto& [id, buf] : x) velocity[id] = std::vector<double>(buf.size(), 0.0);

    Rng rng(seed);
    std::vector<std::size_t> batch_idx(effective_bs);
    const bool proximal =
        rule.kind == RuleKind::sgd_momentum_proximal && rule.proximal_mu != 0.0;

    for (int step = 0; step < tau; ++step) {
        if (full_batch) {
            batch_idx = shard.sample_indices;
        } else {
            for (std::size_t i = 0; i < effective_bs; ++i) {
                batch_idx[i] = shard.sample_indices[rng.uniform_index(shard_size)];
            }
        }
        Matrix inputs = gather_rows(dataset, batch_idx);
        std::vector<int> labels = gather_labels(dataset, batch_idx);

        ForwardCache cache = model.forward(x, inputs);
        BackwardResult back = model.backward(cache, labels);

        for (auto& [id, vbuf] : velocity) {
            const auto& gbuf = back.grad.at(id);
            auto& xbuf = x.at(id);
            const auto& x0buf = global_params.at(id);
            for (std::size_t i = 0; i < vbuf.size(); ++i) {
                double g = gbuf[i];
                if (proximal) g += rule.proximal_mu * (xbuf[i] - x0buf[i]);
                vbuf[i] = rule.momentum * vbuf[i] + g;
                xbuf[i] -= rule.learning_rate * vbuf[i];
            }
        }
    }
    return difference(x, global_params);
}

LayerKeyedVector project_out_layers(const LayerKeyedVector& v, const std::set<int>& recycled) {
    LayerKeyedVector out;
    for (const auto& [id, buf] : v) {
        if (recycled.count(id) == 0) out[id] = buf;
    }
    return out;
}

LocalUpdate local_train(const Model& model, const LayerKeyedVector& global_params,
                        const Dataset& dataset, const ClientShard& shard,
                        const LocalUpdateRule& rule, int tau, std::size_t batch_size,
                        const std::set<int>& recycled, std::uint64_t seed) {
    for (int id : recycled) {
        if (id < 0 || static_cast<std::size_t>(id) >= model.num_layers()) {
            throw ConfigError("recycled layer id " + std::to_string(id) + " out of range");
        }
    }
    LayerKeyedVector full =
        local_update_full(model, global_params, dataset, shard, rule, tau, batch_size, seed);
    LocalUpdate result;
    result.client_id = shard.client_id;
    result.update = project_out_layers(full, recycled);
    result.steps_taken = tau;
    return result;
}

EvalMetrics local_loss_eval(const Model& model, const LayerKeyedVector& params,
                            const Dataset& dataset, std::size_t batch_limit) {
    const std::size_t n =
        batch_limit == 0 ? dataset.size() : std::min(batch_limit, dataset.size());
    if (n == 0) throw ConfigError("local_loss_eval: empty dataset");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Matrix inputs = gather_rows(dataset, idx);
    std::vector<int> labels = gather_labels(dataset, idx);
    return model.evaluate(params, inputs, labels);
}

}  // namespace fedluar
