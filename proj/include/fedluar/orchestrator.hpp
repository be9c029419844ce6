#pragma once

#include <functional>

#include "fedluar/accounting.hpp"
#include "fedluar/data.hpp"
#include "fedluar/luar.hpp"

namespace fedluar {

struct ExperimentResult {
    std::vector<RoundRecord> records;
    LayerKeyedVector final_params;
    EvalMetrics final_metrics;
    CommLedger ledger;
    double total_wall_ms = 0.0;
};

// Step schedule: the base rate is multiplied by 0.1 once for every fraction
// f with t >= floor(f * total_rounds).
double decayed_learning_rate(double base, const std::vector<double>& decay_round_fracs, int t,
                             int total_rounds);

// Round loop: sample active clients, broadcast (params, recycling set), run
// local training, compose the global update (recycling or dropping), apply
// it, refresh scores, and draw the next recycling set. Clients within a
// round may fan out to threads; aggregation order is fixed by client id, so
// the trajectory is a pure function of (config, master_seed).
class Simulation {
public:
    explicit Simulation(const ExperimentConfig& config);

    // Called after every round with the emitted record, the applied global
    // update, and the recycler state (staleness reflects the just-composed
    // round; current_set already holds the next round's selection).
    using RoundObserver = std::function<void(const RoundRecord&, const LayerKeyedVector&,
                                             const RecyclerState&)>;
    void set_round_observer(RoundObserver observer) { observer_ = std::move(observer); }

    ExperimentResult run();

    const ExperimentConfig& config() const { return config_; }
    const Model& model() const { return model_; }
    const Dataset& train_data() const { return train_ds_; }
    const std::vector<ClientShard>& shards() const { return shards_; }
    const LayerKeyedVector& params() const { return params_; }
    const RecyclerState& recycler() const { return state_; }

private:
    RoundRecord run_round(int t);
    std::vector<int> sample_active_clients(int t) const;
    LocalUpdateRule round_rule(int t) const;
    std::set<int> next_recycle_set(const LayerKeyedVector& applied, int t) const;
    EvalMetrics evaluate_current() const;

    ExperimentConfig config_;
    Model model_;
    Dataset train_ds_;
    std::vector<ClientShard> shards_;
    Matrix eval_inputs_;
    std::vector<int> eval_labels_;
    LayerKeyedVector params_;
    RecyclerState state_;
    CommLedger ledger_;
    EvalMetrics last_eval_;
    RoundObserver observer_;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace fedluar
