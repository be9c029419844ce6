#include "fedluar/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedluar/errors.hpp"
#include "fedluar/rng.hpp"

namespace fedluar {

namespace {

Dataset subset_dataset(const Dataset& parent, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.features = gather_rows(parent, indices);
    out.labels = gather_labels(parent, indices);
    out.num_classes = parent.num_classes;
    return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

// Normalizes and checks the config in place before the model is built.
Model validated_model(ExperimentConfig& config) {
    validate_config(config);
    return build_model(config);
}

}  // namespace

Simulation::Simulation(const ExperimentConfig& config)
    : config_(config), model_(validated_model(config_)), ledger_{} {
    Dataset full;
    if (config_.dataset == DatasetKind::synthetic) {
        full = generate_synthetic(config_.master_seed, config_.n_samples, config_.n_features,
                                  config_.n_classes, config_.class_separation);
    } else {
        full = load_csv_dataset(config_.csv_path);
        if (full.feature_dim() != model_.input_dim()) {
            throw ConfigError("dataset feature dim " + std::to_string(full.feature_dim()) +
                              " does not match model input dim " +
                              std::to_string(model_.input_dim()));
        }
        if (static_cast<std::size_t>(full.num_classes) > model_.num_classes()) {
            throw ConfigError("dataset has more classes than the model emits");
        }
    }

    DataSplit split = split_train_eval(full.size(), config_.eval_fraction, config_.master_seed);
    train_ds_ = subset_dataset(full, split.train_indices);
    // An empty eval split falls back to evaluating on the training portion.
    const std::vector<std::size_t>& eval_base =
        split.eval_indices.empty() ? split.train_indices : split.eval_indices;
    std::vector<std::size_t> eval_idx = eval_base;
    if (config_.eval_batch_limit > 0 && eval_idx.size() > config_.eval_batch_limit) {
        eval_idx.resize(config_.eval_batch_limit);
    }
    eval_inputs_ = gather_rows(full, eval_idx);
    eval_labels_ = gather_labels(full, eval_idx);

    shards_ = dirichlet_partition(train_ds_, config_.clients, config_.alpha, config_.master_seed);
    params_ = model_.init_params(config_.master_seed);
    state_ = RecyclerState::create(model_.num_layers(), config_.delta);
    ledger_ = CommLedger::create(model_.specs(), config_.active_clients);
}

std::vector<int> Simulation::sample_active_clients(int t) const {
    const std::size_t m = config_.clients;
    const std::size_t a = config_.active_clients;
    Rng rng(derive_seed(config_.master_seed, Stream::client_sample,
                        static_cast<std::uint64_t>(t)));
    std::vector<int> pool(m);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < a; ++i) {
        const std::size_t j = i + rng.uniform_index(m - i);
        std::swap(pool[i], pool[j]);
    }
    std::vector<int> active(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(a));
    std::sort(active.begin(), active.end());
    return active;
}

double decayed_learning_rate(double base, const std::vector<double>& decay_round_fracs, int t,
                             int total_rounds) {
    double rate = base;
    for (double frac : decay_round_fracs) {
        if (t >= static_cast<int>(std::floor(frac * total_rounds))) rate *= 0.1;
    }
    return rate;
}

LocalUpdateRule Simulation::round_rule(int t) const {
    LocalUpdateRule rule = config_.rule;
    rule.learning_rate =
        decayed_learning_rate(rule.learning_rate, config_.decay_round_fracs, t, config_.rounds);
    return rule;
}

std::set<int> Simulation::next_recycle_set(const LayerKeyedVector& applied, int t) const {
    if (config_.delta == 0 || config_.scheme == SelectionScheme::none) return {};
    const std::size_t layers = model_.num_layers();
    std::vector<double> weights;
    switch (config_.scheme) {
        case SelectionScheme::luar:
        case SelectionScheme::deterministic_luar:
            weights = selection_probabilities(state_.scores);
            break;
        case SelectionScheme::gradient_norm: {
            std::vector<double> norms;
            norms.reserve(layers);
            for (const auto& [id, buf] : applied) norms.push_back(std::sqrt(l2_norm_sq(buf)));
            weights = selection_probabilities(norms);
            break;
        }
        default:
            weights.assign(layers, 1.0 / static_cast<double>(layers));
            break;
    }
    return sample_recycle_set(weights, config_.delta, config_.scheme,
                              derive_seed(config_.master_seed, Stream::recycle_sample,
                                          static_cast<std::uint64_t>(t)));
}

EvalMetrics Simulation::evaluate_current() const {
    return model_.evaluate(params_, eval_inputs_, eval_labels_);
}

RoundRecord Simulation::run_round(int t) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<int> active = sample_active_clients(t);
    const LocalUpdateRule rule = round_rule(t);

    std::vector<LayerKeyedVector> fulls(active.size());
    auto train_one = [&](std::size_t i) {
        fulls[i] = local_update_full(
            model_, params_, train_ds_, shards_[static_cast<std::size_t>(active[i])], rule,
            config_.local_steps, config_.batch_size,
            derive_seed(config_.master_seed, Stream::client_batch, static_cast<std::uint64_t>(t),
                        static_cast<std::uint64_t>(active[i])));
    };
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(config_.threads), active.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < active.size(); ++i) train_one(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < active.size(); i += workers) train_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::vector<LocalUpdate> updates;
    updates.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        LocalUpdate u;
        u.client_id = active[i];
        u.update = project_out_layers(fulls[i], state_.current_set);
        u.steps_taken = config_.local_steps;
        updates.push_back(std::move(u));
    }

    // Oracle mean over all layers, for the noise diagnostic only. Consumes
    // no randomness, so enabling it cannot perturb the trajectory.
    LayerKeyedVector fresh_mean;
    if (config_.diagnostic) {
        for (const auto& [id, buf] : fulls.front()) {
            fresh_mean[id] = std::vector<double>(buf.size(), 0.0);
        }
        for (const auto& f : fulls) add_scaled(fresh_mean, f, 1.0);
        const double inv_a = 1.0 / static_cast<double>(fulls.size());
        for (auto& [id, buf] : fresh_mean) {
            for (double& v : buf) v *= inv_a;
        }
    }

    ComposedUpdate composed = config_.aggregation == AggregationMode::recycle
                                  ? compose_global_update(updates, state_)
                                  : compose_dropping_update(updates, state_);

    NoiseStats noise;
    if (config_.diagnostic) {
        noise = measure_noise(composed.applied, fresh_mean, composed.noise_layers);
    }

    // Scores use the pre-apply parameters: the update was computed against
    // them, and the next selection happens before clients see the new model.
    refresh_scores(state_, composed.applied, params_, config_.score_refresh);
    add_scaled(params_, composed.applied, 1.0);
    state_.current_set = next_recycle_set(composed.applied, t);

    ledger_.record_round(model_.specs(), composed.noise_layers);

    if (t % config_.eval_every == 0 || t == config_.rounds - 1) {
        last_eval_ = evaluate_current();
    }

    RoundRecord rec;
    rec.round = t;
    rec.active_client_ids = active;
    rec.eval_loss = last_eval_.loss;
    rec.eval_accuracy = last_eval_.accuracy;
    rec.uploaded_params = ledger_.round_upload_scalars.back();
    rec.per_layer_upload_count = ledger_.per_layer_aggregations;
    rec.recycled_set = composed.noise_layers;
    rec.normalized_cost_cum = comm_normalized_cost(ledger_);
    rec.n_norm_sq = noise.n_norm_sq;
    rec.kappa_hat = noise.kappa_hat;
    rec.wall_ms = config_.timing ? elapsed_ms(start) : 0.0;

    if (observer_) observer_(rec, composed.applied, state_);
    return rec;
}

ExperimentResult Simulation::run() {
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.records.reserve(static_cast<std::size_t>(config_.rounds));
    for (int t = 0; t < config_.rounds; ++t) {
        result.records.push_back(run_round(t));
    }
    result.final_params = params_;
    result.final_metrics = config_.rounds > 0 ? last_eval_ : evaluate_current();
    result.ledger = ledger_;
    result.total_wall_ms = elapsed_ms(start);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    Simulation sim(config);
    return sim.run();
}

}  // namespace fedluar
