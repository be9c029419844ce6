#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedluar/client.hpp"
#include "fedluar/luar.hpp"
#include "fedluar/nn.hpp"

namespace fedluar {

enum class DatasetKind { synthetic, csv };
enum class ModelKind { mlp, cnn };

struct ExperimentConfig {
    std::uint64_t master_seed = 1;

    DatasetKind dataset = DatasetKind::synthetic;
    std::string csv_path;
    std::size_t n_samples = 4096;
    std::size_t n_features = 32;
    std::size_t n_classes = 4;
    double class_separation = 2.5;
    double alpha = 0.1;
    double eval_fraction = 0.2;

    ModelKind model = ModelKind::mlp;
    std::vector<std::size_t> hidden = {32, 32};  // mlp hidden widths
    std::size_t image_h = 0, image_w = 0, image_c = 0;
    std::size_t kernel = 3;
    std::vector<std::size_t> conv_channels;  // cnn conv stack, then a dense head

    std::size_t clients = 32;
    std::size_t active_clients = 8;
    int rounds = 100;
    int local_steps = 20;
    std::size_t batch_size = 32;

    LocalUpdateRule rule{RuleKind::sgd_momentum, 0.05, 0.9, 0.0};
    std::vector<double> decay_round_fracs;  // x0.1 at floor(frac * rounds)

    int delta = 0;
    SelectionScheme scheme = SelectionScheme::luar;
    AggregationMode aggregation = AggregationMode::recycle;
    ScoreRefresh score_refresh = ScoreRefresh::applied;

    int eval_every = 5;
    std::size_t eval_batch_limit = 0;  // 0 = whole eval split
    bool diagnostic = false;
    bool timing = false;  // off keeps the wall_ms column at 0 for reproducible files
    int threads = 1;
};

// Flat `key = value` file, one pair per line, # or ; comments. Unknown keys
// are an error naming the key; repeated keys take the last value.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Range checks plus one normalization: scheme none forces delta to 0.
// Throws ConfigError with the offending field named.
void validate_config(ExperimentConfig& config);

std::size_t model_layer_count(const ExperimentConfig& config);
Model build_model(const ExperimentConfig& config);

// Canonical string forms, stable across platforms; doubles use shortest
// round-trip formatting. Basis for the manifest and the run hash.
std::map<std::string, std::string> config_key_values(const ExperimentConfig& config);
std::string canonical_config_text(const ExperimentConfig& config);
std::uint64_t run_hash(const ExperimentConfig& config);

std::string scheme_name(SelectionScheme scheme);
SelectionScheme scheme_from_name(const std::string& name);

}  // namespace fedluar
