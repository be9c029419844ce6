#pragma once

#include <set>
#include <string>
#include <vector>

#include "fedluar/config.hpp"
#include "fedluar/nn.hpp"

namespace fedluar {

// One observation per round. uploaded_params and the per-layer counters are
// exact integers; normalized_cost_cum is their ratio to the FedAvg total so
// far. wall_ms stays 0 unless timing is enabled, keeping emitted files
// reproducible.
struct RoundRecord {
    int round = 0;
    std::vector<int> active_client_ids;
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
    long long uploaded_params = 0;  // a * sum of param_count over fresh layers
    std::vector<long long> per_layer_upload_count;  // cumulative through this round
    std::set<int> recycled_set;
    double normalized_cost_cum = 1.0;
    double n_norm_sq = 0.0;  // diagnostic mode only
    double kappa_hat = 0.0;  // diagnostic mode only
    double wall_ms = 0.0;
};

// Integer communication bookkeeping. Unit quantities exclude the active
// client factor a, which cancels in the normalized cost; per-round vectors
// carry the full a-scaled scalar counts.
struct CommLedger {
    long long model_dim = 0;  // d
    long long active_per_round = 0;  // a
    std::vector<long long> round_upload_scalars;    // a * sum_{l not in R_t} pc(l)
    std::vector<long long> round_download_scalars;  // a * (d + |R_t| control integers)
    std::vector<long long> per_layer_aggregations;  // rounds in which layer l aggregated
    long long unit_uploads = 0;   // sum_t sum_{l not in R_t} pc(l)
    long long unit_recycled = 0;  // sum_t sum_{l in R_t} pc(l)

    static CommLedger create(const std::vector<LayerSpec>& specs, std::size_t active_clients);
    void record_round(const std::vector<LayerSpec>& specs, const std::set<int>& recycled);
    int rounds() const { return static_cast<int>(round_upload_scalars.size()); }
};

// Upload scalars relative to the FedAvg total: sum_t sum_{l not in R_t}
// pc(l) / (T * d). The a factor cancels.
double comm_normalized_cost(const CommLedger& ledger);

struct MemoryFootprint {
    long long fedavg = 0;  // a * d
    long long luar = 0;    // a * (d - k) + k
};

MemoryFootprint memory_footprint_model(long long a, const std::vector<long long>& layer_sizes,
                                       const std::set<int>& recycled_set);

// Writes records_<hash8>.csv and manifest_<hash8>.json under out_dir, where
// hash8 is the leading 8 hex digits of the run hash. Column order is fixed;
// floats carry 9 significant digits; any non-finite value aborts the write.
struct RunOutputs {
    std::string csv_path;
    std::string manifest_path;
};

struct RunSummary {
    double final_loss = 0.0;
    double final_accuracy = 0.0;
    double normalized_cost = 1.0;
    double total_wall_ms = 0.0;
};

RunOutputs serialize_records(const std::vector<RoundRecord>& records, const std::string& out_dir,
                             const ExperimentConfig& config, const RunSummary& summary);

// The CSV body (header + rows) as a string; serialize_records writes exactly
// this. Exposed so determinism checks can compare bytes without touching the
// filesystem.
std::string records_to_csv(const std::vector<RoundRecord>& records);

// 9-significant-digit decimal form used for every float in the CSV.
std::string format_metric(double v);

}  // namespace fedluar
