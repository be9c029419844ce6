#include "fedluar/accounting.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fedluar/errors.hpp"

namespace fedluar {

CommLedger CommLedger::create(const std::vector<LayerSpec>& specs, std::size_t active_clients) {
    if (active_clients == 0) throw ConfigError("ledger needs active_clients >= 1");
    CommLedger ledger;
    for (const auto& s : specs) ledger.model_dim += static_cast<long long>(s.param_count);
    ledger.active_per_round = static_cast<long long>(active_clients);
    ledger.per_layer_aggregations.assign(specs.size(), 0);
    return ledger;
}

void CommLedger::record_round(const std::vector<LayerSpec>& specs, const std::set<int>& recycled) {
    long long fresh = 0, stale = 0;
    for (const auto& s : specs) {
        if (recycled.count(s.layer_id)) {
            stale += static_cast<long long>(s.param_count);
        } else {
            fresh += static_cast<long long>(s.param_count);
            per_layer_aggregations[static_cast<std::size_t>(s.layer_id)] += 1;
        }
    }
    unit_uploads += fresh;
    unit_recycled += stale;
    round_upload_scalars.push_back(active_per_round * fresh);
    round_download_scalars.push_back(
        active_per_round * (model_dim + static_cast<long long>(recycled.size())));
}

double comm_normalized_cost(const CommLedger& ledger) {
    if (ledger.rounds() == 0) throw InternalError("comm_normalized_cost: no rounds recorded");
    return static_cast<double>(ledger.unit_uploads) /
           (static_cast<double>(ledger.rounds()) * static_cast<double>(ledger.model_dim));
}

MemoryFootprint memory_footprint_model(long long a, const std::vector<long long>& layer_sizes,
                                       const std::set<int>& recycled_set) {
    if (a < 1) throw ConfigError("memory model needs a >= 1");
    long long d = 0;
    for (long long s : layer_sizes) {
        if (s <= 0) throw ConfigError("layer sizes must be positive");
        d += s;
    }
    long long k = 0;
    for (int id : recycled_set) {
        if (id < 0 || static_cast<std::size_t>(id) >= layer_sizes.size()) {
            throw ConfigError("recycled layer id out of range in memory model");
        }
        k += layer_sizes[static_cast<std::size_t>(id)];
    }
    MemoryFootprint fp;
    fp.fedavg = a * d;
    fp.luar = a * (d - k) + k;
    return fp;
}

std::string format_metric(double v) {
    if (!std::isfinite(v)) {
        throw InternalError("refusing to serialize non-finite value");
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

template <typename T>
std::string join_ids(const T& ids) {
    std::string out;
    bool first = true;
    for (int id : ids) {
        if (!first) out += ';';
        out += std::to_string(id);
        first = false;
    }
    return out;
}

}  // namespace

std::string records_to_csv(const std::vector<RoundRecord>& records) {
    std::string out =
        "round,active_clients,loss,acc,uploaded_params,normalized_cost_cum,"
        "recycled_layers,n_norm_sq,kappa_hat,wall_ms\n";
    for (const auto& r : records) {
        out += std::to_string(r.round);
        out += ',';
        out += join_ids(r.active_client_ids);
        out += ',';
        out += format_metric(r.eval_loss);
        out += ',';
        out += format_metric(r.eval_accuracy);
        out += ',';
        out += std::to_string(r.uploaded_params);
        out += ',';
        out += format_metric(r.normalized_cost_cum);
        out += ',';
        out += join_ids(r.recycled_set);
        out += ',';
        out += format_metric(r.n_norm_sq);
        out += ',';
        out += format_metric(r.kappa_hat);
        out += ',';
        out += format_metric(r.wall_ms);
        out += '\n';
    }
    return out;
}

RunOutputs serialize_records(const std::vector<RoundRecord>& records, const std::string& out_dir,
                             const ExperimentConfig& config, const RunSummary& summary) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

    char hash8[16];
    std::snprintf(hash8, sizeof(hash8), "%08llx",
                  static_cast<unsigned long long>(run_hash(config) >> 32));

    RunOutputs paths;
    paths.csv_path = (fs::path(out_dir) / (std::string("records_") + hash8 + ".csv")).string();
    paths.manifest_path =
        (fs::path(out_dir) / (std::string("manifest_") + hash8 + ".json")).string();

    const std::string csv = records_to_csv(records);
    {
        std::ofstream out(paths.csv_path, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + paths.csv_path);
        out << csv;
        if (!out) throw IoError("write failed: " + paths.csv_path);
    }

    nlohmann::json manifest;
    char hash16[24];
    std::snprintf(hash16, sizeof(hash16), "%016llx",
                  static_cast<unsigned long long>(run_hash(config)));
    manifest["run_hash"] = hash16;
    manifest["schema_version"] = 1;
    nlohmann::json cfg;
    for (const auto& [k, v] : config_key_values(config)) cfg[k] = v;
    manifest["config"] = cfg;
    manifest["rounds_recorded"] = records.size();
    manifest["final"] = {
        {"loss", format_metric(summary.final_loss)},
        {"accuracy", format_metric(summary.final_accuracy)},
        {"normalized_cost", format_metric(summary.normalized_cost)},
    };
    manifest["total_wall_ms"] = format_metric(summary.total_wall_ms);
    {
        std::ofstream out(paths.manifest_path, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + paths.manifest_path);
        out << manifest.dump(2) << "\n";
        if (!out) throw IoError("write failed: " + paths.manifest_path);
    }
    return paths;
}

}  // namespace fedluar
