#include "fedluar/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedluar/errors.hpp"

namespace fedluar {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(v)) out.push_back(parse_size(key, item));
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec <= 16; ++prec) {
        char cand[64];
        std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
        if (std::stod(cand) == v) return cand;
    }
    return buf;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, double>) {
            out += format_double(v[i]);
        } else {
            out += std::to_string(v[i]);
        }
    }
    return out;
}

}  // namespace

std::string scheme_name(SelectionScheme scheme) {
    switch (scheme) {
        case SelectionScheme::luar: return "luar";
        case SelectionScheme::uniform_random: return "uniform_random";
        case SelectionScheme::top_input_side: return "top_input_side";
        case SelectionScheme::bottom_output_side: return "bottom_output_side";
        case SelectionScheme::gradient_norm: return "gradient_norm";
        case SelectionScheme::deterministic_luar: return "deterministic_luar";
        case SelectionScheme::none: return "none";
    }
    throw InternalError("scheme_name: unhandled scheme");
}

SelectionScheme scheme_from_name(const std::string& name) {
    if (name == "luar") return SelectionScheme::luar;
    if (name == "uniform_random") return SelectionScheme::uniform_random;
    if (name == "top_input_side") return SelectionScheme::top_input_side;
    if (name == "bottom_output_side") return SelectionScheme::bottom_output_side;
    if (name == "gradient_norm") return SelectionScheme::gradient_norm;
    if (name == "deterministic_luar") return SelectionScheme::deterministic_luar;
    if (name == "none") return SelectionScheme::none;
    throw ConfigError("unknown selection scheme '" + name + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig c;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }

        if (key == "master_seed") c.master_seed = parse_u64(key, value);
        else if (key == "dataset") {
            if (value == "synthetic") c.dataset = DatasetKind::synthetic;
            else if (value == "csv") c.dataset = DatasetKind::csv;
            else throw ConfigError("config key 'dataset': expected synthetic or csv, got '" + value + "'");
        }
        else if (key == "csv_path") c.csv_path = value;
        else if (key == "n_samples") c.n_samples = parse_size(key, value);
        else if (key == "n_features") c.n_features = parse_size(key, value);
        else if (key == "n_classes") c.n_classes = parse_size(key, value);
        else if (key == "class_separation") c.class_separation = parse_double(key, value);
        else if (key == "alpha") c.alpha = parse_double(key, value);
        else if (key == "eval_fraction") c.eval_fraction = parse_double(key, value);
        else if (key == "model") {
            if (value == "mlp") c.model = ModelKind::mlp;
            else if (value == "cnn") c.model = ModelKind::cnn;
            else throw ConfigError("config key 'model': expected mlp or cnn, got '" + value + "'");
        }
        else if (key == "hidden") c.hidden = parse_size_list(key, value);
        else if (key == "image_h") c.image_h = parse_size(key, value);
        else if (key == "image_w") c.image_w = parse_size(key, value);
        else if (key == "image_c") c.image_c = parse_size(key, value);
        else if (key == "kernel") c.kernel = parse_size(key, value);
        else if (key == "conv_channels") c.conv_channels = parse_size_list(key, value);
        else if (key == "clients") c.clients = parse_size(key, value);
        else if (key == "active_clients") c.active_clients = parse_size(key, value);
        else if (key == "rounds") c.rounds = parse_int(key, value);
        else if (key == "local_steps") c.local_steps = parse_int(key, value);
        else if (key == "batch_size") c.batch_size = parse_size(key, value);
        else if (key == "rule") {
            if (value == "sgd_momentum") c.rule.kind = RuleKind::sgd_momentum;
            else if (value == "sgd_momentum_proximal") c.rule.kind = RuleKind::sgd_momentum_proximal;
            else throw ConfigError("config key 'rule': expected sgd_momentum or sgd_momentum_proximal, got '" + value + "'");
        }
        else if (key == "learning_rate") c.rule.learning_rate = parse_double(key, value);
        else if (key == "momentum") c.rule.momentum = parse_double(key, value);
        else if (key == "proximal_mu") c.rule.proximal_mu = parse_double(key, value);
        else if (key == "decay_round_fracs") c.decay_round_fracs = parse_double_list(key, value);
        else if (key == "delta") c.delta = parse_int(key, value);
        else if (key == "scheme") c.scheme = scheme_from_name(value);
        else if (key == "aggregation") {
            if (value == "recycle") c.aggregation = AggregationMode::recycle;
            else if (value == "drop") c.aggregation = AggregationMode::drop;
            else throw ConfigError("config key 'aggregation': expected recycle or drop, got '" + value + "'");
        }
        else if (key == "score_refresh") {
            if (value == "applied") c.score_refresh = ScoreRefresh::applied;
            else if (value == "frozen") c.score_refresh = ScoreRefresh::frozen;
            else throw ConfigError("config key 'score_refresh': expected applied or frozen, got '" + value + "'");
        }
        else if (key == "eval_every") c.eval_every = parse_int(key, value);
        else if (key == "eval_batch_limit") c.eval_batch_limit = parse_size(key, value);
        else if (key == "diagnostic") c.diagnostic = parse_bool(key, value);
        else if (key == "timing") c.timing = parse_bool(key, value);
        else if (key == "threads") c.threads = parse_int(key, value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::size_t model_layer_count(const ExperimentConfig& config) {
    if (config.model == ModelKind::mlp) return config.hidden.size() + 1;
    return config.conv_channels.size() + 1;
}

void validate_config(ExperimentConfig& config) {
    if (config.clients == 0) throw ConfigError("clients must be >= 1");
    if (config.active_clients == 0 || config.active_clients > config.clients) {
        throw ConfigError("active_clients must be in [1, clients]");
    }
    if (config.rounds < 0) throw ConfigError("rounds must be >= 0");
    if (config.local_steps < 1) throw ConfigError("local_steps must be >= 1");
    if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (config.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (config.threads < 1) throw ConfigError("threads must be >= 1");
    if (!(config.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (config.eval_fraction < 0.0 || config.eval_fraction >= 1.0) {
        throw ConfigError("eval_fraction must be in [0, 1)");
    }
    if (config.class_separation < 0.0) throw ConfigError("class_separation must be non-negative");
    config.rule.validate();
    for (double f : config.decay_round_fracs) {
        if (!(f > 0.0) || f > 1.0) throw ConfigError("decay_round_fracs entries must be in (0, 1]");
    }
    if (config.dataset == DatasetKind::csv && config.csv_path.empty()) {
        throw ConfigError("dataset = csv requires csv_path");
    }
    if (config.dataset == DatasetKind::synthetic) {
        if (config.n_classes == 0 || config.n_features == 0) {
            throw ConfigError("n_classes and n_features must be >= 1");
        }
        if (config.n_samples < config.n_classes) {
            throw ConfigError("n_samples must be >= n_classes");
        }
    }
    if (config.model == ModelKind::mlp) {
        for (std::size_t h : config.hidden) {
            if (h == 0) throw ConfigError("hidden widths must be >= 1");
        }
    } else {
        if (config.conv_channels.empty()) throw ConfigError("cnn model requires conv_channels");
        if (config.image_h == 0 || config.image_w == 0 || config.image_c == 0) {
            throw ConfigError("cnn model requires image_h, image_w, image_c");
        }
        if (config.dataset == DatasetKind::synthetic &&
            config.image_h * config.image_w * config.image_c != config.n_features) {
            throw ConfigError("image_h * image_w * image_c must equal n_features");
        }
        if (config.kernel == 0) throw ConfigError("kernel must be >= 1");
    }
    // A scheme of none is the FedAvg baseline; it never recycles.
    if (config.scheme == SelectionScheme::none) config.delta = 0;
    const std::size_t layers = model_layer_count(config);
    if (config.delta < 0 || static_cast<std::size_t>(config.delta) > layers) {
        throw ConfigError("delta must be in [0, " + std::to_string(layers) + "], got " +
                          std::to_string(config.delta));
    }
}

Model build_model(const ExperimentConfig& config) {
    std::vector<LayerSpec> specs;
    int id = 0;
    if (config.model == ModelKind::mlp) {
        std::size_t prev = config.n_features;
        for (std::size_t h : config.hidden) {
            specs.push_back(make_dense_spec(id++, prev, h));
            prev = h;
        }
        specs.push_back(make_dense_spec(id++, prev, config.n_classes));
    } else {
        std::size_t h = config.image_h, w = config.image_w, ch = config.image_c;
        for (std::size_t oc : config.conv_channels) {
            specs.push_back(make_conv_spec(id++, h, w, ch, config.kernel, oc));
            h = h - config.kernel + 1;
            w = w - config.kernel + 1;
            ch = oc;
        }
        specs.push_back(make_dense_spec(id++, h * w * ch, config.n_classes));
    }
    return Model(std::move(specs));
}

std::map<std::string, std::string> config_key_values(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    kv["master_seed"] = std::to_string(c.master_seed);
    kv["dataset"] = c.dataset == DatasetKind::synthetic ? "synthetic" : "csv";
    kv["csv_path"] = c.csv_path;
    kv["n_samples"] = std::to_string(c.n_samples);
    kv["n_features"] = std::to_string(c.n_features);
    kv["n_classes"] = std::to_string(c.n_classes);
    kv["class_separation"] = format_double(c.class_separation);
    kv["alpha"] = format_double(c.alpha);
    kv["eval_fraction"] = format_double(c.eval_fraction);
    kv["model"] = c.model == ModelKind::mlp ? "mlp" : "cnn";
    kv["hidden"] = join_list(c.hidden);
    kv["image_h"] = std::to_string(c.image_h);
    kv["image_w"] = std::to_string(c.image_w);
    kv["image_c"] = std::to_string(c.image_c);
    kv["kernel"] = std::to_string(c.kernel);
    kv["conv_channels"] = join_list(c.conv_channels);
    kv["clients"] = std::to_string(c.clients);
    kv["active_clients"] = std::to_string(c.active_clients);
    kv["rounds"] = std::to_string(c.rounds);
    kv["local_steps"] = std::to_string(c.local_steps);
    kv["batch_size"] = std::to_string(c.batch_size);
    kv["rule"] = c.rule.kind == RuleKind::sgd_momentum ? "sgd_momentum" : "sgd_momentum_proximal";
    kv["learning_rate"] = format_double(c.rule.learning_rate);
    kv["momentum"] = format_double(c.rule.momentum);
    kv["proximal_mu"] = format_double(c.rule.proximal_mu);
    kv["decay_round_fracs"] = join_list(c.decay_round_fracs);
    kv["delta"] = std::to_string(c.delta);
    kv["scheme"] = scheme_name(c.scheme);
    kv["aggregation"] = c.aggregation == AggregationMode::recycle ? "recycle" : "drop";
    kv["score_refresh"] = c.score_refresh == ScoreRefresh::applied ? "applied" : "frozen";
    kv["eval_every"] = std::to_string(c.eval_every);
    kv["eval_batch_limit"] = std::to_string(c.eval_batch_limit);
    kv["diagnostic"] = c.diagnostic ? "true" : "false";
    kv["timing"] = c.timing ? "true" : "false";
    kv["threads"] = std::to_string(c.threads);
    return kv;
}

std::string canonical_config_text(const ExperimentConfig& config) {
    std::string out;
    for (const auto& [k, v] : config_key_values(config)) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

std::uint64_t run_hash(const ExperimentConfig& config) {
    const std::string text = canonical_config_text(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace fedluar
