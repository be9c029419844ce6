#include "fedluar/cli.hpp"

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedluar/accounting.hpp"
#include "fedluar/errors.hpp"
#include "fedluar/orchestrator.hpp"
#include "fedluar/validate.hpp"

namespace fedluar {

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool diagnostic = false;
    std::vector<int> deltas;
};

struct RunLine {
    std::string label;
    double accuracy = 0.0;
    double loss = 0.0;
    double cost = 1.0;
};

RunLine execute_and_write(const ExperimentConfig& config, const std::string& label,
                          const std::string& out_dir) {
    Simulation sim(config);
    ExperimentResult res = sim.run();
    RunSummary summary;
    summary.final_loss = res.final_metrics.loss;
    summary.final_accuracy = res.final_metrics.accuracy;
    summary.normalized_cost = res.ledger.rounds() > 0 ? comm_normalized_cost(res.ledger) : 1.0;
    summary.total_wall_ms = sim.config().timing ? res.total_wall_ms : 0.0;
    RunOutputs files = serialize_records(res.records, out_dir, sim.config(), summary);
    std::cout << label << ": accuracy " << format_metric(summary.final_accuracy) << ", loss "
              << format_metric(summary.final_loss) << ", upload cost "
              << format_metric(summary.normalized_cost) << "\n  wrote " << files.csv_path
              << "\n  wrote " << files.manifest_path << "\n";
    return {label, summary.final_accuracy, summary.final_loss, summary.normalized_cost};
}

ExperimentConfig load_config(const CliOptions& opt) {
    ExperimentConfig config = parse_config_file(opt.config_path);
    if (opt.seed_set) config.master_seed = opt.seed;
    if (opt.diagnostic) config.diagnostic = true;
    return config;
}

void print_table(const std::vector<RunLine>& lines) {
    // format_metric emits up to 15 chars (-1.23456789e-123)
    std::cout << "\n" << std::left << std::setw(24) << "variant" << std::right << std::setw(16)
              << "accuracy" << std::setw(16) << "loss" << std::setw(16) << "upload" << "\n";
    for (const auto& line : lines) {
        std::cout << std::left << std::setw(24) << line.label << std::right << std::setw(16)
                  << format_metric(line.accuracy) << std::setw(16) << format_metric(line.loss)
                  << std::setw(16) << format_metric(line.cost) << "\n";
    }
}

int dispatch(const std::string& command, const CliOptions& opt) {
    if (command == "validate") {
        return run_validation_suite(std::cout) == 0 ? 0 : 1;
    }

    if (command == "run") {
        execute_and_write(load_config(opt), "run", opt.out_dir);
        return 0;
    }

    if (command == "ablate-selection") {
        const SelectionScheme schemes[] = {
            SelectionScheme::luar,           SelectionScheme::uniform_random,
            SelectionScheme::top_input_side, SelectionScheme::bottom_output_side,
            SelectionScheme::gradient_norm,  SelectionScheme::deterministic_luar,
        };
        ExperimentConfig base = load_config(opt);
        if (base.delta == 0) {
            std::cout << "note: delta is 0; all selection schemes coincide with the baseline\n";
        }
        std::vector<RunLine> lines;
        for (SelectionScheme s : schemes) {
            ExperimentConfig config = base;
            config.scheme = s;
            lines.push_back(execute_and_write(config, scheme_name(s), opt.out_dir));
        }
        print_table(lines);
        return 0;
    }

    if (command == "ablate-delta") {
        ExperimentConfig base = load_config(opt);
        if (base.scheme == SelectionScheme::none) {
            std::cout << "note: scheme none never recycles; sweeping with scheme luar\n";
            base.scheme = SelectionScheme::luar;
        }
        std::vector<int> deltas = opt.deltas;
        if (deltas.empty()) {
            const int layers = static_cast<int>(model_layer_count(base));
            for (int d = 0; d <= layers; ++d) deltas.push_back(d);
        }
        std::vector<RunLine> lines;
        for (int d : deltas) {
            ExperimentConfig config = base;
            config.delta = d;
            lines.push_back(
                execute_and_write(config, "delta=" + std::to_string(d), opt.out_dir));
        }
        print_table(lines);
        return 0;
    }

    if (command == "ablate-drop-vs-recycle") {
        ExperimentConfig base = load_config(opt);
        std::vector<RunLine> lines;
        {
            ExperimentConfig config = base;
            config.scheme = SelectionScheme::none;
            config.delta = 0;
            config.aggregation = AggregationMode::recycle;
            lines.push_back(execute_and_write(config, "fedavg", opt.out_dir));
        }
        {
            ExperimentConfig config = base;
            config.aggregation = AggregationMode::drop;
            lines.push_back(execute_and_write(config, "drop", opt.out_dir));
        }
        {
            ExperimentConfig config = base;
            config.aggregation = AggregationMode::recycle;
            lines.push_back(execute_and_write(config, "recycle", opt.out_dir));
        }
        print_table(lines);
        return 0;
    }

    std::cerr << "error: unknown subcommand '" << command << "'\n";
    return 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Federated learning simulator with layer-wise update recycling"};
    app.require_subcommand(1);

    CliOptions opt;
    auto add_common = [&opt](CLI::App* sub, bool config_required) {
        auto* config_opt =
            sub->add_option("--config", opt.config_path, "experiment config file");
        if (config_required) config_opt->required();
        sub->add_option("--out", opt.out_dir, "output directory (default: current)");
        sub->add_option("--seed", opt.seed, "override master_seed")
            ->each([&opt](const std::string&) { opt.seed_set = true; });
        sub->add_flag("--diagnostic", opt.diagnostic,
                      "record update-noise diagnostics each round");
    };

    add_common(app.add_subcommand("run", "execute one experiment"), true);
    add_common(app.add_subcommand("ablate-selection", "sweep the layer selection schemes"), true);
    auto* ablate_delta =
        app.add_subcommand("ablate-delta", "sweep the recycled layer count");
    add_common(ablate_delta, true);
    ablate_delta->add_option("--deltas", opt.deltas,
                             "comma-separated delta values (default 0..L)")
        ->delimiter(',');
    add_common(app.add_subcommand("ablate-drop-vs-recycle",
                                  "compare recycling, dropping, and the plain baseline"),
               true);
    app.add_subcommand("validate", "run the built-in property checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(command, opt);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace fedluar
