#include "fedluar/validate.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fedluar/accounting.hpp"
#include "fedluar/orchestrator.hpp"
#include "fedluar/rng.hpp"

namespace fedluar {

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.master_seed = 20240811;
    c.n_samples = 256;
    c.n_features = 8;
    c.n_classes = 3;
    c.class_separation = 3.0;
    c.alpha = 0.5;
    c.hidden = {8, 8};
    c.clients = 6;
    c.active_clients = 3;
    c.rounds = 12;
    c.local_steps = 3;
    c.batch_size = 16;
    c.rule.learning_rate = 0.05;
    c.rule.momentum = 0.9;
    c.delta = 1;
    c.scheme = SelectionScheme::luar;
    c.eval_every = 4;
    return c;
}

bool check_simplex() {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(6);
        for (auto& v : s) v = rng.uniform() * 10.0;
        auto p = selection_probabilities(s);
        double sum = 0.0;
        for (double v : p) {
            if (!(v > 0.0)) return false;
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-12) return false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (s[i] < s[j] && !(p[i] > p[j])) return false;
            }
        }
    }
    return true;
}

bool check_hand_probabilities() {
    auto p = selection_probabilities({1.0, 2.0, 4.0});
    return std::fabs(p[0] - 4.0 / 7.0) <= 1e-12 && std::fabs(p[1] - 2.0 / 7.0) <= 1e-12 &&
           std::fabs(p[2] - 1.0 / 7.0) <= 1e-12;
}

bool check_sampling_frequencies() {
    const auto p = selection_probabilities({1.0, 2.0, 4.0});
    const int draws = 20000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < draws; ++i) {
        auto set = sample_recycle_set(p, 1, SelectionScheme::luar, 1000 + i);
        counts[static_cast<std::size_t>(*set.begin())] += 1;
    }
    for (std::size_t l = 0; l < 3; ++l) {
        const double expect = p[l] * draws;
        const double sigma = std::sqrt(draws * p[l] * (1.0 - p[l]));
        if (std::fabs(counts[l] - expect) > 4.0 * sigma) return false;
    }
    return true;
}

bool check_gradient() {
    Model model({make_dense_spec(0, 5, 7), make_dense_spec(1, 7, 4)});
    LayerKeyedVector params = model.init_params(99);
    Matrix inputs(6, 5);
    Rng rng(17);
    for (auto& v : inputs.data) v = rng.normal();
    std::vector<int> labels(6);
    for (auto& y : labels) y = static_cast<int>(rng.uniform_index(4));

    BackwardResult analytic = model.backward(model.forward(params, inputs), labels);
    const double h = 1e-5;
    for (auto& [id, buf] : params) {
        for (std::size_t i = 0; i < buf.size(); i += 7) {  // spot-check a stride
            const double orig = buf[i];
            buf[i] = orig + h;
            const double lp = model.backward(model.forward(params, inputs), labels).loss;
            buf[i] = orig - h;
            const double lm = model.backward(model.forward(params, inputs), labels).loss;
            buf[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic.grad.at(id)[i];
            if (std::fabs(fd - an) > 1e-4 * std::max(1.0, std::fabs(fd))) return false;
        }
    }
    return true;
}

bool check_accounting() {
    ExperimentConfig c = tiny_config();
    ExperimentResult res = run_experiment(c);
    const long long total = res.ledger.unit_uploads + res.ledger.unit_recycled;
    if (total != static_cast<long long>(c.rounds) * res.ledger.model_dim) return false;
    auto fp = memory_footprint_model(32, {25, 25, 25, 25}, {1});
    return fp.fedavg == 32 * 100 && fp.luar == 32 * 75 + 25;
}

bool check_recycling_identity() {
    ExperimentConfig c = tiny_config();
    Simulation sim(c);
    LayerKeyedVector prev_applied;
    bool ok = true;
    bool have_prev = false;
    sim.set_round_observer([&](const RoundRecord& rec, const LayerKeyedVector& applied,
                               const RecyclerState&) {
        if (have_prev) {
            for (int id : rec.recycled_set) {
                const auto& now = applied.at(id);
                const auto& before = prev_applied.at(id);
                for (std::size_t i = 0; i < now.size(); ++i) {
                    if (now[i] != before[i]) ok = false;
                }
            }
        }
        prev_applied = applied;
        have_prev = true;
    });
    sim.run();
    return ok;
}

bool check_determinism() {
    ExperimentConfig c = tiny_config();
    ExperimentResult a = run_experiment(c);
    ExperimentResult b = run_experiment(c);
    return records_to_csv(a.records) == records_to_csv(b.records) &&
           bitwise_equal(a.final_params, b.final_params);
}

}  // namespace

int run_validation_suite(std::ostream& out) {
    struct Check {
        const char* name;
        std::function<bool()> fn;
    };
    const std::vector<Check> checks = {
        {"selection probabilities form a simplex and invert score order", check_simplex},
        {"scores [1,2,4] map to probabilities [4/7,2/7,1/7]", check_hand_probabilities},
        {"single-draw sampling frequencies match probabilities", check_sampling_frequencies},
        {"analytic gradients match central finite differences", check_gradient},
        {"upload plus recycled scalars conserve the round budget", check_accounting},
        {"recycled layers reuse the previous applied update byte for byte", check_recycling_identity},
        {"identical config and seed reproduce identical outputs", check_determinism},
    };
    int failures = 0;
    for (const auto& check : checks) {
        bool passed = false;
        std::string detail;
        try {
            passed = check.fn();
        } catch (const std::exception& e) {
            detail = e.what();
        }
        if (passed) {
            out << "ok - " << check.name << "\n";
        } else {
            ++failures;
            out << "FAIL - " << check.name;
            if (!detail.empty()) out << " (" << detail << ")";
            out << "\n";
        }
    }
    out << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed")
        << "\n";
    return failures;
}

}  // namespace fedluar
