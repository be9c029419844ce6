#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "fedluar/errors.hpp"
#include "fedluar/luar.hpp"

using namespace fedluar;

namespace {

LocalUpdate make_update(int id, LayerKeyedVector v) {
    LocalUpdate u;
    u.client_id = id;
    u.update = std::move(v);
    u.steps_taken = 1;
    return u;
}

LayerKeyedVector lkv2(std::vector<double> a, std::vector<double> b) {
    LayerKeyedVector v;
    v[0] = std::move(a);
    v[1] = std::move(b);
    return v;
}

}  // namespace

TEST_CASE("scores are update norm over parameter norm") {
    LayerKeyedVector update;
    update[0] = {3.0, 4.0};
    LayerKeyedVector params;
    params[0] = {0.6, 0.8};
    auto s = compute_scores(update, params);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == doctest::Approx(5.0).epsilon(1e-15));

    // doubling the parameters halves the score
    params[0] = {1.2, 1.6};
    CHECK(compute_scores(update, params)[0] == doctest::Approx(2.5).epsilon(1e-15));

    // a zero update scores zero even against zero params
    update[0] = {0.0, 0.0};
    params[0] = {0.0, 0.0};
    CHECK(compute_scores(update, params)[0] == 0.0);

    LayerKeyedVector wrong;
    wrong[1] = {1.0, 2.0};
    CHECK_THROWS_AS(compute_scores(update, wrong), InternalError);
}

TEST_CASE("selection probabilities invert scores onto the simplex") {
    auto p = selection_probabilities({1.0, 2.0, 4.0});
    CHECK(p[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(1.0 / 7.0).epsilon(1e-12));

    auto q = selection_probabilities({0.3, 0.3, 0.3, 0.3});
    for (double v : q) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    // a near-zero score dominates the inverse weighting
    auto r = selection_probabilities({1e-6, 1.0, 1.0});
    CHECK(r[0] == doctest::Approx(1e6 / (1e6 + 2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(selection_probabilities({}), InternalError);
    CHECK_THROWS_AS(selection_probabilities({-0.1, 1.0}), InternalError);
    CHECK_THROWS_AS(selection_probabilities({std::nan(""), 1.0}), InternalError);
}

TEST_CASE("selection probabilities: simplex, zero scores, monotonicity, scale invariance") {
    // zero scores clamp at eps and still produce a valid distribution
    auto p = selection_probabilities({0.0, 0.0, 1.0});
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    CHECK(std::fabs(total - 1.0) <= 1e-12);
    for (double v : p) CHECK(v > 0.0);
    CHECK(p[0] == doctest::Approx(p[1]).epsilon(1e-12));
    CHECK(p[0] > p[2]);

    // lower score gets strictly more probability
    auto q = selection_probabilities({0.5, 0.2, 0.9, 0.2});
    CHECK(q[1] > q[0]);
    CHECK(q[0] > q[2]);
    CHECK(q[1] == doctest::Approx(q[3]).epsilon(1e-12));

    // scaling all scores by a constant leaves probabilities unchanged
    std::vector<double> s = {0.11, 0.47, 0.92, 0.05};
    std::vector<double> s10 = s;
    for (double& v : s10) v *= 10.0;
    auto a = selection_probabilities(s);
    auto b = selection_probabilities(s10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::fabs(a[i] - b[i]) <= 1e-12);
    }
}

TEST_CASE("recycle set sampling honors delta boundaries and fixed schemes") {
    std::vector<double> p = {0.25, 0.25, 0.25, 0.25};
    CHECK(sample_recycle_set(p, 0, SelectionScheme::luar, 7).empty());
    CHECK(sample_recycle_set(p, 2, SelectionScheme::none, 7).empty());
    CHECK(sample_recycle_set(p, 4, SelectionScheme::luar, 7) == std::set<int>{0, 1, 2, 3});
    CHECK(sample_recycle_set(p, 2, SelectionScheme::top_input_side, 7) == std::set<int>{0, 1});
    CHECK(sample_recycle_set(p, 2, SelectionScheme::bottom_output_side, 7) ==
          std::set<int>{2, 3});
    CHECK_THROWS_AS(sample_recycle_set(p, 5, SelectionScheme::luar, 7), ConfigError);
    CHECK_THROWS_AS(sample_recycle_set(p, -1, SelectionScheme::luar, 7), ConfigError);
    CHECK_THROWS_AS(sample_recycle_set({}, 0, SelectionScheme::luar, 7), InternalError);
}

TEST_CASE("deterministic selection takes the largest probabilities, ties to lower id") {
    // scores [1,1,2] -> p is [0.4,0.4,0.2]: layers 0 and 1 tie, 0 wins
    auto p = selection_probabilities({1.0, 1.0, 2.0});
    CHECK(sample_recycle_set(p, 1, SelectionScheme::deterministic_luar, 99) ==
          std::set<int>{0});
    CHECK(sample_recycle_set(p, 2, SelectionScheme::deterministic_luar, 99) ==
          std::set<int>{0, 1});
    // the seed plays no role
    CHECK(sample_recycle_set(p, 2, SelectionScheme::deterministic_luar, 1) ==
          sample_recycle_set(p, 2, SelectionScheme::deterministic_luar, 2));
}

TEST_CASE("weighted sampling without replacement matches hand pair probabilities") {
    const std::vector<double> p = {0.5, 0.3, 0.2};
    // P({0,1}) = 0.5*0.3/0.5 + 0.3*0.5/0.7, and so on for the other pairs.
    std::map<std::set<int>, double> want = {
        {{0, 1}, 0.3 + 0.3 * 0.5 / 0.7},
        {{0, 2}, 0.2 + 0.2 * 0.5 / 0.8},
        {{1, 2}, 0.3 * 0.2 / 0.7 + 0.2 * 0.3 / 0.8},
    };
    double mass = 0.0;
    for (const auto& [k, v] : want) mass += v;
    REQUIRE(mass == doctest::Approx(1.0).epsilon(1e-12));

    const int trials = 50000;
    std::map<std::set<int>, int> counts;
    for (int i = 0; i < trials; ++i) {
        counts[sample_recycle_set(p, 2, SelectionScheme::luar, static_cast<std::uint64_t>(i))]++;
    }
    for (const auto& [k, v] : want) {
        const double freq = static_cast<double>(counts[k]) / trials;
        const double sigma = std::sqrt(v * (1.0 - v) / trials);
        CHECK(std::fabs(freq - v) <= 4.0 * sigma);
    }
}

TEST_CASE("single-draw frequencies match the weight vector") {
    const std::vector<double> p = {0.6, 0.1, 0.3};
    const int trials = 50000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < trials; ++i) {
        auto r = sample_recycle_set(p, 1, SelectionScheme::luar, 1000000u + i);
        counts[static_cast<std::size_t>(*r.begin())]++;
    }
    for (std::size_t l = 0; l < 3; ++l) {
        const double freq = static_cast<double>(counts[l]) / trials;
        const double sigma = std::sqrt(p[l] * (1.0 - p[l]) / trials);
        CHECK(std::fabs(freq - p[l]) <= 4.0 * sigma);
    }
}

TEST_CASE("uniform scheme ignores the weights") {
    const std::vector<double> p = {0.97, 0.01, 0.01, 0.01};
    const int trials = 40000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < trials; ++i) {
        auto r = sample_recycle_set(p, 1, SelectionScheme::uniform_random, 5000u + i);
        counts[static_cast<std::size_t>(*r.begin())]++;
    }
    for (std::size_t l = 0; l < 4; ++l) {
        const double freq = static_cast<double>(counts[l]) / trials;
        const double sigma = std::sqrt(0.25 * 0.75 / trials);
        CHECK(std::fabs(freq - 0.25) <= 4.0 * sigma);
    }
}

TEST_CASE("composition takes the fresh mean outside the recycling set") {
    RecyclerState state = RecyclerState::create(2, 1);
    std::vector<LocalUpdate> ups = {make_update(0, lkv2({1.0, 1.0}, {2.0})),
                                    make_update(1, lkv2({3.0, 3.0}, {4.0}))};
    ComposedUpdate out = compose_global_update(ups, state);
    CHECK(out.noise_layers.empty());
    CHECK(out.applied.at(0) == std::vector<double>{2.0, 2.0});
    CHECK(out.applied.at(1) == std::vector<double>{3.0});
    CHECK(state.has_applied);
    CHECK(state.staleness == std::vector<int>{0, 0});
    CHECK(bitwise_equal(state.last_applied, out.applied));
}

TEST_CASE("recycled layers replay the previous applied update byte for byte") {
    RecyclerState state = RecyclerState::create(2, 1);
    std::vector<LocalUpdate> r0 = {make_update(0, lkv2({0.5, -0.25}, {1.0 / 3.0}))};
    ComposedUpdate first = compose_global_update(r0, state);

    state.current_set = {0};
    std::vector<LocalUpdate> r1;
    {
        LayerKeyedVector only1;
        only1[1] = {9.0};
        r1.push_back(make_update(0, std::move(only1)));
    }
    ComposedUpdate second = compose_global_update(r1, state);
    CHECK(second.noise_layers == std::set<int>{0});
    // exact bit identity with what was applied last round
    CHECK(second.applied.at(0) == first.applied.at(0));
    CHECK(second.applied.at(1) == std::vector<double>{9.0});
    CHECK(state.staleness == std::vector<int>{1, 0});

    // keep recycling layer 0: staleness keeps counting, payload unchanged
    ComposedUpdate third = compose_global_update(r1, state);
    CHECK(third.applied.at(0) == first.applied.at(0));
    CHECK(state.staleness == std::vector<int>{2, 0});

    // release it: staleness resets
    state.current_set = {};
    std::vector<LocalUpdate> r3 = {make_update(0, lkv2({7.0, 7.0}, {7.0}))};
    compose_global_update(r3, state);
    CHECK(state.staleness == std::vector<int>{0, 0});
}

TEST_CASE("dropping mode zeroes the recycled layers instead") {
    RecyclerState state = RecyclerState::create(2, 1);
    std::vector<LocalUpdate> r0 = {make_update(0, lkv2({0.5, -0.25}, {2.0}))};
    compose_dropping_update(r0, state);

    state.current_set = {0};
    LayerKeyedVector only1;
    only1[1] = {4.0};
    std::vector<LocalUpdate> r1 = {make_update(0, std::move(only1))};
    ComposedUpdate out = compose_dropping_update(r1, state);
    CHECK(out.applied.at(0) == std::vector<double>{0.0, 0.0});
    CHECK(out.applied.at(1) == std::vector<double>{4.0});
    CHECK(state.staleness == std::vector<int>{1, 0});
}

TEST_CASE("with an empty recycling set both modes agree") {
    RecyclerState a = RecyclerState::create(2, 1);
    RecyclerState b = RecyclerState::create(2, 1);
    std::vector<LocalUpdate> ups = {make_update(2, lkv2({1.0, 2.0}, {3.0})),
                                    make_update(5, lkv2({-1.0, 0.5}, {0.25}))};
    ComposedUpdate ra = compose_global_update(ups, a);
    ComposedUpdate rb = compose_dropping_update(ups, b);
    CHECK(bitwise_equal(ra.applied, rb.applied));
}

TEST_CASE("client ordering in the list cannot change the composition") {
    std::vector<LocalUpdate> fwd = {make_update(3, lkv2({0.1, 0.2}, {0.3})),
                                    make_update(1, lkv2({0.7, 0.11}, {0.13})),
                                    make_update(7, lkv2({1e-9, 1e9}, {-4.0}))};
    std::vector<LocalUpdate> rev(fwd.rbegin(), fwd.rend());
    RecyclerState sa = RecyclerState::create(2, 1);
    RecyclerState sb = RecyclerState::create(2, 1);
    CHECK(bitwise_equal(compose_global_update(fwd, sa).applied,
                        compose_global_update(rev, sb).applied));
}

TEST_CASE("composition rejects malformed rounds") {
    RecyclerState state = RecyclerState::create(2, 1);
    CHECK_THROWS_AS(compose_global_update({}, state), ProtocolError);

    // recycling set set before anything was ever applied
    RecyclerState early = RecyclerState::create(2, 1);
    early.current_set = {0};
    std::vector<LocalUpdate> ups = {make_update(0, lkv2({1.0, 1.0}, {1.0}))};
    CHECK_THROWS_AS(compose_global_update(ups, early), InternalError);

    // one client reports a layer that should have been withheld
    RecyclerState state2 = RecyclerState::create(2, 1);
    compose_global_update(ups, state2);
    state2.current_set = {0};
    std::vector<LocalUpdate> bad = {make_update(0, lkv2({1.0, 1.0}, {1.0}))};
    CHECK_THROWS_AS(compose_global_update(bad, state2), ProtocolError);
}

TEST_CASE("noise stats: zero when nothing is recycled, exact on a hand case") {
    LayerKeyedVector fresh = lkv2({1.0, 2.0}, {3.0});
    NoiseStats zero = measure_noise(fresh, fresh, {});
    CHECK(zero.n_norm_sq == 0.0);
    CHECK(zero.kappa_hat == 0.0);

    // applied replays [4,4] on layer 0 while fresh wanted [1,2]
    LayerKeyedVector applied = lkv2({4.0, 4.0}, {3.0});
    NoiseStats stats = measure_noise(applied, fresh, {0});
    CHECK(stats.n_norm_sq == doctest::Approx(9.0 + 4.0).epsilon(1e-15));
    CHECK(stats.kappa_hat == doctest::Approx(5.0 / 14.0).epsilon(1e-15));

    // a vanished fresh update defines kappa as zero
    LayerKeyedVector none = lkv2({0.0, 0.0}, {0.0});
    NoiseStats degenerate = measure_noise(none, none, {0});
    CHECK(degenerate.kappa_hat == 0.0);

    LayerKeyedVector wrong;
    wrong[0] = {1.0};
    CHECK_THROWS_AS(measure_noise(fresh, wrong, {}), InternalError);
}

TEST_CASE("frozen refresh keeps scores of recycled layers, applied mode overwrites") {
    RecyclerState state = RecyclerState::create(2, 1);
    state.scores = {10.0, 20.0};
    state.current_set = {0};

    LayerKeyedVector applied = lkv2({3.0, 4.0}, {5.0});
    LayerKeyedVector params = lkv2({1.0, 0.0}, {1.0});

    RecyclerState frozen = state;
    refresh_scores(frozen, applied, params, ScoreRefresh::frozen);
    CHECK(frozen.scores[0] == 10.0);
    CHECK(frozen.scores[1] == doctest::Approx(5.0).epsilon(1e-15));

    refresh_scores(state, applied, params, ScoreRefresh::applied);
    CHECK(state.scores[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(state.scores[1] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("recycler state creation validates delta") {
    RecyclerState s = RecyclerState::create(3, 2);
    CHECK(s.scores == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(s.staleness == std::vector<int>{0, 0, 0});
    CHECK(s.current_set.empty());
    CHECK_FALSE(s.has_applied);
    CHECK_THROWS_AS(RecyclerState::create(3, 4), ConfigError);
    CHECK_THROWS_AS(RecyclerState::create(3, -1), ConfigError);
}
