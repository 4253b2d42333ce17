#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbsde/reflected.hpp"
#include "test_support.hpp"

using namespace rbsde;
using testsupport::SplitMix64;

namespace {

ScenarioConfig barrier_scenario(const TreeModel& tree, const GeneratorSpec& g,
                                double barrier_shift = 0.0) {
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = g;
    AdaptedProcess b = brownian(tree);
    // tanh(B) is a strict supermartingale, so the Snell envelope of a terminal
    // pinned near the barrier genuinely reflects
    sc.barrier = AdaptedProcess(tree, 1);
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            sc.barrier->at(k, v) = barrier_shift + 0.4 * std::tanh(b.at(k, v));
    sc.terminal.resize(tree.leaf_count());
    for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
        sc.terminal[v] = std::max(std::sin(b.at(tree.depth(), v)) - 0.5,
                                  sc.barrier->at(tree.depth(), v));
    return sc;
}

// Independent Snell oracle: plain recursion over the subtree, no shared code
// with the solver.
double snell_oracle(const TreeModel& tree, const AdaptedProcess& barrier,
                    const std::vector<double>& terminal, int level, std::uint64_t node) {
    if (level == tree.depth()) return terminal[node];
    double acc = 0.0;
    for (int c = 0; c < tree.branching(); ++c)
        acc += snell_oracle(tree, barrier, terminal, level + 1, tree.child_of(node, c));
    return std::max(barrier.at(level, node), acc / tree.branching());
}

} // namespace

TEST_CASE("one-step projection follows the hand computation") {
    TreeModel tree = build_tree(1.0, 1, 1);
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = make_generator("zero");
    sc.barrier = AdaptedProcess(tree, 1);
    sc.barrier->at(0, 0) = 0.5;
    sc.barrier->at(1, 0) = 0.5;
    sc.barrier->at(1, 1) = 0.5;
    sc.terminal = {1.0, 0.5};  // max(B_1, 0.5)
    auto sol = solve_reflected_projection(sc);
    CHECK(sol.Y.at(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(sol.K.at(1, 0) == 0.0);
}

TEST_CASE("a far-below barrier never binds") {
    TreeModel tree = build_tree(1.0, 6, 1);
    SplitMix64 rng(5);
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = make_generator("zero");
    sc.barrier = AdaptedProcess(tree, 1);
    for (int k = 0; k <= 6; ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) sc.barrier->at(k, v) = -1e6;
    sc.terminal = testsupport::random_leaf_values(tree, rng);
    auto sol = solve_reflected_projection(sc);
    auto tower = conditional_tower(tree, sc.terminal);
    for (int k = 0; k <= 6; ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            CHECK(sol.K.at(k, v) == 0.0);
            CHECK(std::abs(sol.Y.at(k, v) - tower.at(k, v)) <= 1e-12);
        }
}

TEST_CASE("a barrier equal to the martingale touches without pushing") {
    TreeModel tree = build_tree(1.0, 5, 1);
    SplitMix64 rng(6);
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = make_generator("zero");
    sc.terminal = testsupport::random_leaf_values(tree, rng);
    auto tower = conditional_tower(tree, sc.terminal);
    sc.barrier = tower;
    auto sol = solve_reflected_projection(sc);
    for (int k = 0; k <= 5; ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            CHECK(std::abs(sol.Y.at(k, v) - tower.at(k, v)) <= 1e-12);
    auto res = skorokhod_residual(sol, *sc.barrier, sc.p);
    CHECK(res.complementarity <= 1e-12);
    CHECK(res.barrier_deficit <= 1e-12);
}

TEST_CASE("projection equals the brute-force Snell recursion on random barriers") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        TreeModel tree = build_tree(0.5 + 0.1 * trial, 4 + trial % 5, 1);
        ScenarioConfig sc;
        sc.tree = &tree;
        sc.generator = make_generator("zero");
        sc.barrier = testsupport::random_process(tree, rng, -1.0, 1.0);
        sc.terminal.resize(tree.leaf_count());
        for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
            sc.terminal[v] =
                std::max(rng.uniform(-2.0, 2.0), sc.barrier->at(tree.depth(), v));
        auto sol = solve_reflected_projection(sc);
        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                CHECK(std::abs(sol.Y.at(k, v) -
                               snell_oracle(tree, *sc.barrier, sc.terminal, k, v)) <= 1e-12);
        auto res = skorokhod_residual(sol, *sc.barrier, sc.p);
        CHECK(res.complementarity <= 1e-12);
        CHECK(res.barrier_deficit <= 1e-12);
    }
}

TEST_CASE("penalized solve with n = 0 coincides with the plain solver") {
    TreeModel tree = build_tree(1.0, 6, 1);
    auto sc = barrier_scenario(tree, make_generator("linear", {{"a", -0.3}, {"b", 0.4}}));
    auto pen = solve_penalized(sc, 0.0);
    ScenarioConfig plain = sc;
    plain.barrier.reset();
    auto direct = solve_bsde(plain);
    for (int k = 0; k <= 6; ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            CHECK(std::abs(pen.Y.at(k, v) - direct.Y.at(k, v)) <= 1e-13);
            CHECK(pen.K.at(k, v) == 0.0);
        }
}

TEST_CASE("inactive barriers keep every penalized K at zero") {
    TreeModel tree = build_tree(1.0, 5, 1);
    auto sc = barrier_scenario(tree, make_generator("zero"), -1e6);
    for (double n : {1.0, 8.0, 1024.0}) {
        auto sol = solve_penalized(sc, n);
        for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
            CHECK(sol.K.at(tree.depth(), v) == 0.0);
    }
}

TEST_CASE("one-step penalization approaches the projection value") {
    TreeModel tree = build_tree(1.0, 1, 1);
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = make_generator("zero");
    sc.barrier = AdaptedProcess(tree, 1);
    sc.barrier->at(0, 0) = 0.5;
    sc.barrier->at(1, 0) = 0.5;
    sc.barrier->at(1, 1) = 0.5;
    sc.terminal = {1.0, 0.5};
    auto proj = solve_reflected_projection(sc);
    auto pen = solve_penalized(sc, 1000.0);
    CHECK(std::abs(pen.Y.at(0, 0) - proj.Y.at(0, 0)) <= 1e-2);
}

TEST_CASE("penalization sweep: monotone up, dominated, converging") {
    TreeModel tree = build_tree(1.0, 8, 1);
    for (const char* id : {"zero", "linear", "ucz"}) {
        std::map<std::string, double> params;
        if (std::string(id) == "linear") params = {{"a", -0.4}, {"b", 0.3}};
        if (std::string(id) == "ucz") params = {{"a", -0.3}, {"b", 0.4}, {"c", -0.3}};
        auto sc = barrier_scenario(tree, make_generator(id, params), 0.35);
        std::vector<double> schedule;
        for (int j = 0; j <= 10; ++j) schedule.push_back(double(1 << j));
        auto report = penalization_sweep(sc, schedule);
        INFO("driver ", std::string(id));
        CHECK(report.max_monotonicity_violation <= 1e-12);
        CHECK(report.max_domination_violation <= 1e-10);
        CHECK(report.entries.front().sp_gap > 1e-6);  // barrier genuinely active
        for (std::size_t i = 1; i < report.entries.size(); ++i) {
            CHECK(report.entries[i].sp_gap < report.entries[i - 1].sp_gap);
            CHECK(report.entries[i].barrier_deficit <=
                  report.entries[i - 1].barrier_deficit + 1e-15);
        }
        CHECK(report.entries.back().sp_gap <= 1e-2);
        CHECK(std::isfinite(report.eta_bound));
    }
}

TEST_CASE("penalized runs on an active barrier report a positive deficit") {
    TreeModel tree = build_tree(1.0, 8, 1);
    auto sc = barrier_scenario(tree, make_generator("zero"), 0.35);
    auto pen = solve_penalized(sc, 1.0);
    auto res = skorokhod_residual(pen, *sc.barrier, sc.p);
    CHECK(res.barrier_deficit > 1e-6);
}

TEST_CASE("dominator decomposition reproduces the process") {
    TreeModel tree = build_tree(1.0, 6, 1);
    SplitMix64 rng(21);
    AdaptedProcess x = testsupport::random_process(tree, rng, -1.0, 2.0);
    auto dec = decompose_dominator(tree, x);
    // X_k = E[X_{k+1}|F_k] - dC_k with H the representation integrand
    for (int k = 0; k < 6; ++k) {
        auto m = conditional_expectation(x.level(k + 1), tree, k);
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const double dc = dec.C.at(k + 1, tree.child_of(v, 0)) - dec.C.at(k, v);
            CHECK(std::abs(x.at(k, v) - (m[v] - dc)) <= 1e-10);
            for (int c = 0; c < tree.branching(); ++c) {
                const double rebuilt = x.at(k, v) + dc + dec.H.at(k, v, 0) * tree.increment(c, 0);
                CHECK(std::abs(rebuilt - x.at(k + 1, tree.child_of(v, c))) <= 1e-10);
            }
        }
    }
}

TEST_CASE("nonpositive barriers admit the zero auto-dominator") {
    TreeModel tree = build_tree(1.0, 5, 1);
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = make_generator("linear", {{"a", 0.3}, {"b", 0.2}, {"c", 0.1}});
    AdaptedProcess b = brownian(tree);
    sc.barrier = AdaptedProcess(tree, 1);
    for (int k = 0; k <= 5; ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            sc.barrier->at(k, v) = -1.0 - 0.2 * std::abs(b.at(k, v));
    sc.terminal.assign(tree.leaf_count(), 0.0);
    auto report = check_h6(sc);
    CHECK(report.used_auto_dominator);
    CHECK(report.dominates);
    CHECK(report.finite);
    CHECK(report.g_on_x_hp == doctest::Approx(0.1).epsilon(1e-12));  // g(0) = c integrated over T=1
}

TEST_CASE("the projection solution dominates its own barrier") {
    TreeModel tree = build_tree(1.0, 7, 1);
    auto sc = barrier_scenario(tree, make_generator("zero"), 0.3);
    auto sol = solve_reflected_projection(sc);
    auto report = check_h6(sc, &sol.Y);
    CHECK(report.dominates);
    CHECK_FALSE(report.used_auto_dominator);
}

TEST_CASE("an undercutting dominator is rejected") {
    TreeModel tree = build_tree(1.0, 4, 1);
    auto sc = barrier_scenario(tree, make_generator("zero"), 0.5);
    AdaptedProcess bad(tree, 1);  // all zeros, below an 0.5-shifted barrier somewhere
    CHECK_THROWS_AS(check_h6(sc, &bad), Error);
}

TEST_CASE("the integrability bound holds on solved scenarios") {
    TreeModel tree = build_tree(1.0, 8, 1);
    for (const char* id : {"linear", "ucz", "h2w_sin"}) {
        std::map<std::string, double> params;
        if (std::string(id) == "linear") params = {{"a", 0.5}, {"b", 0.4}, {"c", 0.2}};
        if (std::string(id) == "ucz") params = {{"a", 0.3}, {"b", 0.6}};
        if (std::string(id) == "h2w_sin") params = {{"a", 0.2}, {"b", 0.5}, {"f", 0.1}};
        auto sc = barrier_scenario(tree, make_generator(id, params), 0.2);
        for (double p : {1.5, 2.0, 3.0}) {
            sc.p = NormParams(p);
            auto sol = solve_reflected_projection(sc);
            auto report = theorem3_necessity(sc, sol);
            INFO(id, " p=", p);
            CHECK(report.pass);
            CHECK(std::isfinite(report.g_y0_hp));
        }
    }
}
