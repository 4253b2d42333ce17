#include "rbsde/battery.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "rbsde/theorems.hpp"

namespace rbsde {

namespace {

constexpr double kExactTol = 1e-12;
constexpr double kOrderTol = 1e-10;

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (double(next() >> 11) * 0x1.0p-53);
    }
};

// Shared state for one battery pass.
struct Battery {
    std::vector<ReportRow> rows;
    std::vector<CriterionResult> criteria;
    std::map<int, TreeModel> trees;  // keyed by depth, d = 1

    const TreeModel& tree(int depth) {
        auto it = trees.find(depth);
        if (it == trees.end()) it = trees.emplace(depth, build_tree(1.0, depth, 1)).first;
        return it->second;
    }

    void row(const std::string& scenario, const std::string& command, long index, double p,
             const std::string& metric, double value) {
        rows.push_back({scenario, command, index, p, metric, value});
    }
};

std::string fmt(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.4g", v);
    return buffer;
}

// Y-gap of two solutions in the running-sup norm.
double sp_distance(const TreeModel& tree, const AdaptedProcess& a, const AdaptedProcess& b,
                   const NormParams& p) {
    AdaptedProcess diff(tree, 1);
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            diff.at(k, v) = a.at(k, v) - b.at(k, v);
    return sp_norm(diff, p);
}

double max_node_gap(const TreeModel& tree, const AdaptedProcess& a, const AdaptedProcess& b) {
    double worst = 0.0;
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            worst = std::max(worst, a.at(k, v) - b.at(k, v));
    return worst;
}

// Barrier-active reflected scenario: concave barrier (a supermartingale) with
// the terminal pinned near it.
ScenarioConfig reflected_scenario(const TreeModel& tree, GeneratorSpec g, double shift) {
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.generator = std::move(g);
    sc.id = sc.generator.name;
    AdaptedProcess b = brownian(tree);
    sc.barrier = AdaptedProcess(tree, 1);
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            sc.barrier->at(k, v) = shift + 0.4 * std::tanh(b.at(k, v));
    sc.terminal.resize(tree.leaf_count());
    for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
        sc.terminal[v] = std::max(std::sin(b.at(tree.depth(), v)) - 0.5,
                                  sc.barrier->at(tree.depth(), v));
    return sc;
}

GeneratorSpec shifted(const GeneratorSpec& g, double delta) {
    GeneratorSpec out = g;
    auto base = g.evaluate;
    out.name = g.name + "+shift";
    out.evaluate = [base, delta](double t, double y, std::span<const double> z, NodeRef node) {
        return base(t, y, z, node) + delta;
    };
    // the constant shift enters the declared offsets
    auto wrap = [delta](const GeneratorSpec::CoeffFn& fn) -> GeneratorSpec::CoeffFn {
        const double d = std::abs(delta);
        if (!fn) return [d](double, NodeRef) { return d; };
        return [fn, d](double t, NodeRef node) { return fn(t, node) + d; };
    };
    out.f = wrap(g.f);
    out.f_bar = wrap(g.f_bar);
    out.f_tilde = wrap(g.f_tilde);
    auto lo = g.lower_env, hi = g.upper_env;
    if (lo)
        out.lower_env = [lo, delta](double t, double y, std::span<const double> z, NodeRef n) {
            Envelope e = lo(t, y, z, n);
            return Envelope{e.offset + delta, e.rate};
        };
    if (hi)
        out.upper_env = [hi, delta](double t, double y, std::span<const double> z, NodeRef n) {
            Envelope e = hi(t, y, z, n);
            return Envelope{e.offset + delta, e.rate};
        };
    return out;
}

// The seven-driver family used across the comparison criteria.
std::vector<GeneratorSpec> battery_generators() {
    return {
        make_generator("linear", {{"a", 0.4}, {"b", 0.4}, {"c", 0.1}}),
        make_generator("absz", {{"a", -0.3}, {"b", 0.5}}),
        make_generator("osgood_cubic", {{"a", 1.0}, {"c", 0.05}, {"btilde_mu", 16.0}}),
        make_generator("osgood_log", {{"a", 0.8}, {"c", 0.1}}),
        make_generator("ucz", {{"a", 0.2}, {"b", 0.5}, {"c", 0.05}}),
        make_generator("sqrtz", {{"a", -0.2}, {"b", 0.6}}),
        make_generator("h2w_sin", {{"a", 0.1}, {"b", 0.4}, {"f", 0.05}}),
    };
}

// --- criterion 1: exactness core ---------------------------------------------

void criterion_exactness(Battery& bat) {
    SplitMix64 rng(0xace1);
    double worst_tower = 0.0, worst_iso = 0.0, worst_rep = 0.0;
    int scenarios = 0;
    for (int i = 0; i < 20; ++i) {
        const int d = (i % 5 == 4) ? 2 : 1;
        const int depth = d == 2 ? 4 + i % 3 : 4 + i % 7;
        TreeModel tree = build_tree(0.5 + 0.1 * i, depth, d);
        ++scenarios;

        std::vector<double> xi(tree.leaf_count());
        for (auto& v : xi) v = rng.uniform(-2.0, 2.0);
        AdaptedProcess tower = conditional_tower(tree, xi);
        worst_tower = std::max(worst_tower, std::abs(tower.at(0, 0) - expectation(tree, xi)));

        AdaptedProcess z(tree, d);
        for (int k = 0; k <= depth; ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                for (int j = 0; j < d; ++j) z.at(k, v, j) = rng.uniform(-2.0, 2.0);
        AdaptedProcess m = stochastic_integral(z, tree);
        std::vector<double> msq(tree.leaf_count());
        for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
            msq[v] = m.at(depth, v) * m.at(depth, v);
        const double iso = std::abs(expectation(tree, msq) -
                                    std::pow(mp_norm(z, NormParams(2.0)), 2.0));
        worst_iso = std::max(worst_iso, iso);

        if (d == 1) {
            for (int k = 0; k < depth; ++k) {
                auto zz = integrand_from(tower.level(k + 1), tree, k);
                for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                    for (int c = 0; c < tree.branching(); ++c) {
                        const double rebuilt =
                            tower.at(k, v) + zz[v] * tree.increment(c, 0);
                        worst_rep = std::max(
                            worst_rep,
                            std::abs(rebuilt - tower.at(k + 1, tree.child_of(v, c))));
                    }
            }
        }
    }
    bat.row("exactness", "battery", 0, 2.0, "tower_residual", worst_tower);
    bat.row("exactness", "battery", 0, 2.0, "isometry_residual", worst_iso);
    bat.row("exactness", "battery", 0, 2.0, "representation_residual", worst_rep);
    const bool pass = worst_tower <= kExactTol && worst_iso <= kExactTol && worst_rep <= kExactTol;
    bat.criteria.push_back({1, "exactness core", pass,
                            "tower " + fmt(worst_tower) + ", isometry " + fmt(worst_iso) +
                                ", representation " + fmt(worst_rep) + " over " +
                                std::to_string(scenarios) + " scenarios"});
}

// --- criterion 2: closed-form convergence ------------------------------------

void criterion_convergence(Battery& bat) {
    const double a = 0.5;
    std::vector<int> depths{4, 8, 16, 32, 64};
    std::vector<double> errors;
    std::vector<int> realizable, blocked;
    for (int n : depths) {
        try {
            TreeModel tree = build_tree(1.0, n, 1);
            AdaptedProcess b = brownian(tree);
            ScenarioConfig sc;
            sc.tree = &tree;
            sc.id = "expdrift";
            sc.generator = make_generator("linear", {{"a", a}});
            sc.terminal.resize(tree.leaf_count());
            for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
                sc.terminal[v] = b.at(n, v) * b.at(n, v);
            auto sol = solve_bsde(sc);
            const double target = std::exp(a * tree.horizon()) * expectation(tree, sc.terminal);
            errors.push_back(std::abs(sol.Y.at(0, 0) - target));
            realizable.push_back(n);
            bat.row("expdrift", "battery", n, 2.0, "closed_form_error", errors.back());
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SizeLimit) throw;
            blocked.push_back(n);
        }
    }
    bool pass = realizable.size() >= 3;
    std::string ratios;
    for (std::size_t i = 1; i < errors.size(); ++i) {
        const double ratio = errors[i - 1] / errors[i];
        bat.row("expdrift", "battery", realizable[i], 2.0, "halving_ratio", ratio);
        ratios += (i > 1 ? ", " : "") + fmt(ratio);
        pass = pass && ratio >= 1.6 && ratio <= 2.4;
    }
    std::string detail = "error halving ratios " + ratios;
    if (!blocked.empty()) {
        detail += "; N in {";
        for (std::size_t i = 0; i < blocked.size(); ++i)
            detail += (i ? "," : "") + std::to_string(blocked[i]);
        detail += "} beyond exact-tree capacity (2^N nodes), verified on the realizable range";
    }
    bat.criteria.push_back({2, "closed-form convergence", pass, detail});
}

// --- criterion 3: Snell equivalence -------------------------------------------

double snell_oracle(const TreeModel& tree, const AdaptedProcess& barrier,
                    const std::vector<double>& terminal, int level, std::uint64_t node) {
    if (level == tree.depth()) return terminal[node];
    double acc = 0.0;
    for (int c = 0; c < tree.branching(); ++c)
        acc += snell_oracle(tree, barrier, terminal, level + 1, tree.child_of(node, c));
    return std::max(barrier.at(level, node), acc / tree.branching());
}

void criterion_snell(Battery& bat) {
    SplitMix64 rng(0x51e11);
    const TreeModel& tree = bat.tree(10);
    double worst = 0.0, worst_comp = 0.0, worst_def = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        ScenarioConfig sc;
        sc.tree = &tree;
        sc.id = "snell" + std::to_string(trial);
        sc.generator = make_generator("zero");
        sc.barrier = AdaptedProcess(tree, 1);
        for (int k = 0; k <= 10; ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                sc.barrier->at(k, v) = rng.uniform(-1.0, 1.0);
        sc.terminal.resize(tree.leaf_count());
        for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
            sc.terminal[v] = std::max(rng.uniform(-2.0, 2.0), sc.barrier->at(10, v));
        auto sol = solve_reflected_projection(sc);
        for (int k = 0; k <= 10; ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                worst = std::max(worst, std::abs(sol.Y.at(k, v) - snell_oracle(tree, *sc.barrier,
                                                                               sc.terminal, k, v)));
        auto res = skorokhod_residual(sol, *sc.barrier, sc.p);
        worst_comp = std::max(worst_comp, res.complementarity);
        worst_def = std::max(worst_def, res.barrier_deficit);
    }
    bat.row("snell", "battery", 0, 2.0, "oracle_gap", worst);
    bat.row("snell", "battery", 0, 2.0, "complementarity", worst_comp);
    bat.row("snell", "battery", 0, 2.0, "barrier_deficit", worst_def);
    const bool pass = worst <= kExactTol && worst_comp <= kExactTol && worst_def <= kExactTol;
    bat.criteria.push_back({3, "Snell equivalence", pass,
                            "max oracle gap " + fmt(worst) + " over 10 randomized barriers"});
}

// --- criterion 4: comparison theorem ------------------------------------------

void criterion_comparison(Battery& bat) {
    const TreeModel& tree = bat.tree(10);
    auto generators = battery_generators();

    // the generators must pass their declared batteries first
    SamplerConfig cfg;
    cfg.samples = 512;
    bool batteries_ok = true;
    for (const auto& g : generators)
        for (const auto& report : certify_declared(g, cfg, 1e-9))
            batteries_ok = batteries_ok && report.pass;

    int pairs = 0;
    double worst = 0.0;
    for (const auto& g : generators) {
        ScenarioConfig base = reflected_scenario(tree, g, 0.25);

        ScenarioConfig up_terminal = base;
        for (auto& v : up_terminal.terminal) v += 0.4;
        ScenarioConfig up_forcing = base;
        up_forcing.forcing = AdaptedProcess(tree, 1);
        for (int k = 0; k < 10; ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                for (int c = 0; c < tree.branching(); ++c)
                    up_forcing.forcing.at(k + 1, tree.child_of(v, c)) =
                        up_forcing.forcing.at(k, v) + 0.1 * tree.step();
        ScenarioConfig up_driver = base;
        up_driver.generator = shifted(g, 0.3);

        auto sol = solve_reflected_projection(base);
        for (const ScenarioConfig* bigger : {&up_terminal, &up_forcing, &up_driver}) {
            auto sol2 = solve_reflected_projection(*bigger);
            auto verdict = compare_rbsde(sol, sol2, base, *bigger, kOrderTol);
            worst = std::max(worst, verdict.max_y_gap);
            ++pairs;
            bat.row(base.id, "battery", pairs, 2.0, "comparison_gap", verdict.max_y_gap);
        }
    }
    const bool pass = batteries_ok && worst <= kOrderTol && pairs >= 20;
    bat.criteria.push_back({4, "comparison theorem", pass,
                            std::to_string(pairs) + " ordered pairs, max (Y1-Y2)+ " + fmt(worst) +
                                (batteries_ok ? "" : "; hypothesis battery FAILED")});
}

// --- criterion 5: penalization ------------------------------------------------

void criterion_penalization(Battery& bat) {
    const TreeModel& tree = bat.tree(10);
    std::vector<double> schedule;
    for (int j = 0; j <= 10; ++j) schedule.push_back(double(1 << j));

    bool pass = true;
    std::string detail;
    for (const char* id : {"zero", "linear"}) {
        GeneratorSpec g = (std::string(id) == "zero")
                              ? make_generator("zero")
                              : make_generator("linear", {{"a", -0.4}, {"b", 0.3}});
        ScenarioConfig sc = reflected_scenario(tree, g, 0.35);
        for (double p : {1.5, 2.0, 3.0}) {
            sc.p = NormParams(p);
            auto report = penalization_sweep(sc, schedule);
            pass = pass && report.max_monotonicity_violation <= 1e-12;
            pass = pass && report.max_domination_violation <= kOrderTol;
            for (std::size_t i = 0; i < report.entries.size(); ++i) {
                const auto& e = report.entries[i];
                if (p == 2.0) {
                    bat.row(sc.id, "battery", long(e.level), p, "sp_gap", e.sp_gap);
                    bat.row(sc.id, "battery", long(e.level), p, "barrier_deficit",
                            e.barrier_deficit);
                }
                if (i > 0) {
                    pass = pass && e.sp_gap < report.entries[i - 1].sp_gap;
                    pass = pass &&
                           e.barrier_deficit <= report.entries[i - 1].barrier_deficit + 1e-15;
                }
            }
            pass = pass && report.entries.back().sp_gap <= 1e-2;
            if (p == 2.0)
                detail += std::string(detail.empty() ? "" : "; ") + sc.id + " final gap " +
                          fmt(report.entries.back().sp_gap);
        }
    }
    bat.criteria.push_back({5, "penalization convergence", pass, detail});
}

// --- criterion 6: increment comparison -----------------------------------------

void criterion_increments(Battery& bat) {
    const TreeModel& tree = bat.tree(10);
    struct Pair {
        GeneratorSpec lo, hi;
    };
    std::vector<Pair> drivers;
    drivers.push_back({make_generator("zero"), make_generator("constant", {{"c", 0.4}})});
    drivers.push_back({make_generator("linear", {{"a", -0.3}, {"b", 0.3}}),
                       shifted(make_generator("linear", {{"a", -0.3}, {"b", 0.3}}), 0.3)});
    drivers.push_back({make_generator("ucz", {{"a", -0.2}, {"b", 0.4}}),
                       shifted(make_generator("ucz", {{"a", -0.2}, {"b", 0.4}}), 0.2)});

    double worst = 0.0;
    long index = 0;
    for (auto& pair : drivers) {
        ScenarioConfig sc1 = reflected_scenario(tree, pair.lo, 0.35);
        ScenarioConfig sc2 = sc1;
        sc2.generator = pair.hi;
        auto s1 = solve_reflected_projection(sc1);
        auto s2 = solve_reflected_projection(sc2);
        auto verdict = compare_increments(s1, s2, sc1, sc2, kOrderTol);
        worst = std::max(worst, verdict.max_k_gap);
        bat.row(sc1.id, "battery", ++index, 2.0, "increment_gap", verdict.max_k_gap);
    }
    bat.criteria.push_back({6, "increment comparison", worst <= kOrderTol,
                            "max (dK2-dK1)+ " + fmt(worst) + " over ordered driver pairs"});
}

// --- criterion 7: extremal solutions --------------------------------------------

void criterion_extremal(Battery& bat) {
    const TreeModel& tree = bat.tree(10);
    const double schedule[] = {0.5, 1.0, 2.0};

    bool pass = true;
    ScenarioConfig lip = reflected_scenario(
        tree, make_generator("absz", {{"a", -0.3}, {"b", 0.4}}), 0.3);
    auto lo = extremal_reflected(lip, ExtremalSide::Min, schedule);
    auto hi = extremal_reflected(lip, ExtremalSide::Max, schedule);
    const double lip_gap = sp_distance(tree, hi.solution.Y, lo.solution.Y, lip.p);
    bat.row(lip.id, "battery", 0, 2.0, "extremal_gap", lip_gap);
    pass = pass && lip_gap <= 1e-6 && lo.report.monotone && hi.report.monotone;

    double worst_sandwich = 0.0;
    for (const char* id : {"h2w_sin", "ucz"}) {
        std::map<std::string, double> params;
        if (std::string(id) == "h2w_sin") params = {{"a", -0.2}, {"b", 0.4}, {"f", 0.05}};
        if (std::string(id) == "ucz") params = {{"a", -0.3}, {"b", 0.4}, {"c", -0.2}};
        ScenarioConfig sc = reflected_scenario(tree, make_generator(id, params), 0.3);
        auto lo2 = extremal_reflected(sc, ExtremalSide::Min, schedule);
        auto hi2 = extremal_reflected(sc, ExtremalSide::Max, schedule);
        auto mid = solve_reflected_projection(sc);
        worst_sandwich = std::max(worst_sandwich,
                                  max_node_gap(tree, lo2.solution.Y, mid.Y));
        worst_sandwich = std::max(worst_sandwich,
                                  max_node_gap(tree, mid.Y, hi2.solution.Y));
        pass = pass && lo2.report.monotone && hi2.report.monotone;
        bat.row(sc.id, "battery", 0, 2.0, "sandwich_violation", worst_sandwich);
    }
    pass = pass && worst_sandwich <= kOrderTol;
    bat.criteria.push_back({7, "extremal solutions", pass,
                            "Lipschitz min/max gap " + fmt(lip_gap) + ", sandwich violation " +
                                fmt(worst_sandwich)});
}

// --- criterion 8: convolution algebra -------------------------------------------

void criterion_convolution(Battery& bat) {
    SplitMix64 rng(0xc0);
    const NodeRef node{0, 0};
    bool pass = true;
    double worst_sandwich = 0.0, worst_mono = 0.0, worst_lip = 0.0;
    for (const char* id : {"ucz", "sqrtz", "h2w_sin", "absz"}) {
        std::map<std::string, double> params = {{"a", 0.2}, {"b", 0.8}};
        if (std::string(id) == "h2w_sin") params = {{"a", 0.2}, {"b", 0.8}, {"f", 0.05}};
        auto g = make_generator(id, params);
        for (int i = 0; i < 40; ++i) {
            const double y = rng.uniform(-2.0, 2.0);
            const double z = rng.uniform(-3.0, 3.0);
            const double z2 = rng.uniform(-3.0, 3.0);
            std::span<const double> zz(&z, 1), zz2(&z2, 1);
            const double base = eval(g, 0.5, y, zz, node);
            double prev_lo = -1e300, prev_hi = 1e300;
            for (double kappa : {1.5, 3.0, 6.0, 12.0}) {
                const double lo = inf_convolution(g, kappa, 0.5, y, zz, node);
                const double hi = sup_convolution(g, kappa, 0.5, y, zz, node);
                worst_sandwich = std::max({worst_sandwich, lo - base, base - hi});
                worst_mono = std::max({worst_mono, prev_lo - lo, hi - prev_hi});
                prev_lo = lo;
                prev_hi = hi;
                const double lo2 = inf_convolution(g, kappa, 0.5, y, zz2, node);
                worst_lip = std::max(worst_lip, std::abs(lo - lo2) - kappa * std::abs(z - z2));
            }
        }
    }
    pass = pass && worst_sandwich <= 1e-9 && worst_mono <= 1e-9 && worst_lip <= 1e-8;
    bat.row("convolution", "battery", 0, 2.0, "sandwich_violation", worst_sandwich);
    bat.row("convolution", "battery", 0, 2.0, "kappa_monotonicity_violation", worst_mono);
    bat.row("convolution", "battery", 0, 2.0, "lipschitz_excess", worst_lip);

    // uniformly-continuous family: the grid gap closes at the top of the schedule
    auto sq = make_generator("sqrtz", {{"b", 1.0}});
    double gap = 0.0;
    for (int i = 0; i <= 256; ++i) {
        const double z = -2.0 + 4.0 * i / 256.0;
        std::span<const double> zz(&z, 1);
        gap = std::max(gap, eval(sq, 0.0, 0.0, zz, node) -
                                inf_convolution(sq, 300.0, 0.0, 0.0, zz, node));
    }
    bat.row("convolution", "battery", 0, 2.0, "uniform_family_gap", gap);
    pass = pass && gap <= 1e-3;

    // truncation sequences stay flat once inactive
    const TreeModel& tree = bat.tree(8);
    ScenarioConfig sc;
    sc.tree = &tree;
    sc.id = "trunc";
    sc.generator = make_generator("constant", {{"c", 1.5}});
    AdaptedProcess b = brownian(tree);
    sc.terminal.resize(tree.leaf_count());
    for (std::uint64_t v = 0; v < tree.leaf_count(); ++v) sc.terminal[v] = std::sin(b.at(8, v));
    const double trunc_schedule[] = {2.0, 4.0, 8.0};
    auto above = solve_bsde_sequence(sc, SequenceKind::TruncAbove, trunc_schedule);
    auto below = solve_bsde_sequence(sc, SequenceKind::TruncBelow, trunc_schedule);
    pass = pass && above.monotone && below.monotone;
    bat.row("trunc", "battery", 0, 2.0, "above_gap", above.entries.front().sp_gap);
    bat.row("trunc", "battery", 0, 2.0, "below_gap", below.entries.front().sp_gap);
    pass = pass && above.entries.front().sp_gap <= kExactTol &&
           below.entries.front().sp_gap <= kExactTol;

    bat.criteria.push_back({8, "convolution algebra", pass,
                            "sandwich " + fmt(worst_sandwich) + ", monotonicity " +
                                fmt(worst_mono) + ", Lipschitz excess " + fmt(worst_lip) +
                                ", top-of-schedule gap " + fmt(gap)});
}

// --- criterion 9: estimate diagnostics ------------------------------------------

void criterion_estimates(Battery& bat) {
    bool pass = true;
    std::string detail;

    // refinement stability of the gated conditional bounds
    const EstimateId ids[] = {EstimateId::Lemma1i,  EstimateId::Lemma1ii, EstimateId::Lemma2,
                              EstimateId::Lemma3i,  EstimateId::Lemma3ii, EstimateId::Lemma3iii,
                              EstimateId::Prop1,    EstimateId::Prop2};
    std::map<EstimateId, std::vector<double>> ratios;
    for (int depth : {8, 16}) {
        const TreeModel& tree = bat.tree(depth);
        ScenarioConfig sc = reflected_scenario(
            tree, make_generator("linear", {{"a", -0.4}, {"b", 0.3}, {"c", 0.2}}), 0.3);
        auto sol = solve_reflected_projection(sc);
        for (EstimateId id : ids) {
            EstimateDiagnostic diag;
            if (id == EstimateId::Prop2)
                diag = estimate_diagnostic(id, sol, sc, 0, &sol.Y);
            else
                diag = estimate_diagnostic(id, sol, sc, 0);
            pass = pass && std::isfinite(diag.ratio);
            ratios[id].push_back(diag.ratio);
            bat.row(sc.id, "battery", depth, 2.0,
                    std::string("ratio_") + estimate_id_name(id), diag.ratio);
        }
    }
    double worst_change = 0.0;
    for (auto& [id, values] : ratios) {
        const double change = std::abs(values[1] - values[0]) / std::max(values[0], 1e-12);
        worst_change = std::max(worst_change, change);
    }
    pass = pass && worst_change < 0.5;
    detail += "max refinement change " + fmt(worst_change);

    // displayed integrability inequality on every solved battery scenario
    const TreeModel& tree = bat.tree(10);
    double worst_excess = 0.0;
    for (const auto& g : battery_generators()) {
        ScenarioConfig sc = reflected_scenario(tree, g, 0.25);
        for (double p : {1.5, 2.0, 3.0}) {
            sc.p = NormParams(p);
            auto sol = solve_reflected_projection(sc);
            auto report = theorem3_necessity(sc, sol);
            pass = pass && report.pass;
            worst_excess = std::max(worst_excess, report.lhs - report.rhs);
        }
    }
    bat.row("integrability", "battery", 0, 2.0, "necessity_excess", worst_excess);
    detail += ", necessity excess " + fmt(worst_excess);

    // barrier-growth checks and the dominator decomposition
    ScenarioConfig sc6 = reflected_scenario(
        tree, make_generator("linear", {{"a", -0.3}, {"b", 0.3}}), 0.3);
    auto h6 = check_h6(sc6);
    pass = pass && h6.dominates && h6.finite;
    bat.row(sc6.id, "battery", 0, 2.0, "h6_g_on_x_hp", h6.g_on_x_hp);
    auto dom = decompose_dominator(tree, running_positive_max(tree, *sc6.barrier));
    double worst_dec = 0.0;
    for (int k = 0; k < tree.depth(); ++k) {
        auto m = conditional_expectation(dom.X.level(k + 1), tree, k);
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const double dc = dom.C.at(k + 1, tree.child_of(v, 0)) - dom.C.at(k, v);
            worst_dec = std::max(worst_dec, std::abs(dom.X.at(k, v) - (m[v] - dc)));
        }
    }
    bat.row(sc6.id, "battery", 0, 2.0, "dominator_decomposition_residual", worst_dec);
    pass = pass && worst_dec <= kOrderTol;

    // one uniform constant over the penalization schedule
    std::vector<double> schedule{1.0, 4.0, 16.0, 64.0, 256.0, 1024.0};
    auto prop7 = proposition7_bound(sc6, schedule);
    pass = pass && prop7.finite;
    bat.row(sc6.id, "battery", 0, 2.0, "prop7_ratio", prop7.ratio);
    detail += ", uniform-bound constant " + fmt(prop7.ratio);

    bat.criteria.push_back({9, "estimate diagnostics", pass, detail});
}

BatteryOutput run_once() {
    Battery bat;
    criterion_exactness(bat);
    criterion_convergence(bat);
    criterion_snell(bat);
    criterion_comparison(bat);
    criterion_penalization(bat);
    criterion_increments(bat);
    criterion_extremal(bat);
    criterion_convolution(bat);
    criterion_estimates(bat);
    BatteryOutput out;
    out.criteria = std::move(bat.criteria);
    out.rows = std::move(bat.rows);
    return out;
}

} // namespace

BatteryOutput run_acceptance_battery() {
    BatteryOutput first = run_once();
    BatteryOutput second = run_once();
    const std::string csv1 = render_csv(first.rows);
    const std::string csv2 = render_csv(second.rows);
    const bool deterministic = csv1 == csv2;
    first.criteria.push_back({10, "determinism", deterministic,
                              deterministic ? "two battery passes are byte-identical"
                                            : "battery passes differ"});
    first.pass = true;
    for (const auto& c : first.criteria) first.pass = first.pass && c.pass;
    return first;
}

} // namespace rbsde
