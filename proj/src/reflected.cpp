#include "rbsde/reflected.hpp"

#include <cmath>

namespace rbsde {

namespace {

void require_barrier(const ScenarioConfig& sc, const char* who) {
    if (!sc.has_barrier())
        fail(ErrorKind::InvalidParameter, std::string(who) + " needs a barrier");
}

AdaptedProcess y_difference(const TreeModel& tree, const AdaptedProcess& a,
                            const AdaptedProcess& b) {
    AdaptedProcess out(tree, 1);
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            out.at(k, v) = a.at(k, v) - b.at(k, v);
    return out;
}

AdaptedProcess z_difference(const TreeModel& tree, const AdaptedProcess& a,
                            const AdaptedProcess& b) {
    AdaptedProcess out(tree, tree.dim());
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int j = 0; j < tree.dim(); ++j)
                out.at(k, v, j) = a.at(k, v, j) - b.at(k, v, j);
    return out;
}

} // namespace

SolutionTriple solve_reflected_projection(const ScenarioConfig& sc) {
    require_barrier(sc, "solve_reflected_projection");
    return detail::backward_solve(sc, detail::BarrierMode::Projection, 0.0);
}

SolutionTriple solve_penalized(const ScenarioConfig& sc, double penalty_level) {
    require_barrier(sc, "solve_penalized");
    if (penalty_level < 0.0)
        fail(ErrorKind::InvalidParameter, "penalty level must be nonnegative");
    return detail::backward_solve(sc, detail::BarrierMode::Penalty, penalty_level);
}

SkorokhodResidual skorokhod_residual(const SolutionTriple& sol, const AdaptedProcess& barrier,
                                     const NormParams& p) {
    const TreeModel& tree = sol.Y.tree();
    if (!barrier.attached() || !barrier.tree().same_shape(tree))
        fail(ErrorKind::LevelMismatch, "barrier lives on a different tree");

    SkorokhodResidual out;

    // complementarity: path sums of (Y_k - L_k) dK_k
    std::vector<double> path_sum{0.0};
    for (int k = 0; k < tree.depth(); ++k) {
        std::vector<double> next(tree.node_count(k + 1));
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const double dk = sol.K.at(k + 1, tree.child_of(v, 0)) - sol.K.at(k, v);
            const double term = (sol.Y.at(k, v) - barrier.at(k, v)) * dk;
            for (int c = 0; c < tree.branching(); ++c)
                next[tree.child_of(v, c)] = path_sum[v] + term;
        }
        path_sum = std::move(next);
    }
    double acc = 0.0;
    for (double s : path_sum) acc += std::abs(s);
    out.complementarity = acc * tree.leaf_weight();

    AdaptedProcess deficit(tree, 1);
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            deficit.at(k, v) = std::max(barrier.at(k, v) - sol.Y.at(k, v), 0.0);
    out.barrier_deficit = sp_norm(deficit, p);
    return out;
}

PenalizationReport penalization_sweep(const ScenarioConfig& sc, std::span<const double> schedule,
                                      std::vector<SolutionTriple>* solutions) {
    require_barrier(sc, "penalization_sweep");
    if (schedule.empty()) fail(ErrorKind::InvalidParameter, "empty penalization schedule");

    const TreeModel& tree = *sc.tree;
    SolutionTriple reference = solve_reflected_projection(sc);

    PenalizationReport report;
    report.reference_y0 = reference.Y.at(0, 0);

    // uniform-bound surrogate denominator: E[|xi|^p + |V|_T^p + (int f)^p + 1]
    const auto hh = hh_coefficients(sc.generator);
    double eta_rhs = 1.0;
    {
        std::vector<double> xp(tree.leaf_count());
        for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
            xp[v] = std::pow(std::abs(sc.terminal[v]), sc.p.p);
        eta_rhs += expectation(tree, xp);
        if (sc.forcing.attached())
            eta_rhs += std::pow(variation_norm(sc.forcing, sc.p), sc.p.p);
        AdaptedProcess fproc(tree, 1);
        for (int k = 0; k < tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                fproc.at(k, v) = eval_coeff(hh.f, tree.time_at(k), NodeRef{k, v});
        eta_rhs += std::pow(hp_norm(fproc, sc.p), sc.p.p);
    }

    std::vector<SolutionTriple> sols;
    sols.reserve(schedule.size());
    const SolutionTriple* previous = nullptr;
    for (double level : schedule) {
        SolutionTriple sol = solve_penalized(sc, level);
        PenalizationEntry entry;
        entry.level = level;
        entry.y0 = sol.Y.at(0, 0);
        entry.sp_gap = sp_norm(y_difference(tree, sol.Y, reference.Y), sc.p);
        entry.mp_gap = mp_norm(z_difference(tree, sol.Z, reference.Z), sc.p);
        entry.k_gap = sp_norm(y_difference(tree, sol.K, reference.K), sc.p);
        const SkorokhodResidual res = skorokhod_residual(sol, *sc.barrier, sc.p);
        entry.barrier_deficit = res.barrier_deficit;
        entry.complementarity = res.complementarity;

        // Prop-1-style numerator: sup |Y|^p + quad(Z)^{p/2} + K_T^p + (int |g|)^p
        const double lhs = std::pow(sp_norm(sol.Y, sc.p), sc.p.p) +
                           std::pow(mp_norm(sol.Z, sc.p), sc.p.p) +
                           std::pow(sp_norm(sol.K, sc.p), sc.p.p) +
                           std::pow(hp_norm(sol.driver, sc.p), sc.p.p);
        entry.bound_ratio = lhs / eta_rhs;
        report.eta_bound = std::max(report.eta_bound, entry.bound_ratio);

        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
                if (previous)
                    report.max_monotonicity_violation =
                        std::max(report.max_monotonicity_violation,
                                 previous->Y.at(k, v) - sol.Y.at(k, v));
                report.max_domination_violation = std::max(
                    report.max_domination_violation, sol.Y.at(k, v) - reference.Y.at(k, v));
            }

        report.entries.push_back(entry);
        sols.push_back(std::move(sol));
        previous = &sols.back();
    }
    report.monotone = report.max_monotonicity_violation <= 1e-12;
    if (solutions) *solutions = std::move(sols);
    return report;
}

BarrierDominator decompose_dominator(const TreeModel& tree, const AdaptedProcess& X) {
    if (!X.attached() || !X.tree().same_shape(tree))
        fail(ErrorKind::LevelMismatch, "dominator lives on a different tree");
    BarrierDominator out{X, AdaptedProcess(tree, tree.dim()), AdaptedProcess(tree, 1)};
    for (int k = 0; k < tree.depth(); ++k) {
        auto m = conditional_expectation(X.level(k + 1), tree, k);
        auto h = integrand_from(X.level(k + 1), tree, k);
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            for (int j = 0; j < tree.dim(); ++j) out.H.at(k, v, j) = h[v * tree.dim() + j];
            const double dc = m[v] - X.at(k, v);
            for (int c = 0; c < tree.branching(); ++c)
                out.C.at(k + 1, tree.child_of(v, c)) = out.C.at(k, v) + dc;
        }
    }
    return out;
}

AdaptedProcess running_positive_max(const TreeModel& tree, const AdaptedProcess& process) {
    AdaptedProcess out(tree, 1);
    out.at(0, 0) = std::max(process.at(0, 0), 0.0);
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int c = 0; c < tree.branching(); ++c) {
                const std::uint64_t child = tree.child_of(v, c);
                out.at(k + 1, child) =
                    std::max(out.at(k, v), std::max(process.at(k + 1, child), 0.0));
            }
    return out;
}

H6Report check_h6(const ScenarioConfig& sc, const AdaptedProcess* dominator) {
    require_barrier(sc, "check_h6");
    const TreeModel& tree = *sc.tree;
    const AdaptedProcess& barrier = *sc.barrier;

    H6Report report;
    AdaptedProcess auto_x;
    const AdaptedProcess* x = dominator;
    if (!x) {
        auto_x = running_positive_max(tree, barrier);
        x = &auto_x;
        report.used_auto_dominator = true;
    }

    report.min_gap = 1e300;
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            report.min_gap = std::min(report.min_gap, x->at(k, v) - barrier.at(k, v));
    report.dominates = report.min_gap >= -1e-12;
    if (dominator && !report.dominates)
        fail(ErrorKind::DominationFailure,
             "provided dominator undercuts the barrier by " + std::to_string(-report.min_gap));

    AdaptedProcess gx(tree, 1);
    const double zero = 0.0;
    std::span<const double> z0(&zero, 1);
    bool finite = true;
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            gx.at(k, v) = eval(sc.generator, tree.time_at(k), x->at(k, v), z0, NodeRef{k, v});
            finite = finite && std::isfinite(gx.at(k, v));
        }
    report.g_on_x_hp = finite ? hp_norm(gx, sc.p) : std::nan("");
    report.finite = finite && std::isfinite(report.g_on_x_hp);
    return report;
}

NecessityReport theorem3_necessity(const ScenarioConfig& sc, const SolutionTriple& sol) {
    const TreeModel& tree = *sc.tree;
    const double p = sc.p.p;
    const double zero = 0.0;
    std::span<const double> z0(&zero, 1);

    AdaptedProcess g_y0(tree, 1);   // |g(t, Y_t, 0)|
    AdaptedProcess g_yz(tree, 1);   // |g(t, Y_t, Z_t)|
    AdaptedProcess fproc(tree, 1);
    const int d = tree.dim();
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const NodeRef node{k, v};
            const double t = tree.time_at(k);
            std::vector<double> zrow(d);
            for (int j = 0; j < d; ++j) zrow[j] = sol.Z.at(k, v, j);
            g_y0.at(k, v) = std::abs(eval(sc.generator, t, sol.Y.at(k, v), z0, node));
            g_yz.at(k, v) = std::abs(eval(sc.generator, t, sol.Y.at(k, v), zrow, node));
            fproc.at(k, v) = eval_coeff(sc.generator.f, t, node);
        }

    NecessityReport report;
    report.g_y0_hp = hp_norm(g_y0, sc.p);
    report.lhs = std::pow(report.g_y0_hp, p);
    const double four_p = std::pow(4.0, p);
    const double term_driver = four_p * std::pow(hp_norm(g_yz, sc.p), p);
    const double term_f = four_p * std::pow(hp_norm(fproc, sc.p), p);
    const double term_y =
        std::pow(4.0 * sc.generator.mu * tree.horizon(), p) * std::pow(sp_norm(sol.Y, sc.p), p);
    const double term_z = std::pow(4.0 * sc.generator.lambda, p) * std::pow(mp_norm(sol.Z, sc.p), p);
    report.rhs = term_driver + term_f + term_y + term_z;
    report.pass = report.lhs <= report.rhs + 1e-12;
    return report;
}

} // namespace rbsde
