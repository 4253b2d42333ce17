#include "rbsde/solver.hpp"

#include <cmath>

namespace rbsde {

void ScenarioConfig::validate() const {
    if (tree == nullptr) fail(ErrorKind::InvalidParameter, "scenario has no tree");
    if (terminal.size() != tree->leaf_count())
        fail(ErrorKind::InvalidParameter, "terminal family is not leaf-indexed");
    for (double v : terminal)
        if (!std::isfinite(v)) fail(ErrorKind::NonFiniteValue, "terminal value not finite");
    if (!generator.evaluate) fail(ErrorKind::InvalidParameter, "generator is not evaluable");
    if (forcing.attached()) {
        if (!forcing.tree().same_shape(*tree))
            fail(ErrorKind::LevelMismatch, "forcing lives on a different tree");
        if (forcing.at(0, 0) != 0.0)
            fail(ErrorKind::InvalidParameter, "forcing must start at V_0 = 0");
        for (int k = 0; k <= tree->depth(); ++k)
            for (std::uint64_t v = 0; v < tree->node_count(k); ++v)
                if (!std::isfinite(forcing.at(k, v)))
                    fail(ErrorKind::NonFiniteValue, "forcing increment not finite");
    }
    if (barrier) {
        if (!barrier->attached() || !barrier->tree().same_shape(*tree))
            fail(ErrorKind::LevelMismatch, "barrier lives on a different tree");
        for (std::uint64_t v = 0; v < tree->leaf_count(); ++v)
            if (terminal[v] < barrier->at(tree->depth(), v))
                fail(ErrorKind::BarrierViolation,
                     "terminal value undercuts the barrier at leaf " + std::to_string(v) +
                         " (" + std::to_string(terminal[v]) + " < " +
                         std::to_string(barrier->at(tree->depth(), v)) + ")");
    }
}

std::vector<double> forcing_increment(const ScenarioConfig& sc, int level) {
    const TreeModel& tree = *sc.tree;
    if (!sc.forcing.attached()) return std::vector<double>(tree.node_count(level), 0.0);
    auto out = conditional_expectation(sc.forcing.level(level + 1), tree, level);
    for (std::uint64_t v = 0; v < out.size(); ++v) out[v] -= sc.forcing.at(level, v);
    return out;
}

namespace detail {

namespace {

struct StepResult {
    double y = 0.0;
    double push = 0.0;
    double driver = 0.0;
};

// Resolve one node: y = base(y_eval) + dK with the chosen barrier handling.
// base(u) = m + h g(t,u,z) + dv.
StepResult resolve_node(const ScenarioConfig& sc, BarrierMode mode, double penalty_level,
                        double t, double m, double dv, std::span<const double> z, NodeRef node,
                        double barrier_value) {
    const double h = sc.tree->step();
    const auto& g = sc.generator;

    if (sc.scheme.kind == SchemeKind::Explicit) {
        StepResult r;
        r.driver = eval(g, t, m, z, node);
        const double base = m + h * r.driver + dv;
        switch (mode) {
            case BarrierMode::None:
                r.y = base;
                break;
            case BarrierMode::Projection:
                r.push = std::max(barrier_value - base, 0.0);
                r.y = base + r.push;
                break;
            case BarrierMode::Penalty: {
                const double hn = h * penalty_level;
                if (base >= barrier_value || hn == 0.0) {
                    r.y = base;
                } else {
                    // y = base + h n (L - y) solved exactly
                    r.y = (base + hn * barrier_value) / (1.0 + hn);
                    r.push = hn * (barrier_value - r.y);
                    r.y = base + r.push;
                }
                break;
            }
        }
        return r;
    }

    // fixed-point mode: iterate on the resolved value
    const double omega = sc.scheme.damping;
    double u = m;
    StepResult r;
    for (int it = 0; it < sc.scheme.max_iterations; ++it) {
        const double gval = eval(g, t, u, z, node);
        const double base = m + h * gval + dv;
        double next = base;
        double push = 0.0;
        switch (mode) {
            case BarrierMode::None:
                break;
            case BarrierMode::Projection:
                push = std::max(barrier_value - base, 0.0);
                next = base + push;
                break;
            case BarrierMode::Penalty: {
                const double hn = h * penalty_level;
                if (base < barrier_value && hn > 0.0) {
                    next = (base + hn * barrier_value) / (1.0 + hn);
                    push = hn * (barrier_value - next);
                    next = base + push;
                }
                break;
            }
        }
        const double blended = (1.0 - omega) * u + omega * next;
        if (std::abs(blended - u) <= sc.scheme.fixed_point_tol) {
            r.y = next;
            r.push = push;
            r.driver = gval;
            return r;
        }
        u = blended;
    }
    fail(ErrorKind::FixedPointDivergence,
         "no fixed point within " + std::to_string(sc.scheme.max_iterations) +
             " iterations at level " + std::to_string(node.level) + ", node " +
             std::to_string(node.index));
}

} // namespace

SolutionTriple backward_solve(const ScenarioConfig& sc, BarrierMode mode, double penalty_level) {
    sc.validate();
    const TreeModel& tree = *sc.tree;
    const int n = tree.depth();
    const int d = tree.dim();

    SolutionTriple sol{AdaptedProcess(tree, 1), AdaptedProcess(tree, d), AdaptedProcess(tree, 1),
                       AdaptedProcess(tree, 1)};
    std::vector<std::vector<double>> pushes(n);  // dK_k per level

    for (std::uint64_t v = 0; v < tree.leaf_count(); ++v) sol.Y.at(n, v) = sc.terminal[v];

    for (int k = n - 1; k >= 0; --k) {
        const double t = tree.time_at(k);
        auto m = conditional_expectation(sol.Y.level(k + 1), tree, k);
        auto z = integrand_from(sol.Y.level(k + 1), tree, k);
        const auto dv_row = forcing_increment(sc, k);
        pushes[k].assign(tree.node_count(k), 0.0);

        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const double dv = dv_row[v];
            const double barrier_value =
                (mode == BarrierMode::None) ? 0.0 : sc.barrier->at(k, v);
            const NodeRef node{k, v};
            std::span<const double> zrow(z.data() + v * d, std::size_t(d));
            const StepResult r =
                resolve_node(sc, mode, penalty_level, t, m[v], dv, zrow, node, barrier_value);
            if (!std::isfinite(r.y) || !std::isfinite(r.driver))
                fail(ErrorKind::NonFiniteValue, "solution blew up at level " + std::to_string(k) +
                                                    ", node " + std::to_string(v) +
                                                    "; refine the grid for this driver");
            sol.Y.at(k, v) = r.y;
            sol.driver.at(k, v) = r.driver;
            for (int j = 0; j < d; ++j) sol.Z.at(k, v, j) = z[v * d + j];
            pushes[k][v] = r.push;
        }
    }

    // cumulative K from the per-step pushes
    for (int k = 0; k < n; ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int c = 0; c < tree.branching(); ++c)
                sol.K.at(k + 1, tree.child_of(v, c)) = sol.K.at(k, v) + pushes[k][v];
    return sol;
}

} // namespace detail

SolutionTriple solve_bsde(const ScenarioConfig& sc) {
    if (sc.has_barrier())
        fail(ErrorKind::InvalidParameter,
             "solve_bsde expects no barrier; use the reflected solvers");
    return detail::backward_solve(sc, detail::BarrierMode::None, 0.0);
}

ApproximationReport solve_bsde_sequence(const ScenarioConfig& sc, SequenceKind kind,
                                        std::span<const double> schedule,
                                        std::vector<SolutionTriple>* solutions) {
    if (schedule.empty()) fail(ErrorKind::InvalidParameter, "empty approximation schedule");
    ApproximationReport report;
    std::vector<SolutionTriple> sols;
    sols.reserve(schedule.size());

    for (double parameter : schedule) {
        ScenarioConfig step = sc;
        switch (kind) {
            case SequenceKind::TruncAbove: step.generator = truncate_above(sc.generator, parameter); break;
            case SequenceKind::TruncBelow: step.generator = truncate_below(sc.generator, parameter); break;
            case SequenceKind::InfConv: step.generator = inf_convolved(sc.generator, parameter); break;
            case SequenceKind::SupConv: step.generator = sup_convolved(sc.generator, parameter); break;
        }
        sols.push_back(solve_bsde(step));
    }

    const bool upward = (kind == SequenceKind::TruncAbove || kind == SequenceKind::InfConv);
    const TreeModel& tree = *sc.tree;
    const SolutionTriple& last = sols.back();
    for (std::size_t i = 0; i < sols.size(); ++i) {
        ApproximationEntry entry;
        entry.parameter = schedule[i];
        entry.y0 = sols[i].Y.at(0, 0);
        AdaptedProcess ydiff(tree, 1);
        AdaptedProcess zdiff(tree, tree.dim());
        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
                ydiff.at(k, v) = sols[i].Y.at(k, v) - last.Y.at(k, v);
                if (k < tree.depth())
                    for (int j = 0; j < tree.dim(); ++j)
                        zdiff.at(k, v, j) = sols[i].Z.at(k, v, j) - last.Z.at(k, v, j);
            }
        entry.sp_gap = sp_norm(ydiff, sc.p);
        entry.mp_gap = mp_norm(zdiff, sc.p);
        report.entries.push_back(entry);

        if (i > 0) {
            for (int k = 0; k <= tree.depth(); ++k)
                for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
                    const double step_gap = upward
                                                ? sols[i - 1].Y.at(k, v) - sols[i].Y.at(k, v)
                                                : sols[i].Y.at(k, v) - sols[i - 1].Y.at(k, v);
                    report.max_monotonicity_violation =
                        std::max(report.max_monotonicity_violation, step_gap);
                }
        }
    }
    report.monotone = report.max_monotonicity_violation <= 1e-12;
    if (solutions) *solutions = std::move(sols);
    return report;
}

} // namespace rbsde
