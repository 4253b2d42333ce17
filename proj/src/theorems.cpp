#include "rbsde/theorems.hpp"

#include <cmath>

namespace rbsde {

namespace {

constexpr double kOrderTol = 1e-12;

void require_same_tree(const ScenarioConfig& sc1, const ScenarioConfig& sc2) {
    if (sc1.tree == nullptr || sc2.tree == nullptr || !sc1.tree->same_shape(*sc2.tree))
        fail(ErrorKind::LevelMismatch, "comparison needs scenarios on the same tree");
}

void require_ordered_data(const ScenarioConfig& sc1, const ScenarioConfig& sc2,
                          bool require_equal_barriers) {
    const TreeModel& tree = *sc1.tree;
    for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
        if (sc1.terminal[v] > sc2.terminal[v] + kOrderTol)
            fail(ErrorKind::DataOrderingViolation,
                 "terminal values are not ordered at leaf " + std::to_string(v));

    auto raw_increment = [&tree](const ScenarioConfig& sc, int k, std::uint64_t parent,
                                 std::uint64_t child) {
        if (!sc.forcing.attached()) return 0.0;
        return sc.forcing.at(k + 1, child) - sc.forcing.at(k, parent);
    };
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int c = 0; c < tree.branching(); ++c) {
                const std::uint64_t child = tree.child_of(v, c);
                if (raw_increment(sc1, k, v, child) > raw_increment(sc2, k, v, child) + kOrderTol)
                    fail(ErrorKind::DataOrderingViolation,
                         "forcing increments are not ordered at level " + std::to_string(k));
            }

    if (require_equal_barriers) {
        if (!sc1.has_barrier() || !sc2.has_barrier())
            fail(ErrorKind::DataOrderingViolation, "both scenarios need a barrier here");
        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                if (std::abs(sc1.barrier->at(k, v) - sc2.barrier->at(k, v)) > kOrderTol)
                    fail(ErrorKind::DataOrderingViolation, "barriers differ at level " +
                                                               std::to_string(k));
        return;
    }
    if (sc1.has_barrier()) {
        if (!sc2.has_barrier())
            fail(ErrorKind::DataOrderingViolation,
                 "first scenario has a barrier, second does not");
        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                if (sc1.barrier->at(k, v) > sc2.barrier->at(k, v) + kOrderTol)
                    fail(ErrorKind::DataOrderingViolation,
                         "barriers are not ordered at level " + std::to_string(k));
    }
}

double step_push(const SolutionTriple& sol, const TreeModel& tree, int k, std::uint64_t v) {
    return sol.K.at(k + 1, tree.child_of(v, 0)) - sol.K.at(k, v);
}

// max over sampled (t, y, z, node) of g1 - g2
double sampled_driver_excess(const GeneratorSpec& g1, const GeneratorSpec& g2) {
    std::uint64_t state = 0x0c0ffeeULL;
    auto next_uniform = [&state](double lo, double hi) {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return lo + (hi - lo) * (double(z >> 11) * 0x1.0p-53);
    };
    double worst = 0.0;
    for (int i = 0; i < 2048; ++i) {
        const double t = next_uniform(0.0, 1.0);
        const double y = next_uniform(-4.0, 4.0);
        const double z = next_uniform(-4.0, 4.0);
        std::span<const double> zz(&z, 1);
        const NodeRef node{0, 0};
        worst = std::max(worst, g1.evaluate(t, y, zz, node) - g2.evaluate(t, y, zz, node));
    }
    return worst;
}

} // namespace

ComparisonVerdict compare_rbsde(const SolutionTriple& first, const SolutionTriple& second,
                                const ScenarioConfig& sc1, const ScenarioConfig& sc2,
                                double tol) {
    require_same_tree(sc1, sc2);
    require_ordered_data(sc1, sc2, false);
    const TreeModel& tree = *sc1.tree;

    ComparisonVerdict verdict;
    verdict.tol = tol;
    const int d = tree.dim();
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const double gap = first.Y.at(k, v) - second.Y.at(k, v);
            verdict.max_y_gap = std::max(verdict.max_y_gap, gap);
            if (gap > 0.0 && k < tree.depth()) {
                std::vector<double> zrow(d);
                for (int j = 0; j < d; ++j) zrow[j] = second.Z.at(k, v, j);
                const NodeRef node{k, v};
                const double t = tree.time_at(k);
                const double excess = eval(sc1.generator, t, second.Y.at(k, v), zrow, node) -
                                      eval(sc2.generator, t, second.Y.at(k, v), zrow, node);
                verdict.indicator_residual = std::max(verdict.indicator_residual, excess);
            }
        }
    verdict.max_y_gap = std::max(verdict.max_y_gap, 0.0);
    verdict.y_pass = verdict.max_y_gap <= tol;
    verdict.k_pass = true;
    return verdict;
}

ComparisonVerdict compare_increments(const SolutionTriple& first, const SolutionTriple& second,
                                     const ScenarioConfig& sc1, const ScenarioConfig& sc2,
                                     double tol) {
    require_same_tree(sc1, sc2);
    require_ordered_data(sc1, sc2, true);
    const double excess = sampled_driver_excess(sc1.generator, sc2.generator);
    if (excess > 1e-9)
        fail(ErrorKind::DataOrderingViolation,
             "drivers are not ordered on the sample battery (excess " + std::to_string(excess) +
                 ")");

    const TreeModel& tree = *sc1.tree;
    ComparisonVerdict verdict;
    verdict.tol = tol;
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            const double gap = step_push(second, tree, k, v) - step_push(first, tree, k, v);
            verdict.max_k_gap = std::max(verdict.max_k_gap, gap);
            verdict.max_y_gap =
                std::max(verdict.max_y_gap, first.Y.at(k, v) - second.Y.at(k, v));
        }
    verdict.max_k_gap = std::max(verdict.max_k_gap, 0.0);
    verdict.max_y_gap = std::max(verdict.max_y_gap, 0.0);
    verdict.k_pass = verdict.max_k_gap <= tol;
    verdict.y_pass = verdict.max_y_gap <= tol;
    return verdict;
}

ExtremalResult extremal_reflected(const ScenarioConfig& sc, ExtremalSide side,
                                  std::span<const double> schedule) {
    if (schedule.empty()) fail(ErrorKind::InvalidParameter, "empty extremal schedule");
    const auto& g = sc.generator;
    const bool h1 = g.declares(Hypothesis::H1) || g.declares(Hypothesis::H1s);
    const bool h2w = g.declares(Hypothesis::H2w) || g.declares(Hypothesis::H2) ||
                     g.declares(Hypothesis::H2s);
    const bool h3 = g.declares(Hypothesis::H3) || g.declares(Hypothesis::H3s) ||
                    g.declares(Hypothesis::HH);
    if (!h1 || !h2w || !h3 || !g.declares(Hypothesis::H4s))
        fail(ErrorKind::HypothesisNotSatisfied,
             "extremal construction needs declared H1, H2w, H3 and H4s");
    auto h6 = check_h6(sc);
    if (!h6.dominates || !h6.finite)
        fail(ErrorKind::HypothesisNotSatisfied, "barrier-growth condition fails");

    const double lambda = hh_coefficients(g).lambda;
    const TreeModel& tree = *sc.tree;

    ExtremalResult result;
    std::vector<SolutionTriple> sols;
    for (double n : schedule) {
        const double kappa = n + 2.0 * lambda;
        result.kappas.push_back(kappa);
        ScenarioConfig step = sc;
        step.generator =
            (side == ExtremalSide::Min) ? inf_convolved(g, kappa) : sup_convolved(g, kappa);
        sols.push_back(solve_reflected_projection(step));
    }

    const SolutionTriple& last = sols.back();
    const bool upward = (side == ExtremalSide::Min);
    for (std::size_t i = 0; i < sols.size(); ++i) {
        ApproximationEntry entry;
        entry.parameter = result.kappas[i];
        entry.y0 = sols[i].Y.at(0, 0);
        AdaptedProcess ydiff(tree, 1);
        AdaptedProcess zdiff(tree, tree.dim());
        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
                ydiff.at(k, v) = sols[i].Y.at(k, v) - last.Y.at(k, v);
                if (k < tree.depth())
                    for (int j = 0; j < tree.dim(); ++j)
                        zdiff.at(k, v, j) = sols[i].Z.at(k, v, j) - last.Z.at(k, v, j);
                if (i > 0) {
                    const double step_gap = upward
                                                ? sols[i - 1].Y.at(k, v) - sols[i].Y.at(k, v)
                                                : sols[i].Y.at(k, v) - sols[i - 1].Y.at(k, v);
                    result.report.max_monotonicity_violation =
                        std::max(result.report.max_monotonicity_violation, step_gap);
                }
            }
        entry.sp_gap = sp_norm(ydiff, sc.p);
        entry.mp_gap = mp_norm(zdiff, sc.p);
        result.report.entries.push_back(entry);
    }
    result.report.monotone = result.report.max_monotonicity_violation <= 1e-12;
    result.solution = std::move(sols.back());
    return result;
}

// --- estimate diagnostics -----------------------------------------------------

namespace {

// Everything a diagnostic can integrate along a path from `level` to the
// horizon, gathered leaf by leaf.
struct PathQuantities {
    std::vector<double> sup_y_pow;        // sup_{[k,N]} |Y|^p
    std::vector<double> quad_pow;         // (sum_{j>=k} |Z_j|^2 h)^{p/2}
    std::vector<double> driver_int_pow;   // (sum_{j>=k} |g_j| h)^p
    std::vector<double> k_incr_pow;       // |K_N - K_k|^p
    std::vector<double> var_pow;          // |V|_T^p, full horizon
    std::vector<double> terminal_abs_pow; // |Y_N|^p
    std::vector<double> sup_ydv_pow;      // sup_s (sum_{j>=s} Y_j dVbar_j)^+ ^{p/2}
    std::vector<double> lemma1ii_lhs;     // sup |Y|^p + sum |Y|^{p-2} |Z|^2 h
    std::vector<double> lemma1ii_rhs;     // |Y_N|^p + sup_s (sum |Y|^{p-1} sgn dVbar)^+
    std::vector<double> y_dk_pow;         // (sum_{j>=k} |Y_j| dK_j)^{p/2}
};

std::vector<std::uint64_t> ancestors_of(const TreeModel& tree, std::uint64_t leaf) {
    std::vector<std::uint64_t> out(tree.depth() + 1);
    out[tree.depth()] = leaf;
    for (int k = tree.depth() - 1; k >= 0; --k) out[k] = tree.parent_of(out[k + 1]);
    return out;
}

PathQuantities gather_paths(const SolutionTriple& sol, const ScenarioConfig& sc, int level) {
    const TreeModel& tree = *sc.tree;
    const int n = tree.depth();
    const int d = tree.dim();
    const double h = tree.step();
    const double p = sc.p.p;

    std::vector<std::vector<double>> dv(n);
    for (int k = 0; k < n; ++k) dv[k] = forcing_increment(sc, k);

    PathQuantities q;
    const std::uint64_t leaves = tree.leaf_count();
    auto resize_all = [&](auto&... vecs) { (vecs.resize(leaves), ...); };
    resize_all(q.sup_y_pow, q.quad_pow, q.driver_int_pow, q.k_incr_pow, q.var_pow,
               q.terminal_abs_pow, q.sup_ydv_pow, q.lemma1ii_lhs, q.lemma1ii_rhs, q.y_dk_pow);

    for (std::uint64_t leaf = 0; leaf < leaves; ++leaf) {
        const auto anc = ancestors_of(tree, leaf);

        double sup_y = std::abs(sol.Y.at(level, anc[level]));
        double quad = 0.0, driver_int = 0.0, k_incr = 0.0, var_total = 0.0;
        double weighted_quad = 0.0;  // sum |Y|^{p-2} |Z|^2 h over [k, N)
        double y_dk = 0.0;
        for (int j = 0; j <= n; ++j) {
            const double yj = std::abs(sol.Y.at(j, anc[j]));
            if (j >= level) sup_y = std::max(sup_y, yj);
            if (j < n) {
                double zsq = 0.0;
                for (int c = 0; c < d; ++c) {
                    const double zc = sol.Z.at(j, anc[j], c);
                    zsq += zc * zc;
                }
                const double dk = sol.K.at(j + 1, anc[j + 1]) - sol.K.at(j, anc[j]);
                if (j >= level) {
                    quad += zsq * h;
                    driver_int += std::abs(sol.driver.at(j, anc[j])) * h;
                    k_incr += dk;
                    y_dk += yj * dk;
                    if (yj != 0.0) weighted_quad += std::pow(yj, p - 2.0) * zsq * h;
                }
                if (sc.forcing.attached())
                    var_total += std::abs(sc.forcing.at(j + 1, anc[j + 1]) -
                                          sc.forcing.at(j, anc[j]));
            }
        }

        // suffix sums of Y dVbar and |Y|^{p-1} sgn(Y) dVbar over [s, N), s >= level
        double suffix_plain = 0.0, suffix_signed = 0.0;
        double best_plain = 0.0, best_signed = 0.0;  // s = N gives the empty sum
        for (int j = n - 1; j >= level; --j) {
            const double yj = sol.Y.at(j, anc[j]);
            const double dvbar = h * sol.driver.at(j, anc[j]) + dv[j][anc[j]] +
                                 (sol.K.at(j + 1, anc[j + 1]) - sol.K.at(j, anc[j]));
            suffix_plain += yj * dvbar;
            const double sgn = (yj > 0.0) - (yj < 0.0);
            suffix_signed += std::pow(std::abs(yj), p - 1.0) * sgn * dvbar;
            best_plain = std::max(best_plain, suffix_plain);
            best_signed = std::max(best_signed, suffix_signed);
        }

        q.sup_y_pow[leaf] = std::pow(sup_y, p);
        q.quad_pow[leaf] = std::pow(quad, 0.5 * p);
        q.driver_int_pow[leaf] = std::pow(driver_int, p);
        q.k_incr_pow[leaf] = std::pow(k_incr, p);
        q.var_pow[leaf] = std::pow(var_total, p);
        q.terminal_abs_pow[leaf] = std::pow(std::abs(sol.Y.at(n, anc[n])), p);
        q.sup_ydv_pow[leaf] = std::pow(best_plain, 0.5 * p);
        q.lemma1ii_lhs[leaf] = std::pow(sup_y, p) + weighted_quad;
        q.lemma1ii_rhs[leaf] = q.terminal_abs_pow[leaf] + best_signed;
        q.y_dk_pow[leaf] = std::pow(y_dk, 0.5 * p);
    }
    return q;
}

// (int_k^T of a nonnegative coefficient)^p per leaf
std::vector<double> coeff_integral_pow(const GeneratorSpec::CoeffFn& fn, const ScenarioConfig& sc,
                                       int level) {
    const TreeModel& tree = *sc.tree;
    std::vector<double> out(tree.leaf_count(), 0.0);
    for (std::uint64_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        const auto anc = ancestors_of(tree, leaf);
        double acc = 0.0;
        for (int j = level; j < tree.depth(); ++j)
            acc += eval_coeff(fn, tree.time_at(j), NodeRef{j, anc[j]}) * tree.step();
        out[leaf] = std::pow(acc, sc.p.p);
    }
    return out;
}

std::vector<double> condexp_at(const TreeModel& tree, std::vector<double> values, int level) {
    for (int k = tree.depth() - 1; k >= level; --k)
        values = conditional_expectation(values, tree, k);
    return values;
}

bool satisfies_growth_a(const GeneratorSpec& g) {
    const bool h1 = g.declares(Hypothesis::H1) || g.declares(Hypothesis::H1s);
    const bool growth = g.declares(Hypothesis::H2w) || g.declares(Hypothesis::H2s) ||
                        g.declares(Hypothesis::HH);
    return g.declares(Hypothesis::A) || (h1 && growth);
}

void require_realized_lower_bound(const SolutionTriple& sol, const ScenarioConfig& sc) {
    if (!sc.generator.declares(Hypothesis::B))
        fail(ErrorKind::HypothesisNotSatisfied, "estimate needs the declared lower bound (B)");
    const TreeModel& tree = *sc.tree;
    const int d = tree.dim();
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            std::vector<double> zrow(d);
            for (int j = 0; j < d; ++j) zrow[j] = sol.Z.at(k, v, j);
            double znorm = 0.0;
            for (double zc : zrow) znorm += zc * zc;
            znorm = std::sqrt(znorm);
            const NodeRef node{k, v};
            const double t = tree.time_at(k);
            const double y = sol.Y.at(k, v);
            const double bound = eval_coeff(sc.generator.f_tilde, t, node) +
                                 sc.generator.mu_tilde * std::abs(y) +
                                 sc.generator.lambda_tilde * znorm;
            if (eval(sc.generator, t, y, zrow, node) < -bound - 1e-9)
                fail(ErrorKind::HypothesisNotSatisfied,
                     "lower bound (B) fails along the solution at level " + std::to_string(k));
        }
}

EstimateDiagnostic finish(EstimateId id, const ScenarioConfig& sc, int level,
                          std::vector<double> lhs_leaf, std::vector<double> rhs_leaf) {
    const TreeModel& tree = *sc.tree;
    auto lhs = condexp_at(tree, std::move(lhs_leaf), level);
    auto rhs = condexp_at(tree, std::move(rhs_leaf), level);

    EstimateDiagnostic diag;
    diag.id = id;
    diag.level = level;
    diag.scenario = sc.id;
    for (std::uint64_t v = 0; v < lhs.size(); ++v) {
        if (rhs[v] <= 1e-14) {
            if (lhs[v] > 1e-12)
                fail(ErrorKind::HypothesisNotSatisfied,
                     "vanishing estimate denominator with nonzero numerator");
            continue;  // ratio reported as 0 for this node
        }
        const double ratio = lhs[v] / rhs[v];
        if (ratio > diag.ratio) {
            diag.ratio = ratio;
            diag.lhs = lhs[v];
            diag.rhs = rhs[v];
        }
    }
    return diag;
}

} // namespace

const char* estimate_id_name(EstimateId id) {
    switch (id) {
        case EstimateId::Lemma1i: return "lemma1-i";
        case EstimateId::Lemma1ii: return "lemma1-ii";
        case EstimateId::Lemma2: return "lemma2";
        case EstimateId::Lemma3i: return "lemma3-i";
        case EstimateId::Lemma3ii: return "lemma3-ii";
        case EstimateId::Lemma3iii: return "lemma3-iii";
        case EstimateId::Prop1: return "prop1";
        case EstimateId::Prop2: return "prop2";
    }
    return "?";
}

EstimateDiagnostic estimate_diagnostic(EstimateId id, const SolutionTriple& sol,
                                       const ScenarioConfig& sc, int level,
                                       const AdaptedProcess* dominator) {
    const TreeModel& tree = *sc.tree;
    if (level < 0 || level >= tree.depth())
        fail(ErrorKind::InvalidParameter, "estimate level must lie in [0, N)");
    const auto q = gather_paths(sol, sc, level);
    const std::uint64_t leaves = tree.leaf_count();
    const auto& g = sc.generator;

    switch (id) {
        case EstimateId::Lemma1i: {
            std::vector<double> rhs(leaves);
            for (std::uint64_t i = 0; i < leaves; ++i)
                rhs[i] = q.sup_y_pow[i] + q.sup_ydv_pow[i];
            return finish(id, sc, level, q.quad_pow, std::move(rhs));
        }
        case EstimateId::Lemma1ii:
            return finish(id, sc, level, q.lemma1ii_lhs, q.lemma1ii_rhs);
        case EstimateId::Lemma2: {
            if (!satisfies_growth_a(g))
                fail(ErrorKind::HypothesisNotSatisfied, "estimate needs the one-sided bound (A)");
            auto fbar = coeff_integral_pow(bar_coefficients(g).f_bar, sc, level);
            std::vector<double> lhs(leaves), rhs(leaves);
            for (std::uint64_t i = 0; i < leaves; ++i) {
                lhs[i] = q.sup_y_pow[i] + q.quad_pow[i];
                rhs[i] = q.terminal_abs_pow[i] + q.var_pow[i] + fbar[i];
            }
            return finish(id, sc, level, std::move(lhs), std::move(rhs));
        }
        case EstimateId::Lemma3i: {
            if (!satisfies_growth_a(g))
                fail(ErrorKind::HypothesisNotSatisfied, "estimate needs the one-sided bound (A)");
            auto fbar = coeff_integral_pow(bar_coefficients(g).f_bar, sc, level);
            std::vector<double> rhs(leaves);
            for (std::uint64_t i = 0; i < leaves; ++i)
                rhs[i] = q.sup_y_pow[i] + q.var_pow[i] + fbar[i] + q.y_dk_pow[i];
            return finish(id, sc, level, q.quad_pow, std::move(rhs));
        }
        case EstimateId::Lemma3ii: {
            require_realized_lower_bound(sol, sc);
            auto ftilde = coeff_integral_pow(g.f_tilde, sc, level);
            std::vector<double> rhs(leaves);
            for (std::uint64_t i = 0; i < leaves; ++i)
                rhs[i] = q.sup_y_pow[i] + q.var_pow[i] + ftilde[i] + q.quad_pow[i];
            return finish(id, sc, level, q.k_incr_pow, std::move(rhs));
        }
        case EstimateId::Lemma3iii: {
            if (!satisfies_growth_a(g))
                fail(ErrorKind::HypothesisNotSatisfied, "estimate needs the one-sided bound (A)");
            require_realized_lower_bound(sol, sc);
            auto fbar = coeff_integral_pow(bar_coefficients(g).f_bar, sc, level);
            auto ftilde = coeff_integral_pow(g.f_tilde, sc, level);
            std::vector<double> lhs(leaves), rhs(leaves);
            for (std::uint64_t i = 0; i < leaves; ++i) {
                lhs[i] = q.quad_pow[i] + q.k_incr_pow[i] + q.driver_int_pow[i];
                rhs[i] = q.sup_y_pow[i] + q.var_pow[i] + fbar[i] + ftilde[i];
            }
            return finish(id, sc, level, std::move(lhs), std::move(rhs));
        }
        case EstimateId::Prop1: {
            const bool h1 = g.declares(Hypothesis::H1) || g.declares(Hypothesis::H1s);
            const bool hh = g.declares(Hypothesis::HH) ||
                            ((g.declares(Hypothesis::H2w) || g.declares(Hypothesis::H2s)) &&
                             (g.declares(Hypothesis::H3) || g.declares(Hypothesis::H3s)));
            if (!h1 || !hh)
                fail(ErrorKind::HypothesisNotSatisfied, "estimate needs (H1) and (HH)");
            auto f_int = coeff_integral_pow(hh_coefficients(g).f, sc, level);
            std::vector<double> lhs(leaves), rhs(leaves);
            for (std::uint64_t i = 0; i < leaves; ++i) {
                lhs[i] = q.sup_y_pow[i] + q.quad_pow[i] + q.driver_int_pow[i];
                rhs[i] = std::pow(std::abs(sc.terminal[i]), sc.p.p) + q.var_pow[i] + f_int[i] +
                         1.0;
            }
            return finish(id, sc, level, std::move(lhs), std::move(rhs));
        }
        case EstimateId::Prop2: {
            const bool h1 = g.declares(Hypothesis::H1) || g.declares(Hypothesis::H1s);
            const bool h2w = g.declares(Hypothesis::H2w) || g.declares(Hypothesis::H2s);
            if (!h1 || !h2w)
                fail(ErrorKind::HypothesisNotSatisfied, "estimate needs (H1) and (H2w)");
            if (!dominator)
                fail(ErrorKind::HypothesisNotSatisfied, "estimate needs a dominating process");
            for (int k = 0; k <= tree.depth(); ++k)
                for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                    if (dominator->at(k, v) < sol.Y.at(k, v) - 1e-10)
                        fail(ErrorKind::HypothesisNotSatisfied,
                             "dominating process undercuts the solution (condition (C))");
            auto f_int = coeff_integral_pow(g.f, sc, level);
            const double zero = 0.0;
            std::span<const double> z0(&zero, 1);
            std::vector<double> lhs(leaves), rhs(leaves);
            for (std::uint64_t leaf = 0; leaf < leaves; ++leaf) {
                const auto anc = ancestors_of(tree, leaf);
                double sup_x = std::abs(dominator->at(level, anc[level]));
                double gx_int = 0.0, g0_int = 0.0;
                for (int j = level; j <= tree.depth(); ++j) {
                    sup_x = std::max(sup_x, std::abs(dominator->at(j, anc[j])));
                    if (j < tree.depth()) {
                        const NodeRef node{j, anc[j]};
                        const double t = tree.time_at(j);
                        gx_int += std::abs(eval(g, t, dominator->at(j, anc[j]), z0, node)) *
                                  tree.step();
                        g0_int += std::abs(eval(g, t, 0.0, z0, node)) * tree.step();
                    }
                }
                lhs[leaf] = q.quad_pow[leaf] + q.k_incr_pow[leaf] + q.driver_int_pow[leaf];
                rhs[leaf] = q.sup_y_pow[leaf] + q.var_pow[leaf] + std::pow(sup_x, sc.p.p) +
                            f_int[leaf] + 1.0 + std::pow(gx_int, sc.p.p) +
                            std::pow(g0_int, sc.p.p);
            }
            return finish(id, sc, level, std::move(lhs), std::move(rhs));
        }
    }
    fail(ErrorKind::InvalidParameter, "unknown estimate id");
}

Proposition7Report proposition7_bound(const ScenarioConfig& sc, std::span<const double> schedule,
                                      const AdaptedProcess* dominator) {
    if (schedule.empty()) fail(ErrorKind::InvalidParameter, "empty penalization schedule");
    if (!sc.has_barrier()) fail(ErrorKind::InvalidParameter, "needs a barrier");
    const TreeModel& tree = *sc.tree;
    const double p = sc.p.p;

    AdaptedProcess auto_x;
    const AdaptedProcess* xbar = dominator;
    if (!xbar) {
        auto_x = running_positive_max(tree, *sc.barrier);
        xbar = &auto_x;
    }

    SolutionTriple first = solve_penalized(sc, schedule.front());

    // eta per leaf: sup|Y^1|^p + |V|_T^p + sup|X|^p + (int f)^p + 1
    //               + (int |g(X,0)|)^p + (int |g(0,0)|)^p
    const std::uint64_t leaves = tree.leaf_count();
    std::vector<double> eta(leaves, 1.0);
    {
        const auto q1 = gather_paths(first, sc, 0);
        auto f_int = coeff_integral_pow(sc.generator.f, sc, 0);
        const double zero = 0.0;
        std::span<const double> z0(&zero, 1);
        for (std::uint64_t leaf = 0; leaf < leaves; ++leaf) {
            const auto anc = ancestors_of(tree, leaf);
            double sup_x = 0.0, gx_int = 0.0, g0_int = 0.0;
            for (int j = 0; j <= tree.depth(); ++j) {
                sup_x = std::max(sup_x, std::abs(xbar->at(j, anc[j])));
                if (j < tree.depth()) {
                    const NodeRef node{j, anc[j]};
                    const double t = tree.time_at(j);
                    gx_int +=
                        std::abs(eval(sc.generator, t, xbar->at(j, anc[j]), z0, node)) *
                        tree.step();
                    g0_int += std::abs(eval(sc.generator, t, 0.0, z0, node)) * tree.step();
                }
            }
            eta[leaf] += q1.sup_y_pow[leaf] + q1.var_pow[leaf] + std::pow(sup_x, p) +
                         f_int[leaf] + std::pow(gx_int, p) + std::pow(g0_int, p);
        }
    }

    Proposition7Report report;
    {
        double acc = 0.0;
        for (double e : eta) acc += e;
        report.eta_mean = acc * tree.leaf_weight();
    }

    for (double n : schedule) {
        SolutionTriple sol = solve_penalized(sc, n);
        for (int level = 0; level < tree.depth(); ++level) {
            const auto q = gather_paths(sol, sc, level);
            auto eta_cond = condexp_at(tree, eta, level);
            auto sup_c = condexp_at(tree, q.sup_y_pow, level);
            auto quad_c = condexp_at(tree, q.quad_pow, level);
            auto k_c = condexp_at(tree, q.k_incr_pow, level);
            auto drv_c = condexp_at(tree, q.driver_int_pow, level);
            for (std::uint64_t v = 0; v < eta_cond.size(); ++v) {
                const double denom = eta_cond[v];
                for (double numer : {sup_c[v], quad_c[v], k_c[v], drv_c[v]})
                    report.ratio = std::max(report.ratio, numer / denom);
            }
        }
    }
    report.finite = std::isfinite(report.ratio);
    return report;
}

} // namespace rbsde
