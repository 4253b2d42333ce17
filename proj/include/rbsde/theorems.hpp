#pragma once

#include "rbsde/reflected.hpp"
#include "rbsde/solver.hpp"

namespace rbsde {

struct ComparisonVerdict {
    double max_y_gap = 0.0;          // max over nodes of (Y1 - Y2)^+
    double max_k_gap = 0.0;          // max over steps of (dK2 - dK1)^+
    bool y_pass = false;
    bool k_pass = false;
    double tol = 0.0;
    // informational: worst of 1_{Y1>Y2} (g1 - g2) along the second solution
    double indicator_residual = 0.0;
};

// Ordered-data comparison: validates xi1 <= xi2, dV1 <= dV2, L1 <= L2 first
// (DataOrderingViolation otherwise), then measures (Y1 - Y2)^+.
ComparisonVerdict compare_rbsde(const SolutionTriple& first, const SolutionTriple& second,
                                const ScenarioConfig& sc1, const ScenarioConfig& sc2, double tol);

// Push-measure comparison under equal barriers and ordered drivers: measures
// (dK2 - dK1)^+ per step.  The driver ordering g1 <= g2 is sampled first.
ComparisonVerdict compare_increments(const SolutionTriple& first, const SolutionTriple& second,
                                     const ScenarioConfig& sc1, const ScenarioConfig& sc2,
                                     double tol);

enum class ExtremalSide { Min, Max };

struct ExtremalResult {
    SolutionTriple solution;       // at the last schedule entry
    ApproximationReport report;    // per-kappa root values and gaps
    std::vector<double> kappas;
};

// Minimal (inf-convolution) or maximal (sup-convolution) reflected solution
// along kappa_i = n_i + 2 lambda; solves each regularized equation with the
// projection solver.
ExtremalResult extremal_reflected(const ScenarioConfig& sc, ExtremalSide side,
                                  std::span<const double> schedule);

enum class EstimateId {
    Lemma1i,
    Lemma1ii,
    Lemma2,
    Lemma3i,
    Lemma3ii,
    Lemma3iii,
    Prop1,
    Prop2,
};

const char* estimate_id_name(EstimateId id);

struct EstimateDiagnostic {
    EstimateId id;
    double lhs = 0.0;    // at the worst conditioning node
    double rhs = 0.0;    // constants omitted
    double ratio = 0.0;  // max over level-k nodes of lhs/rhs
    int level = 0;
    std::string scenario;
};

// Conditional-bound diagnostic at a grid level; refuses to run when the
// cited growth assumption is not declared/realized (HypothesisNotSatisfied).
// Prop2 needs a dominating process.
EstimateDiagnostic estimate_diagnostic(EstimateId id, const SolutionTriple& sol,
                                       const ScenarioConfig& sc, int level,
                                       const AdaptedProcess* dominator = nullptr);

struct Proposition7Report {
    double ratio = 0.0;      // single constant covering all schedule entries and levels
    bool finite = false;
    double eta_mean = 0.0;
};

// Uniform conditional bound over a penalization schedule: the four solution
// quantities against E[eta | F_k] at every level, one reported constant.
Proposition7Report proposition7_bound(const ScenarioConfig& sc, std::span<const double> schedule,
                                      const AdaptedProcess* dominator = nullptr);

} // namespace rbsde
