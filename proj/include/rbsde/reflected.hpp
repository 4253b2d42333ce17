#pragma once

#include "rbsde/solver.hpp"

namespace rbsde {

// Reference reflected solution: per-step projection onto the barrier,
// dK_k = (ytilde_k - L_k)^-, Y_k = max(ytilde_k, L_k).  With a zero driver
// and no forcing this is the classical backward Snell recursion.
SolutionTriple solve_reflected_projection(const ScenarioConfig& sc);

// Penalized equation: plain backward solve with driver g + n (y - L)^-.
// The returned K is the accumulated penalty h n sum (Y_j - L_j)^-, so the
// triple satisfies the backward identity exactly; n = 0 coincides with
// solve_bsde up to the zero K.
SolutionTriple solve_penalized(const ScenarioConfig& sc, double penalty_level);

struct SkorokhodResidual {
    double complementarity = 0.0;  // E | sum_k (Y_k - L_k) dK_k |
    double barrier_deficit = 0.0;  // || sup_k (Y_k - L_k)^- ||_Sp
};

SkorokhodResidual skorokhod_residual(const SolutionTriple& sol, const AdaptedProcess& barrier,
                                     const NormParams& p);

struct PenalizationEntry {
    double level = 0.0;  // n
    double y0 = 0.0;
    double sp_gap = 0.0;          // ||Y^n - Y^ref||_Sp
    double mp_gap = 0.0;          // ||Z^n - Z^ref||_Mp
    double k_gap = 0.0;           // ||sup_k |K^n - K^ref|||_Sp
    double barrier_deficit = 0.0;
    double complementarity = 0.0;
    double bound_ratio = 0.0;     // conditional-bound surrogate, see sweep notes
};

struct PenalizationReport {
    std::vector<PenalizationEntry> entries;
    double reference_y0 = 0.0;
    double max_monotonicity_violation = 0.0;  // of Y^n increasing in n
    bool monotone = true;
    double max_domination_violation = 0.0;    // of Y^n <= Y^ref
    double eta_bound = 0.0;                   // max over n of the bound surrogate
};

PenalizationReport penalization_sweep(const ScenarioConfig& sc, std::span<const double> schedule,
                                      std::vector<SolutionTriple>* solutions = nullptr);

// Semimartingale dominating the barrier, with its discrete decomposition
// X_k = E[X_{k+1}|F_k] - dC_k and H the martingale integrand.
struct BarrierDominator {
    AdaptedProcess X;
    AdaptedProcess H;  // width d
    AdaptedProcess C;  // cumulative finite-variation part, C_0 = 0
};

BarrierDominator decompose_dominator(const TreeModel& tree, const AdaptedProcess& X);

// Running maximum of the positive part along each path; the default
// barrier dominator candidate.
AdaptedProcess running_positive_max(const TreeModel& tree, const AdaptedProcess& process);

struct H6Report {
    bool dominates = false;
    double min_gap = 0.0;        // min over nodes of X - L
    double g_on_x_hp = 0.0;      // || g(., X, 0) ||_Hp
    bool finite = false;
    bool used_auto_dominator = false;
};

// Checks the barrier-growth condition with the given dominator, or with the
// running maximum of L^+ when none is supplied.
H6Report check_h6(const ScenarioConfig& sc, const AdaptedProcess* dominator = nullptr);

struct NecessityReport {
    double lhs = 0.0;   // E[(int |g(t,Y_t,0)| dt)^p]
    double rhs = 0.0;   // the displayed combination of solution norms
    bool pass = false;
    double g_y0_hp = 0.0;
};

// Integrability of g(., Y, 0) for a solved scenario, with the displayed
// bound assembled from the (H2w) constants.
NecessityReport theorem3_necessity(const ScenarioConfig& sc, const SolutionTriple& sol);

} // namespace rbsde
