#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rbsde/generator.hpp"
#include "rbsde/tree.hpp"

namespace rbsde {

enum class SchemeKind { Explicit, FixedPoint };

struct SchemeConfig {
    SchemeKind kind = SchemeKind::Explicit;
    double fixed_point_tol = 1e-12;
    int max_iterations = 100;
    double damping = 0.5;
};

// One equation instance: terminal data, forcing, optional barrier, driver,
// norm exponent and scheme.
struct ScenarioConfig {
    const TreeModel* tree = nullptr;
    std::string id = "scenario";
    std::vector<double> terminal;           // leaf-indexed
    AdaptedProcess forcing;                 // V at grid times, V_0 = 0; detached -> zero
    std::optional<AdaptedProcess> barrier;  // L
    GeneratorSpec generator;
    NormParams p{2.0};
    SchemeConfig scheme;

    bool has_barrier() const { return barrier.has_value(); }
    void validate() const;
};

struct SolutionTriple {
    AdaptedProcess Y;
    AdaptedProcess Z;       // width d; the level-N row is unused
    AdaptedProcess K;       // cumulative push, K_0 = 0, nondecreasing along paths
    AdaptedProcess driver;  // realized g(t_k, y*, Z_k); the level-N row is unused
};

// Backward solve of the non-reflected equation; the barrier must be absent.
SolutionTriple solve_bsde(const ScenarioConfig& sc);

enum class SequenceKind { TruncAbove, TruncBelow, InfConv, SupConv };

struct ApproximationEntry {
    double parameter = 0.0;  // truncation level n or convolution slope kappa
    double y0 = 0.0;
    double sp_gap = 0.0;     // Y distance to the last schedule entry
    double mp_gap = 0.0;     // Z distance to the last schedule entry
};

struct ApproximationReport {
    std::vector<ApproximationEntry> entries;
    // Node-wise monotonicity of Y across the schedule, in the direction the
    // sequence kind implies (up for trunc-above/inf-conv, down otherwise).
    double max_monotonicity_violation = 0.0;
    bool monotone = true;
};

ApproximationReport solve_bsde_sequence(const ScenarioConfig& sc, SequenceKind kind,
                                        std::span<const double> schedule,
                                        std::vector<SolutionTriple>* solutions = nullptr);

// Step-k forcing increment E[V_{k+1}|F_k] - V_k per level-k node (the raw
// increment whenever V is predictable); zeros when the scenario has none.
std::vector<double> forcing_increment(const ScenarioConfig& sc, int level);

namespace detail {

enum class BarrierMode { None, Projection, Penalty };

// Shared backward sweep.  Projection adds the per-step Skorokhod push
// dK = (ytilde - L)^-; Penalty resolves y = ytilde + h n (y - L)^- exactly.
SolutionTriple backward_solve(const ScenarioConfig& sc, BarrierMode mode, double penalty_level);

} // namespace detail

} // namespace rbsde
