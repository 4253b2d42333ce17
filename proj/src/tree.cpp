#include "rbsde/tree.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace rbsde {

int TreeModel::size_limit() {
    if (const char* env = std::getenv("RBSDE_SIZE_LIMIT")) {
        char* end = nullptr;
        long value = std::strtol(env, &end, 10);
        if (end != env && value >= 1 && value <= 30) return int(value);
    }
    return 22;
}

TreeModel::TreeModel(double horizon, int depth, int dim)
    : horizon_(horizon), depth_(depth), dim_(dim) {
    if (!(horizon > 0.0))
        fail(ErrorKind::InvalidParameter, "tree horizon T must be positive");
    if (depth < 1)
        fail(ErrorKind::InvalidParameter, "tree depth N must be at least 1");
    if (dim < 1)
        fail(ErrorKind::InvalidParameter, "tree dimension d must be at least 1");
    const int limit = size_limit();
    if (dim * depth > limit)
        fail(ErrorKind::SizeLimit,
             "d*N = " + std::to_string(dim * depth) + " exceeds the size limit " +
                 std::to_string(limit));
    step_ = horizon_ / depth_;
    step_sqrt_ = std::sqrt(step_);
    leaf_weight_ = std::ldexp(1.0, -dim_ * depth_);
}

TreeModel build_tree(double horizon, int depth, int dim) {
    return TreeModel(horizon, depth, dim);
}

AdaptedProcess::AdaptedProcess(const TreeModel& tree, int width)
    : tree_(&tree), width_(width) {
    values_.resize(tree.depth() + 1);
    for (int k = 0; k <= tree.depth(); ++k)
        values_[k].assign(tree.node_count(k) * std::size_t(width), 0.0);
}

std::vector<double> conditional_expectation(std::span<const double> child_values,
                                            const TreeModel& tree, int level) {
    if (level < 0 || level >= tree.depth())
        fail(ErrorKind::LevelMismatch, "conditioning level out of range");
    if (child_values.size() != tree.node_count(level + 1))
        fail(ErrorKind::LevelMismatch,
             "value family is not indexed by level " + std::to_string(level + 1));
    const int b = tree.branching();
    const double w = 1.0 / b;
    std::vector<double> out(tree.node_count(level));
    for (std::uint64_t v = 0; v < out.size(); ++v) {
        double acc = 0.0;
        for (int c = 0; c < b; ++c) acc += child_values[tree.child_of(v, c)];
        out[v] = acc * w;
    }
    return out;
}

std::vector<double> integrand_from(std::span<const double> child_values,
                                   const TreeModel& tree, int level) {
    if (level < 0 || level >= tree.depth())
        fail(ErrorKind::LevelMismatch, "integrand level out of range");
    if (child_values.size() != tree.node_count(level + 1))
        fail(ErrorKind::LevelMismatch,
             "value family is not indexed by level " + std::to_string(level + 1));
    const int d = tree.dim();
    const int b = tree.branching();
    // E[X dB]/h = (1/2^d) sum_c X_c (+-sqrt(h)) / h = (sum_c +-X_c) / (2^d sqrt(h))
    const double scale = 1.0 / (b * tree.step_sqrt());
    std::vector<double> out(tree.node_count(level) * std::size_t(d), 0.0);
    for (std::uint64_t v = 0; v < tree.node_count(level); ++v) {
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int c = 0; c < b; ++c) {
                const double sign = ((c >> j) & 1) ? -1.0 : 1.0;
                acc += sign * child_values[tree.child_of(v, c)];
            }
            out[v * d + j] = acc * scale;
        }
    }
    return out;
}

AdaptedProcess brownian(const TreeModel& tree) {
    AdaptedProcess b(tree, tree.dim());
    const int d = tree.dim();
    for (int k = 0; k < tree.depth(); ++k) {
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            for (int c = 0; c < tree.branching(); ++c) {
                const std::uint64_t child = tree.child_of(v, c);
                for (int j = 0; j < d; ++j)
                    b.at(k + 1, child, j) = b.at(k, v, j) + tree.increment(c, j);
            }
        }
    }
    return b;
}

AdaptedProcess conditional_tower(const TreeModel& tree, std::span<const double> leaf_values) {
    if (leaf_values.size() != tree.leaf_count())
        fail(ErrorKind::LevelMismatch, "terminal family is not leaf-indexed");
    AdaptedProcess out(tree, 1);
    std::copy(leaf_values.begin(), leaf_values.end(), out.level(tree.depth()).begin());
    for (int k = tree.depth() - 1; k >= 0; --k) {
        auto avg = conditional_expectation(out.level(k + 1), tree, k);
        std::copy(avg.begin(), avg.end(), out.level(k).begin());
    }
    return out;
}

AdaptedProcess stochastic_integral(const AdaptedProcess& integrand, const TreeModel& tree) {
    if (!integrand.attached() || !integrand.tree().same_shape(tree))
        fail(ErrorKind::LevelMismatch, "integrand lives on a different tree");
    if (integrand.width() != tree.dim())
        fail(ErrorKind::LevelMismatch, "integrand width must equal the tree dimension");
    AdaptedProcess m(tree, 1);
    const int d = tree.dim();
    for (int k = 0; k < tree.depth(); ++k) {
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
            for (int c = 0; c < tree.branching(); ++c) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j)
                    dot += integrand.at(k, v, j) * tree.increment(c, j);
                m.at(k + 1, tree.child_of(v, c)) = m.at(k, v) + dot;
            }
        }
    }
    return m;
}

double expectation(const TreeModel& tree, std::span<const double> leaf_values) {
    if (leaf_values.size() != tree.leaf_count())
        fail(ErrorKind::LevelMismatch, "expectation needs a leaf-indexed family");
    double acc = 0.0;
    for (double v : leaf_values) acc += v;
    return acc * tree.leaf_weight();
}

namespace {

double norm_coordinate_sq(const AdaptedProcess& z, int level, std::uint64_t node) {
    double acc = 0.0;
    for (int j = 0; j < z.width(); ++j) {
        const double v = z.at(level, node, j);
        acc += v * v;
    }
    return acc;
}

// Forward path accumulation: step(level, parent-node, child-node, carried value).
template <typename Step>
std::vector<double> accumulate_paths(const TreeModel& tree, double seed, Step step) {
    std::vector<double> carried{seed};
    for (int k = 0; k < tree.depth(); ++k) {
        std::vector<double> next(tree.node_count(k + 1));
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int c = 0; c < tree.branching(); ++c) {
                const std::uint64_t child = tree.child_of(v, c);
                next[child] = step(k, v, child, carried[v]);
            }
        carried = std::move(next);
    }
    return carried;
}

double leaf_power_mean(const TreeModel& tree, std::span<const double> leaf_values, double p) {
    double acc = 0.0;
    for (double v : leaf_values) acc += std::pow(v, p);
    return std::pow(acc * tree.leaf_weight(), 1.0 / p);
}

} // namespace

double sp_norm(const AdaptedProcess& process, const NormParams& p) {
    const TreeModel& tree = process.tree();
    auto sup = accumulate_paths(tree, std::abs(process.at(0, 0)),
                                [&](int k, std::uint64_t, std::uint64_t child, double run) {
                                    return std::max(run, std::abs(process.at(k + 1, child)));
                                });
    return leaf_power_mean(tree, sup, p.p);
}

double mp_norm(const AdaptedProcess& process, const NormParams& p) {
    const TreeModel& tree = process.tree();
    const double h = tree.step();
    auto quad = accumulate_paths(tree, 0.0,
                                 [&](int k, std::uint64_t v, std::uint64_t, double run) {
                                     return run + norm_coordinate_sq(process, k, v) * h;
                                 });
    for (double& q : quad) q = std::sqrt(q);
    return leaf_power_mean(tree, quad, p.p);
}

double hp_norm(const AdaptedProcess& process, const NormParams& p) {
    const TreeModel& tree = process.tree();
    const double h = tree.step();
    auto integral = accumulate_paths(tree, 0.0,
                                     [&](int k, std::uint64_t v, std::uint64_t, double run) {
                                         return run + std::abs(process.at(k, v)) * h;
                                     });
    return leaf_power_mean(tree, integral, p.p);
}

double variation_norm(const AdaptedProcess& process, const NormParams& p) {
    const TreeModel& tree = process.tree();
    auto var = accumulate_paths(tree, 0.0,
                                [&](int k, std::uint64_t v, std::uint64_t child, double run) {
                                    return run + std::abs(process.at(k + 1, child) - process.at(k, v));
                                });
    return leaf_power_mean(tree, var, p.p);
}

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::SizeLimit: return "SizeLimit";
        case ErrorKind::LevelMismatch: return "LevelMismatch";
        case ErrorKind::RegularizationParameterTooSmall: return "RegularizationParameterTooSmall";
        case ErrorKind::FixedPointDivergence: return "FixedPointDivergence";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::BarrierViolation: return "BarrierViolation";
        case ErrorKind::DominationFailure: return "DominationFailure";
        case ErrorKind::HypothesisNotSatisfied: return "HypothesisNotSatisfied";
        case ErrorKind::DataOrderingViolation: return "DataOrderingViolation";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::UnknownGenerator: return "UnknownGenerator";
    }
    return "Error";
}

} // namespace rbsde
