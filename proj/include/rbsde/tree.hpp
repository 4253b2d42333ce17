#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbsde/errors.hpp"

namespace rbsde {

struct NodeRef {
    int level = 0;
    std::uint64_t index = 0;
};

// Exact finite noise model: a non-recombining 2^d-ary tree of depth N over
// [0, T].  Level k holds 2^(d*k) nodes; each step moves every coordinate of
// the walk by +-sqrt(h) with equal weight, h = T/N.  A node index encodes the
// full sign history, d bits per step, so arbitrary path-dependent data stays
// exact.  All expectations are plain finite sums over the 2^(d*N) leaves.
class TreeModel {
public:
    TreeModel(double horizon, int depth, int dim = 1);

    double horizon() const { return horizon_; }
    int depth() const { return depth_; }
    int dim() const { return dim_; }
    double step() const { return step_; }
    double step_sqrt() const { return step_sqrt_; }
    int branching() const { return 1 << dim_; }

    std::uint64_t node_count(int level) const { return std::uint64_t(1) << (dim_ * level); }
    std::uint64_t leaf_count() const { return node_count(depth_); }
    double leaf_weight() const { return leaf_weight_; }
    double time_at(int level) const { return step_ * level; }

    std::uint64_t parent_of(std::uint64_t index) const { return index >> dim_; }
    std::uint64_t child_of(std::uint64_t index, int selector) const {
        return (index << dim_) | std::uint64_t(selector);
    }
    // Increment of coordinate `coord` on the step selected by `selector`.
    double increment(int selector, int coord) const {
        return ((selector >> coord) & 1) ? -step_sqrt_ : step_sqrt_;
    }

    bool same_shape(const TreeModel& other) const {
        return depth_ == other.depth_ && dim_ == other.dim_ && horizon_ == other.horizon_;
    }

    // Maximum admissible d*N; default 22, overridable via RBSDE_SIZE_LIMIT.
    static int size_limit();

private:
    double horizon_;
    int depth_;
    int dim_;
    double step_;
    double step_sqrt_;
    double leaf_weight_;
};

TreeModel build_tree(double horizon, int depth, int dim = 1);

// A real-valued process indexed by (level, node); `width` reals per node
// (width = d for integrands like Z).  Level k of a width-w process holds
// w * 2^(d*k) values laid out node-major.
class AdaptedProcess {
public:
    AdaptedProcess() = default;
    AdaptedProcess(const TreeModel& tree, int width = 1);

    const TreeModel& tree() const { return *tree_; }
    bool attached() const { return tree_ != nullptr; }
    int width() const { return width_; }
    int levels() const { return int(values_.size()); }

    double& at(int level, std::uint64_t node, int coord = 0) {
        return values_[level][node * width_ + coord];
    }
    double at(int level, std::uint64_t node, int coord = 0) const {
        return values_[level][node * width_ + coord];
    }

    std::span<double> level(int k) { return values_[k]; }
    std::span<const double> level(int k) const { return values_[k]; }

    std::span<const double> leaves() const { return values_.back(); }

private:
    const TreeModel* tree_ = nullptr;
    int width_ = 1;
    std::vector<std::vector<double>> values_;
};

// Norm exponent; the model is restricted to p > 1.
struct NormParams {
    double p;
    explicit NormParams(double exponent) : p(exponent) {
        if (!(p > 1.0))
            fail(ErrorKind::InvalidParameter, "norm exponent must satisfy p > 1");
    }
};

// --- level-local operations -------------------------------------------------

// Equal-weight average of each node's 2^d children; X lives on level k+1,
// result on level k.
std::vector<double> conditional_expectation(std::span<const double> child_values,
                                            const TreeModel& tree, int level);

// Martingale integrand at level k from the level-(k+1) values:
// Z_k = E[X_{k+1} dB_{k+1} | F_k] / h per coordinate (width d result).
std::vector<double> integrand_from(std::span<const double> child_values,
                                   const TreeModel& tree, int level);

// --- whole-process operations -----------------------------------------------

// The walk itself: width-d process with B_0 = 0.
AdaptedProcess brownian(const TreeModel& tree);

// Conditional expectations of a terminal payoff at every level (level N = xi).
AdaptedProcess conditional_tower(const TreeModel& tree, std::span<const double> leaf_values);

// M_{k+1} = M_k + Z_k . dB_{k+1}; M_0 = 0.  Z has width d.
AdaptedProcess stochastic_integral(const AdaptedProcess& integrand, const TreeModel& tree);

double expectation(const TreeModel& tree, std::span<const double> leaf_values);

// E[ sup_k |Y_k|^p ]^(1/p)
double sp_norm(const AdaptedProcess& process, const NormParams& p);
// E[ (sum_k |Z_k|^2 h)^(p/2) ]^(1/p)
double mp_norm(const AdaptedProcess& process, const NormParams& p);
// E[ (sum_k |X_k| h)^p ]^(1/p)
double hp_norm(const AdaptedProcess& process, const NormParams& p);
// E[ (sum_k |V_{k+1} - V_k|)^p ]^(1/p) -- total increment variation per path
double variation_norm(const AdaptedProcess& process, const NormParams& p);

} // namespace rbsde
