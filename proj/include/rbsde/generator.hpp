#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rbsde/tree.hpp"

namespace rbsde {

// Hypotheses a driver may declare; certification samples the corresponding
// inequalities, it never proves them.
enum class Hypothesis { H1, H1s, H2, H2s, H2w, H3, H3s, H4, H4s, H4w, HH, A, B };

const char* hypothesis_name(Hypothesis h);
std::optional<Hypothesis> hypothesis_from_name(const std::string& name);

// A modulus of continuity: nondecreasing, zero at zero, linear growth
// value(x) <= growth_A * (x + 1).  Osgood moduli are additionally concave.
struct Modulus {
    enum class Kind { ConcaveOsgood, Continuity };
    Kind kind = Kind::Continuity;
    std::function<double(double)> value;
    double growth_A = 1.0;
};

struct ModulusCheckLine {
    std::string label;
    double max_violation = 0.0;
    bool pass = true;
};

std::vector<ModulusCheckLine> check_modulus(const Modulus& m, double x_max = 8.0,
                                            int grid = 1024, double tol = 1e-9);

// Affine envelope of g in the z-slack x = |u - z|:
//   lower:  g(t,y,u) >= offset - rate * x   for all u
//   upper:  g(t,y,u) <= offset + rate * x   for all u
// The rate is the largest admissible regularization slope; convolutions with
// kappa <= rate are rejected.
struct Envelope {
    double offset = 0.0;
    double rate = 0.0;
};

class GeneratorSpec {
public:
    using Evaluator =
        std::function<double(double t, double y, std::span<const double> z, NodeRef node)>;
    using CoeffFn = std::function<double(double t, NodeRef node)>;
    using GrowthFn = std::function<double(double t, double r, NodeRef node)>;
    using EnvelopeFn =
        std::function<Envelope(double t, double y, std::span<const double> z, NodeRef node)>;

    std::string name = "generator";
    Evaluator evaluate;
    std::set<Hypothesis> declared;

    std::optional<Modulus> rho;  // one-sided Osgood modulus in y
    std::optional<Modulus> phi;  // continuity modulus in z
    double growth_A = 1.0;       // shared linear-growth constant of rho and phi

    double mu_one_sided = 0.0;   // monotonicity constant (may be negative)
    double mu = 0.0;             // growth constants in |y| and |z|
    double lambda = 0.0;
    double mu_bar = 0.0, lambda_bar = 0.0;      // one-sided upper growth
    double mu_tilde = 0.0, lambda_tilde = 0.0;  // lower growth along solutions

    CoeffFn f;        // nonnegative coefficient processes; null means zero
    CoeffFn f_bar;
    CoeffFn f_tilde;
    GrowthFn psi;     // growth field psi_t(r), increasing in r, psi_t(0)=0
    GrowthFn varphi;  // sup_{|y|<=r} |g(.,y,0)-g(.,0,0)|; null -> sampled

    EnvelopeFn lower_env;  // null -> derived from the declared hypotheses
    EnvelopeFn upper_env;

    bool declares(Hypothesis h) const { return declared.count(h) > 0; }
};

double eval(const GeneratorSpec& g, double t, double y, std::span<const double> z, NodeRef node);
double eval_coeff(const GeneratorSpec::CoeffFn& fn, double t, NodeRef node);

// sup_{|y|<=r} |g(t,y,0) - g(t,0,0)|, declared or sampled on a 129-point grid.
double general_growth(const GeneratorSpec& g, double t, double r, NodeRef node);

// Coefficients (f, psi, lambda) with |g| <= f + psi(|y|) + lambda |z|,
// declared or derived from (H2w)+(H3).
struct HhCoefficients {
    GeneratorSpec::CoeffFn f;
    GeneratorSpec::GrowthFn psi;
    double lambda = 0.0;
};
HhCoefficients hh_coefficients(const GeneratorSpec& g);

// Coefficients (f_bar, mu_bar, lambda_bar) with g*sgn(y) <= f_bar + mu_bar|y|
// + lambda_bar|z|, declared or derived from (H1)+(H2w)/(HH).
struct BarCoefficients {
    GeneratorSpec::CoeffFn f_bar;
    double mu_bar = 0.0;
    double lambda_bar = 0.0;
};
BarCoefficients bar_coefficients(const GeneratorSpec& g);

Envelope lower_envelope(const GeneratorSpec& g, double t, double y, std::span<const double> z,
                        NodeRef node);
Envelope upper_envelope(const GeneratorSpec& g, double t, double y, std::span<const double> z,
                        NodeRef node);

// --- regularization operators -------------------------------------------------

GeneratorSpec truncate_above(const GeneratorSpec& g, double bound);
GeneratorSpec truncate_below(const GeneratorSpec& g, double bound);

struct ConvolutionConfig {
    int grid_points = 257;     // per coordinate
    double refine_tol = 1e-10; // golden-section window width
};

// inf_u [ g(t,y,u) + kappa |u - z| ]; requires kappa above the envelope rate.
double inf_convolution(const GeneratorSpec& g, double kappa, double t, double y,
                       std::span<const double> z, NodeRef node,
                       const ConvolutionConfig& cfg = {});
// sup_u [ g(t,y,u) - kappa |u - z| ]
double sup_convolution(const GeneratorSpec& g, double kappa, double t, double y,
                       std::span<const double> z, NodeRef node,
                       const ConvolutionConfig& cfg = {});

// Whole-driver wrappers: kappa-Lipschitz in z, same Osgood modulus.
GeneratorSpec inf_convolved(const GeneratorSpec& g, double kappa,
                            const ConvolutionConfig& cfg = {});
GeneratorSpec sup_convolved(const GeneratorSpec& g, double kappa,
                            const ConvolutionConfig& cfg = {});

// --- certification --------------------------------------------------------------

struct SamplerConfig {
    std::uint64_t seed = 0x5eedULL;
    int samples = 4096;
    double t_max = 1.0;
    double y_box = 4.0;
    double z_box = 4.0;
    int dim = 1;
    int max_level = 8;
};

struct CertificationLine {
    std::string label;
    double max_violation = 0.0;
    bool pass = true;
    int samples = 0;
};

struct CertificationReport {
    std::string generator;
    std::string hypothesis;
    std::string box;
    double tol = 0.0;
    std::vector<CertificationLine> lines;
    bool pass = true;
};

CertificationReport certify_hypothesis(const GeneratorSpec& g, Hypothesis hyp,
                                       const SamplerConfig& cfg = {}, double tol = 1e-9);

// Battery over the declared set plus its Remark-style structural implications.
std::vector<CertificationReport> certify_declared(const GeneratorSpec& g,
                                                  const SamplerConfig& cfg = {},
                                                  double tol = 1e-9);

// --- canonical driver library ----------------------------------------------------

// Known ids: zero, constant, linear, absz, osgood_cubic, osgood_log, ucz,
// sqrtz, h2w_sin.
GeneratorSpec make_generator(const std::string& id,
                             const std::map<std::string, double>& params = {});
std::vector<std::string> generator_ids();

} // namespace rbsde
