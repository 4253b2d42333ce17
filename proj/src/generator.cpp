#include "rbsde/generator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace rbsde {

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double znorm(std::span<const double> z) {
    double acc = 0.0;
    for (double v : z) acc += v * v;
    return std::sqrt(acc);
}

double zsum(std::span<const double> z) {
    double acc = 0.0;
    for (double v : z) acc += v;
    return acc;
}

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t v = (state += 0x9e3779b97f4a7c15ULL);
        v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
        v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
        return v ^ (v >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (double(next() >> 11) * 0x1.0p-53);
    }
};

} // namespace

const char* hypothesis_name(Hypothesis h) {
    switch (h) {
        case Hypothesis::H1: return "H1";
        case Hypothesis::H1s: return "H1s";
        case Hypothesis::H2: return "H2";
        case Hypothesis::H2s: return "H2s";
        case Hypothesis::H2w: return "H2w";
        case Hypothesis::H3: return "H3";
        case Hypothesis::H3s: return "H3s";
        case Hypothesis::H4: return "H4";
        case Hypothesis::H4s: return "H4s";
        case Hypothesis::H4w: return "H4w";
        case Hypothesis::HH: return "HH";
        case Hypothesis::A: return "A";
        case Hypothesis::B: return "B";
    }
    return "?";
}

std::optional<Hypothesis> hypothesis_from_name(const std::string& name) {
    static const std::map<std::string, Hypothesis> table = {
        {"H1", Hypothesis::H1},   {"H1s", Hypothesis::H1s}, {"H2", Hypothesis::H2},
        {"H2s", Hypothesis::H2s}, {"H2w", Hypothesis::H2w}, {"H3", Hypothesis::H3},
        {"H3s", Hypothesis::H3s}, {"H4", Hypothesis::H4},   {"H4s", Hypothesis::H4s},
        {"H4w", Hypothesis::H4w}, {"HH", Hypothesis::HH},   {"A", Hypothesis::A},
        {"B", Hypothesis::B}};
    auto it = table.find(name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

std::vector<ModulusCheckLine> check_modulus(const Modulus& m, double x_max, int grid, double tol) {
    std::vector<ModulusCheckLine> lines;
    auto push = [&](const std::string& label, double violation) {
        lines.push_back({label, violation, violation <= tol});
    };
    push("value(0) = 0", std::abs(m.value(0.0)));

    double worst_mono = 0.0, worst_growth = 0.0, worst_concave = 0.0;
    double prev = m.value(0.0);
    for (int i = 1; i <= grid; ++i) {
        const double x = x_max * double(i) / grid;
        const double v = m.value(x);
        worst_mono = std::max(worst_mono, prev - v);
        worst_growth = std::max(worst_growth, v - m.growth_A * (x + 1.0));
        prev = v;
    }
    push("nondecreasing", worst_mono);
    push("value(x) <= A(x+1)", worst_growth);

    if (m.kind == Modulus::Kind::ConcaveOsgood) {
        SplitMix64 rng(17);
        for (int i = 0; i < grid; ++i) {
            const double x1 = rng.uniform(0.0, x_max);
            const double x2 = rng.uniform(0.0, x_max);
            const double mid = m.value(0.5 * (x1 + x2));
            worst_concave = std::max(worst_concave, 0.5 * (m.value(x1) + m.value(x2)) - mid);
        }
        push("midpoint concavity", worst_concave);
    }
    return lines;
}

double eval(const GeneratorSpec& g, double t, double y, std::span<const double> z, NodeRef node) {
    return g.evaluate(t, y, z, node);
}

double eval_coeff(const GeneratorSpec::CoeffFn& fn, double t, NodeRef node) {
    return fn ? fn(t, node) : 0.0;
}

double general_growth(const GeneratorSpec& g, double t, double r, NodeRef node) {
    if (g.varphi) return g.varphi(t, r, node);
    const std::vector<double> zero(8, 0.0);
    std::span<const double> z0(zero.data(), 1);
    const double base = g.evaluate(t, 0.0, z0, node);
    double worst = 0.0;
    const int grid = 128;
    for (int i = 0; i <= grid; ++i) {
        const double y = -r + 2.0 * r * double(i) / grid;
        worst = std::max(worst, std::abs(g.evaluate(t, y, z0, node) - base));
    }
    return worst;
}

HhCoefficients hh_coefficients(const GeneratorSpec& g) {
    HhCoefficients out;
    if (g.declares(Hypothesis::HH) && g.psi) {
        out.f = g.f;
        out.psi = g.psi;
        out.lambda = g.lambda;
        return out;
    }
    // (H2w) + (H3): |g(y,z)| <= [f + |g(.,0,0)|] + [mu r + varphi(r)] + lambda |z|
    auto self = std::make_shared<GeneratorSpec>(g);
    const double mu = g.mu;
    out.f = [self](double t, NodeRef node) {
        const double zero = 0.0;
        std::span<const double> z0(&zero, 1);
        return eval_coeff(self->f, t, node) + std::abs(self->evaluate(t, 0.0, z0, node));
    };
    out.psi = [self, mu](double t, double r, NodeRef node) {
        return mu * r + general_growth(*self, t, r, node);
    };
    out.lambda = g.lambda;
    return out;
}

BarCoefficients bar_coefficients(const GeneratorSpec& g) {
    BarCoefficients out;
    if (g.declares(Hypothesis::A) && (g.f_bar || g.mu_bar > 0.0 || g.lambda_bar > 0.0)) {
        out.f_bar = g.f_bar;
        out.mu_bar = g.mu_bar;
        out.lambda_bar = g.lambda_bar;
        return out;
    }
    // Remark-style derivation from (H1) + (H2w)
    auto self = std::make_shared<GeneratorSpec>(g);
    const double A = g.growth_A;
    out.f_bar = [self, A](double t, NodeRef node) {
        const double zero = 0.0;
        std::span<const double> z0(&zero, 1);
        return eval_coeff(self->f, t, node) + std::abs(self->evaluate(t, 0.0, z0, node)) + A;
    };
    out.mu_bar = g.mu + A;
    out.lambda_bar = g.lambda;
    return out;
}

Envelope lower_envelope(const GeneratorSpec& g, double t, double y, std::span<const double> z,
                        NodeRef node) {
    if (g.lower_env) return g.lower_env(t, y, z, node);
    const double gz = g.evaluate(t, y, z, node);
    if (g.declares(Hypothesis::H2s)) return {gz, g.lambda};
    if (g.declares(Hypothesis::H2)) return {gz - g.growth_A, g.growth_A};
    if (g.declares(Hypothesis::H2w)) {
        const double zero = 0.0;
        std::span<const double> z0(&zero, 1);
        const double g0 = g.evaluate(t, y, z0, node);
        const double slack = eval_coeff(g.f, t, node) + g.mu * std::abs(y) + g.lambda * znorm(z);
        return {g0 - slack, g.lambda};
    }
    if (g.declares(Hypothesis::HH)) {
        auto hh = hh_coefficients(g);
        const double slack =
            eval_coeff(hh.f, t, node) + hh.psi(t, std::abs(y), node) + hh.lambda * znorm(z);
        return {-slack, hh.lambda};
    }
    fail(ErrorKind::InvalidParameter,
         "generator '" + g.name + "' declares no growth hypothesis in z");
}

Envelope upper_envelope(const GeneratorSpec& g, double t, double y, std::span<const double> z,
                        NodeRef node) {
    if (g.upper_env) return g.upper_env(t, y, z, node);
    const double gz = g.evaluate(t, y, z, node);
    if (g.declares(Hypothesis::H2s)) return {gz, g.lambda};
    if (g.declares(Hypothesis::H2)) return {gz + g.growth_A, g.growth_A};
    if (g.declares(Hypothesis::H2w)) {
        const double zero = 0.0;
        std::span<const double> z0(&zero, 1);
        const double g0 = g.evaluate(t, y, z0, node);
        const double slack = eval_coeff(g.f, t, node) + g.mu * std::abs(y) + g.lambda * znorm(z);
        return {g0 + slack, g.lambda};
    }
    if (g.declares(Hypothesis::HH)) {
        auto hh = hh_coefficients(g);
        const double slack =
            eval_coeff(hh.f, t, node) + hh.psi(t, std::abs(y), node) + hh.lambda * znorm(z);
        return {slack, hh.lambda};
    }
    fail(ErrorKind::InvalidParameter,
         "generator '" + g.name + "' declares no growth hypothesis in z");
}

GeneratorSpec truncate_above(const GeneratorSpec& g, double bound) {
    GeneratorSpec out = g;
    out.name = g.name + "^" + std::to_string(bound);
    auto base = std::make_shared<GeneratorSpec>(g);
    out.evaluate = [base, bound](double t, double y, std::span<const double> z, NodeRef node) {
        return std::min(base->evaluate(t, y, z, node), bound);
    };
    auto low = g.lower_env, up = g.upper_env;
    if (low)
        out.lower_env = [low, bound](double t, double y, std::span<const double> z, NodeRef n) {
            Envelope e = low(t, y, z, n);
            return Envelope{std::min(e.offset, bound), e.rate};
        };
    if (up)
        out.upper_env = [up, bound](double t, double y, std::span<const double> z, NodeRef n) {
            Envelope e = up(t, y, z, n);
            return Envelope{std::min(e.offset, bound), e.rate};
        };
    return out;
}

GeneratorSpec truncate_below(const GeneratorSpec& g, double bound) {
    GeneratorSpec out = g;
    out.name = g.name + "_v" + std::to_string(-bound);
    auto base = std::make_shared<GeneratorSpec>(g);
    out.evaluate = [base, bound](double t, double y, std::span<const double> z, NodeRef node) {
        return std::max(base->evaluate(t, y, z, node), -bound);
    };
    auto low = g.lower_env, up = g.upper_env;
    if (low)
        out.lower_env = [low, bound](double t, double y, std::span<const double> z, NodeRef n) {
            Envelope e = low(t, y, z, n);
            return Envelope{std::max(e.offset, -bound), e.rate};
        };
    if (up)
        out.upper_env = [up, bound](double t, double y, std::span<const double> z, NodeRef n) {
            Envelope e = up(t, y, z, n);
            return Envelope{std::max(e.offset, -bound), e.rate};
        };
    return out;
}

namespace {

struct GoldenResult {
    double value;
    double arg;
};

GoldenResult golden_minimize(const std::function<double(double)>& f, double a, double b,
                             double tol) {
    static const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    const double mid = 0.5 * (a + b);
    GoldenResult best{f(mid), mid};
    if (fc < best.value) best = {fc, c};
    if (fd < best.value) best = {fd, d};
    return best;
}

// Minimizes objective(u) over the cube of half-width `radius` around `center`;
// the center value is always a candidate.
double minimize_over_cube(const std::function<double(std::span<const double>)>& objective,
                          std::span<const double> center, double radius,
                          const ConvolutionConfig& cfg) {
    const int d = int(center.size());
    std::vector<double> u(center.begin(), center.end());
    double best = objective(u);
    if (radius <= 0.0) return best;

    const int n = std::max(cfg.grid_points, 3);
    std::vector<double> best_u = u;
    std::vector<int> idx(d, 0);
    const double step2 = 2.0 * radius / (n - 1);
    while (true) {
        for (int j = 0; j < d; ++j) u[j] = center[j] - radius + step2 * idx[j];
        const double v = objective(u);
        if (v < best) {
            best = v;
            best_u = u;
        }
        int j = 0;
        while (j < d && ++idx[j] == n) idx[j++] = 0;
        if (j == d) break;
    }

    // coordinate-wise golden-section around the best grid cell
    u = best_u;
    const int sweeps = (d == 1) ? 1 : 2;
    for (int s = 0; s < sweeps; ++s)
        for (int j = 0; j < d; ++j) {
            auto slice = [&](double x) {
                std::vector<double> probe = u;
                probe[j] = x;
                return objective(probe);
            };
            const double lo = std::max(center[j] - radius, u[j] - step2);
            const double hi = std::min(center[j] + radius, u[j] + step2);
            const GoldenResult r = golden_minimize(slice, lo, hi, cfg.refine_tol);
            if (r.value < best) {
                best = r.value;
                u[j] = r.arg;
            }
        }
    return best;
}

double convolve(const GeneratorSpec& g, double kappa, double t, double y,
                std::span<const double> z, NodeRef node, const ConvolutionConfig& cfg,
                bool inf_side) {
    const Envelope env =
        inf_side ? lower_envelope(g, t, y, z, node) : upper_envelope(g, t, y, z, node);
    if (!(kappa > env.rate))
        fail(ErrorKind::RegularizationParameterTooSmall,
             "kappa = " + std::to_string(kappa) + " does not exceed the growth rate " +
                 std::to_string(env.rate) + " of generator '" + g.name + "'");
    const double gz = g.evaluate(t, y, z, node);
    const double gap = inf_side ? (gz - env.offset) : (env.offset - gz);
    const double radius = std::max(gap, 0.0) / (kappa - env.rate);

    auto objective = [&](std::span<const double> u) {
        double dist2 = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double dz = u[j] - z[j];
            dist2 += dz * dz;
        }
        const double dist = std::sqrt(dist2);
        const double gu = g.evaluate(t, y, u, node);
        return inf_side ? gu + kappa * dist : -(gu - kappa * dist);
    };
    const double value = minimize_over_cube(objective, z, radius, cfg);
    return inf_side ? value : -value;
}

} // namespace

double inf_convolution(const GeneratorSpec& g, double kappa, double t, double y,
                       std::span<const double> z, NodeRef node, const ConvolutionConfig& cfg) {
    return convolve(g, kappa, t, y, z, node, cfg, true);
}

double sup_convolution(const GeneratorSpec& g, double kappa, double t, double y,
                       std::span<const double> z, NodeRef node, const ConvolutionConfig& cfg) {
    return convolve(g, kappa, t, y, z, node, cfg, false);
}

namespace {

GeneratorSpec convolved(const GeneratorSpec& g, double kappa, const ConvolutionConfig& cfg,
                        bool inf_side) {
    GeneratorSpec out = g;
    auto base = std::make_shared<GeneratorSpec>(g);
    out.name = g.name + (inf_side ? "+inf" : "+sup") + std::to_string(kappa);
    out.evaluate = [base, kappa, cfg, inf_side](double t, double y, std::span<const double> z,
                                                NodeRef node) {
        return convolve(*base, kappa, t, y, z, node, cfg, inf_side);
    };
    // kappa-Lipschitz in z by construction; Osgood modulus carries over.
    out.declared.insert(Hypothesis::H2s);
    out.declared.insert(Hypothesis::H2);
    out.declared.insert(Hypothesis::H2w);
    out.lambda = kappa;
    Modulus phi;
    phi.kind = Modulus::Kind::Continuity;
    phi.value = [kappa](double x) { return kappa * x; };
    phi.growth_A = std::max(kappa, g.growth_A);
    out.phi = phi;
    out.growth_A = std::max(g.growth_A, kappa);
    out.lower_env = nullptr;  // H2s default envelope applies
    out.upper_env = nullptr;
    out.varphi = nullptr;     // resampled from the convolved evaluator
    out.psi = nullptr;
    out.declared.erase(Hypothesis::HH);
    return out;
}

} // namespace

GeneratorSpec inf_convolved(const GeneratorSpec& g, double kappa, const ConvolutionConfig& cfg) {
    return convolved(g, kappa, cfg, true);
}

GeneratorSpec sup_convolved(const GeneratorSpec& g, double kappa, const ConvolutionConfig& cfg) {
    return convolved(g, kappa, cfg, false);
}

// --- certification ----------------------------------------------------------

namespace {

struct Sample {
    double t, y1, y2;
    std::vector<double> z1, z2;
    NodeRef node;
};

Sample draw_sample(SplitMix64& rng, const SamplerConfig& cfg) {
    Sample s;
    s.t = rng.uniform(0.0, cfg.t_max);
    s.y1 = rng.uniform(-cfg.y_box, cfg.y_box);
    s.y2 = rng.uniform(-cfg.y_box, cfg.y_box);
    s.z1.resize(cfg.dim);
    s.z2.resize(cfg.dim);
    for (int j = 0; j < cfg.dim; ++j) {
        s.z1[j] = rng.uniform(-cfg.z_box, cfg.z_box);
        s.z2[j] = rng.uniform(-cfg.z_box, cfg.z_box);
    }
    const int level = int(rng.next() % std::uint64_t(cfg.max_level + 1));
    const std::uint64_t count = std::uint64_t(1) << std::min(cfg.dim * level, 50);
    s.node = NodeRef{level, rng.next() % count};
    return s;
}

using ViolationFn = std::function<double(const Sample&)>;

CertificationLine run_battery(const std::string& label, const SamplerConfig& cfg, double tol,
                              const ViolationFn& violation) {
    SplitMix64 rng(cfg.seed);
    double worst = 0.0;
    for (int i = 0; i < cfg.samples; ++i) worst = std::max(worst, violation(draw_sample(rng, cfg)));
    return {label, worst, worst <= tol, cfg.samples};
}

// Continuity battery: the sampled oscillation must shrink with the probe scale.
CertificationLine continuity_battery(const GeneratorSpec& g, const std::string& label,
                                     const SamplerConfig& cfg, double tol, bool move_y,
                                     bool move_z, bool sweep_z) {
    SplitMix64 rng(cfg.seed ^ 0xc077ULL);
    const double coarse = 1e-3, fine = 1e-6;
    double worst_coarse = 0.0, worst_fine = 0.0;
    const int n = std::max(cfg.samples / 8, 64);
    for (int i = 0; i < n; ++i) {
        Sample s = draw_sample(rng, cfg);
        const double dir_y = rng.uniform(-1.0, 1.0);
        std::vector<double> dir_z(cfg.dim);
        for (auto& v : dir_z) v = rng.uniform(-1.0, 1.0);
        const int zsweep = sweep_z ? 5 : 1;
        for (int q = 0; q < zsweep; ++q) {
            std::vector<double> zb = s.z1;
            if (sweep_z)
                for (auto& v : zb) v = rng.uniform(-cfg.z_box, cfg.z_box);
            for (double scale : {coarse, fine}) {
                const double yb = s.y1 + (move_y ? scale * dir_y : 0.0);
                std::vector<double> zp = zb;
                if (move_z)
                    for (int j = 0; j < cfg.dim; ++j) zp[j] += scale * dir_z[j];
                const double diff =
                    std::abs(g.evaluate(s.t, yb, zp, s.node) - g.evaluate(s.t, s.y1, zb, s.node));
                double& slot = (scale == coarse) ? worst_coarse : worst_fine;
                slot = std::max(slot, diff);
            }
        }
    }
    const double allowance = std::max(tol, 0.1 * worst_coarse);
    return {label, std::max(worst_fine - allowance, 0.0), worst_fine <= allowance, n};
}

std::string box_string(const SamplerConfig& cfg) {
    return "t in [0," + std::to_string(cfg.t_max) + "], |y| <= " + std::to_string(cfg.y_box) +
           ", |z| <= " + std::to_string(cfg.z_box) + ", levels <= " + std::to_string(cfg.max_level);
}

void append_modulus_lines(std::vector<CertificationLine>& lines, const std::string& prefix,
                          const Modulus& m, double tol) {
    for (auto& line : check_modulus(m, 8.0, 1024, tol))
        lines.push_back({prefix + " modulus: " + line.label, line.max_violation, line.pass, 1024});
}

void append_primary_lines(std::vector<CertificationLine>& lines, const GeneratorSpec& g,
                          Hypothesis hyp, const SamplerConfig& cfg, double tol) {
    switch (hyp) {
        case Hypothesis::H1: {
            if (!g.rho) {
                lines.push_back({"H1: rho modulus missing", 1.0, false, 0});
                return;
            }
            append_modulus_lines(lines, "H1", *g.rho, tol);
            auto rho = g.rho->value;
            lines.push_back(run_battery(
                "H1: (g(y1,z)-g(y2,z)) sgn(y1-y2) <= rho(|y1-y2|)", cfg, tol,
                [&g, rho](const Sample& s) {
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y2, s.z1, s.node);
                    return diff * sgn(s.y1 - s.y2) - rho(std::abs(s.y1 - s.y2));
                }));
            break;
        }
        case Hypothesis::H1s:
            lines.push_back(run_battery(
                "H1s: (g(y1,z)-g(y2,z)) sgn(y1-y2) <= mu |y1-y2|", cfg, tol,
                [&g](const Sample& s) {
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y2, s.z1, s.node);
                    return diff * sgn(s.y1 - s.y2) - g.mu_one_sided * std::abs(s.y1 - s.y2);
                }));
            break;
        case Hypothesis::H2: {
            if (!g.phi) {
                lines.push_back({"H2: phi modulus missing", 1.0, false, 0});
                return;
            }
            append_modulus_lines(lines, "H2", *g.phi, tol);
            auto phi = g.phi->value;
            lines.push_back(run_battery(
                "H2: |g(y,z1)-g(y,z2)| <= phi(|z1-z2|)", cfg, tol, [&g, phi](const Sample& s) {
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y1, s.z2, s.node);
                    std::vector<double> dz(s.z1.size());
                    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = s.z1[j] - s.z2[j];
                    return std::abs(diff) - phi(znorm(dz));
                }));
            break;
        }
        case Hypothesis::H2s:
            lines.push_back(run_battery(
                "H2s: |g(y,z1)-g(y,z2)| <= lambda |z1-z2|", cfg, tol, [&g](const Sample& s) {
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y1, s.z2, s.node);
                    std::vector<double> dz(s.z1.size());
                    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = s.z1[j] - s.z2[j];
                    return std::abs(diff) - g.lambda * znorm(dz);
                }));
            break;
        case Hypothesis::H2w:
            lines.push_back(run_battery(
                "H2w: |g(y,z)-g(y,0)| <= f + mu|y| + lambda|z|", cfg, tol,
                [&g](const Sample& s) {
                    const std::vector<double> zero(s.z1.size(), 0.0);
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y1, zero, s.node);
                    return std::abs(diff) - (eval_coeff(g.f, s.t, s.node) +
                                             g.mu * std::abs(s.y1) + g.lambda * znorm(s.z1));
                }));
            break;
        case Hypothesis::H3: {
            lines.push_back(run_battery(
                "H3: |g(y,0)-g(0,0)| <= varphi(|y|), finite", cfg, tol, [&g](const Sample& s) {
                    const std::vector<double> zero(s.z1.size(), 0.0);
                    const double diff =
                        g.evaluate(s.t, s.y1, zero, s.node) - g.evaluate(s.t, 0.0, zero, s.node);
                    const double bound = general_growth(g, s.t, std::abs(s.y1), s.node);
                    if (!std::isfinite(bound) || !std::isfinite(diff)) return 1.0;
                    return std::abs(diff) - bound;
                }));
            lines.push_back(run_battery("H3: g(.,0,0) finite", cfg, tol, [&g](const Sample& s) {
                const std::vector<double> zero(s.z1.size(), 0.0);
                return std::isfinite(g.evaluate(s.t, 0.0, zero, s.node)) ? 0.0 : 1.0;
            }));
            break;
        }
        case Hypothesis::H3s:
            lines.push_back(
                run_battery("H3s: |g(y,0)| <= f + mu|y|", cfg, tol, [&g](const Sample& s) {
                    const std::vector<double> zero(s.z1.size(), 0.0);
                    return std::abs(g.evaluate(s.t, s.y1, zero, s.node)) -
                           (eval_coeff(g.f, s.t, s.node) + g.mu * std::abs(s.y1));
                }));
            break;
        case Hypothesis::H4:
            lines.push_back(
                continuity_battery(g, "H4: continuity in (y,z)", cfg, tol, true, true, false));
            break;
        case Hypothesis::H4s:
            lines.push_back(
                continuity_battery(g, "H4s: continuity in z", cfg, tol, false, true, false));
            lines.push_back(continuity_battery(
                g, "H4s: continuity in y, uniform over the z box", cfg, tol, true, false, true));
            break;
        case Hypothesis::H4w:
            lines.push_back(
                continuity_battery(g, "H4w: continuity in y", cfg, tol, true, false, false));
            break;
        case Hypothesis::HH: {
            auto hh = hh_coefficients(g);
            lines.push_back(run_battery(
                "HH: |g(y,z)| <= f + psi(|y|) + lambda|z|", cfg, tol, [&g, &hh](const Sample& s) {
                    return std::abs(g.evaluate(s.t, s.y1, s.z1, s.node)) -
                           (eval_coeff(hh.f, s.t, s.node) + hh.psi(s.t, std::abs(s.y1), s.node) +
                            hh.lambda * znorm(s.z1));
                }));
            break;
        }
        case Hypothesis::A: {
            auto bar = bar_coefficients(g);
            lines.push_back(run_battery(
                "A: g(y,z) sgn(y) <= fbar + mubar|y| + lambdabar|z|", cfg, tol,
                [&g, &bar](const Sample& s) {
                    return g.evaluate(s.t, s.y1, s.z1, s.node) * sgn(s.y1) -
                           (eval_coeff(bar.f_bar, s.t, s.node) + bar.mu_bar * std::abs(s.y1) +
                            bar.lambda_bar * znorm(s.z1));
                }));
            break;
        }
        case Hypothesis::B:
            lines.push_back(run_battery(
                "B: g(y,z) >= -(ftilde + mutilde|y| + lambdatilde|z|)", cfg, tol,
                [&g](const Sample& s) {
                    return -g.evaluate(s.t, s.y1, s.z1, s.node) -
                           (eval_coeff(g.f_tilde, s.t, s.node) + g.mu_tilde * std::abs(s.y1) +
                            g.lambda_tilde * znorm(s.z1));
                }));
            break;
    }
}

// One-step structural implications checked alongside the primary battery.
void append_implied_lines(std::vector<CertificationLine>& lines, const GeneratorSpec& g,
                          Hypothesis hyp, const SamplerConfig& cfg, double tol) {
    switch (hyp) {
        case Hypothesis::H1s: {
            const double slope = std::max(g.mu_one_sided, 0.0);
            lines.push_back(run_battery(
                "implied H1 with rho(u) = mu^+ u", cfg, tol, [&g, slope](const Sample& s) {
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y2, s.z1, s.node);
                    return diff * sgn(s.y1 - s.y2) - slope * std::abs(s.y1 - s.y2);
                }));
            break;
        }
        case Hypothesis::H2s: {
            lines.push_back(run_battery(
                "implied H2 with phi(x) = lambda x", cfg, tol, [&g](const Sample& s) {
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y1, s.z2, s.node);
                    std::vector<double> dz(s.z1.size());
                    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = s.z1[j] - s.z2[j];
                    return std::abs(diff) - g.lambda * znorm(dz);
                }));
            lines.push_back(run_battery(
                "implied H2w with (0, 0, lambda)", cfg, tol, [&g](const Sample& s) {
                    const std::vector<double> zero(s.z1.size(), 0.0);
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y1, zero, s.node);
                    return std::abs(diff) - g.lambda * znorm(s.z1);
                }));
            break;
        }
        case Hypothesis::H2: {
            const double A = g.growth_A;
            lines.push_back(run_battery(
                "implied H2w with (A, 0, A)", cfg, tol, [&g, A](const Sample& s) {
                    const std::vector<double> zero(s.z1.size(), 0.0);
                    const double diff = g.evaluate(s.t, s.y1, s.z1, s.node) -
                                        g.evaluate(s.t, s.y1, zero, s.node);
                    return std::abs(diff) - (A + A * znorm(s.z1));
                }));
            break;
        }
        case Hypothesis::H3s:
            append_primary_lines(lines, g, Hypothesis::H3, cfg, tol);
            break;
        case Hypothesis::H4s:
            lines.push_back(
                continuity_battery(g, "implied H4", cfg, tol, true, true, false));
            lines.push_back(
                continuity_battery(g, "implied H4w", cfg, tol, true, false, false));
            break;
        case Hypothesis::H4:
            lines.push_back(
                continuity_battery(g, "implied H4w", cfg, tol, true, false, false));
            break;
        default:
            break;
    }
}

} // namespace

CertificationReport certify_hypothesis(const GeneratorSpec& g, Hypothesis hyp,
                                       const SamplerConfig& cfg, double tol) {
    CertificationReport report;
    report.generator = g.name;
    report.hypothesis = hypothesis_name(hyp);
    report.box = box_string(cfg);
    report.tol = tol;
    append_primary_lines(report.lines, g, hyp, cfg, tol);
    append_implied_lines(report.lines, g, hyp, cfg, tol);
    report.pass = std::all_of(report.lines.begin(), report.lines.end(),
                              [](const CertificationLine& l) { return l.pass; });
    return report;
}

std::vector<CertificationReport> certify_declared(const GeneratorSpec& g,
                                                  const SamplerConfig& cfg, double tol) {
    std::vector<CertificationReport> reports;
    for (Hypothesis h : g.declared) reports.push_back(certify_hypothesis(g, h, cfg, tol));

    const bool has_h2w = g.declares(Hypothesis::H2w) || g.declares(Hypothesis::H2s);
    const bool has_h3 = g.declares(Hypothesis::H3) || g.declares(Hypothesis::H3s);
    if (has_h2w && has_h3 && !g.declares(Hypothesis::HH))
        reports.push_back(certify_hypothesis(g, Hypothesis::HH, cfg, tol));
    const bool has_h1 = g.declares(Hypothesis::H1) || g.declares(Hypothesis::H1s);
    if (has_h1 && (has_h2w || g.declares(Hypothesis::HH)) && !g.declares(Hypothesis::A))
        reports.push_back(certify_hypothesis(g, Hypothesis::A, cfg, tol));
    return reports;
}

// --- canonical driver library -------------------------------------------------

namespace {

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback, std::set<std::string>& seen) {
    seen.insert(key);
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::string& id, const std::map<std::string, double>& params,
                    const std::set<std::string>& seen) {
    for (auto& [key, value] : params) {
        (void)value;
        if (!seen.count(key))
            fail(ErrorKind::InvalidParameter,
                 "generator '" + id + "' does not take a parameter '" + key + "'");
    }
}

Modulus linear_modulus(Modulus::Kind kind, double slope) {
    Modulus m;
    m.kind = kind;
    m.value = [slope](double x) { return slope * x; };
    m.growth_A = std::max(slope, 1.0);
    return m;
}

// u (1 - ln u) on (0,1), capped at 1 beyond; the classical non-integrable
// Osgood modulus.
double rho_log(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * (1.0 - std::log(u));
}

double phi_sqrt(double x) { return x <= 1.0 ? x : std::sqrt(x); }

std::set<Hypothesis> benign_set() {
    return {Hypothesis::H1,  Hypothesis::H1s, Hypothesis::H2,  Hypothesis::H2s, Hypothesis::H2w,
            Hypothesis::H3,  Hypothesis::H3s, Hypothesis::H4,  Hypothesis::H4s, Hypothesis::H4w,
            Hypothesis::HH,  Hypothesis::A,   Hypothesis::B};
}

GeneratorSpec::CoeffFn constant_coeff(double value) {
    if (value == 0.0) return nullptr;
    return [value](double, NodeRef) { return value; };
}

} // namespace

std::vector<std::string> generator_ids() {
    return {"zero",       "constant", "linear", "absz",   "osgood_cubic",
            "osgood_log", "ucz",      "sqrtz",  "h2w_sin"};
}

GeneratorSpec make_generator(const std::string& id, const std::map<std::string, double>& params) {
    std::set<std::string> seen;
    GeneratorSpec g;
    g.name = id;

    if (id == "zero" || id == "constant") {
        const double c = (id == "zero") ? 0.0 : get_param(params, "c", 0.0, seen);
        reject_unknown(id, params, seen);
        g.evaluate = [c](double, double, std::span<const double>, NodeRef) { return c; };
        g.declared = benign_set();
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood, 1.0);
        g.phi = linear_modulus(Modulus::Kind::Continuity, 0.0);
        g.growth_A = 1.0;
        g.f = constant_coeff(std::abs(c));
        g.f_bar = constant_coeff(std::abs(c));
        g.f_tilde = constant_coeff(std::abs(c));
        g.psi = [](double, double, NodeRef) { return 0.0; };
        g.varphi = [](double, double, NodeRef) { return 0.0; };
        g.lower_env = [c](double, double, std::span<const double>, NodeRef) {
            return Envelope{c, 0.0};
        };
        g.upper_env = g.lower_env;
        return g;
    }

    if (id == "linear") {
        const double a = get_param(params, "a", 0.0, seen);
        const double b = get_param(params, "b", 0.0, seen);
        const double c = get_param(params, "c", 0.0, seen);
        reject_unknown(id, params, seen);
        g.evaluate = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
            return a * y + b * zsum(z) + c;
        };
        g.declared = benign_set();
        g.mu_one_sided = a;
        g.mu = std::abs(a);
        g.lambda = std::abs(b);
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood, std::max(std::max(a, 0.0), 1.0));
        g.phi = linear_modulus(Modulus::Kind::Continuity, std::abs(b));
        g.growth_A = std::max({std::max(a, 0.0), std::abs(b), 1.0});
        g.mu_bar = std::abs(a);
        g.lambda_bar = std::abs(b);
        g.f_bar = constant_coeff(std::abs(c));
        g.mu_tilde = std::abs(a);
        g.lambda_tilde = std::abs(b);
        g.f_tilde = constant_coeff(std::abs(c));
        g.f = constant_coeff(std::abs(c));
        g.psi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.varphi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        const double babs = std::abs(b);
        g.lower_env = [a, b, c, babs](double, double y, std::span<const double> z, NodeRef) {
            return Envelope{a * y + b * zsum(z) + c, babs};
        };
        g.upper_env = g.lower_env;
        return g;
    }

    if (id == "absz") {
        const double a = get_param(params, "a", 0.0, seen);
        const double b = get_param(params, "b", 1.0, seen);
        const double c = get_param(params, "c", 0.0, seen);
        reject_unknown(id, params, seen);
        g.evaluate = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
            return a * y + b * znorm(z) + c;
        };
        g.declared = benign_set();
        g.mu_one_sided = a;
        g.mu = std::abs(a);
        g.lambda = std::abs(b);
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood, std::max(std::max(a, 0.0), 1.0));
        g.phi = linear_modulus(Modulus::Kind::Continuity, std::abs(b));
        g.growth_A = std::max({std::max(a, 0.0), std::abs(b), 1.0});
        g.mu_bar = std::abs(a);
        g.lambda_bar = std::abs(b);
        g.f_bar = constant_coeff(std::abs(c));
        g.mu_tilde = std::abs(a);
        g.lambda_tilde = b < 0.0 ? -b : 0.0;
        g.f_tilde = constant_coeff(std::abs(c));
        g.f = constant_coeff(std::abs(c));
        g.psi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.varphi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        if (b >= 0.0) {
            g.lower_env = [a, c](double, double y, std::span<const double>, NodeRef) {
                return Envelope{a * y + c, 0.0};
            };
            g.upper_env = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
                return Envelope{a * y + b * znorm(z) + c, b};
            };
        } else {
            g.lower_env = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
                return Envelope{a * y + b * znorm(z) + c, -b};
            };
            g.upper_env = [a, c](double, double y, std::span<const double>, NodeRef) {
                return Envelope{a * y + c, 0.0};
            };
        }
        return g;
    }

    if (id == "osgood_cubic") {
        const double a = get_param(params, "a", 1.0, seen);
        const double c = get_param(params, "c", 0.0, seen);
        const double btilde_mu = get_param(params, "btilde_mu", 0.0, seen);
        reject_unknown(id, params, seen);
        if (a <= 0.0) fail(ErrorKind::InvalidParameter, "osgood_cubic needs a > 0");
        g.evaluate = [a, c](double, double y, std::span<const double>, NodeRef) {
            return -a * y * y * y + c;
        };
        g.declared = {Hypothesis::H1,  Hypothesis::H1s, Hypothesis::H2,  Hypothesis::H2s,
                      Hypothesis::H2w, Hypothesis::H3,  Hypothesis::H4,  Hypothesis::H4s,
                      Hypothesis::H4w, Hypothesis::HH,  Hypothesis::A};
        if (btilde_mu > 0.0) {
            g.declared.insert(Hypothesis::B);
            g.mu_tilde = btilde_mu;  // valid only while |Y| stays within the scenario range
            g.f_tilde = constant_coeff(std::abs(c));
        }
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood, 1.0);
        g.phi = linear_modulus(Modulus::Kind::Continuity, 0.0);
        g.growth_A = 1.0;
        g.lambda = 0.0;
        g.f = constant_coeff(std::abs(c));
        g.f_bar = constant_coeff(std::abs(c));
        g.psi = [a](double, double r, NodeRef) { return a * r * r * r; };
        g.varphi = [a](double, double r, NodeRef) { return a * r * r * r; };
        g.lower_env = [a, c](double, double y, std::span<const double>, NodeRef) {
            return Envelope{-a * y * y * y + c, 0.0};
        };
        g.upper_env = g.lower_env;
        return g;
    }

    if (id == "osgood_log") {
        const double a = get_param(params, "a", 1.0, seen);
        const double c = get_param(params, "c", 0.0, seen);
        reject_unknown(id, params, seen);
        if (a <= 0.0) fail(ErrorKind::InvalidParameter, "osgood_log needs a > 0");
        g.evaluate = [a, c](double, double y, std::span<const double>, NodeRef) {
            return a * rho_log(std::max(y, 0.0)) + c;
        };
        g.declared = {Hypothesis::H1,  Hypothesis::H2,  Hypothesis::H2s, Hypothesis::H2w,
                      Hypothesis::H3,  Hypothesis::H3s, Hypothesis::H4,  Hypothesis::H4s,
                      Hypothesis::H4w, Hypothesis::HH,  Hypothesis::A,   Hypothesis::B};
        Modulus rho;
        rho.kind = Modulus::Kind::ConcaveOsgood;
        rho.value = [a](double u) { return a * rho_log(u); };
        rho.growth_A = std::max(a, 1.0);
        g.rho = rho;
        g.phi = linear_modulus(Modulus::Kind::Continuity, 0.0);
        g.growth_A = std::max(a, 1.0);
        g.mu = 0.0;  // |g(y,0)| <= a + |c| outright, no |y| term needed
        g.f = constant_coeff(a + std::abs(c));
        g.f_bar = constant_coeff(a + std::abs(c));
        g.f_tilde = constant_coeff(std::abs(c));
        g.psi = [a](double, double r, NodeRef) { return a * rho_log(std::min(r, 1.0)); };
        g.varphi = [a](double, double r, NodeRef) { return a * rho_log(std::min(r, 1.0)); };
        g.lower_env = [a, c](double, double y, std::span<const double>, NodeRef) {
            return Envelope{a * rho_log(std::max(y, 0.0)) + c, 0.0};
        };
        g.upper_env = g.lower_env;
        return g;
    }

    if (id == "ucz") {
        const double a = get_param(params, "a", 0.0, seen);
        const double b = get_param(params, "b", 1.0, seen);
        const double c = get_param(params, "c", 0.0, seen);
        reject_unknown(id, params, seen);
        if (b < 0.0) fail(ErrorKind::InvalidParameter, "ucz needs b >= 0");
        g.evaluate = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
            return a * y + b * phi_sqrt(znorm(z)) + c;
        };
        g.declared = {Hypothesis::H1,  Hypothesis::H2,  Hypothesis::H2w, Hypothesis::H3,
                      Hypothesis::H3s, Hypothesis::H4,  Hypothesis::H4s, Hypothesis::H4w,
                      Hypothesis::HH,  Hypothesis::A,   Hypothesis::B};
        g.mu_one_sided = a;
        g.mu = std::abs(a);
        g.lambda = b;  // phi_sqrt(x) <= x
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood, std::max(std::max(a, 0.0), 1.0));
        Modulus phi;
        phi.kind = Modulus::Kind::Continuity;
        phi.value = [b](double x) { return b * phi_sqrt(x); };
        phi.growth_A = std::max(b, 1.0);
        g.phi = phi;
        g.growth_A = std::max({std::max(a, 0.0), b, 1.0});
        g.mu_bar = std::abs(a);
        g.lambda_bar = b;
        g.f_bar = constant_coeff(std::abs(c));
        g.mu_tilde = std::abs(a);
        g.f_tilde = constant_coeff(std::abs(c));
        g.f = constant_coeff(std::abs(c));
        g.psi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.varphi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.lower_env = [a, c](double, double y, std::span<const double>, NodeRef) {
            return Envelope{a * y + c, 0.0};
        };
        g.upper_env = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
            return Envelope{a * y + b * phi_sqrt(znorm(z)) + c + 0.5 * b, 0.5 * b};
        };
        return g;
    }

    if (id == "sqrtz") {
        const double a = get_param(params, "a", 0.0, seen);
        const double b = get_param(params, "b", 1.0, seen);
        const double c = get_param(params, "c", 0.0, seen);
        reject_unknown(id, params, seen);
        if (b < 0.0) fail(ErrorKind::InvalidParameter, "sqrtz needs b >= 0");
        g.evaluate = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
            return a * y + b * std::sqrt(znorm(z)) + c;
        };
        g.declared = {Hypothesis::H1,  Hypothesis::H2,  Hypothesis::H2w, Hypothesis::H3,
                      Hypothesis::H3s, Hypothesis::H4,  Hypothesis::H4s, Hypothesis::H4w,
                      Hypothesis::HH,  Hypothesis::A,   Hypothesis::B};
        g.mu_one_sided = a;
        g.mu = std::abs(a);
        g.lambda = 0.5 * b;  // sqrt(x) <= (1 + x)/2
        Modulus phi;
        phi.kind = Modulus::Kind::Continuity;
        phi.value = [b](double x) { return b * std::sqrt(x); };
        phi.growth_A = std::max(0.5 * b, 1.0);
        g.phi = phi;
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood, std::max(std::max(a, 0.0), 1.0));
        g.growth_A = std::max({std::max(a, 0.0), 0.5 * b, 1.0});
        g.mu_bar = std::abs(a);
        g.lambda_bar = 0.5 * b;
        g.f_bar = constant_coeff(std::abs(c) + 0.5 * b);
        g.mu_tilde = std::abs(a);
        g.f_tilde = constant_coeff(std::abs(c));
        g.f = constant_coeff(std::abs(c) + 0.5 * b);
        g.psi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.varphi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.lower_env = [a, c](double, double y, std::span<const double>, NodeRef) {
            return Envelope{a * y + c, 0.0};
        };
        g.upper_env = [a, b, c](double, double y, std::span<const double> z, NodeRef) {
            return Envelope{a * y + b * std::sqrt(znorm(z)) + c + 0.5 * b, 0.5 * b};
        };
        return g;
    }

    if (id == "h2w_sin") {
        const double a = get_param(params, "a", 0.0, seen);
        const double b = get_param(params, "b", 1.0, seen);
        const double f0 = get_param(params, "f", 0.0, seen);
        const double rho_box = get_param(params, "rho_box", 4.0, seen);
        reject_unknown(id, params, seen);
        if (b < 0.0 || f0 < 0.0) fail(ErrorKind::InvalidParameter, "h2w_sin needs b, f >= 0");
        g.evaluate = [a, b, f0](double, double y, std::span<const double> z, NodeRef) {
            return a * y + b * znorm(z) * std::sin(y) + f0;
        };
        g.declared = {Hypothesis::H1,  Hypothesis::H2w, Hypothesis::H3, Hypothesis::H3s,
                      Hypothesis::H4,  Hypothesis::H4s, Hypothesis::H4w, Hypothesis::HH,
                      Hypothesis::A,   Hypothesis::B};
        g.mu_one_sided = a;
        g.mu = std::abs(a);
        g.lambda = b;
        // one-sided slope holds only on the certification z box
        g.rho = linear_modulus(Modulus::Kind::ConcaveOsgood,
                               std::max(std::max(a, 0.0) + b * rho_box, 1.0));
        g.growth_A = std::max(std::max(a, 0.0) + b * rho_box, 1.0);
        g.mu_bar = std::abs(a);
        g.lambda_bar = b;
        g.f_bar = constant_coeff(f0);
        g.mu_tilde = std::abs(a);
        g.lambda_tilde = b;
        g.f_tilde = constant_coeff(f0);
        g.f = constant_coeff(f0);
        g.psi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.varphi = [a](double, double r, NodeRef) { return std::abs(a) * r; };
        g.lower_env = [a, b, f0](double, double y, std::span<const double> z, NodeRef) {
            return Envelope{a * y + f0 - b * znorm(z), b};
        };
        g.upper_env = [a, b, f0](double, double y, std::span<const double> z, NodeRef) {
            return Envelope{a * y + f0 + b * znorm(z), b};
        };
        return g;
    }

    fail(ErrorKind::UnknownGenerator, "no generator with id '" + id + "'");
}

} // namespace rbsde
