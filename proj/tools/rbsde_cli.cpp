#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "rbsde/battery.hpp"
#include "rbsde/scenario.hpp"
#include "rbsde/theorems.hpp"

using namespace rbsde;

namespace {

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ParseError:
        case ErrorKind::UnknownGenerator:
        case ErrorKind::DataOrderingViolation:
        case ErrorKind::InvalidParameter:
        case ErrorKind::SizeLimit:
        case ErrorKind::BarrierViolation:
        case ErrorKind::LevelMismatch:
            return 2;
        default:
            return 1;
    }
}

struct CommonOptions {
    std::string out_path;
    std::vector<double> p_override;
    double tol = 0.0;  // 0 -> command default
    std::uint64_t seed = 0x5eedULL;
    int threads = 1;   // parallelism hint; results do not depend on it
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--out", opts.out_path, "write the CSV report to this path");
    cmd->add_option("--p", opts.p_override, "override the norm exponents")->delimiter(',');
    cmd->add_option("--tol", opts.tol, "override the report tolerance");
    cmd->add_option("--seed", opts.seed, "certification sampler seed");
    cmd->add_option("--threads", opts.threads, "parallelism hint (results unchanged)");
}

void deliver(const std::vector<ReportRow>& rows, const CommonOptions& opts) {
    const std::string csv = render_csv(rows);
    if (opts.out_path.empty()) {
        std::cout << csv;
        return;
    }
    std::ofstream out(opts.out_path);
    if (!out) fail(ErrorKind::ParseError, opts.out_path + ": cannot open for writing");
    out << csv;
}

std::vector<double> norm_list(const ScenarioFile& file, const CommonOptions& opts) {
    return opts.p_override.empty() ? file.p_list : opts.p_override;
}

SolutionTriple solve_any(const ScenarioConfig& sc) {
    return sc.has_barrier() ? solve_reflected_projection(sc) : solve_bsde(sc);
}

int failing_row(std::vector<ReportRow> rows, const ReportRow& bad, const CommonOptions& opts) {
    rows.push_back(bad);
    deliver(rows, opts);
    std::cerr << bad.scenario << "," << bad.command << "," << bad.index << "," << bad.p << ","
              << bad.metric << "," << bad.value << "\n";
    return 1;
}

int cmd_solve(const std::string& path, const CommonOptions& opts) {
    ScenarioFile file = load_scenario(path);
    std::vector<ReportRow> rows;
    for (double p : norm_list(file, opts)) {
        ScenarioInstance inst = instantiate_scenario(file, p);
        const ScenarioConfig& sc = inst.config;
        auto sol = solve_any(sc);
        rows.push_back({sc.id, "solve", 0, p, "y0", sol.Y.at(0, 0)});
        rows.push_back({sc.id, "solve", 0, p, "y_sp", sp_norm(sol.Y, sc.p)});
        rows.push_back({sc.id, "solve", 0, p, "z_mp", mp_norm(sol.Z, sc.p)});
        if (sc.has_barrier()) {
            rows.push_back({sc.id, "solve", 0, p, "k_sp", sp_norm(sol.K, sc.p)});
            auto res = skorokhod_residual(sol, *sc.barrier, sc.p);
            rows.push_back({sc.id, "solve", 0, p, "complementarity", res.complementarity});
            rows.push_back({sc.id, "solve", 0, p, "barrier_deficit", res.barrier_deficit});
        }
    }
    deliver(rows, opts);
    return 0;
}

int cmd_penalize(const std::string& path, const CommonOptions& opts) {
    ScenarioFile file = load_scenario(path);
    std::vector<double> schedule = file.run.schedule;
    if (schedule.empty())
        for (int j = 0; j <= 10; ++j) schedule.push_back(double(1 << j));
    const double tol = opts.tol > 0.0 ? opts.tol : 1e-12;

    std::vector<ReportRow> rows;
    for (double p : norm_list(file, opts)) {
        ScenarioInstance inst = instantiate_scenario(file, p);
        auto report = penalization_sweep(inst.config, schedule);
        const std::string& id = inst.config.id;
        rows.push_back({id, "penalize", -1, p, "reference_y0", report.reference_y0});
        for (std::size_t i = 0; i < report.entries.size(); ++i) {
            const auto& e = report.entries[i];
            const long index = long(i);
            rows.push_back({id, "penalize", index, p, "n", e.level});
            rows.push_back({id, "penalize", index, p, "y0", e.y0});
            rows.push_back({id, "penalize", index, p, "sp_gap", e.sp_gap});
            rows.push_back({id, "penalize", index, p, "mp_gap", e.mp_gap});
            rows.push_back({id, "penalize", index, p, "k_gap", e.k_gap});
            rows.push_back({id, "penalize", index, p, "barrier_deficit", e.barrier_deficit});
            rows.push_back({id, "penalize", index, p, "complementarity", e.complementarity});
        }
        if (report.max_monotonicity_violation > tol)
            return failing_row(std::move(rows),
                               {id, "penalize", 0, p, "monotonicity_violation",
                                report.max_monotonicity_violation},
                               opts);
        if (report.max_domination_violation > std::max(tol, 1e-10))
            return failing_row(std::move(rows),
                               {id, "penalize", 0, p, "domination_violation",
                                report.max_domination_violation},
                               opts);
    }
    deliver(rows, opts);
    return 0;
}

int cmd_compare(const std::string& path1, const std::string& path2, const CommonOptions& opts) {
    ScenarioFile f1 = load_scenario(path1);
    ScenarioFile f2 = load_scenario(path2);
    const double tol = opts.tol > 0.0 ? opts.tol : 1e-10;

    std::vector<ReportRow> rows;
    for (double p : norm_list(f1, opts)) {
        ScenarioInstance i1 = instantiate_scenario(f1, p);
        ScenarioInstance i2 = instantiate_scenario(f2, p);
        auto s1 = solve_any(i1.config);
        auto s2 = solve_any(i2.config);
        auto verdict = compare_rbsde(s1, s2, i1.config, i2.config, tol);
        const std::string id = i1.config.id + ":" + i2.config.id;
        rows.push_back({id, "compare", 0, p, "max_y1_minus_y2_pos", verdict.max_y_gap});
        rows.push_back({id, "compare", 0, p, "indicator_residual", verdict.indicator_residual});
        if (!verdict.y_pass)
            return failing_row(std::move(rows),
                               {id, "compare", 0, p, "comparison_violation", verdict.max_y_gap},
                               opts);
    }
    deliver(rows, opts);
    return 0;
}

int cmd_extremal(const std::string& path, const CommonOptions& opts) {
    ScenarioFile file = load_scenario(path);
    std::vector<double> schedule = file.run.schedule;
    if (schedule.empty()) schedule = {0.5, 1.0, 2.0};
    const ExtremalSide side =
        (file.run.side == "max") ? ExtremalSide::Max : ExtremalSide::Min;

    std::vector<ReportRow> rows;
    for (double p : norm_list(file, opts)) {
        ScenarioInstance inst = instantiate_scenario(file, p);
        auto result = extremal_reflected(inst.config, side, schedule);
        const std::string& id = inst.config.id;
        for (std::size_t i = 0; i < result.report.entries.size(); ++i) {
            const auto& e = result.report.entries[i];
            rows.push_back({id, "extremal", long(i), p, "kappa", e.parameter});
            rows.push_back({id, "extremal", long(i), p, "y0", e.y0});
            rows.push_back({id, "extremal", long(i), p, "sp_gap", e.sp_gap});
        }
        if (!result.report.monotone)
            return failing_row(std::move(rows),
                               {id, "extremal", 0, p, "monotonicity_violation",
                                result.report.max_monotonicity_violation},
                               opts);
    }
    deliver(rows, opts);
    return 0;
}

int cmd_estimate(const std::string& path, const CommonOptions& opts) {
    ScenarioFile file = load_scenario(path);
    std::vector<std::string> names = file.run.estimates;
    if (names.empty())
        names = {"lemma1-i", "lemma1-ii", "lemma2", "lemma3-i", "lemma3-ii", "lemma3-iii",
                 "prop1", "prop2"};

    std::vector<ReportRow> rows;
    for (double p : norm_list(file, opts)) {
        ScenarioInstance inst = instantiate_scenario(file, p);
        const ScenarioConfig& sc = inst.config;
        auto sol = solve_any(sc);
        long index = 0;
        for (const auto& name : names) {
            EstimateId id;
            if (name == "lemma1-i") id = EstimateId::Lemma1i;
            else if (name == "lemma1-ii") id = EstimateId::Lemma1ii;
            else if (name == "lemma2") id = EstimateId::Lemma2;
            else if (name == "lemma3-i") id = EstimateId::Lemma3i;
            else if (name == "lemma3-ii") id = EstimateId::Lemma3ii;
            else if (name == "lemma3-iii") id = EstimateId::Lemma3iii;
            else if (name == "prop1") id = EstimateId::Prop1;
            else if (name == "prop2") id = EstimateId::Prop2;
            else fail(ErrorKind::ParseError, path + ": [run] unknown estimate '" + name + "'");
            EstimateDiagnostic diag =
                (id == EstimateId::Prop2)
                    ? estimate_diagnostic(id, sol, sc, file.run.level, &sol.Y)
                    : estimate_diagnostic(id, sol, sc, file.run.level);
            rows.push_back({sc.id, "estimate", index, p, name + "_lhs", diag.lhs});
            rows.push_back({sc.id, "estimate", index, p, name + "_rhs", diag.rhs});
            rows.push_back({sc.id, "estimate", index, p, name + "_ratio", diag.ratio});
            ++index;
        }
        if (sc.has_barrier()) {
            auto h6 = check_h6(sc);
            rows.push_back({sc.id, "estimate", index, p, "h6_g_on_x_hp", h6.g_on_x_hp});
            rows.push_back({sc.id, "estimate", index, p, "h6_dominates", h6.dominates ? 1.0 : 0.0});
            auto necessity = theorem3_necessity(sc, sol);
            rows.push_back({sc.id, "estimate", index, p, "necessity_lhs", necessity.lhs});
            rows.push_back({sc.id, "estimate", index, p, "necessity_rhs", necessity.rhs});
            if (!necessity.pass)
                return failing_row(std::move(rows),
                                   {sc.id, "estimate", index, p, "necessity_violation",
                                    necessity.lhs - necessity.rhs},
                                   opts);
        }
    }
    deliver(rows, opts);
    return 0;
}

int cmd_certify(const std::string& path, const CommonOptions& opts) {
    ScenarioFile file = load_scenario(path);
    ScenarioInstance inst = instantiate_scenario(file, norm_list(file, opts).front());
    SamplerConfig cfg;
    cfg.seed = opts.seed;
    cfg.samples = file.run.samples;
    cfg.dim = file.dim;
    const double tol = opts.tol > 0.0 ? opts.tol : 1e-9;

    std::vector<ReportRow> rows;
    bool all_pass = true;
    ReportRow first_bad;
    long index = 0;
    for (const auto& report : certify_declared(inst.config.generator, cfg, tol)) {
        for (const auto& line : report.lines) {
            rows.push_back({inst.config.id, "certify", index, 0.0,
                            report.hypothesis + ":" + line.label, line.max_violation});
            if (!line.pass && all_pass) {
                all_pass = false;
                first_bad = rows.back();
            }
        }
        ++index;
    }
    if (!all_pass) return failing_row(std::move(rows), first_bad, opts);
    deliver(rows, opts);
    return 0;
}

int cmd_battery(const CommonOptions& opts) {
    BatteryOutput out = run_acceptance_battery();
    std::vector<ReportRow> rows = out.rows;
    for (const auto& c : out.criteria) {
        rows.push_back({"acceptance", "battery", c.number, 0.0, "criterion_pass",
                        c.pass ? 1.0 : 0.0});
        std::cerr << (c.pass ? "[PASS] " : "[FAIL] ") << c.number << " " << c.name << ": "
                  << c.detail << "\n";
    }
    deliver(rows, opts);
    return out.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected-BSDE numerical laboratory on an exact binary-tree noise model"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string path1, path2;

    auto* solve = app.add_subcommand("solve", "solve one scenario and report its norms");
    solve->add_option("file", path1, "scenario file")->required();
    add_common(solve, opts);

    auto* penalize = app.add_subcommand("penalize", "penalization sweep against the projection");
    penalize->add_option("file", path1, "scenario file")->required();
    add_common(penalize, opts);

    auto* compare = app.add_subcommand("compare", "ordered-data comparison of two scenarios");
    compare->add_option("file1", path1, "smaller scenario")->required();
    compare->add_option("file2", path2, "larger scenario")->required();
    add_common(compare, opts);

    auto* extremal = app.add_subcommand("extremal", "minimal/maximal solution construction");
    extremal->add_option("file", path1, "scenario file")->required();
    add_common(extremal, opts);

    auto* estimate = app.add_subcommand("estimate", "conditional-bound diagnostics");
    estimate->add_option("file", path1, "scenario file")->required();
    add_common(estimate, opts);

    auto* certify = app.add_subcommand("certify", "sampled hypothesis certification");
    certify->add_option("file", path1, "scenario file")->required();
    add_common(certify, opts);

    auto* battery = app.add_subcommand("battery", "full verification battery");
    add_common(battery, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(path1, opts);
        if (penalize->parsed()) return cmd_penalize(path1, opts);
        if (compare->parsed()) return cmd_compare(path1, path2, opts);
        if (extremal->parsed()) return cmd_extremal(path1, opts);
        if (estimate->parsed()) return cmd_estimate(path1, opts);
        if (certify->parsed()) return cmd_certify(path1, opts);
        if (battery->parsed()) return cmd_battery(opts);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
