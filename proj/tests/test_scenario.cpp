#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbsde/report.hpp"
#include "rbsde/scenario.hpp"
#include "rbsde/reflected.hpp"

using namespace rbsde;

namespace {

const char* kSample = R"(# a put-style reflected scenario
[tree]
T = 1.0
N = 6
d = 1

[terminal]
expr = max(sin(B) - 0.5, 0.3 + 0.4*tanh(B))

[barrier]
expr = 0.3 + 0.4*tanh(B)

[forcing]
expr = 0.1*h

[generator]
id = linear
a = -0.4
b = 0.3
c = 0.1

[scheme]
mode = explicit
tol = 1e-12
max_iter = 100

[norms]
p = 1.5, 2, 3

[run]
schedule = 1, 4, 16
level = 0
)";

} // namespace

TEST_CASE("expression grammar covers the path functionals") {
    auto e = parse_expression("max(B, supB - intB) + 2^3 - abs(-t)*h + T", "test");
    ExprContext ctx;
    ctx.t = 0.5;
    ctx.horizon = 2.0;
    ctx.step = 0.25;
    const double b = 1.5;
    ctx.b = std::span<const double>(&b, 1);
    ctx.sup_b = 1.75;
    ctx.int_b = 0.25;
    // max(1.5, 1.5) + 8 - 0.5*0.25 + 2
    CHECK(eval_expression(e, ctx) == doctest::Approx(1.5 + 8.0 - 0.125 + 2.0).epsilon(1e-15));
}

TEST_CASE("unknown identifiers, functions and trailing input are parse errors") {
    CHECK_THROWS_AS(parse_expression("B + q", "test"), Error);
    CHECK_THROWS_AS(parse_expression("floor(B)", "test"), Error);
    CHECK_THROWS_AS(parse_expression("min(B)", "test"), Error);
    CHECK_THROWS_AS(parse_expression("1 + 2 )", "test"), Error);
    try {
        parse_expression("B + q", "ctx");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
}

TEST_CASE("scenario files parse and round-trip through the canonical form") {
    ScenarioFile file = parse_scenario(kSample, "sample.scn");
    CHECK(file.name == "sample");
    CHECK(file.depth == 6);
    CHECK(file.generator_id == "linear");
    CHECK(file.p_list.size() == 3);
    CHECK(file.run.schedule.size() == 3);

    const std::string canon = serialize_scenario(file);
    ScenarioFile reparsed = parse_scenario(canon, "sample.scn");
    CHECK(serialize_scenario(reparsed) == canon);
}

TEST_CASE("unknown sections and keys are rejected with context") {
    CHECK_THROWS_AS(parse_scenario("[nope]\nx = 1\n", "f.scn"), Error);
    try {
        parse_scenario("[tree]\nT = 1\nN = 4\nq = 3\n[terminal]\nexpr = B\n[generator]\nid = zero\n",
                       "f.scn");
        FAIL("unknown key accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
        CHECK(std::string(e.what()).find("tree") != std::string::npos);
        CHECK(std::string(e.what()).find("'q'") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_scenario("[terminal]\nexpr = B\n", "f.scn"), Error);  // no generator
}

TEST_CASE("instantiation builds consistent processes") {
    ScenarioFile file = parse_scenario(kSample, "sample.scn");
    ScenarioInstance inst = instantiate_scenario(file, 2.0);
    const ScenarioConfig& sc = inst.config;
    CHECK(sc.tree->depth() == 6);
    CHECK(sc.has_barrier());
    CHECK(sc.forcing.attached());
    // forcing accumulates 0.1 h per step deterministically
    const double h = sc.tree->step();
    CHECK(sc.forcing.at(6, 17) == doctest::Approx(6.0 * 0.1 * h).epsilon(1e-12));
    auto sol = solve_reflected_projection(sc);
    CHECK(std::isfinite(sol.Y.at(0, 0)));
    // terminal clamp keeps the barrier admissible
    for (std::uint64_t v = 0; v < sc.tree->leaf_count(); ++v)
        CHECK(sc.terminal[v] >= sc.barrier->at(6, v) - 1e-15);
}

TEST_CASE("unknown generator ids surface as such") {
    std::string text = kSample;
    auto pos = text.find("id = linear");
    text.replace(pos, 11, "id = zzgenx");
    ScenarioFile file = parse_scenario(text, "sample.scn");
    try {
        instantiate_scenario(file, 2.0);
        FAIL("unknown generator accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownGenerator);
    }
}

TEST_CASE("a hypotheses override narrows the declared set") {
    std::string text = kSample;
    auto pos = text.find("c = 0.1");
    text.insert(pos + 7, "\nhypotheses = H1,H2w");
    ScenarioFile file = parse_scenario(text, "sample.scn");
    ScenarioInstance inst = instantiate_scenario(file, 2.0);
    CHECK(inst.config.generator.declared.size() == 2);
    CHECK(inst.config.generator.declares(Hypothesis::H2w));
    CHECK_FALSE(inst.config.generator.declares(Hypothesis::H2s));
}

TEST_CASE("csv rendering is sorted, formatted and rejects non-finite values") {
    std::vector<ReportRow> rows = {
        {"b", "solve", 0, 2.0, "m2", 1.0},
        {"a", "solve", 1, 2.0, "m1", 0.5},
        {"a", "solve", 0, 2.0, "m1", -0.25},
    };
    const std::string csv = render_csv(rows);
    CHECK(csv == "scenario,command,index,p,metric,value\n"
                 "a,solve,0,2,m1,-0.25\n"
                 "a,solve,1,2,m1,0.5\n"
                 "b,solve,0,2,m2,1\n");
    rows.push_back({"c", "solve", 0, 2.0, "bad", std::nan("")});
    CHECK_THROWS_AS(render_csv(rows), Error);
}
