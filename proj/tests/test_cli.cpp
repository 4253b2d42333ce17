#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef RBSDE_CLI_PATH
#define RBSDE_CLI_PATH "rbsdelab"
#endif

namespace {

struct RunResult {
    int code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string out_path = "cli_test_stdout.txt";
    const std::string command =
        std::string(RBSDE_CLI_PATH) + " " + args + " > " + out_path + " 2> cli_test_stderr.txt";
    const int status = std::system(command.c_str());
    std::ifstream in(out_path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    int code = -1;
    if (status != -1) code = WEXITSTATUS(status);
    return {code, buffer.str()};
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const char* kPlain = R"([tree]
T = 1.0
N = 4
d = 1

[terminal]
expr = B

[generator]
id = zero
)";

const char* kBigger = R"([tree]
T = 1.0
N = 4
d = 1

[terminal]
expr = B + 0.5

[generator]
id = zero
)";

} // namespace

TEST_CASE("solve reports the martingale root value with exit 0") {
    write_file("plain.scn", kPlain);
    auto r = run_cli("solve plain.scn");
    CHECK(r.code == 0);
    CHECK(r.out.find("scenario,command,index,p,metric,value") == 0);
    CHECK(r.out.find("plain,solve,0,2,y0,0\n") != std::string::npos);
}

TEST_CASE("parse errors exit with code 2 and name the location") {
    write_file("broken.scn", "[tree]\nbogus = 1\n");
    auto r = run_cli("solve broken.scn");
    CHECK(r.code == 2);
}

TEST_CASE("missing files are input errors") {
    auto r = run_cli("solve does_not_exist.scn");
    CHECK(r.code == 2);
}

TEST_CASE("ordered comparison passes and reversed order is an input error") {
    write_file("plain.scn", kPlain);
    write_file("bigger.scn", kBigger);
    auto ok = run_cli("compare plain.scn bigger.scn");
    CHECK(ok.code == 0);
    CHECK(ok.out.find("max_y1_minus_y2_pos,0\n") != std::string::npos);
    auto bad = run_cli("compare bigger.scn plain.scn");
    CHECK(bad.code == 2);
}

TEST_CASE("certification runs with a seed and is deterministic") {
    write_file("plain.scn", kPlain);
    auto r1 = run_cli("certify plain.scn --seed 42");
    auto r2 = run_cli("certify plain.scn --seed 42");
    CHECK(r1.code == 0);
    CHECK(r1.out == r2.out);
}

TEST_CASE("identical runs produce byte-identical reports") {
    write_file("plain.scn", kPlain);
    auto r1 = run_cli("solve plain.scn --p 1.5,2,3");
    auto r2 = run_cli("solve plain.scn --p 1.5,2,3");
    CHECK(r1.code == 0);
    CHECK(r1.out == r2.out);
    CHECK(r1.out.find(",1.5,") != std::string::npos);
    CHECK(r1.out.find(",3,") != std::string::npos);
}

TEST_CASE("--out writes the same csv to a file") {
    write_file("plain.scn", kPlain);
    auto direct = run_cli("solve plain.scn");
    auto filed = run_cli("solve plain.scn --out report.csv");
    CHECK(filed.code == 0);
    std::ifstream in("report.csv");
    std::stringstream buffer;
    buffer << in.rdbuf();
    CHECK(buffer.str() == direct.out);
}
