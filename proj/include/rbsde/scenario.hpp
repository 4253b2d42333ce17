#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rbsde/solver.hpp"

namespace rbsde {

// Closed expression grammar over path functionals:
//   variables  t, T, h, B (first coordinate), B1..B9, supB, intB
//   functions  abs, exp, sin, cos, tanh, sqrt, min, max
//   operators  + - * / ^ and unary minus
struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { Number, Variable, Unary, Binary, Call };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string name;           // variable or function
    char op = 0;                // + - * / ^
    std::vector<ExprPtr> args;
};

struct ExprContext {
    double t = 0.0;
    double horizon = 0.0;
    double step = 0.0;
    std::span<const double> b;
    double sup_b = 0.0;
    double int_b = 0.0;
};

ExprPtr parse_expression(const std::string& text, const std::string& where);
double eval_expression(const ExprPtr& expr, const ExprContext& ctx);
std::string print_expression(const ExprPtr& expr);

struct RunSection {
    std::vector<double> schedule;
    std::string side;                   // "min" | "max" | ""
    std::vector<std::string> estimates;
    int level = 0;
    double penalty = 0.0;
    int samples = 4096;
};

// One parsed scenario file; instantiation builds the tree and processes.
struct ScenarioFile {
    std::string name = "scenario";
    double horizon = 1.0;
    int depth = 10;
    int dim = 1;
    ExprPtr terminal;
    ExprPtr barrier;   // null -> no barrier
    ExprPtr forcing;   // null -> zero; evaluated as the per-step increment
    std::string generator_id = "zero";
    std::map<std::string, double> generator_params;
    std::optional<std::vector<std::string>> hypotheses;  // declared-set override
    SchemeKind scheme = SchemeKind::Explicit;
    double scheme_tol = 1e-12;
    int scheme_max_iter = 100;
    std::vector<double> p_list{1.5, 2.0, 3.0};
    RunSection run;
};

ScenarioFile parse_scenario(const std::string& text, const std::string& filename);
ScenarioFile load_scenario(const std::string& path);
std::string serialize_scenario(const ScenarioFile& file);

struct ScenarioInstance {
    std::unique_ptr<TreeModel> tree;
    ScenarioConfig config;
};

// Builds the tree and evaluates the data expressions node by node.
ScenarioInstance instantiate_scenario(const ScenarioFile& file, double p);

} // namespace rbsde
