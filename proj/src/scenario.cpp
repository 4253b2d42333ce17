#include "rbsde/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rbsde {

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& message) {
    fail(ErrorKind::ParseError, where + ": " + message);
}

// --- expression parsing -------------------------------------------------------

struct Lexer {
    const std::string& text;
    const std::string& where;
    std::size_t pos = 0;

    void skip_space() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool done() {
        skip_space();
        return pos >= text.size();
    }
    char peek() {
        skip_space();
        return pos < text.size() ? text[pos] : '\0';
    }
    bool consume(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }
};

const std::vector<std::string>& known_variables() {
    static const std::vector<std::string> v = {"t",  "T",  "h",  "B",  "B1", "B2", "B3",
                                               "B4", "B5", "B6", "B7", "B8", "B9", "supB",
                                               "intB"};
    return v;
}

bool is_known_function(const std::string& name, std::size_t arity) {
    if (name == "min" || name == "max") return arity == 2;
    if (name == "abs" || name == "exp" || name == "sin" || name == "cos" || name == "tanh" ||
        name == "sqrt")
        return arity == 1;
    return false;
}

ExprPtr make_number(double v) {
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprNode::Kind::Number;
    node->number = v;
    return node;
}

ExprPtr parse_sum(Lexer& lx);

ExprPtr parse_primary(Lexer& lx) {
    lx.skip_space();
    if (lx.pos >= lx.text.size()) parse_fail(lx.where, "unexpected end of expression");
    const char c = lx.text[lx.pos];

    if (c == '(') {
        ++lx.pos;
        ExprPtr inner = parse_sum(lx);
        if (!lx.consume(')')) parse_fail(lx.where, "missing ')'");
        return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(lx.text.substr(lx.pos), &used);
        } catch (...) {
            parse_fail(lx.where, "bad numeric literal");
        }
        lx.pos += used;
        return make_number(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t end = lx.pos;
        while (end < lx.text.size() &&
               (std::isalnum(static_cast<unsigned char>(lx.text[end])) || lx.text[end] == '_'))
            ++end;
        std::string name = lx.text.substr(lx.pos, end - lx.pos);
        lx.pos = end;
        if (lx.peek() == '(') {
            ++lx.pos;
            std::vector<ExprPtr> args;
            if (lx.peek() != ')') {
                args.push_back(parse_sum(lx));
                while (lx.consume(',')) args.push_back(parse_sum(lx));
            }
            if (!lx.consume(')')) parse_fail(lx.where, "missing ')' after " + name);
            if (!is_known_function(name, args.size()))
                parse_fail(lx.where, "unknown function '" + name + "' with " +
                                         std::to_string(args.size()) + " arguments");
            auto node = std::make_shared<ExprNode>();
            node->kind = ExprNode::Kind::Call;
            node->name = name;
            node->args = std::move(args);
            return node;
        }
        const auto& vars = known_variables();
        if (std::find(vars.begin(), vars.end(), name) == vars.end())
            parse_fail(lx.where, "unknown identifier '" + name + "'");
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::Variable;
        node->name = name;
        return node;
    }
    parse_fail(lx.where, std::string("unexpected character '") + c + "'");
}

ExprPtr parse_unary(Lexer& lx) {
    if (lx.consume('-')) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::Unary;
        node->op = '-';
        node->args.push_back(parse_unary(lx));
        return node;
    }
    return parse_primary(lx);
}

ExprPtr parse_power(Lexer& lx) {
    ExprPtr lhs = parse_unary(lx);
    if (lx.consume('^')) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::Binary;
        node->op = '^';
        node->args = {lhs, parse_power(lx)};
        return node;
    }
    return lhs;
}

ExprPtr parse_product(Lexer& lx) {
    ExprPtr lhs = parse_power(lx);
    while (true) {
        char op = lx.peek();
        if (op != '*' && op != '/') return lhs;
        ++lx.pos;
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::Binary;
        node->op = op;
        node->args = {lhs, parse_power(lx)};
        lhs = node;
    }
}

ExprPtr parse_sum(Lexer& lx) {
    ExprPtr lhs = parse_product(lx);
    while (true) {
        char op = lx.peek();
        if (op != '+' && op != '-') return lhs;
        ++lx.pos;
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::Binary;
        node->op = op;
        node->args = {lhs, parse_product(lx)};
        lhs = node;
    }
}

double variable_value(const std::string& name, const ExprContext& ctx) {
    if (name == "t") return ctx.t;
    if (name == "T") return ctx.horizon;
    if (name == "h") return ctx.step;
    if (name == "B") return ctx.b.empty() ? 0.0 : ctx.b[0];
    if (name == "supB") return ctx.sup_b;
    if (name == "intB") return ctx.int_b;
    if (name.size() == 2 && name[0] == 'B') {
        const std::size_t j = std::size_t(name[1] - '1');
        if (j >= ctx.b.size())
            fail(ErrorKind::ParseError,
                 "coordinate " + name + " exceeds the tree dimension");
        return ctx.b[j];
    }
    fail(ErrorKind::ParseError, "unknown variable '" + name + "'");
}

std::string format_number(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

} // namespace

ExprPtr parse_expression(const std::string& text, const std::string& where) {
    Lexer lx{text, where, 0};
    ExprPtr expr = parse_sum(lx);
    if (!lx.done()) parse_fail(where, "trailing input after expression");
    return expr;
}

double eval_expression(const ExprPtr& expr, const ExprContext& ctx) {
    switch (expr->kind) {
        case ExprNode::Kind::Number: return expr->number;
        case ExprNode::Kind::Variable: return variable_value(expr->name, ctx);
        case ExprNode::Kind::Unary: return -eval_expression(expr->args[0], ctx);
        case ExprNode::Kind::Binary: {
            const double a = eval_expression(expr->args[0], ctx);
            const double b = eval_expression(expr->args[1], ctx);
            switch (expr->op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                case '^': return std::pow(a, b);
            }
            break;
        }
        case ExprNode::Kind::Call: {
            if (expr->args.size() == 2) {
                const double a = eval_expression(expr->args[0], ctx);
                const double b = eval_expression(expr->args[1], ctx);
                return expr->name == "min" ? std::min(a, b) : std::max(a, b);
            }
            const double a = eval_expression(expr->args[0], ctx);
            if (expr->name == "abs") return std::abs(a);
            if (expr->name == "exp") return std::exp(a);
            if (expr->name == "sin") return std::sin(a);
            if (expr->name == "cos") return std::cos(a);
            if (expr->name == "tanh") return std::tanh(a);
            if (expr->name == "sqrt") return std::sqrt(a);
            break;
        }
    }
    fail(ErrorKind::ParseError, "malformed expression node");
}

std::string print_expression(const ExprPtr& expr) {
    switch (expr->kind) {
        case ExprNode::Kind::Number: return format_number(expr->number);
        case ExprNode::Kind::Variable: return expr->name;
        case ExprNode::Kind::Unary: return "(-" + print_expression(expr->args[0]) + ")";
        case ExprNode::Kind::Binary:
            return "(" + print_expression(expr->args[0]) + " " + expr->op + " " +
                   print_expression(expr->args[1]) + ")";
        case ExprNode::Kind::Call: {
            std::string out = expr->name + "(" + print_expression(expr->args[0]);
            for (std::size_t i = 1; i < expr->args.size(); ++i)
                out += ", " + print_expression(expr->args[i]);
            return out + ")";
        }
    }
    return "0";
}

// --- scenario files -------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream stream(s);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_number(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) parse_fail(where, "trailing characters in number");
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        parse_fail(where, "expected a number, got '" + value + "'");
    }
}

int parse_int(const std::string& value, const std::string& where) {
    const double v = parse_number(value, where);
    if (v != std::floor(v)) parse_fail(where, "expected an integer, got '" + value + "'");
    return int(v);
}

} // namespace

ScenarioFile parse_scenario(const std::string& text, const std::string& filename) {
    ScenarioFile file;
    file.name = filename;
    if (auto slash = file.name.find_last_of('/'); slash != std::string::npos)
        file.name = file.name.substr(slash + 1);
    if (auto dot = file.name.find_last_of('.'); dot != std::string::npos)
        file.name = file.name.substr(0, dot);

    std::string section;
    bool terminal_seen = false, generator_seen = false;
    std::istringstream stream(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(stream, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where =
            filename + ":" + std::to_string(lineno) + (section.empty() ? "" : " [" + section + "]");

        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(where, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            static const std::vector<std::string> sections = {
                "tree", "terminal", "barrier", "forcing", "generator", "scheme", "norms", "run"};
            if (std::find(sections.begin(), sections.end(), section) == sections.end())
                parse_fail(filename + ":" + std::to_string(lineno),
                           "unknown section [" + section + "]");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) parse_fail(where, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string keywhere = where + " key '" + key + "'";

        if (section == "tree") {
            if (key == "T") file.horizon = parse_number(value, keywhere);
            else if (key == "N") file.depth = parse_int(value, keywhere);
            else if (key == "d") file.dim = parse_int(value, keywhere);
            else parse_fail(keywhere, "unknown key");
        } else if (section == "terminal") {
            if (key != "expr") parse_fail(keywhere, "unknown key");
            file.terminal = parse_expression(value, keywhere);
            terminal_seen = true;
        } else if (section == "barrier") {
            if (key != "expr") parse_fail(keywhere, "unknown key");
            if (value != "none") file.barrier = parse_expression(value, keywhere);
        } else if (section == "forcing") {
            if (key != "expr") parse_fail(keywhere, "unknown key");
            if (value != "zero") file.forcing = parse_expression(value, keywhere);
        } else if (section == "generator") {
            if (key == "id") {
                file.generator_id = value;
                generator_seen = true;
            } else if (key == "hypotheses") {
                file.hypotheses = split_list(value);
                for (const auto& name : *file.hypotheses)
                    if (!hypothesis_from_name(name))
                        parse_fail(keywhere, "unknown hypothesis '" + name + "'");
            } else {
                file.generator_params[key] = parse_number(value, keywhere);
            }
        } else if (section == "scheme") {
            if (key == "mode") {
                if (value == "explicit") file.scheme = SchemeKind::Explicit;
                else if (value == "fixed-point") file.scheme = SchemeKind::FixedPoint;
                else parse_fail(keywhere, "mode must be explicit or fixed-point");
            } else if (key == "tol") {
                file.scheme_tol = parse_number(value, keywhere);
            } else if (key == "max_iter") {
                file.scheme_max_iter = parse_int(value, keywhere);
            } else parse_fail(keywhere, "unknown key");
        } else if (section == "norms") {
            if (key != "p") parse_fail(keywhere, "unknown key");
            file.p_list.clear();
            for (const auto& item : split_list(value))
                file.p_list.push_back(parse_number(item, keywhere));
            if (file.p_list.empty()) parse_fail(keywhere, "empty norm list");
        } else if (section == "run") {
            if (key == "schedule") {
                file.run.schedule.clear();
                for (const auto& item : split_list(value))
                    file.run.schedule.push_back(parse_number(item, keywhere));
            } else if (key == "side") {
                if (value != "min" && value != "max")
                    parse_fail(keywhere, "side must be min or max");
                file.run.side = value;
            } else if (key == "estimates") {
                file.run.estimates = split_list(value);
            } else if (key == "level") {
                file.run.level = parse_int(value, keywhere);
            } else if (key == "n") {
                file.run.penalty = parse_number(value, keywhere);
            } else if (key == "samples") {
                file.run.samples = parse_int(value, keywhere);
            } else parse_fail(keywhere, "unknown key");
        } else {
            parse_fail(filename + ":" + std::to_string(lineno),
                       "key outside of any section");
        }
    }
    if (!terminal_seen) parse_fail(filename, "[terminal] section with expr is required");
    if (!generator_seen) parse_fail(filename, "[generator] section with id is required");
    return file;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, path + ": cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path);
}

std::string serialize_scenario(const ScenarioFile& file) {
    std::ostringstream out;
    out << "[tree]\n";
    out << "T = " << format_number(file.horizon) << "\n";
    out << "N = " << file.depth << "\n";
    out << "d = " << file.dim << "\n\n";
    out << "[terminal]\nexpr = " << print_expression(file.terminal) << "\n\n";
    out << "[barrier]\nexpr = " << (file.barrier ? print_expression(file.barrier) : "none")
        << "\n\n";
    out << "[forcing]\nexpr = " << (file.forcing ? print_expression(file.forcing) : "zero")
        << "\n\n";
    out << "[generator]\n";
    out << "id = " << file.generator_id << "\n";
    for (const auto& [key, value] : file.generator_params)
        out << key << " = " << format_number(value) << "\n";
    if (file.hypotheses) {
        out << "hypotheses = ";
        for (std::size_t i = 0; i < file.hypotheses->size(); ++i)
            out << (i ? "," : "") << (*file.hypotheses)[i];
        out << "\n";
    }
    out << "\n[scheme]\n";
    out << "mode = " << (file.scheme == SchemeKind::Explicit ? "explicit" : "fixed-point") << "\n";
    out << "tol = " << format_number(file.scheme_tol) << "\n";
    out << "max_iter = " << file.scheme_max_iter << "\n\n";
    out << "[norms]\np = ";
    for (std::size_t i = 0; i < file.p_list.size(); ++i)
        out << (i ? "," : "") << format_number(file.p_list[i]);
    out << "\n\n[run]\n";
    if (!file.run.schedule.empty()) {
        out << "schedule = ";
        for (std::size_t i = 0; i < file.run.schedule.size(); ++i)
            out << (i ? "," : "") << format_number(file.run.schedule[i]);
        out << "\n";
    }
    if (!file.run.side.empty()) out << "side = " << file.run.side << "\n";
    if (!file.run.estimates.empty()) {
        out << "estimates = ";
        for (std::size_t i = 0; i < file.run.estimates.size(); ++i)
            out << (i ? "," : "") << file.run.estimates[i];
        out << "\n";
    }
    out << "level = " << file.run.level << "\n";
    out << "n = " << format_number(file.run.penalty) << "\n";
    out << "samples = " << file.run.samples << "\n";
    return out.str();
}

ScenarioInstance instantiate_scenario(const ScenarioFile& file, double p) {
    ScenarioInstance instance;
    instance.tree = std::make_unique<TreeModel>(build_tree(file.horizon, file.depth, file.dim));
    const TreeModel& tree = *instance.tree;

    ScenarioConfig& sc = instance.config;
    sc.tree = instance.tree.get();
    sc.id = file.name;
    sc.p = NormParams(p);
    sc.scheme.kind = file.scheme;
    sc.scheme.fixed_point_tol = file.scheme_tol;
    sc.scheme.max_iterations = file.scheme_max_iter;

    try {
        sc.generator = make_generator(file.generator_id, file.generator_params);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::UnknownGenerator) throw;
        fail(ErrorKind::ParseError, file.name + ": [generator] " + e.what());
    }
    if (file.hypotheses) {
        sc.generator.declared.clear();
        for (const auto& name : *file.hypotheses)
            sc.generator.declared.insert(*hypothesis_from_name(name));
    }

    AdaptedProcess b = brownian(tree);
    AdaptedProcess sup_b(tree, 1);
    AdaptedProcess int_b(tree, 1);
    sup_b.at(0, 0) = 0.0;
    for (int k = 0; k < tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int c = 0; c < tree.branching(); ++c) {
                const std::uint64_t child = tree.child_of(v, c);
                sup_b.at(k + 1, child) = std::max(sup_b.at(k, v), b.at(k + 1, child, 0));
                int_b.at(k + 1, child) = int_b.at(k, v) + b.at(k, v, 0) * tree.step();
            }

    auto context_at = [&](int k, std::uint64_t v) {
        ExprContext ctx;
        ctx.t = tree.time_at(k);
        ctx.horizon = tree.horizon();
        ctx.step = tree.step();
        ctx.b = std::span<const double>(&b.at(k, v, 0), std::size_t(tree.dim()));
        ctx.sup_b = sup_b.at(k, v);
        ctx.int_b = int_b.at(k, v);
        return ctx;
    };

    sc.terminal.resize(tree.leaf_count());
    for (std::uint64_t v = 0; v < tree.leaf_count(); ++v)
        sc.terminal[v] = eval_expression(file.terminal, context_at(tree.depth(), v));

    if (file.barrier) {
        sc.barrier = AdaptedProcess(tree, 1);
        for (int k = 0; k <= tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
                sc.barrier->at(k, v) = eval_expression(file.barrier, context_at(k, v));
    }
    if (file.forcing) {
        sc.forcing = AdaptedProcess(tree, 1);
        for (int k = 0; k < tree.depth(); ++k)
            for (std::uint64_t v = 0; v < tree.node_count(k); ++v) {
                const double dv = eval_expression(file.forcing, context_at(k, v));
                for (int c = 0; c < tree.branching(); ++c)
                    sc.forcing.at(k + 1, tree.child_of(v, c)) = sc.forcing.at(k, v) + dv;
            }
    }
    sc.validate();
    return instance;
}

} // namespace rbsde
