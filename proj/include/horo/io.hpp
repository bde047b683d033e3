#pragma once

#include <Eigen/Dense>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "horo/checks.hpp"
#include "horo/errors.hpp"
#include "horo/hconvex.hpp"
#include "horo/problem.hpp"
#include "horo/solver.hpp"
#include "horo/sphere.hpp"

namespace horo {

/// Malformed or inconsistent configuration, field dump or command line.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Shortest text that reads back to the same double: 17 significant digits.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError(what + ": cannot read '" + std::string(s) + "' as a number");
    }
    return v;
}

inline int parse_int(std::string_view s, const std::string& what) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError(what + ": cannot read '" + std::string(s) + "' as an integer");
    }
    return v;
}

// ---- f expressions ----

/// One product term c * prod z_i^{e_i} * prod trig(m theta).
struct FTerm {
    double coef = 1.0;
    std::map<int, int> z_powers;  ///< ambient index (1-based) -> exponent
    std::vector<std::pair<bool, int>> trig;  ///< (is_cos, m)

    /// Degree under z -> -z; the term is even iff this is even.
    int parity_degree() const {
        int d = 0;
        for (const auto& [i, e] : z_powers) d += e;
        for (const auto& [c, m] : trig) d += m;
        return d;
    }

    double eval(const Eigen::VectorXd& z) const {
        double v = coef;
        for (const auto& [i, e] : z_powers) v *= std::pow(z(i - 1), e);
        if (!trig.empty()) {
            const double t = std::atan2(z(1), z(0));
            for (const auto& [c, m] : trig) v *= c ? std::cos(m * t) : std::sin(m * t);
        }
        return v;
    }
};

/// Sum of terms. Grammar: expr := ['+'|'-'] term (('+'|'-') term)*,
/// term := factor (('*'|'/') factor)*, factor := number | z<i>['^'<int>] | cos(<int>t) | sin(<int>t),
/// with '/' allowed only before a number.
class FExpression {
public:
    FExpression() = default;

    static FExpression parse(const std::string& text, int n) {
        FExpression e;
        e.text_ = text;
        Lexer lx{text, 0};
        lx.skip();
        if (lx.done()) throw ConfigError("empty f expression");
        double sign = 1.0;
        if (lx.peek() == '+' || lx.peek() == '-') sign = lx.take() == '-' ? -1.0 : 1.0;
        for (;;) {
            FTerm t = parse_term(lx, n);
            t.coef *= sign;
            if (t.parity_degree() % 2 != 0) {
                throw ConfigError("f expression term " + std::to_string(e.terms_.size() + 1) +
                                  " is odd under z -> -z; only even data are admissible");
            }
            e.terms_.push_back(std::move(t));
            lx.skip();
            if (lx.done()) break;
            const char c = lx.take();
            if (c != '+' && c != '-') throw lx.error("expected '+' or '-'");
            sign = c == '-' ? -1.0 : 1.0;
        }
        return e;
    }

    double operator()(const Eigen::VectorXd& z) const {
        double v = 0.0;
        for (const auto& t : terms_) v += t.eval(z);
        return v;
    }

    bool empty() const { return terms_.empty(); }
    const std::vector<FTerm>& terms() const { return terms_; }
    const std::string& text() const { return text_; }

private:
    struct Lexer {
        const std::string& s;
        std::size_t pos;
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool done() { skip(); return pos >= s.size(); }
        char peek() { skip(); return pos < s.size() ? s[pos] : '\0'; }
        char take() { skip(); return pos < s.size() ? s[pos++] : '\0'; }
        ConfigError error(const std::string& msg) const {
            return ConfigError("f expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + msg);
        }
        double number() {
            skip();
            const std::size_t start = pos;
            while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' ||
                                      ((s[pos] == 'e' || s[pos] == 'E') && pos > start) ||
                                      ((s[pos] == '+' || s[pos] == '-') && pos > start &&
                                       (s[pos - 1] == 'e' || s[pos - 1] == 'E')))) {
                ++pos;
            }
            if (pos == start) throw error("expected a number");
            double v = 0.0;
            const auto res = std::from_chars(s.data() + start, s.data() + pos, v);
            if (res.ec != std::errc() || res.ptr != s.data() + pos) throw error("malformed number");
            return v;
        }
        int integer() {
            skip();
            const std::size_t start = pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos == start) throw error("expected an integer");
            return std::stoi(s.substr(start, pos - start));
        }
        void expect(char c) {
            if (peek() != c) throw error(std::string("expected '") + c + "'");
            ++pos;
        }
    };

    static void parse_factor(Lexer& lx, int n, FTerm& t) {
        const char c = lx.peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            t.coef *= lx.number();
            return;
        }
        if (c == 'z') {
            lx.take();
            const int i = lx.integer();
            if (i < 1 || i > n + 1) throw lx.error("coordinate z" + std::to_string(i) + " does not exist on S^" + std::to_string(n));
            int e = 1;
            if (lx.peek() == '^') {
                lx.take();
                e = lx.integer();
            }
            t.z_powers[i] += e;
            return;
        }
        if (lx.s.compare(lx.pos, 3, "cos") == 0 || lx.s.compare(lx.pos, 3, "sin") == 0) {
            const bool is_cos = lx.s[lx.pos] == 'c';
            if (n != 1) throw lx.error("trigonometric terms in theta are only defined on S^1");
            lx.pos += 3;
            lx.expect('(');
            const int m = lx.peek() == 't' ? 1 : lx.integer();
            if (lx.peek() == '*') lx.take();
            lx.expect('t');
            lx.expect(')');
            t.trig.emplace_back(is_cos, m);
            return;
        }
        throw lx.error("expected a number, z<i>, cos(<m>t) or sin(<m>t)");
    }

    static FTerm parse_term(Lexer& lx, int n) {
        FTerm t;
        parse_factor(lx, n, t);
        for (;;) {
            const char c = lx.peek();
            if (c == '*') {
                lx.take();
                parse_factor(lx, n, t);
            } else if (c == '/') {
                lx.take();
                const double d = lx.number();
                if (d == 0.0) throw lx.error("division by zero");
                t.coef /= d;
            } else {
                return t;
            }
        }
    }

    std::vector<FTerm> terms_;
    std::string text_;
};

/// Exponent applied to the base expression of f.
enum class FPower { None, MinusDegree, MinusNPlusP };

inline std::string_view to_string(FPower p) {
    switch (p) {
        case FPower::None: return "none";
        case FPower::MinusDegree: return "-(n-k)";
        case FPower::MinusNPlusP: return "-(n+p)";
    }
    return "?";
}

inline FPower parse_power(std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
    if (s == "none" || s == "1") return FPower::None;
    if (s == "-(n-k)") return FPower::MinusDegree;
    if (s == "-(n+p)") return FPower::MinusNPlusP;
    throw ConfigError("f.power must be none, -(n-k) or -(n+p), got '" + s + "'");
}

/// f = scale * (base + epsilon * perturbation)^power.
struct FSpec {
    FExpression base;
    FExpression perturbation;
    double epsilon = 0.0;
    double scale = 1.0;
    FPower power = FPower::None;

    double exponent(const ProblemSpec& spec) const {
        switch (power) {
            case FPower::None: return 1.0;
            case FPower::MinusDegree: return -static_cast<double>(spec.degree());
            case FPower::MinusNPlusP: return -(spec.n + spec.p);
        }
        return 1.0;
    }

    /// f at amplitude eps on grid g, even-projected. Throws on a non-positive base or f.
    ScalarField instantiate(const GridPtr& g, const ProblemSpec& spec, double eps) const {
        const double ex = exponent(spec);
        Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
        for (std::size_t i = 0; i < g->size(); ++i) {
            const Eigen::VectorXd z = g->node(i);
            double b = base(z);
            if (!perturbation.empty()) b += eps * perturbation(z);
            if (!(b > 0.0)) {
                throw ConfigError("f base expression is not positive at node " + std::to_string(i) + " (value " +
                                  format_double(b) + ")");
            }
            v(static_cast<Eigen::Index>(i)) = scale * std::pow(b, ex);
        }
        ScalarField f = even_project(ScalarField(g, std::move(v)));
        if (!(f.min() > 0.0)) throw ConfigError("f is not positive on the grid");
        return f;
    }

    ScalarField instantiate(const GridPtr& g, const ProblemSpec& spec) const { return instantiate(g, spec, epsilon); }
};

struct GridConfig {
    int n_theta = 0;
    int n_phi = 0;
};

struct SolverConfig {
    double tol = 0.0;
    int t_steps = 16;
    int max_iter = 50;
    bool check_assumptions = true;
};

struct OutputConfig {
    std::string report, phi, f, mesh;
};

struct RunConfig {
    ProblemSpec spec;
    GridConfig grid;
    FSpec f;
    SolverConfig solver;
    OutputConfig output;

    GridPtr make_grid() const { return build_grid(spec.n, grid.n_theta, grid.n_phi); }
    ScalarField make_f(const GridPtr& g) const { return f.instantiate(g, spec); }
    ContinuationOptions continuation_options() const {
        ContinuationOptions o;
        o.tol = solver.tol;
        o.t_steps = solver.t_steps;
        o.newton.max_iter = solver.max_iter;
        o.check_assumptions = solver.check_assumptions;
        return o;
    }
};

namespace detail {

using Ptree = boost::property_tree::ptree;

inline void reject_unknown(const Ptree& section, const std::string& name, std::initializer_list<const char*> allowed) {
    for (const auto& [key, child] : section) {
        if (!child.empty()) throw ConfigError("[" + name + "] may not contain nested sections");
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError("unknown key '" + key + "' in [" + name + "]");
        }
    }
}

inline std::optional<std::string> get(const Ptree& section, const char* key) {
    if (auto v = section.get_optional<std::string>(key)) return *v;
    return std::nullopt;
}

inline bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError(what + ": expected true or false, got '" + s + "'");
}

}  // namespace detail

/// Parses an INI document with sections [problem], [grid], [f], [solver], [output].
/// [problem] and [f] are required; the rest have defaults.
inline RunConfig parse_config(const std::string& text) {
    detail::Ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    static const std::set<std::string> sections{"problem", "grid", "f", "solver", "output"};
    for (const auto& [name, child] : tree) {
        if (!sections.count(name)) {
            if (child.empty()) throw ConfigError("key '" + name + "' outside any section");
            throw ConfigError("unknown section [" + name + "]");
        }
    }

    RunConfig cfg;
    const auto problem = tree.get_child_optional("problem");
    if (!problem) throw ConfigError("missing [problem] section");
    detail::reject_unknown(*problem, "problem", {"n", "k", "p", "operator"});
    const auto n = detail::get(*problem, "n");
    const auto k = detail::get(*problem, "k");
    const auto p = detail::get(*problem, "p");
    if (!n || !k || !p) throw ConfigError("[problem] needs n, k and p");
    cfg.spec.n = parse_int(*n, "problem.n");
    cfg.spec.k = parse_int(*k, "problem.k");
    cfg.spec.p = parse_double(*p, "problem.p");
    if (auto op = detail::get(*problem, "operator")) {
        try {
            cfg.spec.flavor = parse_flavor(*op);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("problem.operator: ") + e.what());
        }
    }
    try {
        cfg.spec.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("[problem]: ") + e.what());
    }
    if (cfg.spec.n > 2) throw ConfigError("[problem]: only n = 1 and n = 2 have grids");

    const detail::Ptree empty;
    const auto& grid = tree.get_child("grid", empty);
    detail::reject_unknown(grid, "grid", {"n_theta", "n_phi"});
    cfg.grid.n_theta = cfg.spec.n == 1 ? 64 : 16;
    if (auto v = detail::get(grid, "n_theta")) cfg.grid.n_theta = parse_int(*v, "grid.n_theta");
    cfg.grid.n_phi = cfg.spec.n == 1 ? 0 : 2 * cfg.grid.n_theta;
    if (auto v = detail::get(grid, "n_phi")) {
        if (cfg.spec.n == 1) throw ConfigError("grid.n_phi applies only to n = 2");
        cfg.grid.n_phi = parse_int(*v, "grid.n_phi");
    }
    try {
        cfg.make_grid();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("[grid]: ") + e.what());
    }

    const auto fsec = tree.get_child_optional("f");
    if (!fsec) throw ConfigError("missing [f] section");
    detail::reject_unknown(*fsec, "f", {"expr", "perturbation", "epsilon", "scale", "power"});
    const auto expr = detail::get(*fsec, "expr");
    if (!expr) throw ConfigError("[f] needs expr");
    cfg.f.base = FExpression::parse(*expr, cfg.spec.n);
    if (auto v = detail::get(*fsec, "perturbation")) cfg.f.perturbation = FExpression::parse(*v, cfg.spec.n);
    if (auto v = detail::get(*fsec, "epsilon")) {
        cfg.f.epsilon = parse_double(*v, "f.epsilon");
        if (!(cfg.f.epsilon >= 0.0) || !std::isfinite(cfg.f.epsilon)) throw ConfigError("f.epsilon must be >= 0");
        if (cfg.f.perturbation.empty()) throw ConfigError("f.epsilon given without f.perturbation");
    }
    if (auto v = detail::get(*fsec, "scale")) {
        cfg.f.scale = parse_double(*v, "f.scale");
        if (!(cfg.f.scale > 0.0) || !std::isfinite(cfg.f.scale)) throw ConfigError("f.scale must be positive");
    }
    if (auto v = detail::get(*fsec, "power")) cfg.f.power = parse_power(*v);
    cfg.make_f(cfg.make_grid());

    const auto& solver = tree.get_child("solver", empty);
    detail::reject_unknown(solver, "solver", {"tol", "t_steps", "max_iter", "check_assumptions"});
    cfg.solver.tol = cfg.spec.n == 1 ? 1e-10 : 1e-8;
    if (auto v = detail::get(solver, "tol")) cfg.solver.tol = parse_double(*v, "solver.tol");
    if (auto v = detail::get(solver, "t_steps")) cfg.solver.t_steps = parse_int(*v, "solver.t_steps");
    if (auto v = detail::get(solver, "max_iter")) cfg.solver.max_iter = parse_int(*v, "solver.max_iter");
    if (auto v = detail::get(solver, "check_assumptions")) {
        cfg.solver.check_assumptions = detail::parse_bool(*v, "solver.check_assumptions");
    }
    if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver.tol must be positive");
    if (cfg.solver.t_steps < 1) throw ConfigError("solver.t_steps must be positive");
    if (cfg.solver.max_iter < 1) throw ConfigError("solver.max_iter must be positive");

    const auto& output = tree.get_child("output", empty);
    detail::reject_unknown(output, "output", {"report", "phi", "f", "mesh"});
    cfg.output.report = detail::get(output, "report").value_or("");
    cfg.output.phi = detail::get(output, "phi").value_or("");
    cfg.output.f = detail::get(output, "f").value_or("");
    cfg.output.mesh = detail::get(output, "mesh").value_or("");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---- field dumps ----

/// Writes "# horo-field dim=<n> n_theta=<.> n_phi=<.>", a column header, then one line per node:
/// ambient coordinates and value, comma separated, 17 significant digits.
inline void write_field(std::ostream& out, const ScalarField& phi) {
    const SphereGrid& g = phi.grid();
    out << "# horo-field dim=" << g.dim() << " n_theta=" << g.n_theta() << " n_phi=" << g.n_phi() << '\n';
    for (int a = 0; a <= g.dim(); ++a) out << 'z' << a + 1 << ',';
    out << "value\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Eigen::VectorXd z = g.node(i);
        for (Eigen::Index a = 0; a < z.size(); ++a) out << format_double(z(a)) << ',';
        out << format_double(phi[i]) << '\n';
    }
}

/// Reads a dump written by write_field, rebuilding the grid. Node coordinates must match the grid.
/// The field is tagged even when it is antipodally symmetric.
inline ScalarField read_field(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# horo-field", 0) != 0) throw ConfigError("not a field dump");
    int dim = 0, nt = 0, np = 0;
    {
        std::istringstream hs(line.substr(12));
        std::string tok;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw ConfigError("bad field dump header token '" + tok + "'");
            const std::string key = tok.substr(0, eq);
            const int v = parse_int(tok.substr(eq + 1), "field dump " + key);
            if (key == "dim") dim = v;
            else if (key == "n_theta") nt = v;
            else if (key == "n_phi") np = v;
            else throw ConfigError("unknown field dump header key '" + key + "'");
        }
    }
    GridPtr g;
    try {
        g = build_grid(dim, nt, np);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("field dump grid: ") + e.what());
    }
    if (!std::getline(in, line)) throw ConfigError("field dump has no column header");
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    for (std::size_t i = 0; i < g->size(); ++i) {
        if (!std::getline(in, line)) throw ConfigError("field dump ends after " + std::to_string(i) + " nodes");
        std::vector<double> cols;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cols.push_back(parse_double(std::string_view(line).substr(start, comma - start),
                                        "field dump line " + std::to_string(i + 3)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cols.size() != static_cast<std::size_t>(dim + 2)) {
            throw ConfigError("field dump line " + std::to_string(i + 3) + " has " + std::to_string(cols.size()) +
                              " columns");
        }
        const Eigen::VectorXd z = g->node(i);
        for (int a = 0; a <= dim; ++a) {
            if (std::abs(cols[a] - z(a)) > 1e-12) {
                throw ConfigError("field dump node " + std::to_string(i) + " does not match the grid");
            }
        }
        v(static_cast<Eigen::Index>(i)) = cols.back();
    }
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) throw ConfigError("trailing data in field dump");
    }
    bool even = true;
    for (std::size_t i = 0; i < g->size() && even; ++i) {
        even = v(static_cast<Eigen::Index>(i)) == v(static_cast<Eigen::Index>(g->antipode()[i]));
    }
    return ScalarField(g, std::move(v), even ? Parity::Even : Parity::General);
}

inline void save_field(const std::string& path, const ScalarField& phi) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_field(out, phi);
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

inline ScalarField load_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field dump '" + path + "'");
    return read_field(in);
}

// ---- mesh ----

/// Poincare-ball image x / (1 + x_{n+2}) of each embedded point; N x (n+1).
inline Eigen::MatrixXd ball_points(const HConvexBody& body) {
    const Eigen::MatrixXd& x = embed(body);
    const Eigen::Index n1 = x.cols() - 1;
    Eigen::MatrixXd b(x.rows(), n1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) b.row(i) = x.row(i).head(n1) / (1.0 + x(i, n1));
    return b;
}

/// Triangles of the structured (theta, phi) grid, with a fan over each polar ring.
inline std::vector<std::array<std::size_t, 3>> grid_triangles(const SphereGrid& g) {
    if (g.dim() != 2) throw InvalidArgument("meshes need an S^2 grid");
    const int nt = g.n_theta(), np = g.n_phi();
    auto id = [np](int j, int l) { return static_cast<std::size_t>(j * np + (l % np)); };
    std::vector<std::array<std::size_t, 3>> tris;
    for (int j = 0; j + 1 < nt; ++j) {
        for (int l = 0; l < np; ++l) {
            tris.push_back({id(j, l), id(j, l + 1), id(j + 1, l + 1)});
            tris.push_back({id(j, l), id(j + 1, l + 1), id(j + 1, l)});
        }
    }
    for (int l = 1; l + 1 < np; ++l) {
        tris.push_back({id(0, 0), id(0, l + 1), id(0, l)});
        tris.push_back({id(nt - 1, 0), id(nt - 1, l), id(nt - 1, l + 1)});
    }
    return tris;
}

/// ASCII PLY of the body in the Poincare ball: one vertex per grid node, triangulated faces.
inline void write_mesh(std::ostream& out, const HConvexBody& body) {
    const SphereGrid& g = body.phi.grid();
    if (g.dim() != 2) throw InvalidArgument("mesh export supports n = 2 only");
    const double margin = hconvex_margin(body.A);
    if (!(margin > 1e-12)) throw NotStrictlyHConvex("mesh export needs a strictly h-convex body", kNoNode, margin);
    const Eigen::MatrixXd b = ball_points(body);
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        if (!(b.row(i).norm() < 1.0)) {
            throw InvalidBody("ball image of node " + std::to_string(i) + " is not inside the unit ball",
                              static_cast<std::size_t>(i), b.row(i).norm());
        }
    }
    const auto tris = grid_triangles(g);
    out << "ply\nformat ascii 1.0\ncomment Poincare ball image of an h-convex body\n";
    out << "element vertex " << b.rows() << "\nproperty double x\nproperty double y\nproperty double z\n";
    out << "element face " << tris.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        out << format_double(b(i, 0)) << ' ' << format_double(b(i, 1)) << ' ' << format_double(b(i, 2)) << '\n';
    }
    for (const auto& t : tris) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

struct MeshData {
    Eigen::MatrixXd vertices;
    std::vector<std::array<std::size_t, 3>> faces;
};

/// Reads back the ASCII PLY written by write_mesh.
inline MeshData read_mesh(std::istream& in) {
    std::string line;
    std::size_t nv = 0, nf = 0;
    if (!std::getline(in, line) || line != "ply") throw ConfigError("not a PLY file");
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ls(line);
        std::string a, b;
        std::size_t c = 0;
        ls >> a;
        if (a == "element") {
            ls >> b >> c;
            if (b == "vertex") nv = c;
            else if (b == "face") nf = c;
        }
    }
    MeshData m;
    m.vertices.resize(static_cast<Eigen::Index>(nv), 3);
    for (std::size_t i = 0; i < nv; ++i) {
        if (!std::getline(in, line)) throw ConfigError("PLY vertex list truncated");
        std::istringstream ls(line);
        std::string x[3];
        ls >> x[0] >> x[1] >> x[2];
        for (int a = 0; a < 3; ++a) m.vertices(static_cast<Eigen::Index>(i), a) = parse_double(x[a], "PLY vertex");
    }
    for (std::size_t i = 0; i < nf; ++i) {
        if (!std::getline(in, line)) throw ConfigError("PLY face list truncated");
        std::istringstream ls(line);
        int cnt = 0;
        std::array<std::size_t, 3> t{};
        ls >> cnt >> t[0] >> t[1] >> t[2];
        if (cnt != 3 || !ls) throw ConfigError("PLY face " + std::to_string(i) + " is not a triangle");
        m.faces.push_back(t);
    }
    return m;
}

// ---- reports ----

/// Ordered flat key=value report.
class Report {
public:
    void add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
    void add(const std::string& key, const char* value) { add(key, std::string(value)); }
    void add(const std::string& key, std::string_view value) { add(key, std::string(value)); }
    void add(const std::string& key, double value) { add(key, format_double(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, value ? "true" : "false"); }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::optional<std::string> find(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        return std::nullopt;
    }

    void write(std::ostream& out) const {
        for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline void add_spec(Report& r, const ProblemSpec& spec) {
    r.add("problem.operator", to_string(spec.flavor));
    r.add("problem.n", spec.n);
    r.add("problem.k", spec.k);
    r.add("problem.p", spec.p);
    r.add("problem.q", spec.q());
}

inline void add_assumption(Report& r, const std::string& prefix, const AssumptionReport& a) {
    r.add(prefix + ".case", a.case_id);
    r.add(prefix + ".verdict", to_string(a.verdict));
    r.add(prefix + ".min", a.global_min);
    for (const auto& [name, value] : a.thresholds) r.add(prefix + "." + name, value);
}

inline void add_apriori(Report& r, const AprioriRecord& a) {
    r.add("apriori.phi_min", a.phi_min);
    r.add("apriori.phi_max", a.phi_max);
    r.add("apriori.phi_max_range.lo", a.phi_max_range.lo);
    r.add("apriori.phi_max_range.hi", a.phi_max_range.hi);
    r.add("apriori.phi_min_range.lo", a.phi_min_range.lo);
    r.add("apriori.phi_min_range.hi", a.phi_min_range.hi);
    r.add("apriori.c0_max_slack", a.c0_max_slack);
    r.add("apriori.c0_min_slack", a.c0_min_slack);
    r.add("apriori.cosh_slack", a.cosh_slack);
    r.add("apriori.gradient_max", a.gradient_max);
    r.add("apriori.gradient_slack", a.gradient_slack);
    r.add("apriori.hessian_norm", a.hessian_norm);
    r.add("apriori.c0_pass", a.c0_pass);
    r.add("apriori.cosh_pass", a.cosh_pass);
    r.add("apriori.gradient_pass", a.gradient_pass);
}

/// Names of the verification checks that fail; empty when all pass.
inline std::vector<std::string> failed_checks(const VerificationRecord& v, double tol) {
    std::vector<std::string> bad;
    if (!(v.residual < tol)) bad.push_back("residual");
    if (!(v.margin > 0.0)) bad.push_back("margin");
    if (!v.apriori.c0_pass) bad.push_back("apriori.c0");
    if (!v.apriori.cosh_pass) bad.push_back("apriori.cosh");
    if (!v.apriori.gradient_pass) bad.push_back("apriori.gradient");
    for (std::size_t l = 0; l < v.minkowski.size(); ++l) {
        if (!(v.minkowski[l].residual < 1e-6)) bad.push_back("minkowski." + std::to_string(l));
    }
    if (!(v.embedding_defect < 1e-10)) bad.push_back("embedding");
    if (!(v.weingarten_defect < 1e-8)) bad.push_back("weingarten");
    if (v.maclaurin_slack && !(*v.maclaurin_slack >= -tol)) bad.push_back("maclaurin");
    if (v.deformation_min && !(*v.deformation_min >= -1e-10)) bad.push_back("deformation");
    return bad;
}

inline void add_verification(Report& r, const VerificationRecord& v, double tol) {
    r.add("residual", v.residual);
    r.add("margin", v.margin);
    add_apriori(r, v.apriori);
    for (const auto& m : v.minkowski) {
        const std::string pre = "minkowski." + std::to_string(m.level);
        r.add(pre + ".lhs", m.lhs);
        r.add(pre + ".rhs", m.rhs);
        r.add(pre + ".residual", m.residual);
    }
    r.add("embedding_defect", v.embedding_defect);
    r.add("weingarten_defect", v.weingarten_defect);
    if (v.maclaurin_slack) r.add("maclaurin_slack", *v.maclaurin_slack);
    if (v.deformation_min) r.add("deformation_min", *v.deformation_min);
    r.add("constant_solution_recovered", v.constant_recovered);
    if (v.constant_recovered) {
        r.add("c0", v.c0);
        r.add("note", "constant solution recovered");
    }
    const auto bad = failed_checks(v, tol);
    std::string joined;
    for (const auto& b : bad) joined += (joined.empty() ? "" : ",") + b;
    r.add("checks_failed", joined.empty() ? std::string("none") : joined);
}

inline void add_solve(Report& r, const SolveReport& s, double tol) {
    r.add("converged", s.converged);
    r.add("final_residual", s.final_residual);
    r.add("continuation.steps", s.t_values.size());
    for (std::size_t i = 0; i < s.t_values.size(); ++i) {
        const std::string pre = "continuation." + std::to_string(i);
        r.add(pre + ".t", s.t_values[i]);
        r.add(pre + ".step", s.step_sizes[i]);
        r.add(pre + ".iterations", s.iterations[i]);
        r.add(pre + ".margin", s.margins[i]);
    }
    for (std::size_t i = 0; i < s.assumptions.size(); ++i) {
        const std::string pre = "homotopy." + std::to_string(i);
        r.add(pre + ".t", s.assumptions[i].t);
        if (!s.assumptions[i].convexity.empty()) r.add(pre + ".convexity", s.assumptions[i].convexity);
        r.add(pre + ".barrier", s.assumptions[i].barrier);
    }
    add_verification(r, s.verification, tol);
}

// ---- auto epsilon ----

/// Structural checks that gate a solve of f: convexity (CM, k >= 1) and the barrier.
struct AssumptionSet {
    std::optional<AssumptionReport> convexity;
    AssumptionReport barrier;
    bool passed() const { return (!convexity || convexity->passed()) && barrier.passed(); }
};

inline AssumptionSet check_assumptions(const ScalarField& f, const ProblemSpec& spec) {
    AssumptionSet s;
    if (spec.flavor == Flavor::ChristoffelMinkowski && spec.k >= 1) {
        s.convexity = check_assumption_convexity(f, spec.n, spec.k, spec.p);
    }
    s.barrier = check_barrier(f, spec.n, spec.k, spec.p);
    return s;
}

/// Largest eps in [0, eps_max] for which f(eps) is positive and passes check_assumptions,
/// by bisection (the passing set is taken to be an interval containing 0).
inline double auto_epsilon(const RunConfig& cfg, const GridPtr& g, double eps_max, int iterations = 50) {
    if (cfg.f.perturbation.empty()) throw ConfigError("--auto-epsilon needs f.perturbation");
    if (!(eps_max > 0.0)) throw ConfigError("--auto-epsilon needs a positive upper bound (f.epsilon)");
    auto ok = [&](double eps) {
        try {
            return check_assumptions(cfg.f.instantiate(g, cfg.spec, eps), cfg.spec).passed();
        } catch (const ConfigError&) {
            return false;
        }
    };
    if (!ok(0.0)) throw ConfigError("the unperturbed f already fails the assumption checks");
    if (ok(eps_max)) return eps_max;
    double lo = 0.0, hi = eps_max;
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace horo
