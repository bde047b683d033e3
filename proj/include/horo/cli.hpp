#pragma once

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "horo/checks.hpp"
#include "horo/errors.hpp"
#include "horo/hconvex.hpp"
#include "horo/io.hpp"
#include "horo/problem.hpp"
#include "horo/solver.hpp"
#include "horo/xi.hpp"

namespace horo {

/// Exit statuses of run_command.
enum ExitCode : int {
    kExitOk = 0,
    kExitChecksFailed = 1,
    kExitUsage = 2,
    kExitError = 3,
};

namespace detail {

/// Files written by one command; removed again unless committed.
class Artifacts {
public:
    Artifacts() = default;
    Artifacts(const Artifacts&) = delete;
    Artifacts& operator=(const Artifacts&) = delete;
    ~Artifacts() {
        if (committed_) return;
        for (const auto& p : paths_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }

    void write(const std::string& path, const std::function<void(std::ostream&)>& fn) {
        paths_.push_back(path);
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write '" + path + "'");
        fn(out);
        out.flush();
        if (!out) throw ConfigError("write to '" + path + "' failed");
    }

    void commit() { committed_ = true; }

private:
    std::vector<std::string> paths_;
    bool committed_ = false;
};

/// Module a library error originates from, for the error line.
inline const char* origin(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "cli_io";
    if (dynamic_cast<const AssumptionFailure*>(&e)) return "checks";
    if (dynamic_cast<const EllipticityLoss*>(&e)) return "symfunc";
    if (dynamic_cast<const NotStrictlyHConvex*>(&e) || dynamic_cast<const InvalidBody*>(&e)) return "horo";
    if (dynamic_cast<const NewtonError*>(&e) || dynamic_cast<const ContinuationStall*>(&e) ||
        dynamic_cast<const NoAdmissibleRoot*>(&e)) {
        return "solver";
    }
    if (dynamic_cast<const InvalidArgument*>(&e)) return "input";
    return "internal";
}

inline void report_error(std::ostream& err, const std::exception& e) {
    err << "error [" << origin(e) << "]: " << e.what() << '\n';
    if (const auto* a = dynamic_cast<const AssumptionFailure*>(&e)) {
        Report r;
        add_assumption(r, "assumption", a->report());
        r.write(err);
    }
    if (const auto* r = dynamic_cast<const NoAdmissibleRoot*>(&e)) {
        err << "target=" << format_double(r->target()) << '\n';
        err << "threshold=" << format_double(r->threshold()) << '\n';
    }
}

/// Reads HORO_NUM_THREADS, if set, and hands it to Eigen.
inline void apply_thread_env() {
    const char* v = std::getenv("HORO_NUM_THREADS");
    if (!v || !*v) return;
    const int n = parse_int(v, "HORO_NUM_THREADS");
    if (n < 1) throw ConfigError("HORO_NUM_THREADS must be a positive integer");
    Eigen::setNbThreads(n);
}

inline void emit(const Report& r, const std::string& path, Artifacts& art, std::ostream& out) {
    r.write(out);
    if (!path.empty()) art.write(path, [&](std::ostream& o) { r.write(o); });
}

inline void add_config(Report& r, const RunConfig& cfg, const ScalarField& f) {
    add_spec(r, cfg.spec);
    r.add("grid.n_theta", cfg.grid.n_theta);
    if (cfg.spec.n == 2) r.add("grid.n_phi", cfg.grid.n_phi);
    r.add("grid.nodes", f.size());
    r.add("f.expr", cfg.f.base.text());
    if (!cfg.f.perturbation.empty()) {
        r.add("f.perturbation", cfg.f.perturbation.text());
        r.add("f.epsilon", cfg.f.epsilon);
    }
    r.add("f.scale", cfg.f.scale);
    r.add("f.power", to_string(cfg.f.power));
    r.add("f.min", f.min());
    r.add("f.max", f.max());
    r.add("solver.tol", cfg.solver.tol);
    r.add("solver.t_steps", cfg.solver.t_steps);
}

inline void add_assumption_set(Report& r, const AssumptionSet& s) {
    if (s.convexity) add_assumption(r, "convexity", *s.convexity);
    else r.add("convexity.verdict", "not_applicable");
    add_assumption(r, "barrier", s.barrier);
}

struct CommonPaths {
    std::string report, phi, f, mesh;
};

inline void choose_auto_epsilon(RunConfig& cfg, const GridPtr& g, Report& r) {
    cfg.f.epsilon = auto_epsilon(cfg, g, cfg.f.epsilon > 0.0 ? cfg.f.epsilon : 1.0);
    r.add("auto_epsilon", cfg.f.epsilon);
}

inline int cmd_solve(const std::string& config, CommonPaths paths, bool auto_eps, std::ostream& out) {
    RunConfig cfg = load_config(config);
    if (paths.report.empty()) paths.report = cfg.output.report;
    if (paths.phi.empty()) paths.phi = cfg.output.phi;
    if (paths.f.empty()) paths.f = cfg.output.f;
    if (paths.mesh.empty()) paths.mesh = cfg.output.mesh;
    if (!paths.mesh.empty() && cfg.spec.n != 2) throw ConfigError("mesh export supports n = 2 only");

    const auto g = cfg.make_grid();
    Report r;
    r.add("command", "solve");
    if (auto_eps) choose_auto_epsilon(cfg, g, r);
    const ScalarField f = cfg.make_f(g);
    add_config(r, cfg, f);

    const auto res = continuation_solve(f, cfg.spec, cfg.continuation_options());
    add_solve(r, res.report, cfg.solver.tol);
    const bool ok = res.report.converged && failed_checks(res.report.verification, cfg.solver.tol).empty();
    r.add("status", ok ? "pass" : "fail");

    Artifacts art;
    if (!paths.phi.empty()) art.write(paths.phi, [&](std::ostream& o) { write_field(o, res.phi); });
    if (!paths.f.empty()) art.write(paths.f, [&](std::ostream& o) { write_field(o, f); });
    if (!paths.mesh.empty()) {
        const auto body = make_body(res.phi);
        art.write(paths.mesh, [&](std::ostream& o) { write_mesh(o, body); });
    }
    emit(r, paths.report, art, out);
    art.commit();
    return ok ? kExitOk : kExitChecksFailed;
}

inline int cmd_constant(const ProblemSpec& spec, double gamma, std::ostream& out) {
    spec.validate();
    if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    Report r;
    r.add("command", "constant");
    add_spec(r, spec);
    r.add("gamma", gamma);
    const double target = std::pow(gamma, -1.0 / spec.degree());
    r.add("xi_target", target);
    const double thr = barrier_threshold(spec);
    r.add("barrier_threshold", thr);
    const double q = spec.q();
    const double c0 = constant_seed(spec, gamma);
    r.add("root", c0);
    r.add("log_root", std::log(c0));
    if (q > 1.0) {
        const double ts = xi_critical_point(q);
        r.add("critical_point", ts);
        r.add("critical_value", xi_critical_value(q));
        r.add("branch", "increasing");
        r.add("other_root", xi_inverse_decreasing(q, target));
        r.add("note", "two roots; the admissible one lies beyond the critical point");
    } else if (q == 1.0) {
        r.add("branch", "decreasing");
        r.add("note", "unique root; requires gamma below the barrier");
    } else {
        r.add("branch", "decreasing");
        r.add("note", "unique root on (1, inf)");
    }
    r.write(out);
    return kExitOk;
}

inline int cmd_xi_table(double q, double t_min, double t_max, int samples, std::ostream& out) {
    if (!(t_min > 1.0) || !(t_max > t_min)) throw InvalidArgument("need 1 < t-min < t-max");
    if (samples < 2) throw InvalidArgument("need at least 2 samples");
    Report r;
    r.add("command", "xi-table");
    r.add("q", q);
    const auto info = xi_eval(q, t_min);
    r.add("has_critical", info.has_critical);
    if (info.has_critical) {
        r.add("critical_point", info.critical_point);
        r.add("critical_value", info.critical_value);
    }
    r.add("limit_at_1", "inf");
    r.add("limit_at_inf", q < 1.0 ? "0" : (q == 1.0 ? "2" : "inf"));
    r.add("samples", samples);
    for (int i = 0; i < samples; ++i) {
        const double t = t_min * std::pow(t_max / t_min, static_cast<double>(i) / (samples - 1));
        r.add("sample." + std::to_string(i) + ".t", t);
        r.add("sample." + std::to_string(i) + ".xi", xi(q, t));
    }
    r.write(out);
    return kExitOk;
}

inline int cmd_check(const std::string& config, const std::string& report, bool auto_eps, std::ostream& out) {
    RunConfig cfg = load_config(config);
    const auto g = cfg.make_grid();
    Report r;
    r.add("command", "check-assumptions");
    if (auto_eps) choose_auto_epsilon(cfg, g, r);
    const ScalarField f = cfg.make_f(g);
    add_config(r, cfg, f);
    const auto s = check_assumptions(f, cfg.spec);
    add_assumption_set(r, s);
    r.add("status", s.passed() ? "pass" : "fail");
    Artifacts art;
    emit(r, report.empty() ? cfg.output.report : report, art, out);
    art.commit();
    return s.passed() ? kExitOk : kExitChecksFailed;
}

inline int cmd_verify(const std::string& config, const std::string& phi_path, const std::string& report,
                      std::ostream& out) {
    const RunConfig cfg = load_config(config);
    const ScalarField phi = load_field(phi_path);
    if (phi.grid().dim() != cfg.spec.n) throw ConfigError("field dump dimension does not match problem.n");
    const ScalarField f = cfg.make_f(phi.grid_ptr());
    Report r;
    r.add("command", "verify");
    add_config(r, cfg, f);
    r.add("phi.path", phi_path);
    const auto v = verify_solution(phi, f, cfg.spec);
    add_verification(r, v, cfg.solver.tol);
    const bool ok = failed_checks(v, cfg.solver.tol).empty();
    r.add("status", ok ? "pass" : "fail");
    Artifacts art;
    emit(r, report.empty() ? cfg.output.report : report, art, out);
    art.commit();
    return ok ? kExitOk : kExitChecksFailed;
}

inline int cmd_export_mesh(const std::string& phi_path, const std::string& mesh_path, std::ostream& out) {
    const ScalarField phi = load_field(phi_path);
    if (phi.grid().dim() != 2) throw ConfigError("mesh export supports n = 2 only");
    const auto body = make_body(phi);
    Artifacts art;
    art.write(mesh_path, [&](std::ostream& o) { write_mesh(o, body); });
    const Eigen::MatrixXd b = ball_points(body);
    Report r;
    r.add("command", "export-mesh");
    r.add("mesh.path", mesh_path);
    r.add("mesh.vertices", static_cast<std::size_t>(b.rows()));
    r.add("mesh.faces", grid_triangles(phi.grid()).size());
    r.add("mesh.max_radius", b.rowwise().norm().maxCoeff());
    r.add("mesh.min_radius", b.rowwise().norm().minCoeff());
    r.write(out);
    art.commit();
    return kExitOk;
}

}  // namespace detail

/// Entry point of the horo command-line tool. Returns the process exit status:
/// 0 when every requested check passed, 1 when a check failed, 2 on usage or input errors,
/// 3 when a library module raised an error.
inline int run_command(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Horospherical curvature equations on the sphere", "horo"};
    app.require_subcommand(1);

    detail::CommonPaths paths;
    std::string config, phi_path, mesh_path;
    bool auto_eps = false;

    auto* solve = app.add_subcommand("solve", "continue the constant solution to f and verify it");
    solve->add_option("config", config, "run configuration (INI)")->required();
    solve->add_option("--report", paths.report, "write the key=value report here too");
    solve->add_option("--phi", paths.phi, "write the solution field dump");
    solve->add_option("--f", paths.f, "write the prescribed f field dump");
    solve->add_option("--mesh", paths.mesh, "write a PLY mesh in the Poincare ball (n = 2)");
    solve->add_flag("--auto-epsilon", auto_eps, "bisect the largest perturbation amplitude passing the checks");

    ProblemSpec spec;
    std::string flavor = "CM";
    double gamma = 1.0;
    auto* constant = app.add_subcommand("constant", "constant solutions for f = gamma");
    constant->add_option("--n", spec.n)->required();
    constant->add_option("--k", spec.k)->required();
    constant->add_option("--p", spec.p)->required();
    constant->add_option("--gamma", gamma)->required();
    constant->add_option("--operator", flavor, "CM or WQ");

    double q = 0.0, t_min = 1.05, t_max = 5.0;
    int samples = 16;
    ProblemSpec xspec;
    auto* xt = app.add_subcommand("xi-table", "samples of xi_q(t) = 2 t^q / (t - 1/t) and its critical data");
    auto* q_opt = xt->add_option("--q", q);
    auto* n_opt = xt->add_option("--n", xspec.n);
    auto* k_opt = xt->add_option("--k", xspec.k);
    auto* p_opt = xt->add_option("--p", xspec.p);
    q_opt->excludes(n_opt)->excludes(k_opt)->excludes(p_opt);
    xt->add_option("--t-min", t_min);
    xt->add_option("--t-max", t_max);
    xt->add_option("--samples", samples);

    std::string report;
    auto* check = app.add_subcommand("check-assumptions", "structural checks on f");
    check->add_option("config", config)->required();
    check->add_option("--report", report);
    check->add_flag("--auto-epsilon", auto_eps);

    auto* verify = app.add_subcommand("verify", "invariant suite on a stored solution");
    verify->add_option("config", config)->required();
    verify->add_option("--phi", phi_path, "solution field dump")->required();
    verify->add_option("--report", report);

    auto* mesh = app.add_subcommand("export-mesh", "PLY mesh of a stored solution (n = 2)");
    mesh->add_option("--phi", phi_path)->required();
    mesh->add_option("--out", mesh_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error [cli_io]: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        detail::apply_thread_env();
        if (*solve) return detail::cmd_solve(config, paths, auto_eps, out);
        if (*constant) {
            spec.flavor = parse_flavor(flavor);
            return detail::cmd_constant(spec, gamma, out);
        }
        if (*xt) {
            if (!*q_opt) {
                if (!*n_opt || !*k_opt || !*p_opt) throw InvalidArgument("xi-table needs --q or all of --n, --k, --p");
                xspec.validate();
                q = xspec.q();
            }
            return detail::cmd_xi_table(q, t_min, t_max, samples, out);
        }
        if (*check) return detail::cmd_check(config, report, auto_eps, out);
        if (*verify) return detail::cmd_verify(config, phi_path, report, out);
        if (*mesh) return detail::cmd_export_mesh(phi_path, mesh_path, out);
    } catch (const ConfigError& e) {
        detail::report_error(err, e);
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        detail::report_error(err, e);
        return kExitUsage;
    } catch (const std::exception& e) {
        detail::report_error(err, e);
        return kExitError;
    }
    return kExitUsage;
}

}  // namespace horo
