// xpid: design, certify and simulate extended PID controllers.
//
// Exit codes: 0 success, 1 usage/config error, 2 rejected design or
// certificate (or a non-Hurwitz polynomial), 3 simulation diverged.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xpid/xpid.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRejected = 2;
constexpr int kDiverged = 3;

void write_output(const std::string& file, const std::string& text) {
    if (file.empty() || file == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(file, std::ios::binary);
    if (!out) throw xpid::Error(xpid::ErrorCode::InvalidArgument, "cannot write " + file);
    out << text;
}

struct GainArgs {
    std::string file;
    std::string kind = "PID";
    std::vector<double> values;

    void attach(CLI::App* app) {
        app->add_option("--gains", file, "gains file {\"kind\", \"values\"}");
        app->add_option("--kind", kind, "PID or PD (with --values)")->check(CLI::IsMember({"PID", "PD"}));
        app->add_option("--values", values, "gain values k0..kn (PID) or k1..kn (PD)")->delimiter(',');
    }

    [[nodiscard]] xpid::GainVector load() const {
        if (!file.empty()) return xpid::parse_gain_vector(xpid::read_json_file(file), file);
        if (values.empty()) throw xpid::ConfigError("--gains", "give a gains file or --values");
        return kind == "PID" ? xpid::GainVector::pid(values) : xpid::GainVector::pd(values);
    }
};

struct DesignArgs {
    std::string pattern;
    std::optional<double> k;
    std::optional<double> lambda;
    std::vector<double> betas;
    int n = 3;
    std::optional<double> L, M;
    double b_lower = 1.0;
    std::string config;
    std::string out;
    GainArgs gains;
};

int run_design(const DesignArgs& a) {
    double L = 0.0, M = 0.0, b = a.b_lower;
    int n = a.n;
    if (!a.config.empty()) {
        const auto plant = xpid::parse_plant(xpid::read_json_file(a.config).at("plant"));
        L = plant.lipschitz_L;
        M = plant.lipschitz_M;
        b = plant.gain_lower_b;
        n = plant.n;
    } else if (a.pattern == "sec6") {
        L = std::sqrt(3.0) / 2.0;
        n = 3;
    }
    if (a.L) L = *a.L;
    if (a.M) M = *a.M;

    nlohmann::json out;
    std::optional<xpid::GainVector> g;
    if (a.lambda) {
        xpid::LambdaOverrides ov;
        if (!a.betas.empty()) ov.betas = a.betas;
        ov.k = a.k;
        std::optional<xpid::LambdaDesign> maybe;
        try {
            maybe = xpid::lambda_gains(*a.lambda, L, M, n, b, ov);
        } catch (const xpid::Error& e) {
            // Overrides the design rule refuses are a rejected design, not bad input.
            if (e.code() != xpid::ErrorCode::InvalidBeta) throw;
            out["rejected"] = e.what();
            std::cout << out.dump(2) << "\n";
            return kRejected;
        }
        const auto& ld = *maybe;
        g = ld.gains;
        out["betas"] = ld.betas;
        out["k_threshold"] = ld.k_threshold;
    } else if (!a.pattern.empty()) {
        if (!a.k) throw xpid::ConfigError("--k", "required with --pattern");
        g = a.pattern == "sec6" ? xpid::sec6_pattern_gains(*a.k) : xpid::geometric_gains(*a.k, n);
    } else {
        g = a.gains.load();
    }
    const auto report = g->is_pid() ? xpid::check_inequality(*g, L, M, b) : xpid::check_inequality_pd(*g, L, M);
    out["gains"] = xpid::gains_to_json(*g);
    out["L"] = L;
    out["M"] = M;
    out["report"] = xpid::to_json(report);
    std::cout << out.dump(2) << "\n";
    if (!a.out.empty()) write_output(a.out, xpid::gains_to_json(*g).dump(2) + "\n");
    return report.admissible ? kOk : kRejected;
}

int run_certify(const GainArgs& ga, double L, double M) {
    const auto g = ga.load();
    const auto res = xpid::verify_certificate(g, L, M);
    nlohmann::json out{{"gains", xpid::gains_to_json(g)}, {"certificate", xpid::to_json(res)}};
    std::cout << out.dump(2) << "\n";
    return xpid::accepted(res) ? kOk : kRejected;
}

int run_hurwitz(const GainArgs& ga, const std::vector<double>& coeffs) {
    const xpid::PolyCoeffs p = coeffs.empty() ? xpid::char_coeffs(ga.load()) : xpid::PolyCoeffs(coeffs);
    nlohmann::json out{{"coefficients", p.a}};
    xpid::Verdict v;
    if (p.degree() <= 4) {
        v = xpid::hurwitz_closed_form(p);
        if (p.degree() == 4) out["quartic_expression"] = xpid::quartic_hurwitz_expression(p);
    } else {
        const bool nie = xpid::nie_stable(p);
        out["determining_coeffs"] = xpid::determining_coeffs(p);
        out["nie_sufficient"] = nie;
        v = nie ? xpid::Verdict::Stable : xpid::routh_hurwitz(p);
    }
    out["routh_first_column"] = xpid::routh_first_column(p);
    out["verdict"] = xpid::to_string(v);
    out["hurwitz"] = v == xpid::Verdict::Stable;
    std::cout << out.dump(2) << "\n";
    return v == xpid::Verdict::Stable ? kOk : kRejected;
}

struct SimArgs {
    std::string config;
    std::string out;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

int run_simulate(const SimArgs& a) {
    auto ec = xpid::parse_experiment(xpid::read_json_file(a.config));
    if (a.paths) ec.sim.paths = *a.paths;
    if (a.seed) ec.sim.seed = *a.seed;
    if (a.workers) ec.sim.workers = *a.workers;
    const xpid::Setpoint sp = ec.sim.controller == xpid::ControllerMode::OpenLoop
                                  ? xpid::open_loop_setpoint(ec.plant, ec.y_star)
                                  : xpid::solve_equilibrium(ec.plant, ec.y_star);
    const xpid::GainVector* g = ec.gains ? &*ec.gains : nullptr;
    const auto st = xpid::simulate_paths(ec.plant, sp, g, ec.sim);
    std::ostringstream csv;
    xpid::write_stats_csv(csv, st);
    write_output(a.out, csv.str());
    return kOk;
}

struct ReproduceArgs {
    std::string figure;
    xpid::JobOptions opt;
};

int run_reproduce(const ReproduceArgs& a) {
    const auto res = xpid::reproduce(a.figure, a.opt);
    for (const auto& c : res.curves)
        std::cout << c.file << ": " << c.label << "  E|e(T)|^2=" << xpid::format_double(c.final_mean_sq_error)
                  << "  steady E|e|^2=" << xpid::format_double(c.steady.mean_sq_error)
                  << "  steady Var(u)=" << xpid::format_double(c.steady.var_u) << "\n";
    std::cout << "wrote " << res.files.size() << " files to " << a.opt.out_dir.string() << "\n";
    return kOk;
}

struct SweepArgs {
    std::string config;
    std::string param = "plant.params.sigma";
    std::vector<double> values;
    std::string out;
    double tail = 0.5;
};

int run_sweep(const SweepArgs& a) {
    const auto rows = xpid::sweep(xpid::read_json_file(a.config), a.param, a.values, a.tail);
    std::ostringstream csv;
    xpid::write_sweep_csv(csv, a.param, rows);
    write_output(a.out, csv.str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extended PID design, certification and Monte Carlo validation"};
    app.require_subcommand(1);

    DesignArgs design;
    auto* cmd_design = app.add_subcommand("design", "check the admissibility inequality for a gain vector");
    cmd_design->add_option("--pattern", design.pattern, "sec6 (k,2.5k,2.5k,k) or geometric")
        ->check(CLI::IsMember({"sec6", "geometric"}));
    cmd_design->add_option("--k", design.k, "scale k for patterns or the lambda rule");
    cmd_design->add_option("--lambda", design.lambda, "use the lambda design rule");
    cmd_design->add_option("--betas", design.betas, "beta overrides for the lambda rule")->delimiter(',');
    cmd_design->add_option("--n", design.n, "relative degree");
    cmd_design->add_option("--L", design.L, "Lipschitz constant of f in x");
    cmd_design->add_option("--M", design.M, "Lipschitz constant of g");
    cmd_design->add_option("--b-lower", design.b_lower, "lower bound on the symmetric part of df/du");
    cmd_design->add_option("--config", design.config, "take n, L, M, b from this config's plant section");
    cmd_design->add_option("--out", design.out, "write the gains file here");
    design.gains.attach(cmd_design);

    GainArgs cert_gains;
    double cert_L = 0.0, cert_M = 0.0;
    auto* cmd_cert = app.add_subcommand("certify", "build and verify the Lyapunov certificate");
    cert_gains.attach(cmd_cert);
    cmd_cert->add_option("--L", cert_L, "Lipschitz constant of f in x");
    cmd_cert->add_option("--M", cert_M, "Lipschitz constant of g");

    GainArgs hw_gains;
    std::vector<double> coeffs;
    auto* cmd_hw = app.add_subcommand("hurwitz", "stability of the characteristic polynomial");
    hw_gains.attach(cmd_hw);
    cmd_hw->add_option("--coeffs", coeffs, "polynomial coefficients a0..aN (ascending)")->delimiter(',');

    SimArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo ensemble statistics as CSV");
    cmd_sim->add_option("--config", sim.config, "experiment JSON")->required()->check(CLI::ExistingFile);
    cmd_sim->add_option("--out", sim.out, "CSV file (default stdout)");
    cmd_sim->add_option("--paths", sim.paths, "override sim.paths");
    cmd_sim->add_option("--seed", sim.seed, "override sim.seed");
    cmd_sim->add_option("--workers", sim.workers, "override sim.workers");

    ReproduceArgs rep;
    std::string rep_dir = ".";
    auto* cmd_rep = app.add_subcommand("reproduce", "benchmark figure jobs: CSV per curve plus gnuplot script");
    cmd_rep->add_option("figure", rep.figure, "fig1, fig2 or fig3")->required()->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
    cmd_rep->add_option("--out-dir", rep_dir, "output directory");
    cmd_rep->add_option("--paths", rep.opt.paths, "Monte Carlo paths per curve");
    cmd_rep->add_option("--dt", rep.opt.dt, "time step");
    cmd_rep->add_option("--horizon", rep.opt.horizon, "final time");
    cmd_rep->add_option("--seed", rep.opt.seed, "seed shared by all curves");
    cmd_rep->add_option("--stride", rep.opt.record_stride, "steps between recorded samples");
    cmd_rep->add_option("--workers", rep.opt.workers, "worker threads (0: XPID_WORKERS or all cores)");
    cmd_rep->add_option("--y-star", rep.opt.y_star, "setpoint");

    SweepArgs sw;
    auto* cmd_sw = app.add_subcommand("sweep", "steady-state moments over a grid of one config field");
    cmd_sw->add_option("--config", sw.config, "experiment JSON")->required()->check(CLI::ExistingFile);
    cmd_sw->add_option("--param", sw.param, "dotted field path, e.g. plant.params.sigma or gains.k");
    cmd_sw->add_option("--values", sw.values, "grid values")->required()->delimiter(',');
    cmd_sw->add_option("--tail", sw.tail, "steady-state window starts at tail * horizon");
    cmd_sw->add_option("--out", sw.out, "CSV file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_design) return run_design(design);
        if (*cmd_cert) return run_certify(cert_gains, cert_L, cert_M);
        if (*cmd_hw) return run_hurwitz(hw_gains, coeffs);
        if (*cmd_sim) return run_simulate(sim);
        if (*cmd_rep) {
            rep.opt.out_dir = rep_dir;
            return run_reproduce(rep);
        }
        if (*cmd_sw) return run_sweep(sw);
    } catch (const xpid::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDiverged;
    } catch (const xpid::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}
