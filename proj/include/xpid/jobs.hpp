#pragma once

// Reproduction jobs for the third-order benchmark and parameter sweeps.
//
// y*, dt, horizon and the fig1 parameter sets are this harness's choices
// and are written into each job's metadata file. Every curve of a job shares one seed (common random numbers).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xpid/config.hpp"
#include "xpid/design.hpp"
#include "xpid/model.hpp"
#include "xpid/plants.hpp"
#include "xpid/report.hpp"
#include "xpid/simulate.hpp"

namespace xpid {

struct JobOptions {
    std::filesystem::path out_dir = ".";
    double dt = 1e-3;
    double horizon = 30.0;
    std::size_t paths = 20000;
    std::uint64_t seed = 20240601;
    int record_stride = 100;
    unsigned workers = 0;
    double y_star = 1.0;
};

struct CurveSummary {
    std::string label;
    std::string file;
    double final_mean_sq_error = 0.0;
    SteadyState steady;
};

struct JobResult {
    std::string name;
    std::vector<CurveSummary> curves;
    std::vector<std::string> files;
};

/// Parameter sets for the fig1 job, all inside |a|,|b|,|c| <= 1/2 and mu >= 0.
inline const std::vector<Sec6Params>& fig1_parameter_sets() {
    static const std::vector<Sec6Params> sets{
        {0.4, -0.3, 0.5, 6.0, 5.2, 0.2},
        {-0.5, 0.5, -0.5, -3.0, 0.0, 0.1},
        {0.2, 0.1, -0.2, 0.0, 2.0, 0.3},
        {0.5, -0.5, 0.5, 10.0, 10.0, 0.4},
        {0.0, 0.0, 0.0, 1.0, 1.0, 0.0},
    };
    return sets;
}

inline constexpr double kFig23Sigmas[] = {0.0, 0.2, 0.4};

inline Sec6Params fig23_params(double sigma) { return {0.4, -0.3, 0.5, 6.0, 5.2, sigma}; }

inline GainVector benchmark_gains() { return sec6_pattern_gains(8.6); }

namespace detail {

inline SimConfig job_sim(const JobOptions& o, Vec initial) {
    SimConfig s;
    s.dt = o.dt;
    s.horizon = o.horizon;
    s.paths = o.paths;
    s.seed = o.seed;
    s.record_stride = o.record_stride;
    s.workers = o.workers;
    s.controller = ControllerMode::PID;
    s.initial_state = std::move(initial);
    return s;
}

inline std::string params_label(const Sec6Params& p) {
    std::ostringstream os;
    os << "a=" << format_double(p.a) << " b=" << format_double(p.b) << " c=" << format_double(p.c)
       << " d=" << format_double(p.d) << " mu=" << format_double(p.mu) << " sigma=" << format_double(p.sigma);
    return os.str();
}

inline nlohmann::json params_json(const Sec6Params& p) {
    return {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"d", p.d}, {"mu", p.mu}, {"sigma", p.sigma}};
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + file.string());
    out << text;
}

inline nlohmann::json job_metadata(const std::string& name, const JobOptions& o, const Vec& x0) {
    return {{"job", name},
            {"plant", "sec6"},
            {"gains", gains_to_json(benchmark_gains())},
            {"y_star", o.y_star},
            {"initial_state", x0},
            {"dt", o.dt},
            {"horizon", o.horizon},
            {"paths", o.paths},
            {"seed", o.seed},
            {"record_stride", o.record_stride},
            {"scheme", "Euler-Maruyama"}};
}

// Simulates one benchmark curve and writes its CSV via `writer`.
template <class Writer>
CurveSummary run_curve(const Sec6Params& p, const JobOptions& o, const Vec& x0, const std::string& file,
                       const std::string& label, Writer&& writer) {
    const PlantSpec plant = sec6_plant(p);
    const Setpoint sp = solve_equilibrium(plant, o.y_star);
    const EnsembleStats st = simulate_paths(plant, sp, benchmark_gains(), job_sim(o, x0));
    std::ostringstream csv;
    writer(csv, st);
    write_text(o.out_dir / file, csv.str());
    return {label, file, st.mean_sq_error.back(), steady_state(st, o.horizon / 2.0)};
}

}  // namespace detail

/// fig1: E|e(t)|^2 for several parameter sets from x(0) = (0.5, 0.5, 0.3).
inline JobResult reproduce_fig1(const JobOptions& o) {
    std::filesystem::create_directories(o.out_dir);
    const Vec x0{0.5, 0.5, 0.3};
    JobResult res{"fig1", {}, {}};
    nlohmann::json meta = detail::job_metadata("fig1", o, x0);
    std::vector<PlotCurve> curves;
    const auto& sets = fig1_parameter_sets();
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const std::string file = "fig1_set" + std::to_string(i + 1) + ".csv";
        const std::string label = detail::params_label(sets[i]);
        res.curves.push_back(detail::run_curve(sets[i], o, x0, file, label, write_error_csv));
        meta["curves"].push_back({{"file", file}, {"params", detail::params_json(sets[i])}});
        curves.push_back({file, label, 2});
        res.files.push_back(file);
    }
    detail::write_text(o.out_dir / "fig1.gp", gnuplot_script("fig1.png", "E|e(t)|^2", curves, true));
    detail::write_text(o.out_dir / "fig1_meta.json", meta.dump(2) + "\n");
    res.files.push_back("fig1.gp");
    res.files.push_back("fig1_meta.json");
    return res;
}

/// fig2: E|e(t)|^2 for sigma in {0, 0.2, 0.4} from x(0) = (0.9, 0, 0.1).
inline JobResult reproduce_fig2(const JobOptions& o) {
    std::filesystem::create_directories(o.out_dir);
    const Vec x0{0.9, 0.0, 0.1};
    JobResult res{"fig2", {}, {}};
    nlohmann::json meta = detail::job_metadata("fig2", o, x0);
    std::vector<PlotCurve> curves;
    for (double sigma : kFig23Sigmas) {
        const Sec6Params p = fig23_params(sigma);
        const std::string file = "fig2_sigma" + format_double(sigma) + ".csv";
        const std::string label = "sigma=" + format_double(sigma);
        res.curves.push_back(detail::run_curve(p, o, x0, file, label, write_error_csv));
        meta["curves"].push_back({{"file", file}, {"params", detail::params_json(p)}});
        curves.push_back({file, label, 2});
        res.files.push_back(file);
    }
    detail::write_text(o.out_dir / "fig2.gp", gnuplot_script("fig2.png", "E|e(t)|^2", curves, true));
    detail::write_text(o.out_dir / "fig2_meta.json", meta.dump(2) + "\n");
    res.files.push_back("fig2.gp");
    res.files.push_back("fig2_meta.json");
    return res;
}

/// fig3: E|u(t)|^2 and Var(u(t)) for sigma in {0, 0.2, 0.4} from x(0) = (1.3, 0, 0.1).
inline JobResult reproduce_fig3(const JobOptions& o) {
    std::filesystem::create_directories(o.out_dir);
    const Vec x0{1.3, 0.0, 0.1};
    JobResult res{"fig3", {}, {}};
    nlohmann::json meta = detail::job_metadata("fig3", o, x0);
    std::vector<PlotCurve> mean_curves, var_curves;
    for (double sigma : kFig23Sigmas) {
        const Sec6Params p = fig23_params(sigma);
        const std::string file = "fig3_sigma" + format_double(sigma) + ".csv";
        const std::string label = "sigma=" + format_double(sigma);
        res.curves.push_back(detail::run_curve(p, o, x0, file, label, write_input_csv));
        meta["curves"].push_back({{"file", file}, {"params", detail::params_json(p)}});
        mean_curves.push_back({file, label, 2});
        var_curves.push_back({file, label, 4});
        res.files.push_back(file);
    }
    detail::write_text(o.out_dir / "fig3_mean_sq_u.gp", gnuplot_script("fig3_mean_sq_u.png", "E|u(t)|^2", mean_curves));
    detail::write_text(o.out_dir / "fig3_var_u.gp", gnuplot_script("fig3_var_u.png", "Var(u(t))", var_curves));
    detail::write_text(o.out_dir / "fig3_meta.json", meta.dump(2) + "\n");
    res.files.push_back("fig3_mean_sq_u.gp");
    res.files.push_back("fig3_var_u.gp");
    res.files.push_back("fig3_meta.json");
    return res;
}

inline JobResult reproduce(const std::string& which, const JobOptions& o) {
    if (which == "fig1") return reproduce_fig1(o);
    if (which == "fig2") return reproduce_fig2(o);
    if (which == "fig3") return reproduce_fig3(o);
    throw Error(ErrorCode::InvalidArgument, "unknown figure '" + which + "' (expected fig1, fig2 or fig3)");
}

/// Sets the numeric field at dotted `path` (e.g. "plant.params.sigma", "gains.k") in a copy of `doc`.
inline nlohmann::json with_field(nlohmann::json doc, const std::string& path, double value) {
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError(path, "empty path component");
        if (!node->is_object()) throw ConfigError(path, "'" + key + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return doc;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

struct SweepRow {
    double value = 0.0;
    SteadyState steady;
};

/// Steady-state moments (window t >= tail_start * horizon) for each value of the field at `path`.
inline std::vector<SweepRow> sweep(const nlohmann::json& base, const std::string& path, const std::vector<double>& values,
                                   double tail_start = 0.5) {
    std::vector<SweepRow> rows;
    for (double v : values) {
        const ExperimentConfig ec = parse_experiment(with_field(base, path, v));
        const Setpoint sp = ec.sim.controller == ControllerMode::OpenLoop ? open_loop_setpoint(ec.plant, ec.y_star)
                                                                          : solve_equilibrium(ec.plant, ec.y_star);
        const GainVector* g = ec.gains ? &*ec.gains : nullptr;
        const EnsembleStats st = simulate_paths(ec.plant, sp, g, ec.sim);
        rows.push_back({v, steady_state(st, tail_start * ec.sim.horizon)});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::string& param, const std::vector<SweepRow>& rows) {
    std::vector<double> v, e, ese, s, sse, u, use;
    for (const auto& r : rows) {
        v.push_back(r.value);
        e.push_back(r.steady.mean_sq_error);
        ese.push_back(r.steady.mean_sq_error_se);
        s.push_back(r.steady.mean_sq_state_dev);
        sse.push_back(r.steady.mean_sq_state_dev_se);
        u.push_back(r.steady.var_u);
        use.push_back(r.steady.var_u_se);
    }
    write_csv(os, {{param, &v},
                   {"steady_mean_sq_error", &e},
                   {"steady_mean_sq_error_se", &ese},
                   {"steady_mean_sq_state_dev", &s},
                   {"steady_mean_sq_state_dev_se", &sse},
                   {"steady_var_u", &u},
                   {"steady_var_u_se", &use}});
}

}  // namespace xpid
