#pragma once

// JSON experiment description with sections plant / gains / sim / bounds.
// Validation failures name the offending field, e.g. "sim.dt: must be positive".

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xpid/design.hpp"
#include "xpid/error.hpp"
#include "xpid/model.hpp"
#include "xpid/plants.hpp"
#include "xpid/simulate.hpp"

namespace xpid {

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& msg)
        : Error(ErrorCode::ConfigError, field + ": " + msg), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

using Json = nlohmann::json;

struct BoundsConfig {
    std::optional<double> lambda;
    double R = 1.0;  // bound on ||df/du|| used by c3
};

struct ExperimentConfig {
    PlantSpec plant;
    std::optional<GainVector> gains;
    std::vector<double> betas;  // set when the gains came from the lambda rule
    SimConfig sim;
    Vec y_star;
    BoundsConfig bounds;
};

namespace cfg {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline const Json* find(const Json& j, const std::string& key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
}

inline double number_or(const Json& j, const std::string& path, const std::string& key, double fallback) {
    const Json* v = find(j, key);
    return v ? number(*v, join(path, key)) : fallback;
}

inline std::int64_t integer(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::vector<double> numbers(const Json& v, const std::string& path) {
    if (v.is_number()) return {number(v, path)};
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::string string(const Json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

inline const Json& object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    return j;
}

inline void known_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(join(path, it.key()), "unknown field");
    }
}

// Rewraps library errors raised while building an object so they carry the field path.
template <class F>
auto at(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace cfg

inline PlantSpec parse_plant(const Json& j, const std::string& path = "plant") {
    cfg::object(j, path);
    cfg::known_keys(j, path, {"kind", "params", "n", "drift", "diffusion", "L", "M", "b_lower"});
    const Json* kind = cfg::find(j, "kind");
    if (!kind) throw ConfigError(cfg::join(path, "kind"), "missing");
    const std::string k = cfg::string(*kind, cfg::join(path, "kind"));
    PlantSpec plant;
    if (k == "expression") {
        const Json* n = cfg::find(j, "n");
        const Json* drift = cfg::find(j, "drift");
        if (!n) throw ConfigError(cfg::join(path, "n"), "missing");
        if (!drift) throw ConfigError(cfg::join(path, "drift"), "missing");
        const auto nv = cfg::integer(*n, cfg::join(path, "n"));
        if (nv < 1) throw ConfigError(cfg::join(path, "n"), "must be >= 1");
        const std::string f = cfg::string(*drift, cfg::join(path, "drift"));
        const Json* diff = cfg::find(j, "diffusion");
        const std::string g = diff ? cfg::string(*diff, cfg::join(path, "diffusion")) : "0";
        const double L = cfg::number_or(j, path, "L", 0.0);
        const double M = cfg::number_or(j, path, "M", 0.0);
        const double b = cfg::number_or(j, path, "b_lower", 1.0);
        cfg::at(cfg::join(path, "drift"), [&] { return parse_expr(f, static_cast<int>(nv), true); });
        cfg::at(cfg::join(path, "diffusion"), [&] { return parse_expr(g, static_cast<int>(nv), false); });
        plant = cfg::at(path, [&] { return expression_plant(static_cast<int>(nv), f, g, L, M, b); });
    } else {
        if (!builtin_params().count(k)) throw ConfigError(cfg::join(path, "kind"), "unknown plant '" + k + "'");
        std::map<std::string, double> params;
        if (const Json* p = cfg::find(j, "params")) {
            cfg::object(*p, cfg::join(path, "params"));
            for (auto it = p->begin(); it != p->end(); ++it) {
                const std::string field = cfg::join(path, "params." + it.key());
                if (!builtin_params().at(k).count(it.key())) throw ConfigError(field, "unknown parameter");
                params[it.key()] = cfg::number(*it, field);
            }
        }
        plant = cfg::at(cfg::join(path, "params"), [&] { return make_builtin(k, params); });
        plant.lipschitz_L = cfg::number_or(j, path, "L", plant.lipschitz_L);
        plant.lipschitz_M = cfg::number_or(j, path, "M", plant.lipschitz_M);
        plant.gain_lower_b = cfg::number_or(j, path, "b_lower", plant.gain_lower_b);
    }
    if (plant.lipschitz_L < 0) throw ConfigError(cfg::join(path, "L"), "must be >= 0");
    if (plant.lipschitz_M < 0) throw ConfigError(cfg::join(path, "M"), "must be >= 0");
    if (!(plant.gain_lower_b > 0)) throw ConfigError(cfg::join(path, "b_lower"), "must be > 0");
    return plant;
}

/// Gains file / section: {"kind": "PID"|"PD", "values": [...]}.
inline GainVector parse_gain_vector(const Json& j, const std::string& path = "gains") {
    cfg::object(j, path);
    const Json* kind = cfg::find(j, "kind");
    const Json* values = cfg::find(j, "values");
    if (!kind) throw ConfigError(cfg::join(path, "kind"), "missing");
    if (!values) throw ConfigError(cfg::join(path, "values"), "missing");
    const std::string k = cfg::string(*kind, cfg::join(path, "kind"));
    const auto v = cfg::numbers(*values, cfg::join(path, "values"));
    if (k == "PID") return cfg::at(cfg::join(path, "values"), [&] { return GainVector::pid(v); });
    if (k == "PD") return cfg::at(cfg::join(path, "values"), [&] { return GainVector::pd(v); });
    throw ConfigError(cfg::join(path, "kind"), "expected \"PID\" or \"PD\"");
}

inline Json gains_to_json(const GainVector& g) {
    return Json{{"kind", to_string(g.kind())}, {"values", std::vector<double>(g.values().begin(), g.values().end())}};
}

/// Gains section: explicit {"kind","values"}, a pattern {"pattern": "sec6"|"geometric", "k"},
/// or the lambda rule {"lambda", optional "betas", optional "k"}.
inline void parse_gains(const Json& j, const PlantSpec& plant, ExperimentConfig& out, const std::string& path = "gains") {
    cfg::object(j, path);
    if (cfg::find(j, "values")) {
        cfg::known_keys(j, path, {"kind", "values"});
        out.gains = parse_gain_vector(j, path);
        return;
    }
    if (const Json* pat = cfg::find(j, "pattern")) {
        cfg::known_keys(j, path, {"pattern", "k"});
        const std::string p = cfg::string(*pat, cfg::join(path, "pattern"));
        const Json* k = cfg::find(j, "k");
        if (!k) throw ConfigError(cfg::join(path, "k"), "missing");
        const double kv = cfg::number(*k, cfg::join(path, "k"));
        if (p == "sec6") out.gains = cfg::at(cfg::join(path, "k"), [&] { return sec6_pattern_gains(kv); });
        else if (p == "geometric") out.gains = cfg::at(cfg::join(path, "k"), [&] { return geometric_gains(kv, plant.n); });
        else throw ConfigError(cfg::join(path, "pattern"), "expected \"sec6\" or \"geometric\"");
        return;
    }
    if (const Json* lam = cfg::find(j, "lambda")) {
        cfg::known_keys(j, path, {"lambda", "betas", "k"});
        LambdaOverrides ov;
        if (const Json* b = cfg::find(j, "betas")) ov.betas = cfg::numbers(*b, cfg::join(path, "betas"));
        if (const Json* k = cfg::find(j, "k")) ov.k = cfg::number(*k, cfg::join(path, "k"));
        const double lv = cfg::number(*lam, cfg::join(path, "lambda"));
        const LambdaDesign ld = cfg::at(path, [&] {
            return lambda_gains(lv, plant.lipschitz_L, plant.lipschitz_M, plant.n, plant.gain_lower_b, ov);
        });
        out.gains = ld.gains;
        out.betas = ld.betas;
        if (!out.bounds.lambda) out.bounds.lambda = lv;
        return;
    }
    throw ConfigError(path, "expected \"values\", \"pattern\" or \"lambda\"");
}

inline SimConfig parse_sim(const Json& j, const PlantSpec& plant, Vec& y_star, const std::string& path = "sim") {
    cfg::object(j, path);
    cfg::known_keys(j, path, {"y_star", "dt", "horizon", "paths", "seed", "record_stride", "controller",
                              "initial_state", "initial_integral", "workers"});
    SimConfig s;
    s.dt = cfg::number_or(j, path, "dt", s.dt);
    s.horizon = cfg::number_or(j, path, "horizon", s.horizon);
    if (const Json* v = cfg::find(j, "paths")) {
        const auto p = cfg::integer(*v, cfg::join(path, "paths"));
        if (p < 1) throw ConfigError(cfg::join(path, "paths"), "must be >= 1");
        s.paths = static_cast<std::size_t>(p);
    }
    if (const Json* v = cfg::find(j, "seed")) {
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
            throw ConfigError(cfg::join(path, "seed"), "expected a nonnegative integer");
        s.seed = v->get<std::uint64_t>();
    }
    if (const Json* v = cfg::find(j, "record_stride")) {
        const auto r = cfg::integer(*v, cfg::join(path, "record_stride"));
        if (r < 1) throw ConfigError(cfg::join(path, "record_stride"), "must be >= 1");
        s.record_stride = static_cast<int>(r);
    }
    if (const Json* v = cfg::find(j, "workers")) {
        const auto w = cfg::integer(*v, cfg::join(path, "workers"));
        if (w < 0) throw ConfigError(cfg::join(path, "workers"), "must be >= 0");
        s.workers = static_cast<unsigned>(w);
    }
    if (const Json* v = cfg::find(j, "controller")) {
        const std::string c = cfg::string(*v, cfg::join(path, "controller"));
        if (c == "PID") s.controller = ControllerMode::PID;
        else if (c == "PD") s.controller = ControllerMode::PD;
        else if (c == "OpenLoop") s.controller = ControllerMode::OpenLoop;
        else throw ConfigError(cfg::join(path, "controller"), "expected PID, PD or OpenLoop");
    }
    const auto d = static_cast<std::size_t>(plant.d);
    y_star = Vec(d, 0.0);
    if (const Json* v = cfg::find(j, "y_star")) y_star = cfg::numbers(*v, cfg::join(path, "y_star"));
    if (y_star.size() != d) throw ConfigError(cfg::join(path, "y_star"), "needs " + std::to_string(d) + " entries");
    if (const Json* v = cfg::find(j, "initial_state")) {
        s.initial_state = cfg::numbers(*v, cfg::join(path, "initial_state"));
        if (s.initial_state.size() != plant.state_size())
            throw ConfigError(cfg::join(path, "initial_state"), "needs " + std::to_string(plant.state_size()) + " entries");
    }
    if (const Json* v = cfg::find(j, "initial_integral")) {
        s.initial_integral = cfg::numbers(*v, cfg::join(path, "initial_integral"));
        if (s.initial_integral.size() != d) throw ConfigError(cfg::join(path, "initial_integral"), "needs d entries");
    }
    if (!(s.dt > 0)) throw ConfigError(cfg::join(path, "dt"), "must be positive");
    if (!(s.horizon > 0)) throw ConfigError(cfg::join(path, "horizon"), "must be positive");
    if (s.dt > s.horizon) throw ConfigError(cfg::join(path, "dt"), "must not exceed sim.horizon");
    return s;
}

inline ExperimentConfig parse_experiment(const Json& j) {
    cfg::object(j, "");
    cfg::known_keys(j, "", {"plant", "gains", "sim", "bounds"});
    ExperimentConfig out;
    const Json* plant = cfg::find(j, "plant");
    if (!plant) throw ConfigError("plant", "missing");
    out.plant = parse_plant(*plant);
    if (const Json* b = cfg::find(j, "bounds")) {
        cfg::object(*b, "bounds");
        cfg::known_keys(*b, "bounds", {"lambda", "R"});
        if (const Json* l = cfg::find(*b, "lambda")) {
            out.bounds.lambda = cfg::number(*l, "bounds.lambda");
            if (!(*out.bounds.lambda > 0)) throw ConfigError("bounds.lambda", "must be positive");
        }
        out.bounds.R = cfg::number_or(*b, "bounds", "R", 1.0);
        if (out.bounds.R < 0) throw ConfigError("bounds.R", "must be >= 0");
    }
    if (const Json* g = cfg::find(j, "gains")) {
        parse_gains(*g, out.plant, out);
        if (out.gains->n() != out.plant.n)
            throw ConfigError("gains", "designed for n=" + std::to_string(out.gains->n()) + " but plant.n=" +
                                           std::to_string(out.plant.n));
    }
    out.sim = parse_sim(cfg::find(j, "sim") ? *cfg::find(j, "sim") : Json::object(), out.plant, out.y_star);
    if (out.gains && !cfg::find(cfg::find(j, "sim") ? *cfg::find(j, "sim") : Json::object(), "controller"))
        out.sim.controller = out.gains->is_pid() ? ControllerMode::PID : ControllerMode::PD;
    if (out.sim.controller != ControllerMode::OpenLoop) {
        if (!out.gains) throw ConfigError("gains", "required for a closed-loop controller");
        if ((out.sim.controller == ControllerMode::PID) != out.gains->is_pid())
            throw ConfigError("sim.controller", "does not match gains.kind");
    }
    return out;
}

inline Json read_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file, "cannot open");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(file, std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace xpid
