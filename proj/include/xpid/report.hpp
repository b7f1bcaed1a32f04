#pragma once

// Serialization of results: CSV time series, gnuplot scripts and JSON reports.
// Numbers use the shortest round-trip form so reruns give identical bytes.

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xpid/certificate.hpp"
#include "xpid/design.hpp"
#include "xpid/diagnostics.hpp"
#include "xpid/expr.hpp"
#include "xpid/simulate.hpp"

namespace xpid {

struct CsvColumn {
    std::string name;
    const std::vector<double>* values;
};

/// Header row, then one row per entry; all columns must have equal length.
inline void write_csv(std::ostream& os, const std::vector<CsvColumn>& cols) {
    if (cols.empty()) return;
    const std::size_t rows = cols.front().values->size();
    for (const auto& c : cols)
        if (c.values->size() != rows) throw Error(ErrorCode::DimensionMismatch, "CSV column '" + c.name + "' has wrong length");
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].name;
    os << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << format_double((*cols[i].values)[r]);
        os << '\n';
    }
}

/// Full ensemble table; the column order is part of the output contract.
inline void write_stats_csv(std::ostream& os, const EnsembleStats& st) {
    write_csv(os, {{"t", &st.times},
                   {"mean_sq_error", &st.mean_sq_error},
                   {"mean_sq_error_se", &st.mean_sq_error_se},
                   {"mean_sq_state_dev", &st.mean_sq_state_dev},
                   {"mean_sq_state_dev_se", &st.mean_sq_state_dev_se},
                   {"mean_sq_u", &st.mean_sq_u},
                   {"mean_sq_u_se", &st.mean_sq_u_se},
                   {"var_u", &st.var_u},
                   {"var_u_se", &st.var_u_se},
                   {"mean_error", &st.mean_error},
                   {"mean_error_se", &st.mean_error_se}});
}

inline void write_error_csv(std::ostream& os, const EnsembleStats& st) {
    write_csv(os, {{"t", &st.times}, {"mean_sq_error", &st.mean_sq_error}, {"stderr", &st.mean_sq_error_se}});
}

inline void write_input_csv(std::ostream& os, const EnsembleStats& st) {
    write_csv(os, {{"t", &st.times},
                   {"mean_sq_u", &st.mean_sq_u},
                   {"mean_sq_u_stderr", &st.mean_sq_u_se},
                   {"var_u", &st.var_u},
                   {"var_u_stderr", &st.var_u_se}});
}

struct PlotCurve {
    std::string file;
    std::string title;
    int column = 2;
};

/// gnuplot script that draws `curves` (CSV files with a header row) into `png`.
inline std::string gnuplot_script(const std::string& png, const std::string& ylabel, const std::vector<PlotCurve>& curves,
                                  bool logscale = false) {
    std::string s;
    s += "set terminal pngcairo size 900,600\n";
    s += "set output '" + png + "'\n";
    s += "set datafile separator ','\n";
    s += "set key autotitle columnhead\n";
    s += "set xlabel 't'\n";
    s += "set ylabel '" + ylabel + "'\n";
    if (logscale) s += "set logscale y\n";
    s += "plot ";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (i) s += ", \\\n     ";
        s += "'" + curves[i].file + "' using 1:" + std::to_string(curves[i].column) + " with lines title '" +
             curves[i].title + "'";
    }
    s += "\n";
    return s;
}

inline nlohmann::json to_json(const DesignReport& r) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : r.terms) terms.push_back({{"name", t.name}, {"value", t.value}});
    return {{"admissible", r.admissible},
            {"binding_term", {{"name", r.binding_term.name}, {"value", r.binding_term.value}}},
            {"kbar", r.kbar},
            {"margin", r.margin},
            {"terms", terms}};
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(M.cols()));
        for (Eigen::Index j = 0; j < M.cols(); ++j) row[static_cast<std::size_t>(j)] = M(i, j);
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json to_json(const CertificateResult& r) {
    if (const auto* c = std::get_if<LyapunovCertificate>(&r)) {
        std::vector<double> q(c->Q.data(), c->Q.data() + c->Q.size());
        return {{"accepted", true},
                {"P", matrix_json(c->P)},
                {"Q_diagonal", q},
                {"min_eig_P", c->min_eig_P},
                {"max_eig_P", c->max_eig_P},
                {"min_eig_negdef", c->min_eig_negdef},
                {"kbar", c->kbar},
                {"q_offdiag_residue", c->q_offdiag_residue}};
    }
    const auto& rej = std::get<Rejection>(r);
    return {{"accepted", false},
            {"condition", to_string(rej.condition)},
            {"eigenvalue", rej.eigenvalue},
            {"min_eig_P", rej.min_eig_P},
            {"max_eig_lyap", rej.max_eig_lyap},
            {"message", rej.message}};
}

inline nlohmann::json to_json(const BoundConstants& bc) {
    nlohmann::json j{{"coeff_exp", bc.thm3_coeff_exp}, {"coeff_ss", bc.thm3_coeff_ss}, {"lambda", bc.lambda}, {"c3", bc.c3}};
    if (bc.prop1_C1) j["C1"] = *bc.prop1_C1;
    if (bc.prop1_C2) j["C2"] = *bc.prop1_C2;
    if (bc.prop1_rate) j["rate"] = *bc.prop1_rate;
    return j;
}

inline nlohmann::json to_json(const EnvelopeReport& r) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& e : r.violations) v.push_back({{"t", e.t}, {"value", e.value}, {"bound", e.bound}});
    return {{"upper_ok", r.upper_ok},
            {"min_upper_slack", r.min_upper_slack},
            {"violations", v},
            {"lower_ok", r.lower_ok},
            {"long_run", r.long_run},
            {"long_run_se", r.long_run_se},
            {"lower_bound", r.lower_bound},
            {"tail_start", r.tail_start}};
}

}  // namespace xpid
