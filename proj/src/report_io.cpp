#include "ssmamp/report_io.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "ssmamp/lbanded.hpp"

namespace ssmamp {

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

// nlohmann writes non-finite doubles as null; keep them readable instead.
nlohmann::json num(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_csv(const RunReport& rep, std::ostream& os) {
    os << kCsvHeader << '\n';
    const std::string src = to_string(rep.mode);
    for (const IterationRecord& r : rep.rows) {
        os << src << ',' << r.t << ',' << format_double(r.mse_phi) << ','
           << format_double(r.mse_gamma) << ',' << format_double(r.v_gamma) << ','
           << format_double(r.v_phi) << ',' << format_double(r.lband_dev_gamma) << ','
           << format_double(r.lband_dev_phi) << ',' << format_double(r.orth.max()) << ','
           << format_double(r.zeta_last()) << '\n';
    }
}

void write_csv(const SETrajectory& traj, std::ostream& os) {
    os << kCsvHeader << '\n';
    for (int i = 0; i < traj.iterations(); ++i) {
        const auto t = static_cast<std::size_t>(i);
        const Eigen::VectorXd& z = traj.zeta_phi[t];
        const double dev_g = is_lbanded(traj.cov_gamma.topLeftCorner(i + 1, i + 1), 0.0).max_deviation;
        const double dev_p = is_lbanded(traj.cov_phi.topLeftCorner(i + 1, i + 1), 0.0).max_deviation;
        os << "se," << i + 1 << ',' << format_double(traj.v_phi[t]) << ','
           << format_double(traj.v_gamma[t]) << ',' << format_double(traj.v_gamma[t]) << ','
           << format_double(traj.v_phi[t]) << ',' << format_double(dev_g) << ','
           << format_double(dev_p) << ",," << format_double(z.size() ? z(z.size() - 1) : 1.0)
           << '\n';
    }
}

nlohmann::json to_json(const RunReport& rep) {
    nlohmann::json j;
    j["mode"] = to_string(rep.mode);
    j["fingerprint"] = rep.fingerprint;
    j["seed"] = rep.seed;
    j["N"] = rep.N;
    j["T"] = rep.T;
    j["iterations"] = rep.rows.size();
    j["final_mse"] = num(rep.final_mse);
    j["converged"] = rep.converged;
    j["converged_at"] = rep.converged_at;
    j["exact_recovery"] = rep.exact_recovery;
    j["degenerate_start"] = rep.degenerate_start;
    j["v_gamma_star"] = num(rep.v_gamma_star);
    j["v_phi_star"] = num(rep.v_phi_star);
    j["excluded_gamma"] = rep.excluded_gamma;
    j["excluded_phi"] = rep.excluded_phi;
    j["damping_scope"] = rep.damping_scope;
    nlohmann::json rows = nlohmann::json::array();
    for (const IterationRecord& r : rep.rows) {
        nlohmann::json o;
        o["t"] = r.t;
        o["mse_phi"] = num(r.mse_phi);
        o["mse_gamma"] = num(r.mse_gamma);
        o["v_phi"] = num(r.v_phi);
        o["v_gamma"] = num(r.v_gamma);
        o["lband_dev_gamma"] = num(r.lband_dev_gamma);
        o["lband_dev_phi"] = num(r.lband_dev_phi);
        o["orthogonality"] = {{"g_x", num(r.orth.g_x)}, {"g_f", num(r.orth.g_f)}, {"f_g", num(r.orth.f_g)}};
        o["gaussianity"] = {{"skewness", num(r.gauss.skewness)},
                            {"excess_kurtosis", num(r.gauss.excess_kurtosis)},
                            {"copula_dev", num(r.gauss.copula_dev)}};
        o["alpha"] = num(r.alpha);
        o["zeta_gamma"] = vec_json(r.zeta_gamma);
        o["zeta_phi"] = vec_json(r.zeta_phi);
        o["fallback_gamma"] = r.fallback_gamma;
        o["fallback_phi"] = r.fallback_phi;
        o["idem_zeta_dev"] = num(r.idem_zeta_dev);
        o["idem_mse_change"] = num(r.idem_mse_change);
        o["idem_singular"] = r.idem_singular;
        o["memory_gain"] = num(r.memory_gain);
        rows.push_back(std::move(o));
    }
    j["rows"] = std::move(rows);
    return j;
}

nlohmann::json to_json(const SETrajectory& traj) {
    nlohmann::json j;
    j["mode"] = to_string(traj.mode);
    j["v_gamma"] = traj.v_gamma;
    j["v_phi"] = traj.v_phi;
    j["cov_gamma"] = mat_json(traj.cov_gamma);
    j["cov_phi"] = mat_json(traj.cov_phi);
    j["excluded_gamma"] = traj.excluded_gamma;
    j["excluded_phi"] = traj.excluded_phi;
    j["converged"] = traj.converged;
    j["converged_at"] = traj.converged_at;
    return j;
}

}  // namespace ssmamp
