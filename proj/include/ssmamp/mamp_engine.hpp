#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssmamp/damping.hpp"
#include "ssmamp/local_processors.hpp"
#include "ssmamp/system_model.hpp"

namespace ssmamp {

enum class RunMode { plain, ss_damped };

std::string to_string(RunMode m);
RunMode parse_mode(const std::string& s);

/// Estimates and errors of one run. Column j holds iteration j + 1.
/// X_raw(:, 0) = X(:, 0) = 0 is the starting estimate.
struct IterationHistory {
    Eigen::MatrixXd X_raw, R_raw;
    Eigen::MatrixXd X, R;
    Eigen::MatrixXd F, G;  // X - x, R - x
    /// Raw column indices still eligible for damping.
    std::vector<int> active_gamma, active_phi;
    /// Raw columns dropped because their arrival made the covariance singular.
    std::vector<int> excluded_gamma, excluded_phi;

    Eigen::Index iterations() const { return R.cols(); }
};

/// (1/N) <e_i, e_j> over the damped error columns.
struct CovarianceTracker {
    Eigen::MatrixXd V_gamma;
    Eigen::MatrixXd V_phi;
};

CovarianceTracker track_covariances(const IterationHistory& h);

struct OrthogonalityStats {
    double g_x = 0.0;  // |<g_t, x>| / N
    double g_f = 0.0;  // max_i<=t |<g_t, f_i>| / N
    double f_g = 0.0;  // max_i<=t |<f_{t+1}, g_i>| / N

    double max() const;
};

struct GaussianityStats {
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    /// max over t' < t of |2 sin(pi rho_s / 6) - v_tt' / sqrt(v_t v_t')|,
    /// rho_s the Spearman correlation of (g_t, g_t').
    double copula_dev = 0.0;
};

struct IterationRecord {
    int t = 0;
    double mse_phi = 0.0;    // ||x_t - x||^2 / N
    double mse_gamma = 0.0;  // ||r_t - x||^2 / N
    double v_phi = 0.0;      // damped variance of x_t from the tracked covariance
    double v_gamma = 0.0;    // damped variance of r_t
    double lband_dev_gamma = 0.0;
    double lband_dev_phi = 0.0;
    OrthogonalityStats orth;
    GaussianityStats gauss;
    double alpha = 0.0;  // denoiser divergence used for x_{t+1}
    Eigen::VectorXd zeta_gamma;  // weights over raw r columns 1..t
    Eigen::VectorXd zeta_phi;    // weights over raw x columns 1..t
    bool fallback_gamma = false;
    bool fallback_phi = false;
    /// Re-damping the damped iterates: max |zeta - e_t| and MSE change.
    double idem_zeta_dev = 0.0;
    double idem_mse_change = 0.0;
    /// The damped covariance was numerically singular, so re-damping took
    /// the fallback and idem_zeta_dev is not measured.
    bool idem_singular = false;
    /// Largest MSE change from feeding the denoiser an extra combination of
    /// earlier r_i alongside r_t.
    double memory_gain = 0.0;

    double zeta_last() const { return zeta_phi.size() ? zeta_phi(zeta_phi.size() - 1) : 1.0; }
};

struct RunReport {
    RunMode mode = RunMode::plain;
    std::string fingerprint;  // identifies instance and processors
    std::uint64_t seed = 0;
    std::size_t N = 0;
    int T = 0;
    std::vector<IterationRecord> rows;
    double final_mse = 0.0;  // MSE of the last computed x_{t+1}
    bool converged = false;
    int converged_at = 0;
    bool exact_recovery = false;
    bool degenerate_start = false;
    double v_gamma_star = 0.0;
    double v_phi_star = 0.0;
    std::vector<int> excluded_gamma, excluded_phi;
    /// How the damping covariance is formed after an exclusion.
    std::string damping_scope = "active-columns";
};

struct EngineOptions {
    int T = 30;
    RunMode mode = RunMode::ss_damped;
    DampingOptions damping;
    double converge_rel = 1e-6;
    int converge_patience = 3;
    /// r_t with error variance at or below this is taken as exact.
    double exact_floor = 1e-20;
    bool audits = true;
    int memory_draws = 5;
    std::uint64_t audit_seed = 0;
    std::string fingerprint;
};

struct RunResult {
    RunReport report;
    IterationHistory history;
};

/// Memory iterative process with oracle error covariances. Throws
/// NonFiniteIterate, DivergenceAtOne and errors from the submodules.
RunResult run_mamp(const SystemInstance& inst, const MleSpec& mle, const SignalPrior& prior,
                   const EngineOptions& opts);

struct ActiveDamping {
    DampingVector zeta;  // over the active set including the new column
    double variance = 0.0;
    bool excluded = false;
};

/// Active-set damping. `V` is the covariance over `active` followed by the
/// new column. On a singular V (or a solve that would raise the variance
/// above `prev_variance`) the new column is dropped from `active` for good
/// and the variance carries over; otherwise `new_col` is appended to
/// `active`.
ActiveDamping damp_active(const Eigen::MatrixXd& V, std::vector<int>& active, int new_col,
                          const std::optional<DampingVector>& prev, double prev_variance,
                          const DampingOptions& opts);

struct DampStep {
    Eigen::VectorXd column;
    DampingVector zeta;  // over the active set including the new column
    double variance = 0.0;
    bool excluded = false;
};

/// One damping step over `raw` (N x k, columns indexed by `active` plus the
/// newest column `new_col`), given the oracle errors `raw_err`. On a singular
/// covariance the new column is removed from `active`, the previous damped
/// column is returned unchanged and the variance carries over.
DampStep ss_damp_step(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& raw_err,
                      std::vector<int>& active, int new_col,
                      const std::optional<DampingVector>& prev, double prev_variance,
                      const Eigen::VectorXd& prev_column, const DampingOptions& opts);

/// Maxima of the three orthogonality measures over all iterations.
OrthogonalityStats orthogonality_audit(const IterationHistory& h, const Eigen::VectorXd& x);

/// Per-iteration skewness, kurtosis and copula deviation of g_t / sqrt(v_t).
std::vector<GaussianityStats> gaussianity_audit(const IterationHistory& h);

struct DominanceRow {
    int t = 0;
    double mse_plain = 0.0;
    double mse_ss = 0.0;
    /// max over mse_phi and mse_gamma of ss minus plain
    double excess = 0.0;
    bool ok = true;
};

struct DominanceTable {
    std::vector<DominanceRow> rows;
    double slack = 0.0;
    double max_excess = 0.0;
    bool all_ok = true;
};

/// Compares mse_phi and mse_gamma per iteration; the shorter run is padded
/// with its last value. Throws ConfigMismatch.
DominanceTable compare_runs(const RunReport& plain, const RunReport& ss, double slack);

}  // namespace ssmamp
