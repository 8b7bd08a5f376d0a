#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ssmamp/damping.hpp"
#include "ssmamp/local_processors.hpp"
#include "ssmamp/mamp_engine.hpp"
#include "ssmamp/system_model.hpp"

namespace ssmamp {

/// Predicted variances. v_phi[t-1] belongs to x_t (v_phi[0] = 1) and
/// v_gamma[t-1] to r_t. The covariances are over the damped iterates.
struct SETrajectory {
    RunMode mode = RunMode::plain;
    std::vector<double> v_gamma;
    std::vector<double> v_phi;  // one longer than v_gamma
    Eigen::MatrixXd cov_gamma;
    Eigen::MatrixXd cov_phi;
    /// Damping weights over raw columns, one per iteration.
    std::vector<Eigen::VectorXd> zeta_gamma, zeta_phi;
    /// Raw (pre-damping) covariances over all raw columns.
    Eigen::MatrixXd raw_gamma, raw_phi;
    std::vector<int> excluded_gamma, excluded_phi;
    bool converged = false;
    int converged_at = 0;

    int iterations() const { return static_cast<int>(v_gamma.size()); }
};

struct SeOptions {
    int T = 30;
    RunMode mode = RunMode::ss_damped;
    DampingOptions damping;
    double converge_rel = 1e-6;
    int converge_patience = 3;
    double exact_floor = 1e-20;
};

/// gamma side: gain * V_phi + noise_floor entrywise.
Eigen::MatrixXd se_gamma_step(const MleTransfer& transfer, const Eigen::MatrixXd& v_phi);

/// phi side: raw denoiser error covariance for inputs r_i, i = 1..t, with
/// damped noise covariance `v_gamma` (t x t). Entry (0, 0) is the starting
/// estimate x_1 = 0; entry (i, j), i, j >= 1, pairs the denoisers fed r_i and
/// r_j. Result is (t + 1) x (t + 1).
Eigen::MatrixXd se_phi_step(const Eigen::MatrixXd& v_gamma, const SignalPrior& prior);

/// State evolution of the plain or damped recursion. `mle` and `moments`
/// describe the linear estimator and the spectrum.
SETrajectory run_se(const MleSpec& mle, const Eigen::VectorXd& moments, const SignalPrior& prior,
                    double noise_var, const SeOptions& opts);

/// Convenience: matched filter on the spectrum of `spec`.
SETrajectory run_se(const SpectrumSpec& spec, const SignalPrior& prior, double noise_var,
                    const SeOptions& opts);

struct FixedPoint {
    double v_gamma_star = 0.0;
    double v_phi_star = 0.0;
    int iterations = 0;
    bool converged = false;
};

FixedPoint fixed_point(const SETrajectory& traj);

}  // namespace ssmamp
