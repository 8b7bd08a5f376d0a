#pragma once

#include <optional>

#include <Eigen/Dense>

namespace ssmamp {

/// Weights for an unbiased combination of t estimates of a common signal.
/// The weights always sum to one.
struct DampingVector {
    Eigen::VectorXd zeta;
    /// The covariance was judged singular and the previous weights were
    /// extended with a trailing zero.
    bool fallback = false;
    /// A singular 1x1 covariance (zero variance) at t = 1.
    bool degenerate = false;

    Eigen::Index size() const { return zeta.size(); }
};

struct DampingOptions {
    /// V counts as invertible when lambda_min > singular_tau * lambda_max.
    double singular_tau = 1e-10;
};

struct CovarianceDiagnostics {
    bool invertible = false;
    bool sufficient_statistic = false;
    double condition_estimate = 0.0;
};

/// Condition test shared by optimal_damping and sufficient_statistic_check.
bool covariance_invertible(const Eigen::MatrixXd& V, const DampingOptions& opts,
                           double* condition = nullptr);

/// zeta = V^{-1} 1 / (1^T V^{-1} 1) when V is invertible, otherwise
/// [prev, 0]. V^{-1} 1 comes from a Cholesky-type solve, never an explicit
/// inverse.
DampingVector optimal_damping(const Eigen::MatrixXd& V,
                              const std::optional<DampingVector>& prev = std::nullopt,
                              const DampingOptions& opts = {});

/// zeta^T V zeta, the error variance of the damped estimate.
double damped_variance(const Eigen::MatrixXd& V, const DampingVector& zeta);

struct QpSolution {
    DampingVector zeta;
    double multiplier = 0.0;  // c in V zeta = c 1
};

/// Test oracle: minimises 0.5 zeta^T V zeta subject to 1^T zeta = 1 by solving
/// the KKT system [V -1; 1^T 0] [zeta; c] = [0; 1]. Throws SingularKKT.
QpSolution qp_oracle_damping(const Eigen::MatrixXd& V);

/// Checks whether the last row and column of V all equal its bottom-right
/// entry (relative tolerance), and reports invertibility.
CovarianceDiagnostics sufficient_statistic_check(const Eigen::MatrixXd& V, double tol,
                                                 const DampingOptions& opts = {});

}  // namespace ssmamp
