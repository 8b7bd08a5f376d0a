#pragma once

#include <Eigen/Dense>

#include "ssmamp/system_model.hpp"

namespace ssmamp {

// ---- linear estimator ------------------------------------------------------

/// r = x_t + sum_k c_k (A^T A)^k A^T (y - A x_t). The coefficients are scaled
/// so that (1/N) tr(sum_k c_k (A^T A)^{k+1}) = 1.
struct MleSpec {
    Eigen::VectorXd coeffs;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    /// Highest spectral moment index needed by the error transfer.
    int moments_needed() const { return 2 * degree() + 2; }
};

/// Scales `shape` to satisfy the trace normalisation. `moments` are
/// (1/N) tr((A^T A)^k), k = 0.. at least degree + 1. Throws InvalidSpec.
MleSpec normalized_mle(Eigen::VectorXd shape, const Eigen::VectorXd& moments);

/// K = 0: c_0 = 1 / m_1.
MleSpec matched_filter_mle(const Eigen::VectorXd& moments);

/// Degree-K truncation of the Neumann series of 1/lambda,
/// beta sum_{k<=K} (1 - beta lambda)^k with beta = 1/lambda_max, expanded
/// into monomials and then trace-normalised.
MleSpec neumann_mle(int K, double lambda_max, const Eigen::VectorXd& moments);

Eigen::VectorXd mle_apply(const MleSpec& spec, const SystemInstance& inst,
                          const Eigen::VectorXd& x_t);

/// Error (cross-)covariance map of the linear estimator for inputs whose
/// errors are independent of the Haar factor:
///   v_gamma = gain * v_phi + noise_floor
/// gain = (1/N) sum over all N Gram eigenvalues of (1 - lambda p(lambda))^2,
/// noise_floor = sigma^2 (1/N) sum lambda p(lambda)^2.
struct MleTransfer {
    double gain = 0.0;
    double noise_floor = 0.0;

    double operator()(double v_phi) const { return gain * v_phi + noise_floor; }
    Eigen::MatrixXd operator()(const Eigen::MatrixXd& v_phi) const {
        return (gain * v_phi.array() + noise_floor).matrix();
    }
};

MleTransfer mle_transfer(const MleSpec& spec, const Eigen::VectorXd& moments, double noise_var);

double mle_error_moments(const MleSpec& spec, const SystemInstance& inst, double v_phi);
Eigen::MatrixXd mle_error_moments(const MleSpec& spec, const SystemInstance& inst,
                                  const Eigen::MatrixXd& v_phi);

// ---- Bernoulli-Gaussian denoiser -------------------------------------------

struct ScalarPosterior {
    double mean = 0.0;
    double var = 0.0;
    double second_moment = 0.0;  // E[x^2 | r]
    double derivative = 0.0;     // d mean / d r = var / v
};

/// Posterior of x ~ BG(rho, 1/rho) given r = x + N(0, v), v > 0.
ScalarPosterior bg_posterior(double r, double v, const SignalPrior& prior);

/// |r| at which the posterior probability of a nonzero entry is one half, or
/// a negative value when there is no such point.
double bg_activation_threshold(double v, const SignalPrior& prior);

struct DenoiserOutput {
    Eigen::VectorXd estimate;
    double divergence = 0.0;      // mean of d eta / d r
    double posterior_var = 0.0;   // mean posterior variance
};

/// Componentwise posterior mean. Throws NonpositiveVariance.
DenoiserOutput bg_posterior_mean(const Eigen::VectorXd& r, double noise_var,
                                 const SignalPrior& prior);

/// Posterior mean given k jointly Gaussian observations r_j = x + n_j with
/// noise covariance C (columns of `obs`). The posterior depends on the
/// observations only through r_eff = w^T o with w = C^{-1} 1 / (1^T C^{-1} 1)
/// and noise variance 1 / (1^T C^{-1} 1).
DenoiserOutput bg_posterior_mean_joint(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise_cov,
                                       const SignalPrior& prior);

/// (estimate - alpha r) / (1 - alpha). Throws DivergenceAtOne when
/// alpha >= 1 - 1e-9.
Eigen::VectorXd orthogonalize_nle(const DenoiserOutput& out, const Eigen::VectorXd& r);

// ---- denoiser transfer functions (expectations over x and the noise) -------

/// E[(eta(x + n) - x)^2] with n ~ N(0, v), before orthogonalisation.
double bg_mmse(double v, const SignalPrior& prior);

/// E[eta'(x + n)].
double bg_divergence(double v, const SignalPrior& prior);

/// Error variance of the orthogonalised denoiser at noise variance v.
/// Zero noise maps to zero.
double nle_mse_transfer(double v, const SignalPrior& prior);

/// E[f_a f_b] for two orthogonalised denoisers fed r_a = x + n_a,
/// r_b = x + n_b with (n_a, n_b) ~ N(0, C). Each denoiser is tuned to its own
/// marginal noise variance C(0,0), C(1,1).
double nle_mse_transfer(const Eigen::Matrix2d& C, const SignalPrior& prior);

/// E[eta(r_a) eta(r_b)] for posterior means tuned to C(0,0) and C(1,1), with
/// (r_a - x, r_b - x) ~ N(0, C). Throws NonpositiveVariance.
double bg_joint_mean_product(const Eigen::Matrix2d& C, const SignalPrior& prior);

/// E[(-x) f] where f is the orthogonalised denoiser error at noise v, i.e.
/// the covariance with the error of the all-zero starting estimate.
double nle_start_cross(double v, const SignalPrior& prior);

}  // namespace ssmamp
