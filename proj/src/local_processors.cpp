#include "ssmamp/local_processors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ssmamp/errors.hpp"
#include "ssmamp/quadrature.hpp"

namespace ssmamp {

namespace {

constexpr double kAlphaLimit = 1.0 - 1e-9;
// Noise variances at or below this are treated as noiseless.
constexpr double kNoiselessVar = 1e-300;
constexpr double kTailSigmas = 12.0;
constexpr double kQuadTol = 1e-11;
constexpr double kOuterTol = 1e-10;

double gauss_pdf(double x, double var) {
    return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double mixture_pdf(double r, double v, const SignalPrior& prior) {
    const double s = prior.component_variance();
    double p = prior.rho * gauss_pdf(r, s + v);
    if (prior.rho < 1.0) p += (1.0 - prior.rho) * gauss_pdf(r, v);
    return p;
}

/// Points where the integrands change quickly at noise level v.
void add_feature_points(std::vector<double>& pts, double v, const SignalPrior& prior) {
    const double th = bg_activation_threshold(v, prior);
    if (th > 0.0) {
        pts.push_back(th);
        pts.push_back(-th);
    }
    for (double k : {1.0, 4.0, 8.0}) {
        pts.push_back(k * std::sqrt(v));
        pts.push_back(-k * std::sqrt(v));
    }
}

/// Length scale over which the posterior weight of a nonzero entry flips
/// near the activation threshold.
double transition_width(double v, double th, const SignalPrior& prior) {
    if (th <= 0.0) return std::sqrt(v);
    const double s = prior.component_variance();
    return v * (s + v) / (s * th);
}

/// Integral of g(r) p(r) dr with r = x + N(0, v).
template <typename G>
double expect_over_r(double v, const SignalPrior& prior, G&& g) {
    const double L = kTailSigmas * std::sqrt(prior.component_variance() + v);
    std::vector<double> pts{0.0};
    add_feature_points(pts, v, prior);
    return integrate_adaptive([&](double r) { return g(r) * mixture_pdf(r, v, prior); }, -L, L, pts,
                              kQuadTol);
}

/// Orthogonalised denoiser h(r) = (eta(r) - alpha r) / (1 - alpha).
struct OrthDenoiser {
    double v;
    double alpha;
    const SignalPrior* prior;

    double operator()(double r) const {
        return (bg_posterior(r, v, *prior).mean - alpha * r) / (1.0 - alpha);
    }
};

OrthDenoiser make_orth(double v, const SignalPrior& prior) {
    const double alpha = bg_divergence(v, prior);
    if (alpha >= kAlphaLimit) throw DivergenceAtOne("denoiser divergence reached one");
    return OrthDenoiser{v, alpha, &prior};
}

}  // namespace

// ---- linear estimator ------------------------------------------------------

MleSpec normalized_mle(Eigen::VectorXd shape, const Eigen::VectorXd& moments) {
    if (shape.size() == 0) throw InvalidSpec("MLE needs at least one coefficient");
    if (moments.size() < shape.size() + 1) {
        throw InvalidSpec("not enough spectral moments for the MLE normalisation");
    }
    double trace = 0.0;
    for (Eigen::Index k = 0; k < shape.size(); ++k) trace += shape(k) * moments(k + 1);
    if (!(std::abs(trace) > 0.0) || !std::isfinite(trace)) {
        throw InvalidSpec("MLE polynomial has zero trace and cannot be normalised");
    }
    MleSpec spec;
    spec.coeffs = shape / trace;
    return spec;
}

MleSpec matched_filter_mle(const Eigen::VectorXd& moments) {
    return normalized_mle(Eigen::VectorXd::Ones(1), moments);
}

MleSpec neumann_mle(int K, double lambda_max, const Eigen::VectorXd& moments) {
    if (K < 0) throw InvalidSpec("MLE degree must be nonnegative");
    if (!(lambda_max > 0.0)) throw InvalidSpec("lambda_max must be positive");
    const double beta = 1.0 / lambda_max;
    // sum_{j<=K} (1 - beta lambda)^j = sum_k lambda^k sum_{j>=k} C(j,k) (-beta)^k
    Eigen::VectorXd shape = Eigen::VectorXd::Zero(K + 1);
    for (int j = 0; j <= K; ++j) {
        double binom = 1.0;
        for (int k = 0; k <= j; ++k) {
            shape(k) += binom * std::pow(-beta, k);
            binom = binom * (j - k) / (k + 1);
        }
    }
    return normalized_mle(beta * shape, moments);
}

Eigen::VectorXd mle_apply(const MleSpec& spec, const SystemInstance& inst,
                          const Eigen::VectorXd& x_t) {
    if (x_t.size() != inst.N()) throw DimensionMismatch("mle_apply: x_t has the wrong length");
    if (spec.coeffs.size() == 0) throw InvalidSpec("mle_apply: empty MLE");
    const Eigen::VectorXd z = apply_AH(inst, inst.y - apply_A(inst, x_t));
    const int K = spec.degree();
    Eigen::VectorXd acc = spec.coeffs(K) * z;
    for (int k = K - 1; k >= 0; --k) {
        acc = apply_AH(inst, apply_A(inst, acc));
        acc += spec.coeffs(k) * z;
    }
    return x_t + acc;
}

MleTransfer mle_transfer(const MleSpec& spec, const Eigen::VectorXd& moments, double noise_var) {
    const int K = spec.degree();
    if (moments.size() < spec.moments_needed() + 1) {
        throw InvalidSpec("not enough spectral moments for the MLE transfer");
    }
    const Eigen::VectorXd& c = spec.coeffs;
    double lin = 0.0;   // (1/N) sum lambda p
    double quad = 0.0;  // (1/N) sum lambda^2 p^2
    double noise = 0.0; // (1/N) sum lambda p^2
    for (int j = 0; j <= K; ++j) {
        lin += c(j) * moments(j + 1);
        for (int k = 0; k <= K; ++k) {
            quad += c(j) * c(k) * moments(j + k + 2);
            noise += c(j) * c(k) * moments(j + k + 1);
        }
    }
    MleTransfer out;
    out.gain = 1.0 - 2.0 * lin + quad;
    out.noise_floor = noise_var * noise;
    return out;
}

double mle_error_moments(const MleSpec& spec, const SystemInstance& inst, double v_phi) {
    return mle_transfer(spec, spectral_moments(inst, spec.moments_needed()), inst.noise_var)(v_phi);
}

Eigen::MatrixXd mle_error_moments(const MleSpec& spec, const SystemInstance& inst,
                                  const Eigen::MatrixXd& v_phi) {
    return mle_transfer(spec, spectral_moments(inst, spec.moments_needed()), inst.noise_var)(v_phi);
}

// ---- denoiser --------------------------------------------------------------

ScalarPosterior bg_posterior(double r, double v, const SignalPrior& prior) {
    const double s = prior.component_variance();
    const double shrink = s / (s + v);
    const double m = r * shrink;
    const double c = v * shrink;
    double pi = 1.0;
    if (prior.rho < 1.0) {
        const double logit = std::log(prior.rho / (1.0 - prior.rho)) + 0.5 * std::log(v / (s + v)) +
                             0.5 * r * r * shrink / v;
        pi = 1.0 / (1.0 + std::exp(-logit));
    }
    ScalarPosterior out;
    out.mean = pi * m;
    out.second_moment = pi * (m * m + c);
    out.var = pi * c + pi * (1.0 - pi) * m * m;
    out.derivative = out.var / v;
    return out;
}

double bg_activation_threshold(double v, const SignalPrior& prior) {
    if (prior.rho >= 1.0) return -1.0;
    const double s = prior.component_variance();
    const double num = 2.0 * (std::log((1.0 - prior.rho) / prior.rho) + 0.5 * std::log((s + v) / v));
    if (num <= 0.0) return -1.0;
    const double den = s / (v * (s + v));
    return std::sqrt(num / den);
}

DenoiserOutput bg_posterior_mean(const Eigen::VectorXd& r, double noise_var,
                                 const SignalPrior& prior) {
    if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
        throw NonpositiveVariance("denoiser noise variance must be positive and finite");
    }
    DenoiserOutput out;
    out.estimate.resize(r.size());
    double div = 0.0;
    double var = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const ScalarPosterior p = bg_posterior(r(i), noise_var, prior);
        out.estimate(i) = p.mean;
        div += p.derivative;
        var += p.var;
    }
    if (r.size() > 0) {
        out.divergence = div / static_cast<double>(r.size());
        out.posterior_var = var / static_cast<double>(r.size());
    }
    return out;
}

DenoiserOutput bg_posterior_mean_joint(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise_cov,
                                       const SignalPrior& prior) {
    const Eigen::Index k = obs.cols();
    if (noise_cov.rows() != k || noise_cov.cols() != k || k == 0) {
        throw DimensionMismatch("bg_posterior_mean_joint: covariance does not match observations");
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(noise_cov);
    const Eigen::VectorXd u = ldlt.solve(Eigen::VectorXd::Ones(k));
    const double total = u.sum();
    if (!(total > 0.0) || !u.allFinite()) {
        throw InvalidCovariance("joint noise covariance is not positive definite");
    }
    const Eigen::VectorXd r_eff = obs * (u / total);
    return bg_posterior_mean(r_eff, 1.0 / total, prior);
}

Eigen::VectorXd orthogonalize_nle(const DenoiserOutput& out, const Eigen::VectorXd& r) {
    if (out.estimate.size() != r.size()) {
        throw DimensionMismatch("orthogonalize_nle: estimate and input differ in length");
    }
    if (!(out.divergence < kAlphaLimit)) {
        throw DivergenceAtOne("orthogonalize_nle: divergence " + std::to_string(out.divergence));
    }
    return (out.estimate - out.divergence * r) / (1.0 - out.divergence);
}

// ---- transfer functions ----------------------------------------------------

double bg_mmse(double v, const SignalPrior& prior) {
    if (v <= kNoiselessVar) return 0.0;
    return expect_over_r(v, prior, [&](double r) { return bg_posterior(r, v, prior).var; });
}

double bg_divergence(double v, const SignalPrior& prior) {
    if (v <= kNoiselessVar) return 1.0;
    return expect_over_r(v, prior, [&](double r) { return bg_posterior(r, v, prior).derivative; });
}

double nle_mse_transfer(double v, const SignalPrior& prior) {
    if (v <= kNoiselessVar) return 0.0;
    const OrthDenoiser h = make_orth(v, prior);
    return expect_over_r(v, prior, [&](double r) {
        const ScalarPosterior p = bg_posterior(r, v, prior);
        const double hr = h(r);
        return hr * hr - 2.0 * hr * p.mean + p.second_moment;
    });
}

double nle_start_cross(double v, const SignalPrior& prior) {
    if (v <= kNoiselessVar) return 0.0;
    const OrthDenoiser h = make_orth(v, prior);
    return expect_over_r(v, prior, [&](double r) {
        const ScalarPosterior p = bg_posterior(r, v, prior);
        return p.second_moment - h(r) * p.mean;
    });
}

double nle_mse_transfer(const Eigen::Matrix2d& C_in, const SignalPrior& prior) {
    const double va = C_in(0, 0);
    const double vb = C_in(1, 1);
    if (va <= kNoiselessVar || vb <= kNoiselessVar) return 0.0;
    Eigen::Matrix2d C = 0.5 * (C_in + C_in.transpose());
    const double c = C(0, 1);

    // Only E[eta_a eta_b] needs the joint law; the rest follows from the
    // marginals: E[x eta] = 1 - mmse, E[eta_a n_b] = c alpha_a (Stein).
    const double m_a = bg_mmse(va, prior);
    const double m_b = bg_mmse(vb, prior);
    const double al_a = bg_divergence(va, prior);
    const double al_b = bg_divergence(vb, prior);
    if (al_a >= kAlphaLimit || al_b >= kAlphaLimit) {
        throw DivergenceAtOne("denoiser divergence reached one");
    }
    const double eta_eta = bg_joint_mean_product(C, prior);
    const double hh = (eta_eta - al_b * (1.0 - m_a + c * al_a) - al_a * (1.0 - m_b + c * al_b) +
                       al_a * al_b * (1.0 + c)) /
                      ((1.0 - al_a) * (1.0 - al_b));
    const double xh_a = (1.0 - m_a - al_a) / (1.0 - al_a);
    const double xh_b = (1.0 - m_b - al_b) / (1.0 - al_b);
    return hh - xh_a - xh_b + 1.0;
}

double bg_joint_mean_product(const Eigen::Matrix2d& C_in, const SignalPrior& prior) {
    const double va = C_in(0, 0);
    const double vb = C_in(1, 1);
    if (!(va > 0.0) || !(vb > 0.0)) {
        throw NonpositiveVariance("bg_joint_mean_product: noise variances must be positive");
    }
    Eigen::Matrix2d C = 0.5 * (C_in + C_in.transpose());
    const double scale = std::max(va, vb);
    double var_d = C(0, 0) + C(1, 1) - 2.0 * C(0, 1);

    if (var_d <= 1e-13 * scale) {
        // The two inputs coincide.
        return expect_over_r(va, prior, [&](double r) {
            return bg_posterior(r, va, prior).mean * bg_posterior(r, vb, prior).mean;
        });
    }
    double det = C.determinant();
    if (det <= 1e-13 * scale * scale) {
        C.diagonal().array() += 1e-10 * scale;
        det = C.determinant();
        var_d = C(0, 0) + C(1, 1) - 2.0 * C(0, 1);
    }

    // r_a = r_eff + w_b d, r_b = r_eff - w_a d with d = n_a - n_b independent
    // of (x, r_eff).
    const double v_eff = det / var_d;
    const double w_a = (C(1, 1) - C(0, 1)) / var_d;
    const double w_b = (C(0, 0) - C(0, 1)) / var_d;
    const double sd_d = std::sqrt(var_d);
    const double th_a = bg_activation_threshold(va, prior);
    const double th_b = bg_activation_threshold(vb, prior);
    const double tw_a = transition_width(va, th_a, prior);
    const double tw_b = transition_width(vb, th_b, prior);

    auto inner = [&](double re) {
        // z = d / sd_d ~ N(0, 1)
        std::vector<Feature> feats;
        const double ka = w_b * sd_d;
        const double kb = -w_a * sd_d;
        for (double sgn : {-1.0, 1.0}) {
            if (th_a > 0.0 && std::abs(ka) > 0.0) {
                feats.push_back({(sgn * th_a - re) / ka, tw_a / std::abs(ka)});
            }
            if (th_b > 0.0 && std::abs(kb) > 0.0) {
                feats.push_back({(sgn * th_b - re) / kb, tw_b / std::abs(kb)});
            }
        }
        const auto cuts = feature_cuts(-kTailSigmas, kTailSigmas, 1.0, feats);
        return integrate_panels(
            [&](double z) {
                return bg_posterior(re + ka * z, va, prior).mean *
                       bg_posterior(re + kb * z, vb, prior).mean * gauss_pdf(z, 1.0);
            },
            cuts);
    };

    const double L = kTailSigmas * std::sqrt(prior.component_variance() + v_eff);
    std::vector<double> pts{0.0};
    add_feature_points(pts, v_eff, prior);
    for (double th : {th_a, th_b}) {
        if (th > 0.0) {
            pts.push_back(th);
            pts.push_back(-th);
        }
    }
    return integrate_adaptive([&](double re) { return inner(re) * mixture_pdf(re, v_eff, prior); },
                              -L, L, pts, kOuterTol);
}

}  // namespace ssmamp
