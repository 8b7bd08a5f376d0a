#include <doctest.h>

#include <cmath>
#include <random>

#include "ssmamp/errors.hpp"
#include "ssmamp/local_processors.hpp"

using namespace ssmamp;

// Reference values below come from an independent extended-precision
// quadrature of the Bernoulli-Gaussian posterior (rho = 0.1) and a 2-D
// adaptive integration of the denoiser error products.

TEST_SUITE("local_processors") {

TEST_CASE("matched filter normalisation and transfer") {
    // N = 4, M = 2, kappa = 10: m = (1/2, 1, 40004/10201)
    const Eigen::Vector3d m(0.5, 1.0, 40004.0 / 10201.0);
    const MleSpec mf = matched_filter_mle(m);
    CHECK(mf.degree() == 0);
    CHECK(mf.coeffs(0) == doctest::Approx(1.0));
    const MleTransfer tr = mle_transfer(mf, m, 0.0);
    CHECK(tr.gain == doctest::Approx(29803.0 / 10201.0));
    CHECK(tr.noise_floor == 0.0);
    CHECK(tr(0.0) == 0.0);

    const MleTransfer noisy = mle_transfer(mf, m, 0.25);
    CHECK(noisy.noise_floor == doctest::Approx(0.25));
    const Eigen::Matrix2d in = Eigen::Matrix2d::Constant(0.5);
    CHECK(noisy(in)(0, 1) == doctest::Approx(0.5 * 29803.0 / 10201.0 + 0.25));
}

TEST_CASE("unitary matrix: MLE error is the projected noise") {
    const SpectrumSpec spec{256, 1.0, 1.0, SpectrumProfile::flat};
    const SystemInstance inst = generate_system(3, spec, SignalPrior{0.1}, 0.01);
    const Eigen::VectorXd moments = spectral_moments(inst, 2);
    const MleSpec mf = matched_filter_mle(moments);
    const MleTransfer tr = mle_transfer(mf, moments, 0.01);
    CHECK(tr.gain == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tr(3.0) == doctest::Approx(0.01));
    CHECK(mle_error_moments(mf, inst, 3.0) == doctest::Approx(0.01));
    const Eigen::VectorXd r = mle_apply(mf, inst, Eigen::VectorXd::Zero(256));
    CHECK((r - inst.x_true - apply_AH(inst, inst.y - apply_A(inst, inst.x_true))).norm() < 1e-10);

    const SystemInstance clean = generate_system(3, spec, SignalPrior{0.1}, 0.0);
    CHECK((mle_apply(mf, clean, clean.x_true) - clean.x_true).norm() < 1e-12);
}

TEST_CASE("polynomial MLE is trace normalised") {
    const SpectrumSpec spec{512, 0.5, 10.0, SpectrumProfile::geometric};
    const Eigen::VectorXd sigma = spectrum_singular_values(spec);
    for (int K : {1, 2, 3}) {
        const Eigen::VectorXd m = spectral_moments(spec, 2 * K + 2);
        const MleSpec s = neumann_mle(K, sigma.maxCoeff() * sigma.maxCoeff(), m);
        double trace = 0.0;
        for (int k = 0; k <= K; ++k) trace += s.coeffs(k) * m(k + 1);
        CHECK(trace == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.moments_needed() == 2 * K + 2);
    }
    CHECK_THROWS_AS(neumann_mle(-1, 1.0, Eigen::Vector3d(1, 1, 1)), InvalidSpec);
}

TEST_CASE("MLE transfer matches the empirical error at N = 2048") {
    const SpectrumSpec spec{2048, 0.5, 10.0, SpectrumProfile::geometric};
    const double nv = noise_var_from_snr(30.0, spec);
    const SystemInstance inst = generate_system(4, spec, SignalPrior{0.1}, nv);
    const Eigen::VectorXd moments = spectral_moments(inst, 2);
    const MleSpec mf = matched_filter_mle(moments);
    // x_t = 0: input error variance ||x||^2 / N
    const double vin = inst.x_true.squaredNorm() / 2048.0;
    const Eigen::VectorXd r = mle_apply(mf, inst, Eigen::VectorXd::Zero(2048));
    const double emp = (r - inst.x_true).squaredNorm() / 2048.0;
    CHECK(std::abs(emp / mle_error_moments(mf, inst, vin) - 1.0) < 0.10);
}

TEST_CASE("posterior oracle values") {
    const SignalPrior p{0.1};
    const ScalarPosterior q = bg_posterior(0.5, 0.2, p);
    CHECK(q.mean == doctest::Approx(0.013682317506134988).epsilon(1e-13));
    CHECK(q.var == doctest::Approx(0.011992739575475596).epsilon(1e-13));
    CHECK(q.derivative == doctest::Approx(q.var / 0.2).epsilon(1e-13));

    CHECK(bg_mmse(1.0, p) == doctest::Approx(0.20672436421374222).epsilon(1e-10));
    CHECK(bg_mmse(0.3, p) == doctest::Approx(0.058805164786503486).epsilon(1e-10));
    CHECK(bg_mmse(0.1, p) == doctest::Approx(0.017233733702971721).epsilon(1e-10));
    CHECK(bg_mmse(0.01, p) == doctest::Approx(0.0013297777773344947).epsilon(1e-10));
    CHECK(bg_divergence(0.3, p) == doctest::Approx(0.19601721595501162).epsilon(1e-10));

    CHECK(nle_mse_transfer(1.0, p) == doctest::Approx(0.2605958822986498).epsilon(1e-10));
    CHECK(nle_mse_transfer(0.3, p) == doctest::Approx(0.073142318409660041).epsilon(1e-10));
    CHECK(nle_mse_transfer(0.1, p) == doctest::Approx(0.020822171246826557).epsilon(1e-10));
    CHECK(nle_mse_transfer(0.01, p) == doctest::Approx(0.001533729751306972).epsilon(1e-10));
    CHECK(nle_mse_transfer(0.0, p) == 0.0);
}

TEST_CASE("Gaussian prior reduces to conjugate algebra") {
    const SignalPrior g{1.0};
    for (double v : {0.1, 0.5, 2.0}) {
        const ScalarPosterior q = bg_posterior(0.7, v, g);
        CHECK(q.mean == doctest::Approx(0.7 / (1.0 + v)));
        CHECK(q.var == doctest::Approx(v / (1.0 + v)));
        CHECK(bg_mmse(v, g) == doctest::Approx(v / (1.0 + v)).epsilon(1e-10));
        CHECK(bg_divergence(v, g) == doctest::Approx(1.0 / (1.0 + v)).epsilon(1e-10));
    }
    // estimate r/(1+v) with alpha 1/(1+v) orthogonalises to zero signal gain
    DenoiserOutput out;
    const Eigen::Vector2d r(0.3, -1.2);
    out.estimate = r / 1.5;
    out.divergence = 1.0 / 1.5;
    CHECK(orthogonalize_nle(out, r).norm() < 1e-15);
}

TEST_CASE("divergence matches finite differences") {
    const SignalPrior p{0.1};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> uv(0.01, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double r = g(rng), v = uv(rng), h = 1e-5;
        const double fd = (bg_posterior(r + h, v, p).mean - bg_posterior(r - h, v, p).mean) / (2 * h);
        CHECK(std::abs(bg_posterior(r, v, p).derivative - fd) < 1e-6);
        CHECK(bg_posterior(r, v, p).derivative >= 0.0);
    }
}

TEST_CASE("denoiser on vectors") {
    const SignalPrior p{0.1};
    const Eigen::Vector3d r(0.0, 0.5, 3.0);
    const DenoiserOutput out = bg_posterior_mean(r, 0.2, p);
    CHECK(out.estimate(1) == doctest::Approx(0.013682317506134988));
    CHECK(out.divergence > 0.0);
    CHECK(out.divergence < 1.0);
    CHECK_THROWS_AS(bg_posterior_mean(r, 0.0, p), NonpositiveVariance);

    DenoiserOutput zero;
    zero.estimate = r;
    CHECK(orthogonalize_nle(zero, r) == r);
    DenoiserOutput ident;
    ident.estimate = r;
    ident.divergence = 1.0;
    CHECK_THROWS_AS(orthogonalize_nle(ident, r), DivergenceAtOne);

    // posterior means approach r as the noise vanishes
    const DenoiserOutput sharp = bg_posterior_mean(Eigen::Vector2d(1.5, -2.0), 1e-8, p);
    CHECK(sharp.estimate(0) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("joint observations collapse onto one effective observation") {
    const SignalPrior p{0.1};
    Eigen::MatrixXd obs(2, 2);
    obs << 0.4, 0.6, -1.0, -0.8;
    Eigen::Matrix2d C;
    C << 0.3, 0.1, 0.1, 0.1;
    // L-banded noise: the second observation is sufficient
    const DenoiserOutput j = bg_posterior_mean_joint(obs, C, p);
    const DenoiserOutput s = bg_posterior_mean(obs.col(1), 0.1, p);
    CHECK((j.estimate - s.estimate).norm() < 1e-12);
}

TEST_CASE("cross-covariance transfer") {
    const SignalPrior p{0.1};
    Eigen::Matrix2d C;
    C << 0.3, 0.05, 0.05, 0.2;
    CHECK(nle_mse_transfer(C, p) == doctest::Approx(0.0227245120074211).epsilon(1e-9));
    C << 0.3, 0.0, 0.0, 0.2;
    CHECK(nle_mse_transfer(C, p) == doctest::Approx(0.016524222521445364).epsilon(1e-9));
    C << 0.3, 0.1, 0.1, 0.1;
    CHECK(nle_mse_transfer(C, p) == doctest::Approx(0.02082217124682653).epsilon(1e-9));
    // identical inputs reduce to the scalar transfer
    C = Eigen::Matrix2d::Constant(0.3);
    CHECK(nle_mse_transfer(C, p) == doctest::Approx(nle_mse_transfer(0.3, p)).epsilon(1e-9));
    CHECK(nle_start_cross(0.3, p) == doctest::Approx(nle_mse_transfer(0.3, p)).epsilon(1e-9));
    CHECK(nle_mse_transfer(Eigen::Matrix2d::Zero(), p) == 0.0);
}

TEST_CASE("scalar transfer agrees with Monte Carlo") {
    const SignalPrior p{0.1};
    const double v = 0.3;
    const double alpha = bg_divergence(v, p);
    std::mt19937_64 rng(2024);
    std::bernoulli_distribution on(0.1);
    std::normal_distribution<double> amp(0.0, std::sqrt(10.0)), noise(0.0, std::sqrt(v));
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = on(rng) ? amp(rng) : 0.0;
        const double r = x + noise(rng);
        const double h = (bg_posterior(r, v, p).mean - alpha * r) / (1.0 - alpha);
        const double e = (h - x) * (h - x);
        sum += e;
        sum2 += e * e;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean - nle_mse_transfer(v, p)) < 3.0 * se);
}

TEST_CASE("activation threshold") {
    const SignalPrior p{0.1};
    const double th = bg_activation_threshold(0.2, p);
    REQUIRE(th > 0.0);
    const double a = 0.1 * std::exp(-th * th / (2 * 10.2)) / std::sqrt(10.2);
    const double b = 0.9 * std::exp(-th * th / (2 * 0.2)) / std::sqrt(0.2);
    CHECK(a / (a + b) == doctest::Approx(0.5).epsilon(1e-10));
}

}
