#include <doctest.h>

#include <cmath>

#include "ssmamp/errors.hpp"
#include "ssmamp/lbanded.hpp"
#include "ssmamp/state_evolution.hpp"

using namespace ssmamp;

namespace {

SETrajectory se(double kappa, double noise_var, RunMode mode, int T = 30) {
    SeOptions o;
    o.T = T;
    o.mode = mode;
    return run_se(SpectrumSpec{512, 0.5, kappa, SpectrumProfile::geometric}, SignalPrior{0.1},
                  noise_var, o);
}

}  // namespace

TEST_SUITE("state_evolution") {

TEST_CASE("gamma step is affine in the phi covariance") {
    const MleTransfer tr{29803.0 / 10201.0, 0.25};
    Eigen::Matrix2d v;
    v << 1.0, 0.5, 0.5, 0.5;
    const Eigen::MatrixXd g = se_gamma_step(tr, v);
    CHECK(g(0, 0) == doctest::Approx(29803.0 / 10201.0 + 0.25));
    CHECK(g(0, 1) == doctest::Approx(0.5 * 29803.0 / 10201.0 + 0.25));
    CHECK(g(1, 0) == g(0, 1));
}

TEST_CASE("phi step entries") {
    const SignalPrior p{0.1};
    Eigen::Matrix2d v;
    v << 0.3, 0.05, 0.05, 0.2;
    const Eigen::MatrixXd m = se_phi_step(v, p);
    REQUIRE(m.rows() == 3);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(1, 1) == doctest::Approx(0.073142318409660041).epsilon(1e-9));
    CHECK(m(1, 2) == doctest::Approx(0.0227245120074211).epsilon(1e-9));
    CHECK(m(0, 1) == doctest::Approx(nle_start_cross(0.3, p)).epsilon(1e-12));
    CHECK(m.isApprox(m.transpose()));
}

TEST_CASE("unitary matrix: gamma variance is the noise level") {
    SeOptions o;
    o.T = 10;
    const SETrajectory tr = run_se(SpectrumSpec{512, 1.0, 1.0, SpectrumProfile::flat},
                                   SignalPrior{0.1}, 0.01, o);
    CHECK(tr.v_phi[0] == 1.0);
    for (double v : tr.v_gamma) CHECK(v == doctest::Approx(0.01).epsilon(1e-12));
    for (std::size_t i = 1; i < tr.v_phi.size(); ++i) {
        CHECK(tr.v_phi[i] == doctest::Approx(nle_mse_transfer(0.01, SignalPrior{0.1})).epsilon(1e-9));
    }
    CHECK(tr.converged);
    CHECK(tr.converged_at < 10);
}

TEST_CASE("damped recursion is L-banded and monotone") {
    for (double kappa : {1.0, 10.0, 100.0}) {
        const SETrajectory tr = se(kappa, 1e-3, RunMode::ss_damped);
        CHECK(tr.v_phi[0] == 1.0);
        CHECK(tr.v_phi.size() == tr.v_gamma.size() + 1);
        CHECK(is_lbanded(tr.cov_gamma, 0.0).flag);
        CHECK(is_lbanded(tr.cov_phi, 0.0).flag);
        for (std::size_t i = 1; i < tr.v_gamma.size(); ++i) CHECK(tr.v_gamma[i] <= tr.v_gamma[i - 1]);
        for (std::size_t i = 1; i < tr.v_phi.size(); ++i) CHECK(tr.v_phi[i] <= tr.v_phi[i - 1]);
        for (const Eigen::VectorXd& z : tr.zeta_gamma) CHECK(z.sum() == doctest::Approx(1.0));
    }
}

TEST_CASE("damping never predicts a larger error than the plain recursion") {
    for (double kappa : {1.0, 10.0, 100.0, 1000.0}) {
        const SETrajectory ss = se(kappa, 1e-3, RunMode::ss_damped);
        const SETrajectory plain = se(kappa, 1e-3, RunMode::plain);
        const std::size_t n = std::min(ss.v_gamma.size(), plain.v_gamma.size());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(ss.v_gamma[i] <= plain.v_gamma[i] + 1e-12);
            CHECK(ss.v_phi[i + 1] <= plain.v_phi[i + 1] + 1e-12);
        }
    }
}

TEST_CASE("plain recursion carries its raw covariance") {
    const SETrajectory tr = se(10.0, 1e-3, RunMode::plain, 8);
    CHECK(tr.cov_gamma.isApprox(tr.raw_gamma));
    CHECK(tr.cov_phi.isApprox(tr.raw_phi));
    for (const Eigen::VectorXd& z : tr.zeta_gamma) CHECK(z(z.size() - 1) == 1.0);
}

TEST_CASE("noiseless fixed point") {
    SeOptions o;
    o.T = 10;
    const SETrajectory exact = run_se(SpectrumSpec{256, 1.0, 1.0, SpectrumProfile::flat},
                                      SignalPrior{0.1}, 0.0, o);
    CHECK(exact.converged);
    CHECK(exact.converged_at == 1);
    const FixedPoint fp = fixed_point(exact);
    CHECK(fp.v_gamma_star == 0.0);
    CHECK(fp.v_phi_star == 0.0);
    CHECK(fp.iterations == 1);

    const SETrajectory noisy = se(10.0, 1e-3, RunMode::ss_damped, 20);
    const FixedPoint np = fixed_point(noisy);
    CHECK(np.v_phi_star > 0.0);
    CHECK(np.v_phi_star < noisy.v_phi[0]);
    CHECK(np.iterations == (noisy.converged ? noisy.converged_at : noisy.iterations()));
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(se(10.0, 1e-3, RunMode::ss_damped, 0), InvalidSpec);
    SeOptions o;
    CHECK_THROWS_AS(run_se(SpectrumSpec{512, 0.5, 10.0, SpectrumProfile::geometric},
                           SignalPrior{0.0}, 1e-3, o),
                    InvalidSpec);
}

}
