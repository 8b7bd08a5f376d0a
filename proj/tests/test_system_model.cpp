#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ssmamp/errors.hpp"
#include "ssmamp/system_model.hpp"

using namespace ssmamp;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

}  // namespace

TEST_SUITE("system_model") {

TEST_CASE("spectrum normalisation") {
    const SpectrumSpec flat{64, 1.0, 1.0, SpectrumProfile::flat};
    CHECK(spectrum_singular_values(flat).isApprox(Eigen::VectorXd::Ones(64)));

    // N = 4, M = 2: sigma_2^2 (1 + 100) = 4
    const SpectrumSpec tiny{4, 0.5, 10.0, SpectrumProfile::geometric};
    const Eigen::VectorXd s = spectrum_singular_values(tiny);
    REQUIRE(s.size() == 2);
    CHECK(s(0) / s(1) == doctest::Approx(10.0));
    CHECK(s(0) * s(0) == doctest::Approx(400.0 / 101.0));
    CHECK(s(1) * s(1) == doctest::Approx(4.0 / 101.0));

    const Eigen::VectorXd m = spectral_moments(tiny, 2);
    CHECK(m(0) == doctest::Approx(0.5));
    CHECK(m(1) == doctest::Approx(1.0));
    CHECK(m(2) == doctest::Approx(40004.0 / 10201.0));

    const SpectrumSpec big{2048, 0.5, 100.0, SpectrumProfile::geometric};
    CHECK(std::abs(spectral_moments(big, 1)(1) - 1.0) < 1e-12);
    CHECK(spectral_moments(flat, 3).isApprox(Eigen::VectorXd::Ones(4)));
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((SpectrumSpec{0, 0.5, 1.0, SpectrumProfile::flat}.validate()), InvalidSpec);
    CHECK_THROWS_AS((SpectrumSpec{16, 0.0, 1.0, SpectrumProfile::flat}.validate()), InvalidSpec);
    CHECK_THROWS_AS((SpectrumSpec{16, 0.5, 0.5, SpectrumProfile::flat}.validate()), InvalidSpec);
    CHECK_THROWS_AS(SignalPrior{0.0}.validate(), InvalidSpec);
    CHECK_THROWS_AS(parse_profile("cubic"), InvalidSpec);
    CHECK(SpectrumSpec{16, 0.5, 1.0, SpectrumProfile::flat}.M() == 8);
}

TEST_CASE("Haar factor is orthogonal") {
    const Eigen::MatrixXd Q = haar_orthogonal(40, 3, 0);
    CHECK((Q.transpose() * Q - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Q == haar_orthogonal(40, 3, 0));
    CHECK_FALSE(Q == haar_orthogonal(40, 4, 0));
}

TEST_CASE("unitary case") {
    const SpectrumSpec spec{128, 1.0, 1.0, SpectrumProfile::flat};
    const SystemInstance inst = generate_system(1, spec, SignalPrior{0.1}, 0.0);
    CHECK((apply_A(inst, inst.x_true) - inst.y).norm() < 1e-12);
    const Eigen::VectorXd x = random_vector(128, 9);
    CHECK((apply_AH(inst, apply_A(inst, x)) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adjoint identity and noise level") {
    const SpectrumSpec spec{512, 0.5, 10.0, SpectrumProfile::geometric};
    const double noise_var = noise_var_from_snr(30.0, spec);
    const SystemInstance inst = generate_system(5, spec, SignalPrior{0.1}, noise_var);
    CHECK(inst.M() == 256);
    const Eigen::VectorXd v = random_vector(512, 1);
    const Eigen::VectorXd u = random_vector(256, 2);
    CHECK(apply_A(inst, v).dot(u) == doctest::Approx(v.dot(apply_AH(inst, u))).epsilon(1e-10));

    const double m = static_cast<double>(inst.M());
    const double resid = (inst.y - apply_A(inst, inst.x_true)).squaredNorm() / m;
    CHECK(std::abs(resid / noise_var - 1.0) < 5.0 / std::sqrt(m));
    CHECK(inst.sigma.squaredNorm() / 512.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("signal prior statistics") {
    const SpectrumSpec spec{16384, 0.0625, 1.0, SpectrumProfile::flat};
    const SystemInstance inst = generate_system(11, spec, SignalPrior{0.1}, 0.0);
    const double n = 16384.0;
    const double nonzero = static_cast<double>((inst.x_true.array() != 0.0).count()) / n;
    CHECK(std::abs(nonzero - 0.1) < 5.0 * std::sqrt(0.09 / n));
    CHECK(std::abs(inst.x_true.squaredNorm() / n - 1.0) < 5.0 * std::sqrt(29.0 / n));
}

TEST_CASE("determinism and binary round trip") {
    const SpectrumSpec spec{64, 0.5, 10.0, SpectrumProfile::geometric};
    const SystemInstance a = generate_system(21, spec, SignalPrior{0.2}, 0.01);
    const SystemInstance b = generate_system(21, spec, SignalPrior{0.2}, 0.01);
    CHECK(a.x_true == b.x_true);
    CHECK(a.y == b.y);

    std::stringstream buf;
    save_instance(a, buf);
    const SystemInstance c = load_instance(buf);
    CHECK(c.x_true == a.x_true);
    CHECK(c.y == a.y);
    CHECK(c.sigma == a.sigma);
    const Eigen::VectorXd v = random_vector(64, 4);
    CHECK(apply_A(c, v) == apply_A(a, v));

    std::stringstream bad("not an instance");
    CHECK_THROWS_AS(load_instance(bad), FormatError);
}

TEST_CASE("structured transform above the dense limit") {
    const SpectrumSpec spec{8192, 0.25, 10.0, SpectrumProfile::geometric};
    const SystemInstance inst = generate_system(2, spec, SignalPrior{0.1}, 0.0);
    const Eigen::VectorXd v = random_vector(8192, 6);
    CHECK(inst.V->apply_transpose(inst.V->apply(v)).isApprox(v, 1e-12));
    CHECK(inst.V->apply(v).norm() == doctest::Approx(v.norm()).epsilon(1e-12));
    const Eigen::VectorXd u = random_vector(2048, 8);
    CHECK(apply_A(inst, v).dot(u) == doctest::Approx(v.dot(apply_AH(inst, u))).epsilon(1e-10));
}

}
