#include <doctest.h>

#include <cmath>

#include "ssmamp/errors.hpp"
#include "ssmamp/lbanded.hpp"
#include "ssmamp/mamp_engine.hpp"

using namespace ssmamp;

namespace {

SystemInstance instance(std::size_t N, double kappa, double noise_var, std::uint64_t seed) {
    const SpectrumSpec spec{N, 0.5, kappa, SpectrumProfile::geometric};
    return generate_system(seed, spec, SignalPrior{0.1}, noise_var);
}

RunResult run(std::size_t N, double kappa, double noise_var, RunMode mode, int T,
              std::uint64_t seed = 1) {
    const SystemInstance inst = instance(N, kappa, noise_var, seed);
    EngineOptions o;
    o.T = T;
    o.mode = mode;
    o.fingerprint = "test";
    return run_mamp(inst, matched_filter_mle(spectral_moments(inst, 2)), inst.prior, o);
}

}  // namespace

TEST_SUITE("mamp_engine") {

TEST_CASE("run modes") {
    CHECK(to_string(RunMode::plain) == "plain");
    CHECK(to_string(RunMode::ss_damped) == "ss");
    CHECK(parse_mode("ss_damped") == RunMode::ss_damped);
    CHECK(parse_mode("plain") == RunMode::plain);
    CHECK_THROWS_AS(parse_mode("memory"), InvalidSpec);
}

TEST_CASE("unitary noiseless system is recovered in one step") {
    const SpectrumSpec spec{128, 1.0, 1.0, SpectrumProfile::flat};
    const SystemInstance inst = generate_system(7, spec, SignalPrior{0.1}, 0.0);
    EngineOptions o;
    o.T = 10;
    for (RunMode m : {RunMode::plain, RunMode::ss_damped}) {
        o.mode = m;
        const RunResult r = run_mamp(inst, matched_filter_mle(spectral_moments(inst, 2)), inst.prior, o);
        CHECK(r.report.exact_recovery);
        CHECK(r.report.converged_at == 1);
        CHECK(r.report.rows.size() == 1);
        CHECK(r.report.final_mse < 1e-20);
        CHECK(r.history.X.cols() == 2);
    }
}

TEST_CASE("single iteration") {
    const RunResult r = run(256, 10.0, 1e-3, RunMode::ss_damped, 1);
    REQUIRE(r.report.rows.size() == 1);
    const IterationRecord& row = r.report.rows[0];
    CHECK(row.t == 1);
    CHECK(row.zeta_gamma.size() == 1);
    CHECK(row.zeta_gamma(0) == doctest::Approx(1.0));
    CHECK(row.zeta_phi.size() == 1);
    CHECK(row.mse_phi == doctest::Approx(r.history.F.col(0).squaredNorm() / 256.0));
    CHECK(r.history.R.cols() == 1);
    CHECK(r.history.X.cols() == 2);
    CHECK(r.report.final_mse < row.mse_phi);
    CHECK_THROWS_AS(run(256, 10.0, 1e-3, RunMode::ss_damped, 0), InvalidSpec);
}

TEST_CASE("damped iterates carry L-banded covariances and monotone MSE") {
    const RunResult r = run(1024, 10.0, 1e-3, RunMode::ss_damped, 15, 3);
    const CovarianceTracker cov = track_covariances(r.history);
    CHECK(is_lbanded(cov.V_gamma, 1e-9).flag);
    for (std::size_t i = 1; i < r.report.rows.size(); ++i) {
        CHECK(r.report.rows[i].mse_gamma <= r.report.rows[i - 1].mse_gamma * (1.0 + 1e-9));
        CHECK(r.report.rows[i].mse_phi <= r.report.rows[i - 1].mse_phi * (1.0 + 1e-9));
        CHECK(r.report.rows[i].lband_dev_gamma < 1e-8);
    }
    for (const IterationRecord& row : r.report.rows) {
        CHECK(row.zeta_gamma.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(row.zeta_phi.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(row.mse_gamma == doctest::Approx(row.v_gamma).epsilon(1e-9));
    }
}

TEST_CASE("plain mode uses the raw iterates") {
    const RunResult r = run(512, 10.0, 1e-3, RunMode::plain, 8);
    CHECK(r.history.R.isApprox(r.history.R_raw));
    CHECK(r.history.X.isApprox(r.history.X_raw));
    for (const IterationRecord& row : r.report.rows) {
        CHECK(row.zeta_gamma(row.zeta_gamma.size() - 1) == 1.0);
        CHECK(row.zeta_gamma.sum() == 1.0);
        CHECK_FALSE(row.fallback_gamma);
    }
}

TEST_CASE("audits report the orthogonality and re-damping statistics") {
    const RunResult r = run(1024, 1.0, 1e-3, RunMode::ss_damped, 10, 5);
    const OrthogonalityStats o = orthogonality_audit(r.history, instance(1024, 1.0, 1e-3, 5).x_true);
    double per_row = 0.0;
    for (const IterationRecord& row : r.report.rows) {
        per_row = std::max(per_row, row.orth.max());
        if (!row.idem_singular) CHECK(row.idem_zeta_dev < 1e-6);
        CHECK(row.idem_mse_change < 1e-8);
    }
    CHECK(o.max() == doctest::Approx(per_row).epsilon(1e-12));
    CHECK(o.max() < 5.0 / std::sqrt(1024.0));
    const auto g = gaussianity_audit(r.history);
    REQUIRE(g.size() == r.report.rows.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i].skewness == doctest::Approx(r.report.rows[i].gauss.skewness));
        CHECK(std::abs(g[i].excess_kurtosis) < 1.0);
    }
}

TEST_CASE("damp_active") {
    const DampingOptions opts;
    std::vector<int> active;
    Eigen::MatrixXd V1(1, 1);
    V1 << 2.0;
    const ActiveDamping a = damp_active(V1, active, 0, std::nullopt, 0.0, opts);
    CHECK(a.zeta.zeta(0) == 1.0);
    CHECK(a.variance == 2.0);
    CHECK(active == std::vector<int>{0});

    Eigen::MatrixXd V2(2, 2);
    V2 << 2.0, 1.0, 1.0, 1.0;
    const ActiveDamping b = damp_active(V2, active, 1, a.zeta, a.variance, opts);
    CHECK_FALSE(b.excluded);
    CHECK(b.zeta.zeta(0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(b.zeta.zeta(1) == doctest::Approx(1.0));
    CHECK(b.variance == doctest::Approx(1.0));
    CHECK(active == std::vector<int>{0, 1});

    Eigen::MatrixXd V3(3, 3);
    V3 << 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;
    const ActiveDamping c = damp_active(V3, active, 2, b.zeta, b.variance, opts);
    CHECK(c.excluded);
    CHECK(c.zeta.fallback);
    CHECK(c.zeta.zeta(2) == 0.0);
    CHECK(c.variance == b.variance);
    CHECK(active == std::vector<int>{0, 1});

    CHECK_THROWS_AS(damp_active(V1, active, 3, b.zeta, 1.0, opts), DimensionMismatch);
}

TEST_CASE("ss_damp_step keeps the previous column on exclusion") {
    Eigen::MatrixXd raw(4, 2), err(4, 2);
    err << 1, 1, -1, -1, 1, 1, -1, -1;
    raw = err.array() + 3.0;
    std::vector<int> active{0};
    const DampingVector prev{Eigen::VectorXd::Ones(1), false, false};
    const Eigen::VectorXd prev_col = Eigen::VectorXd::Constant(4, 7.0);
    const DampStep st = ss_damp_step(raw, err, active, 1, prev, 1.0, prev_col, {});
    CHECK(st.excluded);
    CHECK(st.column == prev_col);
    CHECK(active.size() == 1);
}

TEST_CASE("compare_runs") {
    const RunResult p = run(512, 10.0, 1e-3, RunMode::plain, 10);
    const RunResult s = run(512, 10.0, 1e-3, RunMode::ss_damped, 10);
    const DominanceTable d = compare_runs(p.report, s.report, 3.0 / std::sqrt(512.0));
    CHECK(d.all_ok);
    CHECK(d.rows.size() == std::max(p.report.rows.size(), s.report.rows.size()));
    CHECK(d.rows[0].excess == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(compare_runs(s.report, p.report, 0.0), ConfigMismatch);
    RunReport other = s.report;
    other.seed = 99;
    CHECK_THROWS_AS(compare_runs(p.report, other, 0.0), ConfigMismatch);

    RunReport worse = s.report;
    for (IterationRecord& row : worse.rows) row.mse_phi += 1.0;
    const DominanceTable w = compare_runs(p.report, worse, 0.5);
    CHECK_FALSE(w.all_ok);
    CHECK(w.max_excess > 0.5);
}

}
