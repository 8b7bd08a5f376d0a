#include "ssmamp/state_evolution.hpp"

#include <cmath>

#include "ssmamp/errors.hpp"

namespace ssmamp {

namespace {

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& V, const std::vector<int>& idx) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = V(idx[i], idx[j]);
    }
    return out;
}

Eigen::VectorXd scatter(const Eigen::VectorXd& w, const std::vector<int>& idx, Eigen::Index n) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < idx.size(); ++j) out(idx[j]) = w(static_cast<Eigen::Index>(j));
    return out;
}

void grow(Eigen::MatrixXd& V, Eigen::Index n) {
    const Eigen::Index old = V.rows();
    V.conservativeResize(n, n);
    if (n > old) {
        V.bottomRows(n - old).setZero();
        V.rightCols(n - old).setZero();
    }
}

/// Covariance between the denoiser errors for inputs i and j (damped
/// indices into Vg).
double phi_entry(const Eigen::MatrixXd& Vg, Eigen::Index i, Eigen::Index j,
                 const SignalPrior& prior) {
    if (i == j) return nle_mse_transfer(Vg(i, i), prior);
    Eigen::Matrix2d C;
    C << Vg(i, i), Vg(i, j), Vg(j, i), Vg(j, j);
    return nle_mse_transfer(C, prior);
}

}  // namespace

Eigen::MatrixXd se_gamma_step(const MleTransfer& transfer, const Eigen::MatrixXd& v_phi) {
    return transfer(v_phi);
}

Eigen::MatrixXd se_phi_step(const Eigen::MatrixXd& v_gamma, const SignalPrior& prior) {
    const Eigen::Index t = v_gamma.rows();
    if (v_gamma.cols() != t) throw DimensionMismatch("se_phi_step: covariance must be square");
    Eigen::MatrixXd out(t + 1, t + 1);
    out(0, 0) = 1.0;
    for (Eigen::Index j = 0; j < t; ++j) {
        out(0, j + 1) = out(j + 1, 0) = nle_start_cross(v_gamma(j, j), prior);
        for (Eigen::Index i = 0; i <= j; ++i) {
            out(i + 1, j + 1) = out(j + 1, i + 1) = phi_entry(v_gamma, i, j, prior);
        }
    }
    return out;
}

SETrajectory run_se(const MleSpec& mle, const Eigen::VectorXd& moments, const SignalPrior& prior,
                    double noise_var, const SeOptions& opts) {
    if (opts.T < 1) throw InvalidSpec("T must be at least 1");
    prior.validate();
    const MleTransfer transfer = mle_transfer(mle, moments, noise_var);
    const bool ss = opts.mode == RunMode::ss_damped;

    SETrajectory tr;
    tr.mode = opts.mode;
    // raw and damped covariances; phi index 0 is x_1 = 0 with error -x
    Eigen::MatrixXd raw_g(0, 0), raw_p = Eigen::MatrixXd::Ones(1, 1);
    Eigen::MatrixXd Dg(0, 0), Dp = Eigen::MatrixXd::Ones(1, 1);
    std::vector<int> active_g, active_p{0};
    std::optional<DampingVector> prev_zg;
    std::optional<DampingVector> prev_zp = DampingVector{Eigen::VectorXd::Ones(1), false, false};
    tr.v_phi.push_back(1.0);
    tr.zeta_phi.push_back(Eigen::VectorXd::Ones(1));
    int calm = 0;

    for (int t = 1; t <= opts.T; ++t) {
        const Eigen::Index k = t - 1;

        // gamma: raw column k is the MLE applied to damped x_t
        grow(raw_g, k + 1);
        for (Eigen::Index j = 0; j <= k; ++j) {
            raw_g(j, k) = raw_g(k, j) = transfer(Dp(j, k));
        }
        double vg = 0.0;
        Eigen::VectorXd zg;
        if (ss) {
            std::vector<int> cols = active_g;
            cols.push_back(static_cast<int>(k));
            const ActiveDamping d = damp_active(submatrix(raw_g, cols), active_g, static_cast<int>(k),
                                                prev_zg, k > 0 ? tr.v_gamma.back() : 0.0,
                                                opts.damping);
            vg = d.variance;
            zg = scatter(d.zeta.zeta, cols, k + 1);
            if (d.excluded) {
                tr.excluded_gamma.push_back(static_cast<int>(k));
            } else {
                prev_zg = d.zeta;
            }
        } else {
            vg = raw_g(k, k);
            zg = Eigen::VectorXd::Zero(k + 1);
            zg(k) = 1.0;
        }
        tr.v_gamma.push_back(vg);
        tr.zeta_gamma.push_back(zg);
        grow(Dg, k + 1);
        if (ss) {
            // L-banded by construction
            for (Eigen::Index j = 0; j <= k; ++j) Dg(j, k) = Dg(k, j) = vg;
        } else {
            Dg.col(k) = raw_g.col(k);
            Dg.row(k) = raw_g.row(k);
        }

        if (vg <= opts.exact_floor) {
            tr.v_phi.push_back(vg);
            tr.zeta_phi.push_back(Eigen::VectorXd::Zero(k + 2));
            tr.converged = true;
            tr.converged_at = t;
            break;
        }

        // phi: raw column k + 1 is the denoiser fed damped r_t
        grow(raw_p, k + 2);
        raw_p(0, k + 1) = raw_p(k + 1, 0) = nle_start_cross(Dg(k, k), prior);
        for (Eigen::Index i = 0; i <= k; ++i) {
            raw_p(i + 1, k + 1) = raw_p(k + 1, i + 1) = phi_entry(Dg, i, k, prior);
        }
        double vp = 0.0;
        Eigen::VectorXd zp;
        if (ss) {
            std::vector<int> cols = active_p;
            cols.push_back(static_cast<int>(k + 1));
            const ActiveDamping d = damp_active(submatrix(raw_p, cols), active_p,
                                                static_cast<int>(k + 1), prev_zp, tr.v_phi.back(),
                                                opts.damping);
            vp = d.variance;
            zp = scatter(d.zeta.zeta, cols, k + 2);
            if (d.excluded) {
                tr.excluded_phi.push_back(static_cast<int>(k + 1));
            } else {
                prev_zp = d.zeta;
            }
        } else {
            vp = raw_p(k + 1, k + 1);
            zp = Eigen::VectorXd::Zero(k + 2);
            zp(k + 1) = 1.0;
        }
        tr.v_phi.push_back(vp);
        tr.zeta_phi.push_back(zp);
        grow(Dp, k + 2);
        if (ss) {
            for (Eigen::Index j = 0; j <= k + 1; ++j) Dp(j, k + 1) = Dp(k + 1, j) = vp;
        } else {
            Dp.col(k + 1) = raw_p.col(k + 1);
            Dp.row(k + 1) = raw_p.row(k + 1);
        }

        if (std::abs(tr.v_phi[k + 1] - tr.v_phi[k]) < opts.converge_rel * tr.v_phi[0]) {
            if (++calm >= opts.converge_patience) {
                tr.converged = true;
                tr.converged_at = t;
                break;
            }
        } else {
            calm = 0;
        }
    }
    tr.cov_gamma = Dg;
    tr.cov_phi = Dp;
    tr.raw_gamma = raw_g;
    tr.raw_phi = raw_p;
    return tr;
}

SETrajectory run_se(const SpectrumSpec& spec, const SignalPrior& prior, double noise_var,
                    const SeOptions& opts) {
    spec.validate();
    const Eigen::VectorXd moments = spectral_moments(spec, 2);
    return run_se(matched_filter_mle(moments), moments, prior, noise_var, opts);
}

FixedPoint fixed_point(const SETrajectory& traj) {
    FixedPoint fp;
    fp.iterations = traj.converged ? traj.converged_at : traj.iterations();
    fp.converged = traj.converged;
    if (!traj.v_gamma.empty()) fp.v_gamma_star = traj.v_gamma.back();
    if (!traj.v_phi.empty()) fp.v_phi_star = traj.v_phi.back();
    return fp;
}

}  // namespace ssmamp
