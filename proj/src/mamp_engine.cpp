#include "ssmamp/mamp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ssmamp/errors.hpp"
#include "ssmamp/lbanded.hpp"

namespace ssmamp {

namespace {

constexpr double kLbandFloor = 1e-30;

double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(b) / static_cast<double>(a.size());
}

void require_finite(const Eigen::VectorXd& v, const char* what, int t) {
    if (!v.allFinite()) {
        throw NonFiniteIterate(std::string(what) + " became non-finite at iteration " +
                               std::to_string(t));
    }
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = m.col(cols[j]);
    return out;
}

Eigen::VectorXd scatter(const Eigen::VectorXd& w, const std::vector<int>& cols, Eigen::Index n) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < cols.size() && static_cast<Eigen::Index>(j) < w.size(); ++j) {
        out(cols[j]) = w(j);
    }
    return out;
}

/// Appends the covariances of `col` against the first k columns of `E`
/// to the k x k matrix V.
void grow_covariance(Eigen::MatrixXd& V, const Eigen::MatrixXd& E, Eigen::Index k) {
    V.conservativeResize(k + 1, k + 1);
    const Eigen::VectorXd c = E.leftCols(k + 1).transpose() * E.col(k) /
                              static_cast<double>(E.rows());
    V.row(k) = c.transpose();
    V.col(k) = c;
}

Eigen::VectorXd ranks(const Eigen::VectorXd& v) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v(a) < v(b); });
    Eigen::VectorXd r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r(idx[i]) = static_cast<double>(i);
    return r;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd ca = a.array() - a.mean();
    const Eigen::ArrayXd cb = b.array() - b.mean();
    const double den = std::sqrt((ca * ca).sum() * (cb * cb).sum());
    return den > 0.0 ? (ca * cb).sum() / den : 0.0;
}

struct Moments {
    double skewness;
    double excess_kurtosis;
};

Moments standardized_moments(const Eigen::VectorXd& g) {
    const Eigen::ArrayXd c = g.array() - g.mean();
    const double m2 = (c * c).mean();
    if (!(m2 > 0.0)) return {0.0, 0.0};
    const double m3 = (c * c * c).mean();
    const double m4 = (c * c * c * c).mean();
    return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

}  // namespace

std::string to_string(RunMode m) { return m == RunMode::plain ? "plain" : "ss"; }

RunMode parse_mode(const std::string& s) {
    if (s == "plain") return RunMode::plain;
    if (s == "ss" || s == "ss_damped") return RunMode::ss_damped;
    throw InvalidSpec("unknown run mode '" + s + "'");
}

double OrthogonalityStats::max() const { return std::max({g_x, g_f, f_g}); }

CovarianceTracker track_covariances(const IterationHistory& h) {
    const double n = static_cast<double>(h.G.rows());
    CovarianceTracker out;
    out.V_gamma = h.G.transpose() * h.G / n;
    out.V_phi = h.F.transpose() * h.F / n;
    return out;
}

ActiveDamping damp_active(const Eigen::MatrixXd& V, std::vector<int>& active, int new_col,
                          const std::optional<DampingVector>& prev, double prev_variance,
                          const DampingOptions& opts) {
    if (V.rows() != static_cast<Eigen::Index>(active.size()) + 1) {
        throw DimensionMismatch("damp_active: covariance must cover the active set and the new column");
    }
    ActiveDamping out;
    out.zeta = optimal_damping(V, active.empty() ? std::nullopt : prev, opts);
    if (!out.zeta.fallback) {
        out.variance = damped_variance(V, out.zeta);
        // The previous damped estimate is feasible here, so a larger optimum
        // can only come from a numerically singular solve.
        const bool worse = prev && !active.empty() &&
                           out.variance > prev_variance * (1.0 + 1e-9) + 1e-300;
        if (!worse) {
            active.push_back(new_col);
            return out;
        }
        out.zeta.zeta.setZero();
        out.zeta.zeta.head(static_cast<Eigen::Index>(active.size())) = prev->zeta;
        out.zeta.fallback = true;
    }
    out.excluded = true;
    out.variance = prev_variance;
    return out;
}

DampStep ss_damp_step(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& raw_err,
                      std::vector<int>& active, int new_col,
                      const std::optional<DampingVector>& prev, double prev_variance,
                      const Eigen::VectorXd& prev_column, const DampingOptions& opts) {
    std::vector<int> cols = active;
    cols.push_back(new_col);
    const Eigen::MatrixXd E = gather(raw_err, cols);
    const Eigen::MatrixXd V = E.transpose() * E / static_cast<double>(E.rows());

    const ActiveDamping d = damp_active(V, active, new_col, prev, prev_variance, opts);
    DampStep out;
    out.zeta = d.zeta;
    out.variance = d.variance;
    out.excluded = d.excluded;
    out.column = d.excluded ? prev_column : Eigen::VectorXd(gather(raw, cols) * d.zeta.zeta);
    return out;
}

RunResult run_mamp(const SystemInstance& inst, const MleSpec& mle, const SignalPrior& prior,
                   const EngineOptions& opts) {
    if (opts.T < 1) throw InvalidSpec("T must be at least 1");
    const Eigen::Index N = inst.N();
    const double n = static_cast<double>(N);
    const int T = opts.T;
    const bool ss = opts.mode == RunMode::ss_damped;
    const Eigen::VectorXd& x = inst.x_true;

    RunResult res;
    IterationHistory& h = res.history;
    RunReport& rep = res.report;
    rep.mode = opts.mode;
    rep.fingerprint = opts.fingerprint;
    rep.seed = inst.seed;
    rep.N = static_cast<std::size_t>(N);
    rep.T = T;

    h.X_raw = Eigen::MatrixXd::Zero(N, T + 1);
    h.X = Eigen::MatrixXd::Zero(N, T + 1);
    h.F = Eigen::MatrixXd::Zero(N, T + 1);
    h.R_raw = Eigen::MatrixXd::Zero(N, T);
    h.R = Eigen::MatrixXd::Zero(N, T);
    h.G = Eigen::MatrixXd::Zero(N, T);
    Eigen::MatrixXd F_raw = Eigen::MatrixXd::Zero(N, T + 1);
    Eigen::MatrixXd G_raw = Eigen::MatrixXd::Zero(N, T);
    F_raw.col(0) = -x;
    h.F.col(0) = -x;
    h.active_phi = {0};

    std::vector<double> v_phi{x.squaredNorm() / n};
    rep.degenerate_start = !(v_phi[0] > 0.0);
    std::vector<Eigen::VectorXd> zeta_phi_raw{Eigen::VectorXd::Ones(1)};
    std::vector<bool> fallback_phi{false};
    std::optional<DampingVector> prev_zg;
    std::optional<DampingVector> prev_zp = DampingVector{Eigen::VectorXd::Ones(1), false, false};
    double prev_vg = 0.0;

    Eigen::MatrixXd Vg, Vp;
    grow_covariance(Vp, h.F, 0);
    std::vector<Eigen::VectorXd> g_ranks;
    std::mt19937_64 audit_rng(opts.audit_seed ^ 0x9e3779b97f4a7c15ull);
    std::optional<DampingVector> idem_prev;
    std::vector<int> idem_cols;
    int calm = 0;
    int executed = 0;

    for (int t = 1; t <= T; ++t) {
        const Eigen::Index k = t - 1;
        IterationRecord row;
        row.t = t;

        // linear step
        const Eigen::VectorXd r_raw = mle_apply(mle, inst, h.X.col(k));
        require_finite(r_raw, "MLE output", t);
        h.R_raw.col(k) = r_raw;
        G_raw.col(k) = r_raw - x;
        if (ss) {
            DampStep st = ss_damp_step(h.R_raw, G_raw, h.active_gamma, static_cast<int>(k),
                                       prev_zg, prev_vg,
                                       k > 0 ? Eigen::VectorXd(h.R.col(k - 1)) : r_raw,
                                       opts.damping);
            h.R.col(k) = st.column;
            row.v_gamma = st.variance;
            row.fallback_gamma = st.zeta.fallback;
            if (st.excluded) {
                h.excluded_gamma.push_back(static_cast<int>(k));
                std::vector<int> with_new = h.active_gamma;
                with_new.push_back(static_cast<int>(k));
                row.zeta_gamma = scatter(st.zeta.zeta, with_new, t);
            } else {
                row.zeta_gamma = scatter(st.zeta.zeta, h.active_gamma, t);
                prev_zg = st.zeta;
            }
            if (st.zeta.degenerate) rep.degenerate_start = true;
        } else {
            h.R.col(k) = r_raw;
            row.v_gamma = G_raw.col(k).squaredNorm() / n;
            row.zeta_gamma = Eigen::VectorXd::Zero(t);
            row.zeta_gamma(k) = 1.0;
        }
        prev_vg = row.v_gamma;
        h.G.col(k) = h.R.col(k) - x;
        row.mse_gamma = h.G.col(k).squaredNorm() / n;
        grow_covariance(Vg, h.G, k);

        // nonlinear step
        const bool exact = row.v_gamma <= opts.exact_floor;
        if (exact) {
            h.X_raw.col(k + 1) = h.R.col(k);
            F_raw.col(k + 1) = h.G.col(k);
            h.X.col(k + 1) = h.R.col(k);
            v_phi.push_back(row.v_gamma);
            zeta_phi_raw.push_back(Eigen::VectorXd::Zero(t + 1));
            zeta_phi_raw.back()(t) = 1.0;
            fallback_phi.push_back(false);
        } else {
            const DenoiserOutput den = bg_posterior_mean(h.R.col(k), row.v_gamma, prior);
            row.alpha = den.divergence;
            const Eigen::VectorXd x_raw = orthogonalize_nle(den, h.R.col(k));
            require_finite(x_raw, "denoiser output", t);
            h.X_raw.col(k + 1) = x_raw;
            F_raw.col(k + 1) = x_raw - x;
            if (ss) {
                DampStep st = ss_damp_step(h.X_raw, F_raw, h.active_phi, static_cast<int>(k + 1),
                                           prev_zp, v_phi.back(), h.X.col(k), opts.damping);
                h.X.col(k + 1) = st.column;
                v_phi.push_back(st.variance);
                fallback_phi.push_back(st.zeta.fallback);
                if (st.excluded) {
                    h.excluded_phi.push_back(static_cast<int>(k + 1));
                    std::vector<int> with_new = h.active_phi;
                    with_new.push_back(static_cast<int>(k + 1));
                    zeta_phi_raw.push_back(scatter(st.zeta.zeta, with_new, t + 1));
                } else {
                    zeta_phi_raw.push_back(scatter(st.zeta.zeta, h.active_phi, t + 1));
                    prev_zp = st.zeta;
                }
            } else {
                h.X.col(k + 1) = x_raw;
                v_phi.push_back(F_raw.col(k + 1).squaredNorm() / n);
                zeta_phi_raw.push_back(Eigen::VectorXd::Zero(t + 1));
                zeta_phi_raw.back()(t) = 1.0;
                fallback_phi.push_back(false);
            }
        }
        h.F.col(k + 1) = h.X.col(k + 1) - x;
        grow_covariance(Vp, h.F, k + 1);

        // row t describes x_t and r_t
        row.mse_phi = h.F.col(k).squaredNorm() / n;
        row.v_phi = v_phi[k];
        row.zeta_phi = zeta_phi_raw[k];
        row.fallback_phi = fallback_phi[k];
        row.lband_dev_gamma = is_lbanded(Vg, 0.0, kLbandFloor).max_deviation;
        row.lband_dev_phi = is_lbanded(Vp.topLeftCorner(t, t), 0.0, kLbandFloor).max_deviation;

        row.orth.g_x = std::abs(inner(h.G.col(k), x));
        for (Eigen::Index i = 0; i <= k; ++i) {
            row.orth.g_f = std::max(row.orth.g_f, std::abs(inner(h.G.col(k), h.F.col(i))));
            row.orth.f_g = std::max(row.orth.f_g, std::abs(inner(h.F.col(k + 1), h.G.col(i))));
        }

        if (opts.audits) {
            const Moments mo = standardized_moments(h.G.col(k));
            row.gauss.skewness = mo.skewness;
            row.gauss.excess_kurtosis = mo.excess_kurtosis;
            g_ranks.push_back(ranks(h.G.col(k)));
            for (Eigen::Index i = 0; i < k; ++i) {
                const double denom = std::sqrt(Vg(k, k) * Vg(i, i));
                if (!(denom > 0.0)) continue;
                const double rs = pearson(g_ranks[k], g_ranks[i]);
                const double copula = 2.0 * std::sin(std::numbers::pi * rs / 6.0);
                row.gauss.copula_dev =
                    std::max(row.gauss.copula_dev, std::abs(copula - Vg(i, k) / denom));
            }

            if (ss) {
                // Re-damp the distinct damped iterates r_1..r_t.
                if (k == 0 || !row.fallback_gamma) {
                    idem_cols.push_back(static_cast<int>(k));
                    const Eigen::MatrixXd Vs = gather(gather(Vg, idem_cols).transpose(), idem_cols);
                    const DampingVector z = optimal_damping(
                        Vs, idem_cols.size() > 1 ? idem_prev : std::nullopt, opts.damping);
                    const Eigen::VectorXd g_re = gather(h.G, idem_cols) * z.zeta;
                    row.idem_mse_change = std::abs(g_re.squaredNorm() / n - row.mse_gamma);
                    if (z.fallback) {
                        row.idem_singular = true;
                        idem_cols.pop_back();
                    } else {
                        Eigen::VectorXd e = Eigen::VectorXd::Zero(z.size());
                        e(e.size() - 1) = 1.0;
                        row.idem_zeta_dev = (z.zeta - e).cwiseAbs().maxCoeff();
                        idem_prev = z;
                    }
                }

                // Add a random combination of earlier r_i to the denoiser input.
                if (k > 0 && !exact) {
                    std::uniform_real_distribution<double> unif(0.0, 1.0);
                    const DenoiserOutput single = bg_posterior_mean(h.R.col(k), row.v_gamma, prior);
                    const double mse_single = (single.estimate - x).squaredNorm() / n;
                    for (int d = 0; d < opts.memory_draws; ++d) {
                        Eigen::VectorXd c(k);
                        for (Eigen::Index i = 0; i < k; ++i) c(i) = unif(audit_rng);
                        c /= c.sum();
                        Eigen::MatrixXd obs(N, 2);
                        obs.col(0) = h.R.col(k);
                        obs.col(1) = h.R.leftCols(k) * c;
                        const Eigen::VectorXd gz = obs.col(1) - x;
                        Eigen::Matrix2d C;
                        C(0, 0) = row.v_gamma;
                        C(0, 1) = C(1, 0) = inner(h.G.col(k), gz);
                        C(1, 1) = gz.squaredNorm() / n;
                        if (C.determinant() <= 1e-12 * C(1, 1) * C(0, 0)) continue;
                        const DenoiserOutput joint = bg_posterior_mean_joint(obs, C, prior);
                        const double mse_joint = (joint.estimate - x).squaredNorm() / n;
                        row.memory_gain = std::max(row.memory_gain, std::abs(mse_joint - mse_single));
                    }
                }
            }
        }

        rep.rows.push_back(row);
        executed = t;
        if (exact) {
            rep.exact_recovery = true;
            rep.converged = true;
            rep.converged_at = t;
            break;
        }
        if (std::abs(v_phi[k + 1] - v_phi[k]) < opts.converge_rel * v_phi[0]) {
            if (++calm >= opts.converge_patience) {
                rep.converged = true;
                rep.converged_at = t;
                break;
            }
        } else {
            calm = 0;
        }
    }

    h.X_raw.conservativeResize(N, executed + 1);
    h.X.conservativeResize(N, executed + 1);
    h.F.conservativeResize(N, executed + 1);
    h.R_raw.conservativeResize(N, executed);
    h.R.conservativeResize(N, executed);
    h.G.conservativeResize(N, executed);
    rep.final_mse = h.F.col(executed).squaredNorm() / n;
    rep.v_gamma_star = rep.rows.back().v_gamma;
    rep.v_phi_star = v_phi[static_cast<std::size_t>(executed)];
    rep.excluded_gamma = h.excluded_gamma;
    rep.excluded_phi = h.excluded_phi;
    return res;
}

OrthogonalityStats orthogonality_audit(const IterationHistory& h, const Eigen::VectorXd& x) {
    OrthogonalityStats out;
    for (Eigen::Index t = 0; t < h.G.cols(); ++t) {
        out.g_x = std::max(out.g_x, std::abs(inner(h.G.col(t), x)));
        for (Eigen::Index i = 0; i <= t; ++i) {
            out.g_f = std::max(out.g_f, std::abs(inner(h.G.col(t), h.F.col(i))));
            if (t + 1 < h.F.cols()) {
                out.f_g = std::max(out.f_g, std::abs(inner(h.F.col(t + 1), h.G.col(i))));
            }
        }
    }
    return out;
}

std::vector<GaussianityStats> gaussianity_audit(const IterationHistory& h) {
    std::vector<GaussianityStats> out;
    const Eigen::MatrixXd V = h.G.transpose() * h.G / static_cast<double>(h.G.rows());
    std::vector<Eigen::VectorXd> rk;
    for (Eigen::Index t = 0; t < h.G.cols(); ++t) {
        GaussianityStats s;
        const Moments mo = standardized_moments(h.G.col(t));
        s.skewness = mo.skewness;
        s.excess_kurtosis = mo.excess_kurtosis;
        rk.push_back(ranks(h.G.col(t)));
        for (Eigen::Index i = 0; i < t; ++i) {
            const double denom = std::sqrt(V(t, t) * V(i, i));
            if (!(denom > 0.0)) continue;
            const double copula = 2.0 * std::sin(std::numbers::pi * pearson(rk[t], rk[i]) / 6.0);
            s.copula_dev = std::max(s.copula_dev, std::abs(copula - V(i, t) / denom));
        }
        out.push_back(s);
    }
    return out;
}

DominanceTable compare_runs(const RunReport& plain, const RunReport& ss, double slack) {
    if (plain.fingerprint != ss.fingerprint || plain.seed != ss.seed || plain.N != ss.N ||
        plain.T != ss.T) {
        throw ConfigMismatch("compare_runs: reports come from different configurations");
    }
    if (plain.mode != RunMode::plain || ss.mode != RunMode::ss_damped) {
        throw ConfigMismatch("compare_runs: expected a plain and an ss report");
    }
    DominanceTable out;
    out.slack = slack;
    const std::size_t n = std::max(plain.rows.size(), ss.rows.size());
    for (std::size_t i = 0; i < n; ++i) {
        const IterationRecord& p = plain.rows[std::min(i, plain.rows.size() - 1)];
        const IterationRecord& s = ss.rows[std::min(i, ss.rows.size() - 1)];
        DominanceRow row;
        row.t = static_cast<int>(i) + 1;
        row.mse_plain = p.mse_phi;
        row.mse_ss = s.mse_phi;
        row.excess = std::max(s.mse_phi - p.mse_phi, s.mse_gamma - p.mse_gamma);
        row.ok = row.excess <= slack;
        out.max_excess = i == 0 ? row.excess : std::max(out.max_excess, row.excess);
        out.all_ok = out.all_ok && row.ok;
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace ssmamp
