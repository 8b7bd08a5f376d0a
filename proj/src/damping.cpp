#include "ssmamp/damping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssmamp/errors.hpp"

namespace ssmamp {

namespace {

void require_square(const Eigen::MatrixXd& V, const char* where) {
    if (V.rows() != V.cols() || V.rows() == 0) {
        throw DimensionMismatch(std::string(where) + ": expected a nonempty square matrix");
    }
}

}  // namespace

bool covariance_invertible(const Eigen::MatrixXd& V, const DampingOptions& opts,
                           double* condition) {
    require_square(V, "covariance_invertible");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (condition != nullptr) {
        *condition = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
    }
    return hi > 0.0 && lo > opts.singular_tau * hi;
}

DampingVector optimal_damping(const Eigen::MatrixXd& V, const std::optional<DampingVector>& prev,
                              const DampingOptions& opts) {
    require_square(V, "optimal_damping");
    const Eigen::Index t = V.rows();
    if (prev && prev->size() != t - 1) {
        throw DimensionMismatch("optimal_damping: previous weights must have length t-1");
    }

    DampingVector out;
    if (covariance_invertible(V, opts)) {
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(t);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
        Eigen::VectorXd u = ldlt.solve(ones);
        out.zeta = u / u.sum();
        out.zeta /= out.zeta.sum();
        if (out.zeta.allFinite()) return out;
    }

    if (t == 1) {
        out.zeta = Eigen::VectorXd::Ones(1);
        out.degenerate = true;
        return out;
    }
    if (!prev) {
        throw MissingPrev("covariance is singular at t > 1 and no previous weights were given");
    }
    out.zeta = Eigen::VectorXd::Zero(t);
    out.zeta.head(t - 1) = prev->zeta;
    out.fallback = true;
    return out;
}

double damped_variance(const Eigen::MatrixXd& V, const DampingVector& zeta) {
    if (V.rows() != V.cols() || V.rows() != zeta.size()) {
        throw DimensionMismatch("damped_variance: weights and covariance disagree in size");
    }
    return zeta.zeta.dot(V * zeta.zeta);
}

QpSolution qp_oracle_damping(const Eigen::MatrixXd& V) {
    require_square(V, "qp_oracle_damping");
    const Eigen::Index t = V.rows();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(t + 1, t + 1);
    kkt.topLeftCorner(t, t) = V;
    kkt.topRightCorner(t, 1).setConstant(-1.0);
    kkt.bottomLeftCorner(1, t).setConstant(1.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(t + 1);
    rhs(t) = 1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) {
        throw SingularKKT("KKT system of the damping problem is numerically singular");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    QpSolution out;
    out.zeta.zeta = sol.head(t);
    out.multiplier = sol(t);
    return out;
}

CovarianceDiagnostics sufficient_statistic_check(const Eigen::MatrixXd& V, double tol,
                                                 const DampingOptions& opts) {
    require_square(V, "sufficient_statistic_check");
    const Eigen::Index t = V.rows();
    CovarianceDiagnostics out;
    out.invertible = covariance_invertible(V, opts, &out.condition_estimate);

    const double corner = V(t - 1, t - 1);
    const double scale = std::max(std::abs(corner), 1e-30);
    out.sufficient_statistic = true;
    for (Eigen::Index i = 0; i < t; ++i) {
        if (std::abs(V(t - 1, i) - corner) > tol * scale ||
            std::abs(V(i, t - 1) - corner) > tol * scale) {
            out.sufficient_statistic = false;
            break;
        }
    }
    return out;
}

}  // namespace ssmamp
