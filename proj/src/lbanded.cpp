#include "ssmamp/lbanded.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssmamp/errors.hpp"

namespace ssmamp {

Eigen::MatrixXd TridiagonalMatrix::dense() const {
    const Eigen::Index t = main.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t, t);
    for (Eigen::Index i = 0; i < t; ++i) {
        out(i, i) = main(i);
        if (i + 1 < t) {
            out(i, i + 1) = off(i);
            out(i + 1, i) = off(i);
        }
    }
    return out;
}

Eigen::VectorXd TridiagonalMatrix::row_sums() const {
    const Eigen::Index t = main.size();
    Eigen::VectorXd sums = main;
    for (Eigen::Index i = 0; i + 1 < t; ++i) {
        sums(i) += off(i);
        sums(i + 1) += off(i);
    }
    return sums;
}

LBandedMatrix::LBandedMatrix(Eigen::VectorXd diag) : diag_(std::move(diag)) {
    if (diag_.size() == 0) {
        throw DimensionMismatch("L-banded matrix needs at least one diagonal entry");
    }
}

LBandedMatrix LBandedMatrix::covariance(Eigen::VectorXd diag) {
    LBandedMatrix m(std::move(diag));
    if (!m.is_valid_covariance()) {
        throw InvalidCovariance("L-banded covariance diagonal must be positive and nonincreasing");
    }
    return m;
}

Eigen::MatrixXd LBandedMatrix::expand() const {
    const Eigen::Index t = diag_.size();
    Eigen::MatrixXd out(t, t);
    for (Eigen::Index j = 0; j < t; ++j) {
        for (Eigen::Index i = 0; i < t; ++i) {
            out(i, j) = diag_(std::max(i, j));
        }
    }
    return out;
}

bool LBandedMatrix::is_invertible(double rel_gap) const {
    const double scale = diag_.cwiseAbs().maxCoeff();
    const double threshold = rel_gap * scale;
    if (!(scale > 0.0) || std::abs(diag_(diag_.size() - 1)) <= threshold) {
        return false;
    }
    std::vector<double> sorted(diag_.data(), diag_.data() + diag_.size());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i] - sorted[i - 1] <= threshold) return false;
    }
    return true;
}

bool LBandedMatrix::is_valid_covariance() const {
    for (Eigen::Index i = 0; i < diag_.size(); ++i) {
        if (!(diag_(i) > 0.0)) return false;
        if (i > 0 && diag_(i) > diag_(i - 1)) return false;
    }
    return true;
}

TridiagonalMatrix lbanded_inverse(const LBandedMatrix& m, double rel_gap) {
    if (!m.is_invertible(rel_gap)) {
        throw SingularLBanded("diagonal entries are not pairwise distinct (or the last one is zero)");
    }
    const Eigen::VectorXd& v = m.diag();
    const Eigen::Index t = v.size();

    // inv_gap(i) = 1 / (v_i - v_{i+1}) with v_{t+1} = 0; the gap before v_1 is infinite.
    Eigen::VectorXd inv_gap(t);
    for (Eigen::Index i = 0; i < t; ++i) {
        const double next = (i + 1 < t) ? v(i + 1) : 0.0;
        inv_gap(i) = 1.0 / (v(i) - next);
    }

    TridiagonalMatrix inv;
    inv.main.resize(t);
    inv.off.resize(std::max<Eigen::Index>(t - 1, 0));
    for (Eigen::Index i = 0; i < t; ++i) {
        const double before = (i == 0) ? 0.0 : inv_gap(i - 1);
        inv.main(i) = before + inv_gap(i);
        if (i + 1 < t) inv.off(i) = -inv_gap(i);
    }
    return inv;
}

QuadraticSums lbanded_quadratic_sums(const LBandedMatrix& m, double rel_gap) {
    if (!m.is_invertible(rel_gap)) {
        throw SingularLBanded("diagonal entries are not pairwise distinct (or the last one is zero)");
    }
    // Same entries as lbanded_inverse, summed in extended precision: the row
    // sums cancel to zero except in the last row, and in double the rounding
    // of the diagonal entries (order 1 / smallest gap) would dominate.
    const Eigen::VectorXd& v = m.diag();
    const Eigen::Index t = v.size();
    std::vector<long double> inv_gap(static_cast<std::size_t>(t));
    for (Eigen::Index i = 0; i < t; ++i) {
        const long double next = (i + 1 < t) ? v(i + 1) : 0.0L;
        inv_gap[static_cast<std::size_t>(i)] = 1.0L / (static_cast<long double>(v(i)) - next);
    }
    QuadraticSums out;
    out.row_sums.resize(t);
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const long double before = i == 0 ? 0.0L : inv_gap[k - 1];
        long double row = before + inv_gap[k];
        if (i > 0) row -= inv_gap[k - 1];
        if (i + 1 < t) row -= inv_gap[k];
        out.row_sums(i) = static_cast<double>(row);
        total += row;
    }
    out.total = static_cast<double>(total);
    return out;
}

LBandedCheck is_lbanded(const Eigen::MatrixXd& V, double tol, double eps_floor) {
    if (V.rows() != V.cols()) {
        throw DimensionMismatch("is_lbanded expects a square matrix");
    }
    LBandedCheck out;
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        for (Eigen::Index i = 0; i < V.rows(); ++i) {
            const Eigen::Index k = std::max(i, j);
            const double band = V(k, k);
            const double dev = std::abs(V(i, j) - band) / std::max(std::abs(band), eps_floor);
            out.max_deviation = std::max(out.max_deviation, dev);
        }
    }
    out.flag = out.max_deviation <= tol;
    return out;
}

}  // namespace ssmamp
