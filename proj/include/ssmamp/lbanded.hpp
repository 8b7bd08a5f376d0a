#pragma once

#include <Eigen/Dense>

namespace ssmamp {

/// Relative gap below which two diagonal entries count as equal.
inline constexpr double kDefaultDistinctGap = 1e-12;

/// Symmetric tridiagonal matrix stored as its main diagonal (t values) and
/// its off-diagonal (t-1 values, shared by the upper and lower band).
struct TridiagonalMatrix {
    Eigen::VectorXd main;
    Eigen::VectorXd off;

    Eigen::Index size() const { return main.size(); }
    Eigen::MatrixXd dense() const;
    /// Row sums, i.e. T * 1.
    Eigen::VectorXd row_sums() const;
};

/// A t x t matrix whose entry (i, j) equals diag[max(i, j)]:
///
///     v1 v2 v3 ... vt
///     v2 v2 v3 ... vt
///     v3 v3 v3 ... vt
///     ...
///     vt vt vt ... vt
///
/// Any real diagonal is accepted. Use covariance() when the diagonal must also
/// be a valid covariance diagonal (positive and nonincreasing).
class LBandedMatrix {
public:
    explicit LBandedMatrix(Eigen::VectorXd diag);

    /// Validating constructor for L-banded covariances; throws
    /// InvalidCovariance unless diag is positive and nonincreasing.
    static LBandedMatrix covariance(Eigen::VectorXd diag);

    Eigen::Index size() const { return diag_.size(); }
    const Eigen::VectorXd& diag() const { return diag_; }

    Eigen::MatrixXd expand() const;

    /// True when all entries are pairwise distinct and the last one is
    /// nonzero, with "distinct" meaning a gap above rel_gap * max|diag|.
    bool is_invertible(double rel_gap = kDefaultDistinctGap) const;

    /// Positive and nonincreasing diagonal.
    bool is_valid_covariance() const;

private:
    Eigen::VectorXd diag_;
};

/// Closed-form tridiagonal inverse. Throws SingularLBanded when
/// is_invertible(rel_gap) is false.
TridiagonalMatrix lbanded_inverse(const LBandedMatrix& m,
                                  double rel_gap = kDefaultDistinctGap);

struct QuadraticSums {
    Eigen::VectorXd row_sums;  // 1^T V^{-1}
    double total = 0.0;        // 1^T V^{-1} 1
};

/// 1^T V^{-1} and 1^T V^{-1} 1 for an invertible L-banded V. Both come from
/// summing the explicit tridiagonal inverse (in extended precision), so they
/// can be compared with the closed form (0, ..., 0, 1/v_t) in tests.
QuadraticSums lbanded_quadratic_sums(const LBandedMatrix& m,
                                     double rel_gap = kDefaultDistinctGap);

struct LBandedCheck {
    bool flag = false;
    double max_deviation = 0.0;
};

/// Largest relative deviation of V from the L-banded pattern built from its
/// own diagonal; flag is true when it does not exceed tol.
LBandedCheck is_lbanded(const Eigen::MatrixXd& V, double tol, double eps_floor = 1e-30);

}  // namespace ssmamp
