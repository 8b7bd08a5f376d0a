#include <doctest.h>

#include "ssmamp/errors.hpp"
#include "ssmamp/lbanded.hpp"

using namespace ssmamp;

TEST_SUITE("lbanded_algebra") {

TEST_CASE("expand follows the max-index pattern") {
    CHECK(LBandedMatrix(Eigen::VectorXd::Constant(1, 4.0)).expand()(0, 0) == 4.0);

    Eigen::Matrix2d two;
    two << 2, 1, 1, 1;
    CHECK(LBandedMatrix(Eigen::Vector2d(2, 1)).expand() == two);

    Eigen::Matrix3d three;
    three << 3, 2, 1, 2, 2, 1, 1, 1, 1;
    CHECK(LBandedMatrix(Eigen::Vector3d(3, 2, 1)).expand() == three);
}

TEST_CASE("tridiagonal inverse of small cases") {
    const TridiagonalMatrix inv2 = lbanded_inverse(LBandedMatrix(Eigen::Vector2d(2, 1)));
    CHECK(inv2.main == Eigen::Vector2d(1, 2));
    CHECK(inv2.off(0) == -1.0);

    const TridiagonalMatrix inv3 = lbanded_inverse(LBandedMatrix(Eigen::Vector3d(3, 2, 1)));
    CHECK(inv3.main == Eigen::Vector3d(1, 2, 2));
    CHECK(inv3.off == Eigen::Vector2d(-1, -1));
    // matches a dense inversion of the expanded matrix
    const Eigen::MatrixXd dense = LBandedMatrix(Eigen::Vector3d(3, 2, 1)).expand().inverse();
    CHECK((inv3.dense() - dense).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("repeated or zero entries are singular") {
    CHECK_THROWS_AS(lbanded_inverse(LBandedMatrix(Eigen::Vector2d(1, 1))), SingularLBanded);
    CHECK_THROWS_AS(lbanded_inverse(LBandedMatrix(Eigen::Vector2d(1, 0))), SingularLBanded);
    CHECK_FALSE(LBandedMatrix(Eigen::Vector3d(3, 2, 3)).is_invertible());
    CHECK(LBandedMatrix(Eigen::Vector3d(3, 1, 2)).is_invertible());
}

TEST_CASE("inverse outside the band is exactly zero") {
    Eigen::VectorXd d(6);
    d << 5.0, 3.5, 2.25, 1.0, 0.4, 0.01;
    const Eigen::MatrixXd T = lbanded_inverse(LBandedMatrix(d)).dense();
    for (Eigen::Index i = 0; i < 6; ++i) {
        for (Eigen::Index j = 0; j < 6; ++j) {
            if (std::abs(i - j) > 1) CHECK(T(i, j) == 0.0);
        }
    }
    CHECK(T.isApprox(T.transpose()));
    CHECK((LBandedMatrix(d).expand() * T - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadratic sums collapse onto the last entry") {
    const QuadraticSums q2 = lbanded_quadratic_sums(LBandedMatrix(Eigen::Vector2d(2, 1)));
    CHECK(q2.row_sums == Eigen::Vector2d(0, 1));
    CHECK(q2.total == 1.0);

    const QuadraticSums q3 = lbanded_quadratic_sums(LBandedMatrix(Eigen::Vector3d(3, 2, 1)));
    CHECK(q3.row_sums == Eigen::Vector3d(0, 0, 1));
    CHECK(q3.total == 1.0);

    const QuadraticSums q1 = lbanded_quadratic_sums(LBandedMatrix(Eigen::VectorXd::Constant(1, 4.0)));
    CHECK(q1.total == doctest::Approx(0.25));

    Eigen::VectorXd d(4);
    d << 9.0, 9.0 - 1e-7, 0.5, 0.125;
    CHECK(lbanded_quadratic_sums(LBandedMatrix(d)).total * 0.125 == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("is_lbanded reports the largest relative deviation") {
    Eigen::Matrix2d a;
    a << 2, 1, 1, 1;
    LBandedCheck c = is_lbanded(a, 1e-12);
    CHECK(c.flag);
    CHECK(c.max_deviation == 0.0);

    a << 2, 0.9, 0.9, 1;
    c = is_lbanded(a, 1e-3);
    CHECK_FALSE(c.flag);
    CHECK(c.max_deviation == doctest::Approx(0.1));

    c = is_lbanded(Eigen::Matrix3d::Identity(), 1e-12);
    CHECK_FALSE(c.flag);
    CHECK(c.max_deviation == 1.0);

    CHECK_THROWS_AS(is_lbanded(Eigen::MatrixXd::Zero(2, 3), 0.0), DimensionMismatch);
}

TEST_CASE("covariance constructor validates the diagonal") {
    CHECK_NOTHROW(LBandedMatrix::covariance(Eigen::Vector3d(3, 2, 2)));
    CHECK_THROWS_AS(LBandedMatrix::covariance(Eigen::Vector3d(1, 2, 3)), InvalidCovariance);
    CHECK_THROWS_AS(LBandedMatrix::covariance(Eigen::Vector2d(1, 0)), InvalidCovariance);
}

}
