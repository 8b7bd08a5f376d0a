#include "ssmamp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ssmamp/errors.hpp"

namespace ssmamp {

namespace {

using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

struct Panel {
    double value;
    double error;
    double l1;
};

Panel panel(const std::function<double(double)>& f, double a, double b) {
    Panel p{};
    p.value = Rule::integrate(f, a, b, 0, 0.0, &p.error, &p.l1);
    return p;
}

// Bisects until the Kronrod error estimate is below abs_tol. The tolerance
// is absolute so integrands that cancel to ~0 do not force full depth.
double refine(const std::function<double(double)>& f, double a, double b, const Panel& p,
              double abs_tol, int depth) {
    if (depth == 0 || p.error <= abs_tol) return p.value;
    const double mid = 0.5 * (a + b);
    const Panel left = panel(f, a, mid);
    const Panel right = panel(f, mid, b);
    return refine(f, a, mid, left, 0.5 * abs_tol, depth - 1) +
           refine(f, mid, b, right, 0.5 * abs_tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          std::vector<double> breakpoints, double rel_tol) {
    if (!(a < b)) return 0.0;
    std::vector<double> cuts{a};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double p : breakpoints) {
        if (p > a && p < b && p > cuts.back()) cuts.push_back(p);
    }
    cuts.push_back(b);

    std::vector<Panel> panels;
    double l1 = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        panels.push_back(panel(f, cuts[i], cuts[i + 1]));
        l1 += panels.back().l1;
    }
    const double abs_tol = std::max(rel_tol * l1, std::numeric_limits<double>::min());
    const double share = abs_tol / static_cast<double>(panels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
        total += refine(f, cuts[i], cuts[i + 1], panels[i], share, 18);
    }
    return total;
}

double integrate_panels(const std::function<double(double)>& f, const std::vector<double>& cuts) {
    using Fixed = boost::math::quadrature::gauss<double, 10>;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] > cuts[i]) total += Fixed::integrate(f, cuts[i], cuts[i + 1]);
    }
    return total;
}

std::vector<double> feature_cuts(double a, double b, double coarse,
                                 const std::vector<Feature>& features) {
    std::vector<double> cuts;
    if (!(a < b)) return cuts;
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / coarse)));
    for (int i = 0; i <= n; ++i) cuts.push_back(a + (b - a) * i / n);
    for (const Feature& ft : features) {
        if (!(ft.width > 0.0) || !std::isfinite(ft.center)) continue;
        if (ft.center > a && ft.center < b) cuts.push_back(ft.center);
        for (double step = 0.5 * ft.width; step < coarse; step *= 2.0) {
            for (double p : {ft.center - step, ft.center + step}) {
                if (p > a && p < b) cuts.push_back(p);
            }
        }
    }
    std::sort(cuts.begin(), cuts.end());
    const double min_gap = 1e-12 * (b - a);
    std::vector<double> out{cuts.front()};
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (cuts[i] - out.back() > min_gap) out.push_back(cuts[i]);
    }
    out.back() = b;
    return out;
}

GaussHermiteRule gauss_hermite(int n) {
    if (n < 1) throw InvalidSpec("Gauss-Hermite rule needs at least one node");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    GaussHermiteRule rule;
    rule.nodes = eig.eigenvalues();
    rule.weights = eig.eigenvectors().row(0).transpose().array().square();
    rule.weights /= rule.weights.sum();
    return rule;
}

}  // namespace ssmamp
