#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace ssmamp {

/// Adaptive Gauss-Kronrod (15 point) integration of f over [a, b]. The
/// interval is first split at every breakpoint strictly inside (a, b), which
/// is how callers point the integrator at narrow features it might otherwise
/// step over.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          std::vector<double> breakpoints = {}, double rel_tol = 1e-12);

/// Composite 10-point Gauss-Legendre over the panels between consecutive
/// cuts (sorted, first and last are the limits). No adaptivity, so the
/// result is a smooth function of any parameter f depends on; nested
/// integrals use this for the inner rule.
double integrate_panels(const std::function<double(double)>& f, const std::vector<double>& cuts);

/// A point where an integrand changes over a length scale `width`.
struct Feature {
    double center;
    double width;
};

/// Panel cuts over [a, b]: a uniform grid of spacing `coarse`, refined
/// geometrically (steps width/2, width, 2 width, ...) around each feature.
std::vector<double> feature_cuts(double a, double b, double coarse,
                                 const std::vector<Feature>& features);

/// Probabilists' Gauss-Hermite rule (weight exp(-x^2/2)), normalised so the
/// weights sum to one: sum_i w_i f(x_i) ~ E f(Z), Z ~ N(0, 1).
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

GaussHermiteRule gauss_hermite(int n);

}  // namespace ssmamp
