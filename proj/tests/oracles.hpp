#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include "eitcem/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace oracle {

/// |gamma'(xi)| (nu . d gamma / d omega) from fourth-order central differences in 3-D.
/// With N the outward cylinder normal, (gamma' x N) = |gamma'| nu for the in-surface
/// exterior normal nu of a counter-clockwise (arc length, height) parametrization.
inline double cylinder_weight(eitcem::CylinderElectrodeParams p, double xi,
                              eitcem::CylinderShapeParam which, double h = 1e-3) {
    using eitcem::cylinder_ellipse_point;
    using eitcem::Vec3;
    auto diff = [h](auto&& f) -> Vec3 {
        return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
    };
    auto member = [&](eitcem::CylinderElectrodeParams& q) -> double& {
        switch (which) {
            case eitcem::CylinderShapeParam::Theta: return q.theta;
            case eitcem::CylinderShapeParam::Zeta: return q.zeta;
            case eitcem::CylinderShapeParam::Ell: return q.ell;
            default: return q.k;
        }
    };
    const Vec3 x = cylinder_ellipse_point(p, xi);
    const Vec3 n = Vec3(x.x(), x.y(), 0.0).normalized();
    const Vec3 t = diff([&](double s) { return cylinder_ellipse_point(p, xi + s); });
    const Vec3 d = diff([&](double s) {
        eitcem::CylinderElectrodeParams q = p;
        member(q) += s;
        return cylinder_ellipse_point(q, xi);
    });
    return t.cross(n).dot(d);
}

/// min over a uniform grid of c in [min V, max V] of |V - c 1|.
inline double quotient_norm_grid(const Eigen::VectorXd& v, int samples = 10001) {
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    double best = (v.array() - lo).matrix().norm();
    for (int i = 0; i < samples; ++i) {
        const double c = lo + (hi - lo) * i / (samples - 1);
        best = std::min(best, (v.array() - c).matrix().norm());
    }
    return best;
}

/// Golden-section refinement of the grid minimum; reaches machine precision for the
/// convex function c -> |V - c 1|.
inline double quotient_norm_search(const Eigen::VectorXd& v) {
    double a = v.minCoeff(), b = v.maxCoeff();
    const double g = (std::sqrt(5.0) - 1) / 2;
    auto f = [&](double c) { return (v.array() - c).matrix().squaredNorm(); };
    for (int i = 0; i < 200 && b - a > 0; ++i) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) < f(d)) b = d; else a = c;
    }
    return std::sqrt(f(0.5 * (a + b)));
}

/// log Gamma by the Stirling series after shifting the argument above 20.
inline double log_gamma(double x) {
    double shift = 0.0;
    while (x < 20.0) {
        shift -= std::log(x);
        x += 1.0;
    }
    const double x2 = x * x;
    const double series = 1.0 / (12 * x) - 1.0 / (360 * x * x2) + 1.0 / (1260 * x2 * x2 * x) -
                          1.0 / (1680 * x2 * x2 * x2 * x) + 1.0 / (1188 * x2 * x2 * x2 * x2 * x);
    return shift + (x - 0.5) * std::log(x) - x + 0.5 * std::log(2 * M_PI) + series;
}

/// c = B(1/4, 1/2) / 4.
inline double sc_constant_beta() {
    return 0.25 * std::exp(log_gamma(0.25) + log_gamma(0.5) - log_gamma(0.75));
}

}  // namespace oracle
