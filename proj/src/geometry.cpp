#include "eitcem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace eitcem {

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w <= -kPi) w += kTwoPi;
    if (w > kPi) w -= kTwoPi;
    return w;
}

std::string ValidationReport::summary() const {
    if (ok) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i];
    }
    return os.str();
}

Eigen::VectorXd DiskElectrodeLayout::shape_vector() const {
    const int M = count();
    Eigen::VectorXd e(2 * M);
    for (int m = 0; m < M; ++m) {
        e[m] = theta[m];
        e[M + m] = alpha[m];
    }
    return e;
}

DiskElectrodeLayout DiskElectrodeLayout::from_shape_vector(double radius,
                                                           const Eigen::VectorXd& e) {
    if (e.size() % 2 != 0) throw std::invalid_argument("shape vector must have even length");
    const int M = static_cast<int>(e.size() / 2);
    DiskElectrodeLayout out;
    out.radius = radius;
    out.theta.resize(M);
    out.alpha.resize(M);
    for (int m = 0; m < M; ++m) {
        out.theta[m] = e[m];
        out.alpha[m] = e[M + m];
    }
    return out;
}

DiskElectrodeLayout DiskElectrodeLayout::equally_spaced(int M, double half_width, double radius,
                                                        double offset) {
    DiskElectrodeLayout out;
    out.radius = radius;
    for (int m = 0; m < M; ++m) {
        out.theta.push_back(offset + kTwoPi * m / M);
        out.alpha.push_back(half_width);
    }
    return out;
}

ValidationReport validate_disk_layout(const DiskElectrodeLayout& layout) {
    ValidationReport rep;
    const int M = layout.count();
    if (!(layout.radius > 0.0)) rep.fail("radius must be positive");
    if (layout.alpha.size() != layout.theta.size()) {
        rep.fail("theta and alpha lengths differ");
        return rep;
    }
    if (M < 2) rep.fail("need at least 2 electrodes, got " + std::to_string(M));
    double total = 0.0;
    for (int m = 0; m < M; ++m) {
        if (!std::isfinite(layout.theta[m]) || !std::isfinite(layout.alpha[m])) {
            rep.fail("electrode " + std::to_string(m + 1) + ": non-finite angle");
            continue;
        }
        if (layout.alpha[m] <= kMinHalfWidth)
            rep.fail("electrode " + std::to_string(m + 1) + ": half-width below minimum");
        total += 2.0 * layout.alpha[m];
    }
    if (total >= kTwoPi) rep.fail("electrodes cover the whole circle");
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            const double d = std::abs(wrap_angle(layout.theta[i] - layout.theta[j]));
            if (d <= layout.alpha[i] + layout.alpha[j]) {
                rep.fail("overlap between electrodes " + std::to_string(i + 1) + " and " +
                         std::to_string(j + 1));
            }
        }
    }
    return rep;
}

EndpointFrame disk_endpoint_frame(const DiskElectrodeLayout& layout, int m) {
    if (m < 0 || m >= layout.count()) throw std::out_of_range("electrode index out of range");
    const double r = layout.radius;
    const double am = layout.theta[m] - layout.alpha[m];
    const double ap = layout.theta[m] + layout.alpha[m];
    EndpointFrame f;
    f.minus = Vec2(r * std::cos(am), r * std::sin(am));
    f.plus = Vec2(r * std::cos(ap), r * std::sin(ap));
    f.normal_minus = Vec2(std::sin(am), -std::cos(am));
    f.normal_plus = Vec2(-std::sin(ap), std::cos(ap));
    return f;
}

std::pair<double, double> disk_boundary_velocity(const DiskElectrodeLayout& layout, int m,
                                                 DiskShapeParam which) {
    if (m < 0 || m >= layout.count()) throw std::out_of_range("electrode index out of range");
    const double r = layout.radius;
    if (which == DiskShapeParam::Theta) return {-r, r};
    return {r, r};
}

// ---------------------------------------------------------------------------

double PolygonElectrodeLayout::side_length(int side) const {
    const int n = static_cast<int>(vertices.size());
    return (vertices[(side + 1) % n] - vertices[side]).norm();
}

double PolygonElectrodeLayout::side_start(int side) const {
    double s = 0.0;
    for (int i = 0; i < side; ++i) s += side_length(i);
    return s;
}

double PolygonElectrodeLayout::perimeter() const {
    return side_start(static_cast<int>(vertices.size()));
}

double PolygonElectrodeLayout::arclength_of(int side, double offset) const {
    return side_start(side) + offset;
}

Vec2 PolygonElectrodeLayout::point_at(double s) const {
    const int n = static_cast<int>(vertices.size());
    const double P = perimeter();
    s = std::fmod(s, P);
    if (s < 0) s += P;
    for (int i = 0; i < n; ++i) {
        const double L = side_length(i);
        if (s <= L || i == n - 1) {
            const double t = std::clamp(s / L, 0.0, 1.0);
            // Exact vertex coordinates at t = 0, 1 keep points on the sides bit-exactly.
            if (t == 0.0) return vertices[i];
            if (t == 1.0) return vertices[(i + 1) % n];
            return vertices[i] + t * (vertices[(i + 1) % n] - vertices[i]);
        }
        s -= L;
    }
    return vertices[0];
}

Vec2 PolygonElectrodeLayout::normal_at(double s) const {
    const int n = static_cast<int>(vertices.size());
    const double P = perimeter();
    s = std::fmod(s, P);
    if (s < 0) s += P;
    int side = n - 1;
    for (int i = 0; i < n; ++i) {
        const double L = side_length(i);
        if (s < L) {
            side = i;
            break;
        }
        s -= L;
    }
    const Vec2 t = (vertices[(side + 1) % n] - vertices[side]).normalized();
    return Vec2(t.y(), -t.x());
}

PolygonElectrodeLayout PolygonElectrodeLayout::square(double half, double width,
                                                      const std::vector<double>& offsets) {
    PolygonElectrodeLayout out;
    out.vertices = {Vec2(half, -half), Vec2(half, half), Vec2(-half, half), Vec2(-half, -half)};
    const double side = 2.0 * half;
    // Collect centers CCW from the right side; the list is rotated so that electrode 1 is
    // the one at side-relative offset offsets[0] on the right side.
    std::vector<double> sorted = offsets;
    std::sort(sorted.begin(), sorted.end());
    for (int s = 0; s < 4; ++s)
        for (double off : sorted) {
            const double c = s * side + half + off;
            out.electrodes.emplace_back(c - 0.5 * width, c + 0.5 * width);
        }
    if (!offsets.empty()) {
        const auto first = std::find(sorted.begin(), sorted.end(), offsets.front()) - sorted.begin();
        std::rotate(out.electrodes.begin(), out.electrodes.begin() + first, out.electrodes.end());
    }
    return out;
}

ValidationReport validate_polygon_layout(const PolygonElectrodeLayout& layout) {
    ValidationReport rep;
    const int n = static_cast<int>(layout.vertices.size());
    if (n < 3) {
        rep.fail("polygon needs at least 3 vertices");
        return rep;
    }
    for (int i = 0; i < n; ++i) {
        const Vec2 a = layout.vertices[i];
        const Vec2 b = layout.vertices[(i + 1) % n];
        const Vec2 c = layout.vertices[(i + 2) % n];
        const double cross = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
        if (!(cross > 0.0)) rep.fail("polygon not strictly convex counter-clockwise at vertex " +
                                     std::to_string((i + 1) % n + 1));
    }
    const int M = layout.count();
    if (M < 2) rep.fail("need at least 2 electrodes");
    const double P = layout.perimeter();
    std::vector<double> corners;
    for (int i = 0; i <= n; ++i) corners.push_back(layout.side_start(i));
    for (int m = 0; m < M; ++m) {
        const auto [a, b] = layout.electrodes[m];
        const std::string tag = "electrode " + std::to_string(m + 1);
        if (!(b > a)) rep.fail(tag + ": empty interval");
        if (a < 0.0 || b > P) rep.fail(tag + ": outside perimeter range");
        for (double c : corners)
            if (c > a && c < b) rep.fail(tag + ": contains a polygon vertex");
    }
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j) {
            const auto [a1, b1] = layout.electrodes[i];
            const auto [a2, b2] = layout.electrodes[j];
            if (std::max(a1, a2) <= std::min(b1, b2))
                rep.fail("overlap between electrodes " + std::to_string(i + 1) + " and " +
                         std::to_string(j + 1));
        }
    return rep;
}

// ---------------------------------------------------------------------------

ValidationReport validate_cylinder_params(const CylinderElectrodeParams& p, double height) {
    ValidationReport rep;
    if (!(p.radius > 0)) rep.fail("radius must be positive");
    if (!(p.ell > 0)) rep.fail("ell must be positive");
    if (!(p.k > 0)) rep.fail("k must be positive");
    if (!(p.zeta > 0 && p.zeta < height)) rep.fail("zeta outside (0, height)");
    if (!(p.ell < kPi * p.radius)) rep.fail("ell must be below pi * radius");
    return rep;
}

Vec3 cylinder_ellipse_point(const CylinderElectrodeParams& p, double xi) {
    const double phi = p.ell / p.radius * std::cos(xi);
    const double ct = std::cos(p.theta), st = std::sin(p.theta);
    const Vec3 tangential(-st, ct, 0.0);
    const Vec3 radial(ct, st, 0.0);
    return p.radius * std::sin(phi) * tangential + p.radius * std::cos(phi) * radial +
           Vec3(0.0, 0.0, p.k * std::sin(xi) + p.zeta);
}

double cylinder_shape_weight(const CylinderElectrodeParams& p, double xi,
                             CylinderShapeParam which) {
    switch (which) {
        case CylinderShapeParam::Theta: return p.radius * p.k * std::cos(xi);
        case CylinderShapeParam::Zeta: return p.ell * std::sin(xi);
        case CylinderShapeParam::Ell: return p.k * std::cos(xi) * std::cos(xi);
        case CylinderShapeParam::K: return p.ell * std::sin(xi) * std::sin(xi);
    }
    return 0.0;
}

}  // namespace eitcem
