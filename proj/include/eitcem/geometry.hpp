#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace eitcem {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Smallest angular half-width accepted by layout validation (radians).
inline constexpr double kMinHalfWidth = 1e-3;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;

    void fail(std::string msg) {
        ok = false;
        violations.push_back(std::move(msg));
    }
    std::string summary() const;
};

/// Electrodes on a circle of radius `radius`, electrode m covering the arc
/// (theta[m] - alpha[m], theta[m] + alpha[m]). Angles are not normalized;
/// overlap checks work modulo 2*pi.
struct DiskElectrodeLayout {
    double radius = 1.0;
    std::vector<double> theta;
    std::vector<double> alpha;

    int count() const { return static_cast<int>(theta.size()); }

    /// Flattened shape vector [theta_1..theta_M, alpha_1..alpha_M].
    Eigen::VectorXd shape_vector() const;
    static DiskElectrodeLayout from_shape_vector(double radius, const Eigen::VectorXd& e);

    /// M identical electrodes, the first centered at angle `offset`.
    static DiskElectrodeLayout equally_spaced(int M, double half_width, double radius = 1.0,
                                              double offset = 0.0);
};

ValidationReport validate_disk_layout(const DiskElectrodeLayout& layout);

/// Electrode end points x^- = r e^{i(theta-alpha)}, x^+ = r e^{i(theta+alpha)} and the
/// exterior unit normals of the arc boundary (tangent to the circle, pointing away from
/// the electrode).
struct EndpointFrame {
    Vec2 minus;
    Vec2 plus;
    Vec2 normal_minus;
    Vec2 normal_plus;
};

EndpointFrame disk_endpoint_frame(const DiskElectrodeLayout& layout, int m);

enum class DiskShapeParam { Theta, Alpha };

/// Values of a . nu at (x^-, x^+) for the boundary velocity a generated by perturbing
/// theta_m or alpha_m. Zero on every other electrode.
std::pair<double, double> disk_boundary_velocity(const DiskElectrodeLayout& layout, int m,
                                                 DiskShapeParam which);

/// Convex polygon (counter-clockwise) with electrodes given as perimeter arc-length
/// intervals measured from vertices[0].
struct PolygonElectrodeLayout {
    std::vector<Vec2> vertices;
    std::vector<std::pair<double, double>> electrodes;

    int count() const { return static_cast<int>(electrodes.size()); }
    double perimeter() const;
    /// Arc length of the start of side `side` (vertex `side` to `side + 1`).
    double side_start(int side) const;
    double side_length(int side) const;
    /// Perimeter coordinate of the point at `offset` along side `side`.
    double arclength_of(int side, double offset) const;
    Vec2 point_at(double s) const;
    /// Outward unit normal of the side containing perimeter coordinate s.
    Vec2 normal_at(double s) const;
    double electrode_width(int m) const { return electrodes[m].second - electrodes[m].first; }
    double electrode_midpoint(int m) const {
        return 0.5 * (electrodes[m].first + electrodes[m].second);
    }

    /// Square [-half, half]^2 (vertices start at (half, -half)) with `per_side` electrodes of
    /// width `width` per side, centered at the given side-relative offsets (side midpoint = 0).
    /// Electrodes are numbered counter-clockwise from the one at (half, offsets[0]).
    static PolygonElectrodeLayout square(double half, double width,
                                         const std::vector<double>& offsets);
};

ValidationReport validate_polygon_layout(const PolygonElectrodeLayout& layout);

/// Ellipse-shaped electrode wrapped without stretching onto the lateral surface of a
/// circular cylinder.
struct CylinderElectrodeParams {
    double radius = 1.0;
    double theta = 0.0;
    double zeta = 0.5;
    double ell = 0.1;  // azimuthal semiaxis (arc length)
    double k = 0.1;    // vertical semiaxis
};

ValidationReport validate_cylinder_params(const CylinderElectrodeParams& p, double height);

Vec3 cylinder_ellipse_point(const CylinderElectrodeParams& p, double xi);

enum class CylinderShapeParam { Theta, Zeta, Ell, K };

/// |gamma'(xi)| (nu . d gamma / d omega) for the boundary curve of the electrode, nu the
/// in-surface exterior normal of the ellipse.
double cylinder_shape_weight(const CylinderElectrodeParams& p, double xi,
                             CylinderShapeParam which);

}  // namespace eitcem
