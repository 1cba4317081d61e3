#pragma once

#include "eitcem/cem.hpp"

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace eitcem {

struct ConformalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// c = int_0^1 (1 - t^4)^{-1/2} dt by adaptive Gauss-Kronrod quadrature.
double complete_integral_c();

/// Conformal pair between the unit disk and the square [-1,1]^2 that fixes the coordinate
/// axes: Psi(w) = (sqrt(2)/c) int_0^w (1 + s^4)^{-1/2} ds maps the disk onto the square with
/// corners at the images of exp(i pi/4 + i k pi/2), and Phi = Psi^{-1}.
class ConformalSquareDiskMap {
public:
    using Complex = std::complex<double>;

    ConformalSquareDiskMap();

    double c() const { return c_; }

    /// Disk to square. Throws for |w| > 1 + 1e-12.
    Complex psi(Complex w) const;
    Vec2 psi(const Vec2& w) const;
    /// Psi'(w).
    Complex dpsi(Complex w) const;

    /// Square to disk. Boundary points are solved on the circle directly.
    Complex phi(Complex x) const;
    Vec2 phi(const Vec2& x) const;
    /// |Phi'(x)| = 1 / |Psi'(Phi(x))|; zero at the corners.
    double dphi_abs(const Vec2& x) const;

private:
    double c_;
    double scale_;  // sqrt(2) / c
    std::vector<Complex> seed_w_, seed_x_;

    Complex phi_boundary(Complex x) const;
};

/// Shared instance; construction costs a few milliseconds.
const ConformalSquareDiskMap& square_disk_map();

Vec2 map_disk_to_square(const Vec2& w);

struct SquareImage {
    Vec2 w;
    double dphi = 0.0;  // |Phi'(x)|
    bool on_boundary = false;
};
SquareImage map_square_to_disk(const Vec2& x);

/// Disk model transported from a polygonal (square) target.
struct PushforwardModel {
    DiskElectrodeLayout layout;       // Phi(E_m)
    Eigen::VectorXd z;                // |Phi'(y_m)| z_m
    std::vector<Vec2> centers;        // y_m on the square
    Eigen::VectorXd dphi;             // |Phi'(y_m)|
    std::function<double(const Vec2&)> sigma;  // sigma o Psi on the disk
};

PushforwardModel pushforward_model(const PolygonElectrodeLayout& square,
                                   std::function<double(const Vec2&)> sigma,
                                   const Eigen::VectorXd& z);

/// Relative L2 error on the square of a disk reconstruction pulled back through Psi:
/// |sigma_disk o Phi - truth| / |truth|, with sigma_disk evaluated by P1 interpolation at
/// Phi of the square mesh nodes.
double pullback_relative_error(const TriMesh& square_mesh, const Eigen::VectorXd& truth,
                               const TriMesh& disk_mesh, const Eigen::VectorXd& sigma_disk);

/// Electrodes shrunk about their arc-length midpoints to h times their width.
PolygonElectrodeLayout shrink_electrodes(const PolygonElectrodeLayout& layout, double h);
DiskElectrodeLayout shrink_electrodes(const DiskElectrodeLayout& layout, double h);

struct SweepRow {
    double h = 0.0;
    Eigen::VectorXd error_per_pattern;  // quotient norm of U^h - U~^h
    double error_max = 0.0;
    double slope_so_far = 0.0;          // NaN for the first row
    int square_nodes = 0, disk_nodes = 0;
};

struct SweepOptions {
    RefinementSpec mesh_spec{0.1, 0.5};
    /// Largest electrode edge relative to the electrode width; sets electrode refinement
    /// as the electrodes shrink.
    double electrode_resolution = 0.125;
    /// Discretization check: the error at the smallest h is recomputed on meshes refined
    /// by 2; the relative change must stay below this ratio.
    double discretization_ratio = 0.1;
    int max_refinements = 3;
    /// Compare the disk model with itself (Phi = id); errors sit at the solver floor.
    bool identity = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double slope = 0.0;               // NaN with fewer than two rows
    double discretization_ratio = 0.0;
    bool discretization_ok = false;
    std::string notice;
};

/// For each h, solves the square problem with (sigma, z) and the
/// disk problem with the push-forward (sigma o Psi, |Phi'(y_m)| z, Phi(E^h)), and records the
/// quotient-norm discrepancy per current pattern.
SweepResult h_sweep(const PolygonElectrodeLayout& square, std::function<double(const Vec2&)> sigma,
                    const Eigen::VectorXd& z, const CurrentBasis& basis,
                    const std::vector<double>& h_list, const SweepOptions& options = {});

std::string sweep_csv(const SweepResult& result);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace eitcem
