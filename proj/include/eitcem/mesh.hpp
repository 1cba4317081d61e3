#pragma once

#include "eitcem/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eitcem {

/// Boundary edge label for the gaps between electrodes.
inline constexpr int kGap = -1;

struct BoundaryEdge {
    int a = 0;  // counter-clockwise: a -> b
    int b = 0;
    int label = kGap;  // electrode index (0-based) or kGap
};

/// Conforming triangulation with a labeled boundary loop. Electrode indices are 0-based
/// in memory and 1-based in every user-facing output.
struct TriMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary;
    int electrode_count = 0;
    /// Node ids of (x^-, x^+): start and end of each electrode's counter-clockwise chain.
    std::vector<std::pair<int, int>> electrode_endpoints;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }

    double signed_area(int t) const;
    double total_area() const;
    double electrode_length(int m) const;
    /// Boundary edges labeled with electrode m, in counter-clockwise order.
    std::vector<BoundaryEdge> electrode_edges(int m) const;
    double h_max() const;
    double min_angle_degrees() const;
};

/// Structural checks on a mesh: positive areas, closed conforming boundary loop,
/// contiguous electrode chains with end points at mesh nodes. When `expected_lengths`
/// is given, each electrode chain length must match within `length_tolerance` (relative).
ValidationReport check_mesh(const TriMesh& mesh,
                            const std::vector<double>* expected_lengths = nullptr,
                            double length_tolerance = 0.01);

struct RefinementSpec {
    double target_edge_length = 0.1;
    /// Local edge length at electrode end points, relative to target_edge_length.
    double electrode_edge_factor = 0.5;

    RefinementSpec refined(double factor = 2.0) const {
        return {target_edge_length / factor, electrode_edge_factor};
    }
};

/// Thrown when a refinement spec cannot resolve the electrodes.
struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Disk of radius layout.radius. Electrode end points are forced nodes and every boundary
/// node lies on the circle.
TriMesh build_disk_mesh(const DiskElectrodeLayout& layout, const RefinementSpec& spec);

/// Convex polygon; boundary nodes lie exactly on the polygon sides.
TriMesh build_polygon_mesh(const PolygonElectrodeLayout& layout, const RefinementSpec& spec);

/// Barycentric P1 evaluation of `src` nodal fields at arbitrary points; points outside
/// the mesh take the value at the nearest point of the mesh boundary.
class P1Locator {
public:
    explicit P1Locator(const TriMesh& mesh);

    struct Hit {
        std::array<int, 3> nodes{};
        std::array<double, 3> weights{};
        bool inside = false;
    };
    Hit locate(const Vec2& p) const;
    double evaluate(const Eigen::VectorXd& values, const Vec2& p) const;

private:
    const TriMesh* mesh_;
    Vec2 lo_, hi_;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
    int bucket_of(double x, double y, int& ix, int& iy) const;
};

/// Sparse (points x src nodes) matrix realizing P1 interpolation at `points`.
Eigen::SparseMatrix<double> p1_interpolation_matrix(const TriMesh& src,
                                                    const std::vector<Vec2>& points);

Eigen::VectorXd p1_interpolate(const TriMesh& src, const Eigen::VectorXd& values,
                               const TriMesh& dst);

/// Consistent P1 mass matrix.
Eigen::SparseMatrix<double> p1_mass_matrix(const TriMesh& mesh);
/// L2 norm of a nodal P1 field.
double p1_l2_norm(const TriMesh& mesh, const Eigen::VectorXd& values);

using NamedField = std::pair<std::string, Eigen::VectorXd>;

/// Legacy ASCII VTK unstructured grid: triangles, plus electrode edges as line cells
/// (with an `electrode` cell scalar, 1-based, 0 for triangles) when the mesh has any.
std::string export_vtk(const TriMesh& mesh, const std::vector<NamedField>& fields,
                       const std::string& title = "eitcem");
void write_vtk_file(const std::string& path, const TriMesh& mesh,
                    const std::vector<NamedField>& fields, const std::string& title = "eitcem");

struct VtkData {
    TriMesh mesh;
    std::vector<NamedField> fields;
    std::string title;
};

/// Reads files produced by export_vtk.
VtkData parse_vtk(const std::string& text);
VtkData read_vtk_file(const std::string& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace eitcem
