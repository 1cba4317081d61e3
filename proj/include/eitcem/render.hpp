#pragma once

#include "eitcem/mesh.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace eitcem {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

struct Image {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, top row first

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
};

bool known_colormap(const std::string& name);
/// t in [0, 1] (clamped). Throws std::invalid_argument for unknown names.
Rgb colormap(const std::string& name, double t);

struct RenderOptions {
    int size = 800;
    std::string colormap = "viridis";
    std::optional<std::pair<double, double>> range;  // nullopt = data min..max
    Rgb background{255, 255, 255};
    Rgb electrode{255, 0, 0};
    double electrode_width = 3.0;  // pixels
};

/// Maps domain coordinates to pixel centers: the mesh bounding box plus a 3% margin is
/// scaled uniformly into the square image, y pointing up.
struct Viewport {
    double x0 = 0, y0 = 0, scale = 1;
    int size = 0;
    static Viewport fit(const TriMesh& mesh, int size);
    /// Continuous pixel coordinates (column, row) of a domain point.
    Vec2 to_pixel(const Vec2& x) const;
    Vec2 to_domain(double col, double row) const;
};

/// Rasterizes the P1 field with barycentric interpolation at pixel centers, then strokes
/// the electrode boundary edges.
Image render_field(const TriMesh& mesh, const Eigen::VectorXd& values,
                   const RenderOptions& options = {});

/// Heat map of a matrix (rows top to bottom), e.g. the voltages of a dataset.
Image render_matrix(const Eigen::MatrixXd& values, const RenderOptions& options = {});

/// 8-bit RGB PNG; `text` becomes tEXt chunks.
std::string encode_png(const Image& image,
                       const std::vector<std::pair<std::string, std::string>>& text = {});
void write_png(const std::string& path, const Image& image,
               const std::vector<std::pair<std::string, std::string>>& text = {});

}  // namespace eitcem
