#pragma once

// Incremental Delaunay triangulation of a convex region bounded by a fixed polygon.
// The boundary polygon is triangulated first; interior points are then inserted with a
// Bowyer-Watson cavity that never crosses the boundary.

#include "eitcem/geometry.hpp"

#include <array>
#include <functional>
#include <vector>

namespace eitcem::detail {

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c);
/// > 0 when d lies inside the circumcircle of the counter-clockwise triangle abc.
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);
Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c);

class Triangulator {
public:
    struct Tri {
        std::array<int, 3> v{};
        std::array<int, 3> n{-1, -1, -1};  // n[i] is across the edge opposite v[i]
        bool alive = true;
    };

    /// `boundary` is a counter-clockwise convex polygon; its vertices become points 0..n-1
    /// and `hub`, an interior point, becomes point n.
    Triangulator(const std::vector<Vec2>& boundary, const Vec2& hub);

    /// Inserts an interior point. Returns false (and leaves the triangulation unchanged)
    /// when the point lies outside or would produce a degenerate cavity.
    bool insert(const Vec2& p, std::vector<int>* created = nullptr);

    /// Delaunay refinement: splits triangles whose circumradius exceeds `size(x)` times a
    /// constant or whose radius-edge ratio is poor. Candidates closer than
    /// `boundary_margin(x)` to the boundary are skipped.
    void refine(const std::function<double(const Vec2&)>& size,
                const std::function<double(const Vec2&)>& distance_to_boundary,
                std::size_t max_points);

    const std::vector<Vec2>& points() const { return pts_; }
    std::vector<std::array<int, 3>> triangles() const;

private:
    std::vector<Vec2> pts_;
    std::vector<Tri> tris_;
    std::vector<int> mark_;
    int stamp_ = 0;
    int hint_ = 0;

    int locate(const Vec2& p) const;
    void relink(int tri, int old_nbr, int new_nbr);
    void lawson_flip_all();
    bool try_flip(int t, int i);
};

}  // namespace eitcem::detail
