#include "eitcem/mesh.hpp"

#include "delaunay.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace eitcem {

// ---------------------------------------------------------------------------
// TriMesh helpers

double TriMesh::signed_area(int t) const {
    const auto& tr = triangles[t];
    return 0.5 * detail::orient2d(nodes[tr[0]], nodes[tr[1]], nodes[tr[2]]);
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (int t = 0; t < triangle_count(); ++t) a += signed_area(t);
    return a;
}

std::vector<BoundaryEdge> TriMesh::electrode_edges(int m) const {
    std::vector<BoundaryEdge> out;
    if (m < 0 || m >= electrode_count) return out;
    // Start from the edge leaving x^- and follow the loop.
    const int n = static_cast<int>(boundary.size());
    int start = -1;
    for (int i = 0; i < n; ++i)
        if (boundary[i].label == m && boundary[i].a == electrode_endpoints[m].first) start = i;
    if (start < 0) return out;
    for (int k = 0; k < n; ++k) {
        const auto& e = boundary[(start + k) % n];
        if (e.label != m) break;
        out.push_back(e);
    }
    return out;
}

double TriMesh::electrode_length(int m) const {
    double len = 0.0;
    for (const auto& e : electrode_edges(m)) len += (nodes[e.b] - nodes[e.a]).norm();
    return len;
}

double TriMesh::h_max() const {
    double h = 0.0;
    for (const auto& t : triangles)
        for (int i = 0; i < 3; ++i) h = std::max(h, (nodes[t[i]] - nodes[t[(i + 1) % 3]]).norm());
    return h;
}

double TriMesh::min_angle_degrees() const {
    double best = 180.0;
    for (const auto& t : triangles)
        for (int i = 0; i < 3; ++i) {
            const Vec2 u = nodes[t[(i + 1) % 3]] - nodes[t[i]];
            const Vec2 v = nodes[t[(i + 2) % 3]] - nodes[t[i]];
            const double ang = std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
            best = std::min(best, ang * 180.0 / kPi);
        }
    return best;
}

ValidationReport check_mesh(const TriMesh& mesh, const std::vector<double>* expected_lengths,
                            double length_tolerance) {
    ValidationReport rep;
    const int nn = mesh.node_count();
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        for (int v : mesh.triangles[t])
            if (v < 0 || v >= nn) {
                rep.fail("triangle " + std::to_string(t) + " has invalid node index");
                return rep;
            }
        if (!(mesh.signed_area(t) > 0.0))
            rep.fail("triangle " + std::to_string(t) + " has non-positive area");
    }

    // Directed edge counts: interior edges appear once in each direction, boundary edges
    // exactly once.
    std::map<std::pair<int, int>, int> directed;
    for (const auto& t : mesh.triangles)
        for (int i = 0; i < 3; ++i) ++directed[{t[i], t[(i + 1) % 3]}];
    std::size_t free_edges = 0;
    for (const auto& [e, c] : directed) {
        if (c > 1) rep.fail("edge used twice with the same orientation");
        if (!directed.count({e.second, e.first})) ++free_edges;
    }
    const int nb = static_cast<int>(mesh.boundary.size());
    if (free_edges != mesh.boundary.size())
        rep.fail("boundary edge list does not match the triangulation (" +
                 std::to_string(free_edges) + " free edges vs " + std::to_string(nb) + ")");
    for (int i = 0; i < nb; ++i) {
        const auto& e = mesh.boundary[i];
        if (!directed.count({e.a, e.b}) || directed.count({e.b, e.a}))
            rep.fail("boundary edge " + std::to_string(i) + " is not a free triangle edge");
        if (mesh.boundary[(i + 1) % nb].a != e.b) rep.fail("boundary loop is not closed");
    }

    for (int m = 0; m < mesh.electrode_count; ++m) {
        const std::string tag = "electrode " + std::to_string(m + 1);
        int count = 0, runs = 0;
        for (int i = 0; i < nb; ++i) {
            if (mesh.boundary[i].label == m) {
                ++count;
                if (mesh.boundary[(i + nb - 1) % nb].label != m) ++runs;
            }
        }
        if (count == 0) {
            rep.fail(tag + ": no labeled edges");
            continue;
        }
        if (runs != 1) rep.fail(tag + ": labeled edges are not contiguous");
        const auto chain = mesh.electrode_edges(m);
        if (static_cast<int>(chain.size()) != count ||
            chain.back().b != mesh.electrode_endpoints[m].second)
            rep.fail(tag + ": end points do not delimit the chain");
        if (expected_lengths) {
            const double want = (*expected_lengths)[m];
            const double got = mesh.electrode_length(m);
            if (std::abs(got - want) > length_tolerance * want)
                rep.fail(tag + ": length " + format_double(got) + " vs " + format_double(want));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct Segment {
    double u0, u1;  // curve parameter range
    int label;
};

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double hash_unit(std::int64_t i, std::int64_t j, std::uint64_t salt) {
    const std::uint64_t h =
        splitmix(static_cast<std::uint64_t>(i) * 0x100000001b3ULL ^
                 splitmix(static_cast<std::uint64_t>(j) + salt));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0) - 0.5;
}

int pow2_ceil(double x) {
    int n = 1;
    while (n < x) n *= 2;
    return n;
}

struct Generator {
    std::function<Vec2(double)> curve;      // boundary point at parameter u
    std::function<double(double)> speed;    // |d curve / du|
    std::function<double(const Vec2&)> distance_to_boundary;
    std::vector<Vec2> endpoints;            // electrode end points (refinement targets)
    double grading_length = 0.5;
    double bbox_lo_x = -1, bbox_lo_y = -1, bbox_hi_x = 1, bbox_hi_y = 1;
    RefinementSpec spec;

    double size(const Vec2& x) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& e : endpoints) d = std::min(d, (x - e).norm());
        const double f = spec.electrode_edge_factor;
        return spec.target_edge_length * std::min(1.0, f + d / grading_length);
    }

    // Places n-1 interior nodes on [u0, u1] equidistributing 1/size.
    std::vector<double> distribute(double u0, double u1, int n) const {
        constexpr int K = 256;
        std::vector<double> cum(K + 1, 0.0);
        const double du = (u1 - u0) / K;
        auto dens = [&](double u) { return speed(u) / size(curve(u)); };
        double prev = dens(u0);
        for (int k = 1; k <= K; ++k) {
            const double cur = dens(u0 + k * du);
            cum[k] = cum[k - 1] + 0.5 * (prev + cur) * du;
            prev = cur;
        }
        std::vector<double> us;
        int k = 0;
        for (int i = 1; i < n; ++i) {
            const double target = cum[K] * i / n;
            while (k < K && cum[k + 1] < target) ++k;
            const double span = cum[k + 1] - cum[k];
            const double t = span > 0 ? (target - cum[k]) / span : 0.0;
            us.push_back(u0 + (k + t) * du);
        }
        return us;
    }

    double density_integral(double u0, double u1) const {
        constexpr int K = 256;
        const double du = (u1 - u0) / K;
        double s = 0.0;
        for (int k = 0; k <= K; ++k) {
            const double w = (k == 0 || k == K) ? 0.5 : 1.0;
            const double u = u0 + k * du;
            s += w * speed(u) / size(curve(u));
        }
        return s * du;
    }

    TriMesh build(const std::vector<Segment>& segments, int electrode_count,
                  const std::function<Vec2(double, bool)>& exact_point) const {
        TriMesh mesh;
        mesh.electrode_count = electrode_count;
        mesh.electrode_endpoints.assign(electrode_count, {-1, -1});
        std::vector<int> node_label_start;  // label of the edge leaving each boundary node
        for (const auto& seg : segments) {
            const double a = density_integral(seg.u0, seg.u1);
            int n;
            if (seg.label >= 0) {
                if (a <= 1.0)
                    throw MeshError("refinement too coarse to resolve electrode " +
                                    std::to_string(seg.label + 1));
                n = std::max(2, pow2_ceil(a));
            } else {
                n = std::max(1, static_cast<int>(std::ceil(a - 1e-9)));
            }
            const int first = static_cast<int>(mesh.nodes.size());
            mesh.nodes.push_back(exact_point(seg.u0, true));
            node_label_start.push_back(seg.label);
            for (double u : distribute(seg.u0, seg.u1, n)) {
                mesh.nodes.push_back(curve(u));
                node_label_start.push_back(seg.label);
            }
            if (seg.label >= 0) mesh.electrode_endpoints[seg.label].first = first;
        }
        const int nb = static_cast<int>(mesh.nodes.size());
        for (int i = 0; i < nb; ++i)
            mesh.boundary.push_back({i, (i + 1) % nb, node_label_start[i]});
        for (int i = 0; i < nb; ++i) {
            const int lab = node_label_start[i];
            if (lab >= 0 && node_label_start[(i + 1) % nb] != lab)
                mesh.electrode_endpoints[lab].second = (i + 1) % nb;
        }

        // Interior seeds: jittered hexagonal lattice of spacing h. The seed nearest the
        // domain center becomes the hub of the initial fan.
        const double h = spec.target_edge_length;
        const double dy = h * std::sqrt(3.0) / 2.0;
        const auto jmin = static_cast<std::int64_t>(std::floor(bbox_lo_y / dy)) - 1;
        const auto jmax = static_cast<std::int64_t>(std::ceil(bbox_hi_y / dy)) + 1;
        const auto imin = static_cast<std::int64_t>(std::floor(bbox_lo_x / h)) - 2;
        const auto imax = static_cast<std::int64_t>(std::ceil(bbox_hi_x / h)) + 2;
        const Vec2 center(0.5 * (bbox_lo_x + bbox_hi_x), 0.5 * (bbox_lo_y + bbox_hi_y));
        std::vector<Vec2> seeds;
        for (std::int64_t j = jmin; j <= jmax; ++j) {
            for (std::int64_t i = imin; i <= imax; ++i) {
                Vec2 p((i + 0.5 * (j & 1)) * h, j * dy);
                p += 0.2 * h * Vec2(hash_unit(i, j, 1), hash_unit(i, j, 2));
                if (size(p) < 0.75 * h) continue;
                if (!(distance_to_boundary(p) > 0.6 * h)) continue;
                seeds.push_back(p);
            }
        }
        Vec2 hub = center;
        std::size_t hub_index = seeds.size();
        for (std::size_t k = 0; k < seeds.size(); ++k)
            if (hub_index == seeds.size() || (seeds[k] - center).norm() < (hub - center).norm()) {
                hub = seeds[k];
                hub_index = k;
            }
        detail::Triangulator tri(mesh.nodes, hub);
        for (std::size_t k = 0; k < seeds.size(); ++k)
            if (k != hub_index) tri.insert(seeds[k]);
        tri.refine([this](const Vec2& x) { return size(x); }, distance_to_boundary, 2'000'000);

        mesh.nodes = tri.points();
        mesh.triangles = tri.triangles();
        return mesh;
    }
};

}  // namespace

TriMesh build_disk_mesh(const DiskElectrodeLayout& layout, const RefinementSpec& spec) {
    const auto rep = validate_disk_layout(layout);
    if (!rep.ok) throw std::invalid_argument("invalid disk layout: " + rep.summary());
    if (!(spec.target_edge_length > 0) || !(spec.electrode_edge_factor > 0) ||
        spec.electrode_edge_factor > 1)
        throw std::invalid_argument("invalid refinement spec");
    const double r = layout.radius;
    const int M = layout.count();

    // Electrode arcs ordered counter-clockwise by start angle in [0, 2pi).
    struct Arc {
        double start, end;
        int m;
    };
    std::vector<Arc> arcs;
    for (int m = 0; m < M; ++m) {
        double s = std::fmod(layout.theta[m] - layout.alpha[m], kTwoPi);
        if (s < 0) s += kTwoPi;
        arcs.push_back({s, s + 2.0 * layout.alpha[m], m});
    }
    std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) { return a.start < b.start; });

    std::vector<Segment> segs;
    for (int k = 0; k < M; ++k) {
        segs.push_back({arcs[k].start, arcs[k].end, arcs[k].m});
        const double next = k + 1 < M ? arcs[k + 1].start : arcs[0].start + kTwoPi;
        segs.push_back({arcs[k].end, next, kGap});
    }

    Generator g;
    g.spec = spec;
    g.curve = [r](double u) { return Vec2(r * std::cos(u), r * std::sin(u)); };
    g.speed = [r](double) { return r; };
    g.distance_to_boundary = [r](const Vec2& p) { return r - p.norm(); };
    g.grading_length = 0.5 * r;
    g.bbox_lo_x = g.bbox_lo_y = -r;
    g.bbox_hi_x = g.bbox_hi_y = r;
    for (int m = 0; m < M; ++m) {
        const auto f = disk_endpoint_frame(layout, m);
        g.endpoints.push_back(f.minus);
        g.endpoints.push_back(f.plus);
    }
    // Segment start points reuse the exact electrode end point formula.
    auto exact = [&](double u, bool) { return g.curve(u); };
    return g.build(segs, M, exact);
}

TriMesh build_polygon_mesh(const PolygonElectrodeLayout& layout, const RefinementSpec& spec) {
    const auto rep = validate_polygon_layout(layout);
    if (!rep.ok) throw std::invalid_argument("invalid polygon layout: " + rep.summary());
    if (!(spec.target_edge_length > 0) || !(spec.electrode_edge_factor > 0) ||
        spec.electrode_edge_factor > 1)
        throw std::invalid_argument("invalid refinement spec");
    const int nv = static_cast<int>(layout.vertices.size());
    const int M = layout.count();
    const double P = layout.perimeter();

    // Break points: polygon corners and electrode end points.
    std::vector<double> cuts;
    for (int i = 0; i < nv; ++i) cuts.push_back(layout.side_start(i));
    for (const auto& [a, b] : layout.electrodes) {
        cuts.push_back(a);
        cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [P](double x, double y) { return std::abs(x - y) < 1e-14 * P; }),
               cuts.end());
    std::vector<Segment> segs;
    for (std::size_t k = 0; k < cuts.size(); ++k) {
        const double u0 = cuts[k];
        const double u1 = k + 1 < cuts.size() ? cuts[k + 1] : P;
        if (u1 - u0 <= 1e-14 * P) continue;
        int label = kGap;
        const double mid = 0.5 * (u0 + u1);
        for (int m = 0; m < M; ++m)
            if (mid > layout.electrodes[m].first && mid < layout.electrodes[m].second) label = m;
        segs.push_back({u0, u1, label});
    }

    Vec2 centroid = Vec2::Zero();
    for (const auto& v : layout.vertices) centroid += v;
    centroid /= nv;
    double reach = 0.0;
    Generator g;
    g.bbox_lo_x = g.bbox_lo_y = std::numeric_limits<double>::infinity();
    g.bbox_hi_x = g.bbox_hi_y = -std::numeric_limits<double>::infinity();
    for (const auto& v : layout.vertices) {
        reach = std::max(reach, (v - centroid).norm());
        g.bbox_lo_x = std::min(g.bbox_lo_x, v.x());
        g.bbox_lo_y = std::min(g.bbox_lo_y, v.y());
        g.bbox_hi_x = std::max(g.bbox_hi_x, v.x());
        g.bbox_hi_y = std::max(g.bbox_hi_y, v.y());
    }
    g.spec = spec;
    g.curve = [&layout](double u) { return layout.point_at(u); };
    g.speed = [](double) { return 1.0; };
    g.distance_to_boundary = [&layout, nv](const Vec2& p) {
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < nv; ++i) {
            const Vec2 a = layout.vertices[i];
            const Vec2 b = layout.vertices[(i + 1) % nv];
            const Vec2 t = (b - a).normalized();
            d = std::min(d, t.x() * (p - a).y() - t.y() * (p - a).x());
        }
        return d;
    };
    g.grading_length = 0.5 * reach;
    for (const auto& [a, b] : layout.electrodes) {
        g.endpoints.push_back(layout.point_at(a));
        g.endpoints.push_back(layout.point_at(b));
    }
    auto exact = [&layout](double u, bool) { return layout.point_at(u); };
    return g.build(segs, M, exact);
}

// ---------------------------------------------------------------------------
// Interpolation

P1Locator::P1Locator(const TriMesh& mesh) : mesh_(&mesh) {
    lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
    hi_ = -lo_;
    for (const auto& p : mesh.nodes) {
        lo_ = lo_.cwiseMin(p);
        hi_ = hi_.cwiseMax(p);
    }
    const int nt = std::max(1, mesh.triangle_count());
    nx_ = ny_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(nt) / 2.0)));
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        Vec2 a = mesh.nodes[mesh.triangles[t][0]], b = a;
        for (int v : mesh.triangles[t]) {
            a = a.cwiseMin(mesh.nodes[v]);
            b = b.cwiseMax(mesh.nodes[v]);
        }
        int ix0, iy0, ix1, iy1;
        bucket_of(a.x(), a.y(), ix0, iy0);
        bucket_of(b.x(), b.y(), ix1, iy1);
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) buckets_[iy * nx_ + ix].push_back(t);
    }
}

int P1Locator::bucket_of(double x, double y, int& ix, int& iy) const {
    const double wx = std::max(hi_.x() - lo_.x(), 1e-300);
    const double wy = std::max(hi_.y() - lo_.y(), 1e-300);
    ix = std::clamp(static_cast<int>((x - lo_.x()) / wx * nx_), 0, nx_ - 1);
    iy = std::clamp(static_cast<int>((y - lo_.y()) / wy * ny_), 0, ny_ - 1);
    return iy * nx_ + ix;
}

P1Locator::Hit P1Locator::locate(const Vec2& p) const {
    const auto& m = *mesh_;
    Hit hit;
    if (p.x() >= lo_.x() && p.x() <= hi_.x() && p.y() >= lo_.y() && p.y() <= hi_.y()) {
        int ix, iy;
        const int b = bucket_of(p.x(), p.y(), ix, iy);
        int best_t = -1;
        double best_min = -std::numeric_limits<double>::infinity();
        std::array<double, 3> best_w{};
        for (int t : buckets_[b]) {
            const auto& tr = m.triangles[t];
            const Vec2& a = m.nodes[tr[0]];
            const Vec2& bb = m.nodes[tr[1]];
            const Vec2& c = m.nodes[tr[2]];
            const double area = detail::orient2d(a, bb, c);
            const std::array<double, 3> w{detail::orient2d(bb, c, p) / area,
                                          detail::orient2d(c, a, p) / area,
                                          detail::orient2d(a, bb, p) / area};
            const double mn = std::min({w[0], w[1], w[2]});
            if (mn > best_min) {
                best_min = mn;
                best_t = t;
                best_w = w;
            }
        }
        if (best_t >= 0 && best_min >= -1e-10) {
            hit.nodes = m.triangles[best_t];
            hit.weights = best_w;
            hit.inside = true;
            return hit;
        }
    }
    // Nearest point on the boundary loop.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : m.boundary) {
        const Vec2& a = m.nodes[e.a];
        const Vec2& b = m.nodes[e.b];
        const Vec2 d = b - a;
        const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        const double dist = (a + t * d - p).squaredNorm();
        if (dist < best) {
            best = dist;
            hit.nodes = {e.a, e.b, e.a};
            hit.weights = {1.0 - t, t, 0.0};
        }
    }
    hit.inside = false;
    return hit;
}

double P1Locator::evaluate(const Eigen::VectorXd& values, const Vec2& p) const {
    const Hit h = locate(p);
    return h.weights[0] * values[h.nodes[0]] + h.weights[1] * values[h.nodes[1]] +
           h.weights[2] * values[h.nodes[2]];
}

Eigen::SparseMatrix<double> p1_interpolation_matrix(const TriMesh& src,
                                                    const std::vector<Vec2>& points) {
    P1Locator loc(src);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(points.size() * 3);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto h = loc.locate(points[i]);
        for (int k = 0; k < 3; ++k)
            if (h.weights[k] != 0.0)
                trip.emplace_back(static_cast<int>(i), h.nodes[k], h.weights[k]);
    }
    Eigen::SparseMatrix<double> P(static_cast<int>(points.size()), src.node_count());
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
}

Eigen::VectorXd p1_interpolate(const TriMesh& src, const Eigen::VectorXd& values,
                               const TriMesh& dst) {
    if (values.size() != src.node_count())
        throw std::invalid_argument("field size does not match source mesh");
    return p1_interpolation_matrix(src, dst.nodes) * values;
}

Eigen::SparseMatrix<double> p1_mass_matrix(const TriMesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.triangles.size());
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const double a = std::abs(mesh.signed_area(t));
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], a / (i == j ? 6.0 : 12.0));
    }
    Eigen::SparseMatrix<double> Mm(mesh.node_count(), mesh.node_count());
    Mm.setFromTriplets(trip.begin(), trip.end());
    return Mm;
}

double p1_l2_norm(const TriMesh& mesh, const Eigen::VectorXd& values) {
    if (values.size() != mesh.node_count())
        throw std::invalid_argument("field size does not match mesh");
    return std::sqrt(std::max(0.0, values.dot(p1_mass_matrix(mesh) * values)));
}

// ---------------------------------------------------------------------------
// VTK

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string export_vtk(const TriMesh& mesh, const std::vector<NamedField>& fields,
                       const std::string& title) {
    for (const auto& [name, f] : fields)
        if (f.size() != mesh.node_count())
            throw std::invalid_argument("field '" + name + "' does not match node count");
    std::ostringstream os;
    os << "# vtk DataFile Version 3.0\n";
    std::string t = title;
    std::replace(t.begin(), t.end(), '\n', ' ');
    os << t << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.node_count() << " double\n";
    for (const auto& p : mesh.nodes)
        os << format_double(p.x()) << ' ' << format_double(p.y()) << " 0\n";

    std::vector<BoundaryEdge> lines;
    for (const auto& e : mesh.boundary)
        if (e.label >= 0) lines.push_back(e);
    const std::size_t ncells = mesh.triangles.size() + lines.size();
    os << "CELLS " << ncells << ' ' << 4 * mesh.triangles.size() + 3 * lines.size() << '\n';
    for (const auto& tr : mesh.triangles) os << "3 " << tr[0] << ' ' << tr[1] << ' ' << tr[2] << '\n';
    for (const auto& e : lines) os << "2 " << e.a << ' ' << e.b << '\n';
    os << "CELL_TYPES " << ncells << '\n';
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) os << "5\n";
    for (std::size_t i = 0; i < lines.size(); ++i) os << "3\n";
    if (!lines.empty()) {
        os << "CELL_DATA " << ncells << "\nSCALARS electrode int 1\nLOOKUP_TABLE default\n";
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i) os << "0\n";
        for (const auto& e : lines) os << e.label + 1 << '\n';
    }
    if (!fields.empty()) {
        os << "POINT_DATA " << mesh.node_count() << '\n';
        for (const auto& [name, f] : fields) {
            os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (int i = 0; i < f.size(); ++i) os << format_double(f[i]) << '\n';
        }
    }
    return os.str();
}

void write_vtk_file(const std::string& path, const TriMesh& mesh,
                    const std::vector<NamedField>& fields, const std::string& title) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << export_vtk(mesh, fields, title);
    if (!out) throw std::runtime_error("failed writing " + path);
}

VtkData parse_vtk(const std::string& text) {
    std::istringstream is(text);
    VtkData out;
    std::string line;
    std::getline(is, line);
    if (line.rfind("# vtk DataFile", 0) != 0) throw std::runtime_error("not a legacy VTK file");
    std::getline(is, out.title);
    std::getline(is, line);
    if (line.rfind("ASCII", 0) != 0) throw std::runtime_error("only ASCII VTK is supported");

    auto fail = [](const std::string& what) { throw std::runtime_error("malformed VTK: " + what); };
    std::string tok;
    std::vector<std::vector<int>> cells;
    std::vector<int> types;
    std::vector<int> cell_electrode;
    std::string section;
    while (is >> tok) {
        if (tok == "DATASET") {
            is >> tok;
            if (tok != "UNSTRUCTURED_GRID") fail("dataset type " + tok);
        } else if (tok == "POINTS") {
            std::size_t n;
            is >> n >> tok;
            out.mesh.nodes.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                double x, y, z;
                if (!(is >> x >> y >> z)) fail("points");
                out.mesh.nodes[i] = Vec2(x, y);
            }
        } else if (tok == "CELLS") {
            std::size_t n, total;
            is >> n >> total;
            cells.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                int k;
                if (!(is >> k)) fail("cells");
                cells[i].resize(k);
                for (int j = 0; j < k; ++j) is >> cells[i][j];
            }
        } else if (tok == "CELL_TYPES") {
            std::size_t n;
            is >> n;
            types.resize(n);
            for (auto& t : types) is >> t;
        } else if (tok == "CELL_DATA") {
            section = "cell";
            std::size_t n;
            is >> n;
        } else if (tok == "POINT_DATA") {
            section = "point";
            std::size_t n;
            is >> n;
        } else if (tok == "SCALARS") {
            std::string name, type;
            is >> name >> type;
            std::getline(is, line);  // optional component count
            is >> tok;
            if (tok != "LOOKUP_TABLE") fail("expected LOOKUP_TABLE");
            is >> tok;
            if (section == "cell") {
                cell_electrode.resize(cells.size());
                for (auto& v : cell_electrode) is >> v;
            } else {
                Eigen::VectorXd f(out.mesh.node_count());
                for (int i = 0; i < f.size(); ++i)
                    if (!(is >> f[i])) fail("scalars " + name);
                out.fields.emplace_back(name, f);
            }
        } else {
            fail("unexpected token " + tok);
        }
    }
    int max_label = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (types.at(i) == 5) {
            out.mesh.triangles.push_back({cells[i][0], cells[i][1], cells[i][2]});
        } else if (types.at(i) == 3) {
            const int lab = cell_electrode.empty() ? 0 : cell_electrode[i];
            out.mesh.boundary.push_back({cells[i][0], cells[i][1], lab - 1});
            max_label = std::max(max_label, lab);
        }
    }
    out.mesh.electrode_count = max_label;
    out.mesh.electrode_endpoints.assign(max_label, {-1, -1});
    for (const auto& e : out.mesh.boundary) {
        if (e.label < 0) continue;
        auto& ep = out.mesh.electrode_endpoints[e.label];
        bool has_prev = false, has_next = false;
        for (const auto& o : out.mesh.boundary) {
            if (o.label != e.label) continue;
            if (o.b == e.a) has_prev = true;
            if (o.a == e.b) has_next = true;
        }
        if (!has_prev) ep.first = e.a;
        if (!has_next) ep.second = e.b;
    }
    return out;
}

VtkData read_vtk_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_vtk(ss.str());
}

}  // namespace eitcem
