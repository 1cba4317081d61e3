#include "delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_map>

namespace eitcem::detail {

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double adx = a.x() - d.x(), ady = a.y() - d.y();
    const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
    const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
    const double ad = adx * adx + ady * ady;
    const double bd = bdx * bdx + bdy * bdy;
    const double cd = cdx * cdx + cdy * cdy;
    return ad * (bdx * cdy - cdx * bdy) + bd * (cdx * ady - adx * cdy) +
           cd * (adx * bdy - bdx * ady);
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 ba = b - a, ca = c - a;
    const double d = 2.0 * (ba.x() * ca.y() - ba.y() * ca.x());
    const double b2 = ba.squaredNorm(), c2 = ca.squaredNorm();
    return a + Vec2((ca.y() * b2 - ba.y() * c2) / d, (ba.x() * c2 - ca.x() * b2) / d);
}

namespace {

// Relative tolerance for in-circle decisions; keeps cocircular boundary points stable.
double incircle_tol(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double s = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(),
                               (c - b).squaredNorm()});
    return 1e-12 * s * s;
}

}  // namespace

Triangulator::Triangulator(const std::vector<Vec2>& boundary, const Vec2& hub)
    : pts_(boundary) {
    const int n = static_cast<int>(boundary.size());
    if (n < 3) throw std::invalid_argument("boundary polygon needs at least 3 points");
    pts_.push_back(hub);

    // Fan around the hub; valid for any polygon star-shaped with respect to it.
    tris_.resize(n);
    for (int i = 0; i < n; ++i) {
        const int a = i, b = (i + 1) % n;
        if (!(orient2d(pts_[a], pts_[b], hub) > 0.0))
            throw std::runtime_error("boundary polygon is not star-shaped around the hub");
        tris_[i].v = {a, b, n};
        tris_[i].n = {(i + 1) % n, (i + n - 1) % n, -1};
    }
    lawson_flip_all();
}

void Triangulator::relink(int tri, int old_nbr, int new_nbr) {
    if (tri < 0) return;
    for (int k = 0; k < 3; ++k)
        if (tris_[tri].n[k] == old_nbr) {
            tris_[tri].n[k] = new_nbr;
            return;
        }
}

bool Triangulator::try_flip(int t, int i) {
    const int u = tris_[t].n[i];
    if (u < 0) return false;
    const int a = tris_[t].v[i], b = tris_[t].v[(i + 1) % 3], c = tris_[t].v[(i + 2) % 3];
    int j = 0;
    while (tris_[u].n[j] != t) ++j;
    const int d = tris_[u].v[j];
    const double ic = incircle(pts_[a], pts_[b], pts_[c], pts_[d]);
    if (!(ic > incircle_tol(pts_[a], pts_[b], pts_[c]))) return false;
    if (orient2d(pts_[a], pts_[b], pts_[d]) <= 0 || orient2d(pts_[a], pts_[d], pts_[c]) <= 0)
        return false;
    const int t_ab = tris_[t].n[(i + 2) % 3];
    const int t_ca = tris_[t].n[(i + 1) % 3];
    const int u_bd = tris_[u].n[(j + 1) % 3];
    const int u_dc = tris_[u].n[(j + 2) % 3];
    tris_[t].v = {a, b, d};
    tris_[t].n = {u_bd, u, t_ab};
    tris_[u].v = {a, d, c};
    tris_[u].n = {u_dc, t_ca, t};
    relink(u_bd, u, t);
    relink(t_ca, t, u);
    return true;
}

void Triangulator::lawson_flip_all() {
    bool changed = true;
    int sweeps = 0;
    while (changed && sweeps++ < 1000) {
        changed = false;
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
            for (int i = 0; i < 3; ++i)
                if (tris_[t].alive && try_flip(t, i)) changed = true;
    }
}

int Triangulator::locate(const Vec2& p) const {
    int t = hint_;
    if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
        t = -1;
        for (int k = static_cast<int>(tris_.size()) - 1; k >= 0; --k)
            if (tris_[k].alive) {
                t = k;
                break;
            }
        if (t < 0) return -1;
    }
    const std::size_t limit = 4 * tris_.size() + 16;
    for (std::size_t step = 0; step < limit; ++step) {
        const auto& tr = tris_[t];
        int next = -2;
        for (int k = 0; k < 3; ++k) {
            const int i = static_cast<int>((k + step) % 3);
            const Vec2& a = pts_[tr.v[(i + 1) % 3]];
            const Vec2& b = pts_[tr.v[(i + 2) % 3]];
            if (orient2d(a, b, p) < 0.0) {
                next = tr.n[i];
                break;
            }
        }
        if (next == -2) return t;
        if (next == -1) return -1;
        t = next;
    }
    // Walk failed to converge; fall back to exhaustive search.
    for (int k = 0; k < static_cast<int>(tris_.size()); ++k) {
        if (!tris_[k].alive) continue;
        const auto& tr = tris_[k];
        if (orient2d(pts_[tr.v[0]], pts_[tr.v[1]], p) >= 0 &&
            orient2d(pts_[tr.v[1]], pts_[tr.v[2]], p) >= 0 &&
            orient2d(pts_[tr.v[2]], pts_[tr.v[0]], p) >= 0)
            return k;
    }
    return -1;
}

bool Triangulator::insert(const Vec2& p, std::vector<int>* created) {
    const int t0 = locate(p);
    if (t0 < 0) return false;
    for (int v : tris_[t0].v)
        if ((pts_[v] - p).squaredNorm() < 1e-24) return false;

    if (mark_.size() < tris_.size()) mark_.resize(tris_.size() + 1024, 0);
    ++stamp_;
    std::vector<int> cavity{t0};
    mark_[t0] = stamp_;
    for (std::size_t k = 0; k < cavity.size(); ++k) {
        const auto& tr = tris_[cavity[k]];
        for (int i = 0; i < 3; ++i) {
            const int u = tr.n[i];
            if (u < 0 || mark_[u] == stamp_) continue;
            const auto& tu = tris_[u];
            const Vec2& a = pts_[tu.v[0]];
            const Vec2& b = pts_[tu.v[1]];
            const Vec2& c = pts_[tu.v[2]];
            if (incircle(a, b, c, p) > incircle_tol(a, b, c)) {
                mark_[u] = stamp_;
                cavity.push_back(u);
            }
        }
    }

    struct Edge {
        int a, b, outer, old;
    };
    std::vector<Edge> rim;
    for (int t : cavity) {
        const auto& tr = tris_[t];
        for (int i = 0; i < 3; ++i) {
            const int u = tr.n[i];
            if (u >= 0 && mark_[u] == stamp_) continue;
            const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
            const double o = orient2d(pts_[a], pts_[b], p);
            const double scale = (pts_[b] - pts_[a]).squaredNorm();
            if (!(o > 1e-13 * scale)) return false;
            rim.push_back({a, b, u, t});
        }
    }

    const int pid = static_cast<int>(pts_.size());
    pts_.push_back(p);
    std::unordered_map<int, int> by_start, by_end;
    std::vector<int> fresh;
    fresh.reserve(rim.size());
    for (const auto& e : rim) {
        Tri tr;
        tr.v = {e.a, e.b, pid};
        tr.n = {-1, -1, e.outer};
        const int id = static_cast<int>(tris_.size());
        tris_.push_back(tr);
        relink(e.outer, e.old, id);
        by_start[e.a] = id;
        by_end[e.b] = id;
        fresh.push_back(id);
    }
    for (int id : fresh) {
        auto& tr = tris_[id];
        tr.n[0] = by_start.at(tr.v[1]);  // across (b, p)
        tr.n[1] = by_end.at(tr.v[0]);    // across (p, a)
    }
    for (int t : cavity) tris_[t].alive = false;
    hint_ = fresh.front();
    if (created) created->insert(created->end(), fresh.begin(), fresh.end());
    return true;
}

void Triangulator::refine(const std::function<double(const Vec2&)>& size,
                          const std::function<double(const Vec2&)>& distance_to_boundary,
                          std::size_t max_points) {
    constexpr double kSizeRatio = 0.62;    // circumradius / local size (equilateral: 0.577)
    constexpr double kShapeRatio = 1.35;   // circumradius / shortest edge
    constexpr double kMargin = 0.45;       // candidate distance to boundary, in local sizes

    std::deque<int> queue;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
        if (tris_[t].alive) queue.push_back(t);
    std::vector<int> created;
    while (!queue.empty() && pts_.size() < max_points) {
        const int t = queue.front();
        queue.pop_front();
        if (!tris_[t].alive) continue;
        const Vec2& a = pts_[tris_[t].v[0]];
        const Vec2& b = pts_[tris_[t].v[1]];
        const Vec2& c = pts_[tris_[t].v[2]];
        const Vec2 cc = circumcenter(a, b, c);
        const double R = (cc - a).norm();
        const Vec2 g = (a + b + c) / 3.0;
        const double lmin =
            std::sqrt(std::min({(b - a).squaredNorm(), (c - b).squaredNorm(),
                                (a - c).squaredNorm()}));
        const double s = size(g);
        const bool too_big = R > kSizeRatio * s;
        const bool skinny = R > kShapeRatio * lmin && lmin > 0.25 * s;
        if (!too_big && !skinny) continue;

        Vec2 cand = cc;
        if (!(distance_to_boundary(cc) > kMargin * size(cc))) {
            if (!too_big || !(distance_to_boundary(g) > kMargin * s)) continue;
            cand = g;
        }
        created.clear();
        if (insert(cand, &created)) {
            queue.insert(queue.end(), created.begin(), created.end());
        } else if (cand != g && too_big && distance_to_boundary(g) > kMargin * s) {
            if (insert(g, &created)) queue.insert(queue.end(), created.begin(), created.end());
        }
    }
}

std::vector<std::array<int, 3>> Triangulator::triangles() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris_)
        if (t.alive) out.push_back(t.v);
    return out;
}

}  // namespace eitcem::detail
