#include "eitcem/conformal.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace eitcem {

namespace {

using Complex = std::complex<double>;
using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

constexpr double kQuadTol = 1e-12;
constexpr unsigned kQuadDepth = 15;

// int_0^1 (1 + q t^4)^{-1/2} dt with t = 1 - s^2. The factorization
// 1 + q t^4 = s^2 (2 - s^2)(1 + t^2) + (1 + q) t^4 avoids cancellation near q = -1, t = 1.
Complex radial_integral(Complex q) {
    const Complex one_plus_q = 1.0 + q;
    auto f = [&](double s) -> Complex {
        const double t = 1.0 - s * s;
        const double t2 = t * t;
        const Complex d = s * s * (2.0 - s * s) * (1.0 + t2) + one_plus_q * (t2 * t2);
        return 2.0 * s / std::sqrt(d);
    };
    double err = 0.0;
    return GK::integrate(f, 0.0, 1.0, kQuadDepth, kQuadTol, &err);
}

}  // namespace

double complete_integral_c() {
    return radial_integral(Complex(-1.0, 0.0)).real();
}

ConformalSquareDiskMap::ConformalSquareDiskMap()
    : c_(complete_integral_c()), scale_(std::sqrt(2.0) / c_) {
    // Seeds for Newton inversion: polar grid, denser towards the circle.
    constexpr int kRings = 24, kRays = 96;
    seed_w_.push_back(0.0);
    seed_x_.push_back(0.0);
    for (int i = 1; i <= kRings; ++i) {
        const double r = 1.0 - std::pow(1.0 - static_cast<double>(i) / (kRings + 1), 1.5);
        for (int k = 0; k < kRays; ++k) {
            const Complex w = std::polar(r, kTwoPi * k / kRays);
            seed_w_.push_back(w);
            seed_x_.push_back(psi(w));
        }
    }
}

Complex ConformalSquareDiskMap::psi(Complex w) const {
    if (!(std::abs(w) <= 1.0 + 1e-12))
        throw ConformalError("point outside the closed unit disk");
    if (w == 0.0) return 0.0;
    // Near a prevertex the radial integrand is nearly singular. Integrate from the corner
    // instead, along zeta = zc + (w - zc) u^2, where the square-root singularity cancels.
    const Complex i(0.0, 1.0);
    for (int k = 0; k < 4; ++k) {
        const Complex zc = std::polar(1.0, kPi / 4 + k * kPi / 2);
        if (std::abs(w - zc) >= 0.5) continue;
        const Complex d = w - zc;
        if (std::abs(d) < 1e-15) return (1.0 + i) * std::pow(i, k);
        Complex others[3];
        for (int j = 1, n = 0; j < 4; ++j) others[n++] = zc * std::pow(i, j);
        auto f = [&](double u) -> Complex {
            const Complex zeta = zc + d * (u * u);
            const Complex x = d * (zeta - others[0]) * (zeta - others[1]) * (zeta - others[2]);
            return 2.0 * d / std::sqrt(x);
        };
        double err = 0.0;
        const Complex I = GK::integrate(f, 0.0, 1.0, kQuadDepth, kQuadTol, &err);
        return (1.0 + i) * std::pow(i, k) + scale_ * I;
    }
    const Complex w2 = w * w;
    return scale_ * w * radial_integral(w2 * w2);
}

Vec2 ConformalSquareDiskMap::psi(const Vec2& w) const {
    const Complex z = psi(Complex(w.x(), w.y()));
    return Vec2(z.real(), z.imag());
}

Complex ConformalSquareDiskMap::dpsi(Complex w) const {
    const Complex w2 = w * w;
    return scale_ / std::sqrt(1.0 + w2 * w2);
}

Complex ConformalSquareDiskMap::phi_boundary(Complex x) const {
    // Rotate onto the side Re = 1 using Psi(i w) = i Psi(w).
    int k = 0;
    Complex xr = x;
    for (int r = 0; r < 4; ++r) {
        const Complex cand = x * std::pow(Complex(0.0, -1.0), r);
        if (cand.real() >= std::abs(cand.imag()) - 1e-15) {
            k = r;
            xr = cand;
            break;
        }
    }
    const double y = std::clamp(xr.imag(), -1.0, 1.0);
    double lo = -kPi / 4, hi = kPi / 4;
    double phi;
    if (y >= 1.0 - 1e-15) {
        phi = hi;
    } else if (y <= -1.0 + 1e-15) {
        phi = lo;
    } else {
        phi = y * kPi / 4;
        for (int it = 0; it < 100; ++it) {
            const Complex w = std::polar(1.0, phi);
            const double g = psi(w).imag() - y;
            if (std::abs(g) < 1e-15) break;
            if (g > 0)
                hi = phi;
            else
                lo = phi;
            const double dg = (dpsi(w) * w).real();  // d/dphi Im Psi(e^{i phi})
            double next = phi - g / dg;
            if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
            if (std::abs(next - phi) < 1e-16) break;
            phi = next;
            if (hi - lo < 1e-16) break;
        }
    }
    return std::polar(1.0, phi) * std::pow(Complex(0.0, 1.0), k);
}

Complex ConformalSquareDiskMap::phi(Complex x) const {
    const double inf = std::max(std::abs(x.real()), std::abs(x.imag()));
    if (!(inf <= 1.0 + 1e-12)) throw ConformalError("point outside the square");
    if (inf >= 1.0 - 1e-14) return phi_boundary(x);
    if (x == 0.0) return 0.0;

    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < seed_x_.size(); ++i) {
        const double d = std::norm(seed_x_[i] - x);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    Complex w = seed_w_[best];
    for (int it = 0; it < 60; ++it) {
        const Complex r = psi(w) - x;
        if (std::abs(r) < 1e-14) return w;
        Complex step = r / dpsi(w);
        Complex next = w - step;
        // Keep the iterate inside the disk.
        for (int h = 0; h < 30 && std::abs(next) >= 1.0; ++h) {
            step *= 0.5;
            next = w - step;
        }
        if (std::abs(next - w) < 1e-16) return next;
        w = next;
    }
    const Complex r = psi(w) - x;
    if (std::abs(r) < 1e-12) return w;
    std::ostringstream os;
    os << "Newton inversion did not converge at (" << x.real() << ", " << x.imag() << ")";
    throw ConformalError(os.str());
}

Vec2 ConformalSquareDiskMap::phi(const Vec2& x) const {
    const Complex w = phi(Complex(x.x(), x.y()));
    return Vec2(w.real(), w.imag());
}

double ConformalSquareDiskMap::dphi_abs(const Vec2& x) const {
    const Complex w = phi(Complex(x.x(), x.y()));
    const Complex w2 = w * w;
    return std::sqrt(std::abs(1.0 + w2 * w2)) / scale_;
}

const ConformalSquareDiskMap& square_disk_map() {
    static const ConformalSquareDiskMap map;
    return map;
}

Vec2 map_disk_to_square(const Vec2& w) {
    return square_disk_map().psi(w);
}

SquareImage map_square_to_disk(const Vec2& x) {
    const auto& map = square_disk_map();
    SquareImage out;
    out.w = map.phi(x);
    out.on_boundary = std::max(std::abs(x.x()), std::abs(x.y())) >= 1.0 - 1e-14;
    out.dphi = 1.0 / std::abs(map.dpsi(Complex(out.w.x(), out.w.y())));
    return out;
}

// ---------------------------------------------------------------------------------------

PushforwardModel pushforward_model(const PolygonElectrodeLayout& square,
                                   std::function<double(const Vec2&)> sigma,
                                   const Eigen::VectorXd& z) {
    const auto rep = validate_polygon_layout(square);
    if (!rep.ok) throw std::invalid_argument("invalid square layout: " + rep.summary());
    for (const auto& v : square.vertices)
        if (std::abs(std::max(std::abs(v.x()), std::abs(v.y())) - 1.0) > 1e-12)
            throw std::invalid_argument("push-forward needs the square [-1,1]^2");
    const int M = square.count();
    if (z.size() != M) throw std::invalid_argument("contact vector size differs from layout");
    const auto& map = square_disk_map();
    PushforwardModel pf;
    pf.layout.radius = 1.0;
    pf.z.resize(M);
    pf.dphi.resize(M);
    for (int m = 0; m < M; ++m) {
        const Vec2 a = map.phi(square.point_at(square.electrodes[m].first));
        const Vec2 b = map.phi(square.point_at(square.electrodes[m].second));
        const double pa = std::atan2(a.y(), a.x());
        double span = std::atan2(b.y(), b.x()) - pa;
        while (span <= 0.0) span += kTwoPi;
        double theta = std::fmod(pa + 0.5 * span, kTwoPi);
        if (theta < 0.0) theta += kTwoPi;
        pf.layout.theta.push_back(theta);
        pf.layout.alpha.push_back(0.5 * span);
        const Vec2 y = square.point_at(square.electrode_midpoint(m));
        pf.centers.push_back(y);
        pf.dphi[m] = map.dphi_abs(y);
        pf.z[m] = pf.dphi[m] * z[m];
    }
    const auto lay = validate_disk_layout(pf.layout);
    if (!lay.ok) throw ConformalError("mapped electrodes are invalid: " + lay.summary());
    pf.sigma = [sigma = std::move(sigma), &map](const Vec2& w) { return sigma(map.psi(w)); };
    return pf;
}

double pullback_relative_error(const TriMesh& square_mesh, const Eigen::VectorXd& truth,
                               const TriMesh& disk_mesh, const Eigen::VectorXd& sigma_disk) {
    if (truth.size() != square_mesh.node_count() || sigma_disk.size() != disk_mesh.node_count())
        throw std::invalid_argument("field sizes do not match meshes");
    const auto& map = square_disk_map();
    std::vector<Vec2> pts(square_mesh.nodes.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = map.phi(square_mesh.nodes[i]);
    const Eigen::VectorXd pulled = p1_interpolation_matrix(disk_mesh, pts) * sigma_disk;
    return p1_l2_norm(square_mesh, pulled - truth) / p1_l2_norm(square_mesh, truth);
}

PolygonElectrodeLayout shrink_electrodes(const PolygonElectrodeLayout& layout, double h) {
    if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("shrink factor must lie in (0, 1]");
    PolygonElectrodeLayout out = layout;
    for (auto& [a, b] : out.electrodes) {
        const double mid = 0.5 * (a + b), half = 0.5 * h * (b - a);
        a = mid - half;
        b = mid + half;
    }
    return out;
}

DiskElectrodeLayout shrink_electrodes(const DiskElectrodeLayout& layout, double h) {
    if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("shrink factor must lie in (0, 1]");
    DiskElectrodeLayout out = layout;
    for (auto& a : out.alpha) a *= h;
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

struct SweepPoint {
    Eigen::VectorXd errors;
    int square_nodes = 0, disk_nodes = 0;
};

// Electrode edges follow resolution * width at the base level and halve with every
// refinement, like all other edges.
RefinementSpec spec_for_width(const RefinementSpec& spec, double base_target, double width,
                              double resolution) {
    RefinementSpec s = spec;
    s.electrode_edge_factor =
        std::min(spec.electrode_edge_factor, resolution * width / base_target);
    return s;
}

SweepPoint sweep_point(const PolygonElectrodeLayout& square,
                       const std::function<double(const Vec2&)>& sigma, const Eigen::VectorXd& z,
                       const CurrentBasis& basis, double h, const RefinementSpec& spec,
                       const SweepOptions& opt) {
    const PolygonElectrodeLayout sq = shrink_electrodes(square, h);
    const PushforwardModel pf = pushforward_model(sq, sigma, z);
    SweepPoint pt;
    Eigen::MatrixXd Ud;
    {
        const double width = 2.0 * *std::min_element(pf.layout.alpha.begin(), pf.layout.alpha.end());
        const TriMesh mesh =
            build_disk_mesh(pf.layout, spec_for_width(spec, opt.mesh_spec.target_edge_length, width, opt.electrode_resolution));
        Eigen::VectorXd s(mesh.node_count());
        for (int i = 0; i < mesh.node_count(); ++i) s[i] = pf.sigma(mesh.nodes[i]);
        pt.disk_nodes = mesh.node_count();
        Ud = CemSystem(mesh, s, pf.z).solve(basis).U;
    }
    Eigen::MatrixXd Us;
    if (opt.identity) {
        Us = Ud;
        pt.square_nodes = pt.disk_nodes;
    } else {
        double width = std::numeric_limits<double>::infinity();
        for (int m = 0; m < sq.count(); ++m) width = std::min(width, sq.electrode_width(m));
        const TriMesh mesh =
            build_polygon_mesh(sq, spec_for_width(spec, opt.mesh_spec.target_edge_length, width, opt.electrode_resolution));
        Eigen::VectorXd s(mesh.node_count());
        for (int i = 0; i < mesh.node_count(); ++i) s[i] = sigma(mesh.nodes[i]);
        pt.square_nodes = mesh.node_count();
        Us = CemSystem(mesh, s, z).solve(basis).U;
    }
    pt.errors.resize(basis.pattern_count());
    for (int j = 0; j < basis.pattern_count(); ++j)
        pt.errors[j] = quotient_norm(Us.col(j) - Ud.col(j));
    return pt;
}

}  // namespace

SweepResult h_sweep(const PolygonElectrodeLayout& square, std::function<double(const Vec2&)> sigma,
                    const Eigen::VectorXd& z, const CurrentBasis& basis,
                    const std::vector<double>& h_list, const SweepOptions& options) {
    if (h_list.empty()) throw std::invalid_argument("empty h list");
    for (std::size_t i = 0; i < h_list.size(); ++i) {
        if (!(h_list[i] > 0.0 && h_list[i] <= 1.0))
            throw std::invalid_argument("h values must lie in (0, 1]");
        if (i > 0 && !(h_list[i] < h_list[i - 1]))
            throw std::invalid_argument("h list must be strictly decreasing");
    }
    SweepResult res;
    const double h_min = h_list.back();

    // Pick the coarsest refinement level whose result at the smallest h changes by no
    // more than the allowed ratio under one further refinement.
    RefinementSpec spec = options.mesh_spec;
    SweepPoint at_min = sweep_point(square, sigma, z, basis, h_min, spec, options);
    int level = 0;
    for (;;) {
        const RefinementSpec finer = spec.refined(2.0);
        const SweepPoint check = sweep_point(square, sigma, z, basis, h_min, finer, options);
        const double e1 = at_min.errors.maxCoeff(), e2 = check.errors.maxCoeff();
        res.discretization_ratio = e2 > 0.0 ? std::abs(e1 - e2) / e2 : std::abs(e1 - e2);
        if (options.identity) res.discretization_ratio = 0.0;
        if (res.discretization_ratio <= options.discretization_ratio) {
            res.discretization_ok = true;
            break;
        }
        if (++level > options.max_refinements) break;
        spec = finer;
        at_min = check;
    }
    if (!res.discretization_ok) {
        std::ostringstream os;
        os << "mesh budget exhausted: discretization ratio " << res.discretization_ratio
           << " exceeds " << options.discretization_ratio;
        res.notice = os.str();
    }

    std::vector<double> hs, es;
    for (double h : h_list) {
        const SweepPoint pt = h == h_min ? at_min : sweep_point(square, sigma, z, basis, h, spec, options);
        SweepRow row;
        row.h = h;
        row.error_per_pattern = pt.errors;
        row.error_max = pt.errors.maxCoeff();
        row.square_nodes = pt.square_nodes;
        row.disk_nodes = pt.disk_nodes;
        hs.push_back(h);
        es.push_back(row.error_max);
        row.slope_so_far = options.identity ? std::numeric_limits<double>::quiet_NaN()
                                            : loglog_slope(hs, es);
        res.rows.push_back(row);
    }
    if (options.identity) {
        res.slope = std::numeric_limits<double>::quiet_NaN();
        res.notice = "identity map: discrepancies sit at the solver floor; slope suppressed";
    } else {
        res.slope = loglog_slope(hs, es);
    }
    return res;
}

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream os;
    os << "h";
    const Eigen::Index J = result.rows.empty() ? 0 : result.rows.front().error_per_pattern.size();
    for (Eigen::Index j = 0; j < J; ++j) os << ",error_" << (j + 1);
    os << ",error_max,slope_so_far\n";
    for (const auto& r : result.rows) {
        os << format_double(r.h);
        for (Eigen::Index j = 0; j < J; ++j) os << ',' << format_double(r.error_per_pattern[j]);
        os << ',' << format_double(r.error_max) << ','
           << (std::isnan(r.slope_so_far) ? std::string("") : format_double(r.slope_so_far))
           << '\n';
    }
    return os.str();
}

}  // namespace eitcem
