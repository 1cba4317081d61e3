#include "eitcem/jacobian.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace eitcem {

ForwardSolution measurement_adjoint(const CemSystem& system) {
    return system.solve(CurrentBasis::measurement(system.electrode_count()));
}

namespace {

void check_dims(const CemSystem& system, const ForwardSolution& sol,
                const ForwardSolution& adjoint) {
    const int N = system.node_count(), M = system.electrode_count();
    if (sol.u.rows() != N || sol.U.rows() != M || adjoint.u.rows() != N ||
        adjoint.U.rows() != M || adjoint.U.cols() != M)
        throw std::invalid_argument("solution dimensions do not match the system");
}

}  // namespace

Eigen::MatrixXd jac_sigma(const CemSystem& system, const ForwardSolution& sol,
                          const ForwardSolution& adjoint) {
    check_dims(system, sol, adjoint);
    const TriMesh& mesh = system.mesh();
    const int M = system.electrode_count();
    const int J = static_cast<int>(sol.u.cols());
    Eigen::MatrixXd Js = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M) * J,
                                               mesh.node_count());
    Eigen::MatrixXd gu(J, 2), ga(M, 2);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec2& p0 = mesh.nodes[tr[0]];
        const Vec2& p1 = mesh.nodes[tr[1]];
        const Vec2& p2 = mesh.nodes[tr[2]];
        const double area = mesh.signed_area(t);
        const std::array<Vec2, 3> g{Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / (2 * area),
                                    Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / (2 * area),
                                    Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / (2 * area)};
        gu.setZero();
        ga.setZero();
        for (int k = 0; k < 3; ++k) {
            gu += sol.u.row(tr[k]).transpose() * g[k].transpose();
            ga += adjoint.u.row(tr[k]).transpose() * g[k].transpose();
        }
        // d sigma_T / d sigma_i = 1/3 for each vertex of T
        const Eigen::MatrixXd prod = -(area / 3.0) * (gu * ga.transpose());  // J x M
        for (int j = 0; j < J; ++j)
            for (int m = 0; m < M; ++m) {
                const double v = prod(j, m);
                for (int k = 0; k < 3; ++k) Js(j * M + m, tr[k]) += v;
            }
    }
    return Js;
}

Eigen::MatrixXd jac_contact(const CemSystem& system, const ForwardSolution& sol,
                            const ForwardSolution& adjoint) {
    check_dims(system, sol, adjoint);
    const TriMesh& mesh = system.mesh();
    const Eigen::VectorXd& z = system.contacts();
    const int M = system.electrode_count();
    const int J = static_cast<int>(sol.u.cols());
    Eigen::MatrixXd Jz = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M) * J, M);
    for (const auto& e : mesh.boundary) {
        if (e.label < 0) continue;
        const int l = e.label;
        const double L = (mesh.nodes[e.b] - mesh.nodes[e.a]).norm();
        const double w = L / (6.0 * z[l] * z[l]);
        for (int j = 0; j < J; ++j) {
            const double fa = sol.u(e.a, j) - sol.U(l, j);
            const double fb = sol.u(e.b, j) - sol.U(l, j);
            for (int m = 0; m < M; ++m) {
                const double ga = adjoint.u(e.a, m) - adjoint.U(l, m);
                const double gb = adjoint.u(e.b, m) - adjoint.U(l, m);
                Jz(j * M + m, l) += w * (2 * fa * ga + fa * gb + fb * ga + 2 * fb * gb);
            }
        }
    }
    return Jz;
}

Eigen::MatrixXd jac_electrode(const CemSystem& system, const ForwardSolution& sol,
                              const ForwardSolution& adjoint, const DiskElectrodeLayout& layout) {
    check_dims(system, sol, adjoint);
    const TriMesh& mesh = system.mesh();
    const Eigen::VectorXd& z = system.contacts();
    const int M = system.electrode_count();
    const int J = static_cast<int>(sol.u.cols());
    if (layout.count() != M) throw std::invalid_argument("layout size does not match mesh");
    if (static_cast<int>(mesh.electrode_endpoints.size()) != M)
        throw std::invalid_argument("mesh has no electrode endpoint nodes");
    Eigen::MatrixXd Je = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M) * J, 2 * M);
    for (int l = 0; l < M; ++l) {
        const auto [nm, np] = mesh.electrode_endpoints[l];
        if (nm < 0 || np < 0) throw std::invalid_argument("electrode endpoint is not a mesh node");
        const auto frame = disk_endpoint_frame(layout, l);
        if ((mesh.nodes[nm] - frame.minus).norm() > 1e-9 ||
            (mesh.nodes[np] - frame.plus).norm() > 1e-9)
            throw std::invalid_argument("electrode endpoint is not a mesh node");
        for (const auto param : {DiskShapeParam::Theta, DiskShapeParam::Alpha}) {
            const auto [vm, vp] = disk_boundary_velocity(layout, l, param);  // a.nu at x^-, x^+
            const int col = param == DiskShapeParam::Theta ? l : M + l;
            for (int j = 0; j < J; ++j) {
                const double dm = sol.U(l, j) - sol.u(nm, j);
                const double dp = sol.U(l, j) - sol.u(np, j);
                for (int m = 0; m < M; ++m) {
                    const double am = adjoint.U(l, m) - adjoint.u(nm, m);
                    const double ap = adjoint.U(l, m) - adjoint.u(np, m);
                    Je(j * M + m, col) = -(vm * dm * am + vp * dp * ap) / z[l];
                }
            }
        }
    }
    return Je;
}

JacobianBlocks compute_jacobians(const CemSystem& system, const ForwardSolution& sol,
                                 const DiskElectrodeLayout* layout) {
    const ForwardSolution adj = measurement_adjoint(system);
    JacobianBlocks b;
    b.sigma = jac_sigma(system, sol, adj);
    b.z = jac_contact(system, sol, adj);
    if (layout) b.e = jac_electrode(system, sol, adj, *layout);
    return b;
}

Eigen::MatrixXd fd_jacobian(const VectorMap& f, const Eigen::VectorXd& x0,
                            const std::vector<int>& components, const StepPolicy& policy) {
    std::vector<int> comps = components;
    if (comps.empty())
        for (int k = 0; k < x0.size(); ++k) comps.push_back(k);
    Eigen::MatrixXd out;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const int k = comps[c];
        if (k < 0 || k >= x0.size()) throw std::out_of_range("fd_jacobian component");
        const double h = policy.absolute ? policy.relative
                                         : policy.relative * std::max(std::abs(x0[k]), policy.floor);
        Eigen::VectorXd xp = x0, xm = x0;
        xp[k] += h;
        xm[k] -= h;
        const Eigen::VectorXd fp = f(xp);
        const Eigen::VectorXd fm = f(xm);
        if (c == 0) out.resize(fp.size(), static_cast<Eigen::Index>(comps.size()));
        out.col(static_cast<Eigen::Index>(c)) = (fp - fm) / (xp[k] - xm[k]);
    }
    return out;
}

Eigen::VectorXd relative_column_errors(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd,
                                       double zero_scale) {
    if (analytic.rows() != fd.rows() || analytic.cols() != fd.cols())
        throw std::invalid_argument("matrix shapes differ");
    Eigen::VectorXd out(fd.cols());
    for (Eigen::Index c = 0; c < fd.cols(); ++c) {
        const double ref = fd.col(c).cwiseAbs().maxCoeff();
        const double err = (analytic.col(c) - fd.col(c)).cwiseAbs().maxCoeff();
        out[c] = err / (ref > 0.0 ? ref : zero_scale);
    }
    return out;
}

double max_relative_column_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd,
                                 double zero_scale) {
    const Eigen::VectorXd e = relative_column_errors(analytic, fd, zero_scale);
    return e.size() ? e.maxCoeff() : 0.0;
}

bool same_topology(const TriMesh& a, const TriMesh& b) {
    if (a.node_count() != b.node_count() || a.triangles != b.triangles ||
        a.boundary.size() != b.boundary.size())
        return false;
    for (std::size_t i = 0; i < a.boundary.size(); ++i) {
        const auto& x = a.boundary[i];
        const auto& y = b.boundary[i];
        if (x.a != y.a || x.b != y.b || x.label != y.label) return false;
    }
    return true;
}

VectorMap disk_electrode_measurement_map(const RefinementSpec& spec, double radius,
                                         std::function<double(const Vec2&)> sigma,
                                         const Eigen::VectorXd& z, const CurrentBasis& basis,
                                         const TriMesh* reference) {
    return [=](const Eigen::VectorXd& shape) -> Eigen::VectorXd {
        const auto layout = DiskElectrodeLayout::from_shape_vector(radius, shape);
        const TriMesh mesh = build_disk_mesh(layout, spec);
        if (reference && !same_topology(mesh, *reference))
            throw std::runtime_error("perturbed layout changed the mesh topology");
        Eigen::VectorXd s(mesh.node_count());
        for (int i = 0; i < mesh.node_count(); ++i) s[i] = sigma(mesh.nodes[i]);
        const CemSystem sys(mesh, s, z);
        return stack_measurements(sys.solve(basis));
    };
}

JacobianCheckResult check_jacobians(const JacobianCheckSetup& setup) {
    const TriMesh mesh = build_disk_mesh(setup.layout, setup.mesh_spec);
    Eigen::VectorXd s(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) s[i] = setup.sigma(mesh.nodes[i]);
    const CemSystem sys(mesh, s, setup.z);
    const ForwardSolution sol = sys.solve(setup.basis);
    const ForwardSolution adj = measurement_adjoint(sys);
    const double sign = setup.flip_sign ? -1.0 : 1.0;
    const StepPolicy relative{setup.step, 1.0, false};

    JacobianCheckResult out;
    out.nodes = mesh.node_count();
    if (setup.check_sigma) {
        const Eigen::MatrixXd a = sign * jac_sigma(sys, sol, adj);
        const Eigen::MatrixXd f = fd_jacobian(
            [&](const Eigen::VectorXd& x) { return stack_measurements(CemSystem(mesh, x, setup.z).solve(setup.basis)); },
            s, {}, relative);
        out.sigma_columns = relative_column_errors(a, f);
    }
    if (setup.check_contact) {
        const Eigen::MatrixXd a = sign * jac_contact(sys, sol, adj);
        const Eigen::MatrixXd f = fd_jacobian(
            [&](const Eigen::VectorXd& x) { return stack_measurements(CemSystem(mesh, s, x).solve(setup.basis)); },
            setup.z, {}, relative);
        out.z_columns = relative_column_errors(a, f);
    }
    if (setup.check_electrode) {
        const Eigen::MatrixXd a = sign * jac_electrode(sys, sol, adj, setup.layout);
        const VectorMap map = disk_electrode_measurement_map(setup.mesh_spec, setup.layout.radius,
                                                             setup.sigma, setup.z, setup.basis, &mesh);
        const Eigen::MatrixXd f =
            fd_jacobian(map, setup.layout.shape_vector(), {}, {setup.step, 1.0, true});
        out.e_columns = relative_column_errors(a, f);
    }
    return out;
}

}  // namespace eitcem
