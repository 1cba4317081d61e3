#include "eitcem/cem.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace eitcem {

CurrentBasis CurrentBasis::reference(int M) {
    CurrentBasis b;
    b.patterns = Eigen::MatrixXd::Zero(M, M - 1);
    for (int j = 0; j < M - 1; ++j) {
        b.patterns(j, j) = 1.0;
        b.patterns(M - 1, j) = -1.0;
    }
    return b;
}

CurrentBasis CurrentBasis::adjacent(int M) {
    CurrentBasis b;
    b.patterns = Eigen::MatrixXd::Zero(M, M - 1);
    for (int j = 0; j < M - 1; ++j) {
        b.patterns(j, j) = 1.0;
        b.patterns(j + 1, j) = -1.0;
    }
    return b;
}

CurrentBasis CurrentBasis::measurement(int M) {
    CurrentBasis b;
    b.patterns = Eigen::MatrixXd::Identity(M, M).array() - 1.0 / M;
    return b;
}

ValidationReport validate_current_basis(const CurrentBasis& basis) {
    ValidationReport rep;
    const auto& P = basis.patterns;
    for (int j = 0; j < P.cols(); ++j) {
        const double scale = std::max(1.0, P.col(j).cwiseAbs().maxCoeff());
        if (std::abs(P.col(j).sum()) > 1e-12 * scale * P.rows())
            rep.fail("pattern " + std::to_string(j + 1) + " does not sum to zero");
    }
    if (P.cols() > 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(P);
        lu.setThreshold(1e-10);
        if (lu.rank() != P.cols()) rep.fail("patterns are linearly dependent");
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct ElectrodeMass {
    // Edge contributions of int_{E_m} phi_i phi_j and int_{E_m} phi_i.
    std::vector<Eigen::Triplet<double>> mass;
    std::vector<std::vector<std::pair<int, double>>> load;  // per electrode: (node, int phi)
    std::vector<double> length;
};

ElectrodeMass electrode_mass(const TriMesh& mesh, const Eigen::VectorXd& z) {
    ElectrodeMass em;
    const int M = mesh.electrode_count;
    em.load.resize(M);
    em.length.assign(M, 0.0);
    for (const auto& e : mesh.boundary) {
        if (e.label < 0) continue;
        const double L = (mesh.nodes[e.b] - mesh.nodes[e.a]).norm();
        const double w = 1.0 / z[e.label];
        em.mass.emplace_back(e.a, e.a, w * L / 3.0);
        em.mass.emplace_back(e.b, e.b, w * L / 3.0);
        em.mass.emplace_back(e.a, e.b, w * L / 6.0);
        em.mass.emplace_back(e.b, e.a, w * L / 6.0);
        em.load[e.label].emplace_back(e.a, 0.5 * L);
        em.load[e.label].emplace_back(e.b, 0.5 * L);
        em.length[e.label] += L;
    }
    return em;
}

}  // namespace

CemSystem::CemSystem(const TriMesh& mesh, const Eigen::VectorXd& sigma, const Eigen::VectorXd& z)
    : mesh_(&mesh), sigma_(sigma), z_(z), M_(mesh.electrode_count) {
    const int N = mesh.node_count();
    if (sigma.size() != N) throw std::invalid_argument("conductivity size does not match mesh");
    if (z.size() != M_) throw std::invalid_argument("contact vector size does not match mesh");
    if (M_ < 2) throw std::invalid_argument("mesh must carry at least 2 electrodes");
    for (int i = 0; i < N; ++i)
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
            throw std::invalid_argument("conductivity must be positive (node " +
                                        std::to_string(i) + ")");
    for (int m = 0; m < M_; ++m)
        if (!(z[m] > 0.0) || !std::isfinite(z[m]))
            throw std::invalid_argument("contact resistance must be positive (electrode " +
                                        std::to_string(m + 1) + ")");

    std::vector<Eigen::Triplet<double>> kt;
    kt.reserve(9 * mesh.triangles.size());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec2& p0 = mesh.nodes[tr[0]];
        const Vec2& p1 = mesh.nodes[tr[1]];
        const Vec2& p2 = mesh.nodes[tr[2]];
        const double area = mesh.signed_area(t);
        // grad phi_k = rot90(opposite edge) / (2 area)
        const std::array<Vec2, 3> g{Vec2(p1.y() - p2.y(), p2.x() - p1.x()),
                                    Vec2(p2.y() - p0.y(), p0.x() - p2.x()),
                                    Vec2(p0.y() - p1.y(), p1.x() - p0.x())};
        const double s = (sigma[tr[0]] + sigma[tr[1]] + sigma[tr[2]]) / 3.0;
        const double c = s / (4.0 * area);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) kt.emplace_back(tr[a], tr[b], c * g[a].dot(g[b]));
    }
    K_.resize(N, N);
    K_.setFromTriplets(kt.begin(), kt.end());

    Q_ = Eigen::MatrixXd::Zero(M_, M_ - 1);
    for (int j = 0; j < M_ - 1; ++j) {
        Q_.col(j).setConstant(-1.0 / M_);
        Q_(j, j) += 1.0;
    }

    const auto em = electrode_mass(mesh, z);
    for (int m = 0; m < M_; ++m)
        if (em.length[m] <= 0.0)
            throw std::invalid_argument("electrode " + std::to_string(m + 1) +
                                        " has no boundary edges");

    // Coupling A_uU(i, m) = -z_m^{-1} int_{E_m} phi_i, reduced to A_uU Q.
    std::vector<Eigen::Triplet<double>> at;
    at.reserve(kt.size() + em.mass.size() + 4 * M_ * M_);
    for (const auto& t : kt) at.push_back(t);
    for (const auto& t : em.mass) at.push_back(t);
    {
        // Accumulate per node the vector A_uU(i, :).
        std::vector<std::vector<double>> rows;
        std::vector<int> node_slot(N, -1);
        std::vector<int> slot_node;
        for (int m = 0; m < M_; ++m)
            for (const auto& [i, w] : em.load[m]) {
                if (node_slot[i] < 0) {
                    node_slot[i] = static_cast<int>(slot_node.size());
                    slot_node.push_back(i);
                    rows.emplace_back(M_, 0.0);
                }
                rows[node_slot[i]][m] += -w / z[m];
            }
        for (std::size_t s = 0; s < slot_node.size(); ++s) {
            const int i = slot_node[s];
            double mean = 0.0;
            for (int m = 0; m < M_; ++m) mean += rows[s][m];
            mean /= M_;
            for (int j = 0; j < M_ - 1; ++j) {
                const double v = rows[s][j] - mean;
                if (v != 0.0) {
                    at.emplace_back(i, N + j, v);
                    at.emplace_back(N + j, i, v);
                }
            }
        }
    }
    Eigen::MatrixXd Auu_e = Eigen::MatrixXd::Zero(M_, M_);
    for (int m = 0; m < M_; ++m) Auu_e(m, m) = em.length[m] / z[m];
    const Eigen::MatrixXd Acc = Q_.transpose() * Auu_e * Q_;
    for (int a = 0; a < M_ - 1; ++a)
        for (int b = 0; b < M_ - 1; ++b) at.emplace_back(N + a, N + b, Acc(a, b));

    A_.resize(N + M_ - 1, N + M_ - 1);
    A_.setFromTriplets(at.begin(), at.end());

    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->compute(A_);
    if (ldlt_->info() != Eigen::Success) throw SolverError("CEM system factorization failed");
    if ((ldlt_->vectorD().array() <= 0.0).any())
        throw SolverError("CEM system is not positive definite");
}

ForwardSolution CemSystem::solve(const CurrentBasis& basis) const {
    if (basis.electrode_count() != M_)
        throw std::invalid_argument("current basis size does not match electrode count");
    const int N = node_count();
    const int J = basis.pattern_count();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(N + M_ - 1, J);
    rhs.bottomRows(M_ - 1) = Q_.transpose() * basis.patterns;

    Eigen::MatrixXd x = ldlt_->solve(rhs);
    last_residual_ = 0.0;
    for (int j = 0; j < J; ++j) {
        const double bn = rhs.col(j).norm();
        if (bn == 0.0) {
            x.col(j).setZero();
            continue;
        }
        Eigen::VectorXd r = rhs.col(j) - A_ * x.col(j);
        for (int it = 0; it < 4 && r.norm() > 1e-14 * bn; ++it) {
            x.col(j) += ldlt_->solve(r);
            r = rhs.col(j) - A_ * x.col(j);
        }
        const double rel = r.norm() / bn;
        last_residual_ = std::max(last_residual_, rel);
        if (!(rel <= 1e-10))
            throw SolverError("CEM solve residual " + std::to_string(rel) + " above 1e-10");
    }
    ForwardSolution sol;
    sol.u = x.topRows(N);
    sol.U = Q_ * x.bottomRows(M_ - 1);
    sol.basis = basis;
    return sol;
}

ForwardSolution solve_forward(const CemSystem& system, const CurrentBasis& basis) {
    return system.solve(basis);
}

Eigen::VectorXd stack_measurements(const ForwardSolution& sol) {
    const Eigen::Index M = sol.U.rows(), J = sol.U.cols();
    Eigen::VectorXd out(M * J);
    for (Eigen::Index j = 0; j < J; ++j) out.segment(j * M, M) = sol.U.col(j);
    return out;
}

Eigen::MatrixXd unstack_measurements(const Eigen::VectorXd& stacked, int M) {
    if (M <= 0 || stacked.size() % M != 0)
        throw std::invalid_argument("stacked vector length is not a multiple of M");
    const Eigen::Index J = stacked.size() / M;
    Eigen::MatrixXd U(M, J);
    for (Eigen::Index j = 0; j < J; ++j) U.col(j) = stacked.segment(j * M, M);
    return U;
}

double quotient_norm(const Eigen::VectorXd& V) {
    if (V.size() == 0) return 0.0;
    return (V.array() - V.mean()).matrix().norm();
}

double electrode_integral(const TriMesh& mesh, int m, const Eigen::VectorXd& f) {
    double s = 0.0;
    for (const auto& e : mesh.boundary) {
        if (e.label != m) continue;
        const double L = (mesh.nodes[e.b] - mesh.nodes[e.a]).norm();
        s += 0.5 * L * (f[e.a] + f[e.b]);
    }
    return s;
}

Eigen::MatrixXd flux_residual(const ForwardSolution& sol, const Eigen::VectorXd& z,
                              const TriMesh& mesh) {
    const int M = static_cast<int>(sol.U.rows());
    const int J = static_cast<int>(sol.U.cols());
    Eigen::MatrixXd res(M, J);
    std::vector<double> len(M, 0.0);
    for (const auto& e : mesh.boundary)
        if (e.label >= 0) len[e.label] += (mesh.nodes[e.b] - mesh.nodes[e.a]).norm();
    for (int j = 0; j < J; ++j) {
        const Eigen::VectorXd u = sol.u.col(j);
        for (int m = 0; m < M; ++m) {
            const double drop = sol.U(m, j) * len[m] - electrode_integral(mesh, m, u);
            res(m, j) = sol.basis.patterns(m, j) - drop / z[m];
        }
    }
    return res;
}

}  // namespace eitcem
