#include "eitcem/cem.hpp"

#include "oracles.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace eitcem;

namespace {

Eigen::VectorXd field(const TriMesh& mesh, const std::function<double(const Vec2&)>& f) {
    Eigen::VectorXd v(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) v[i] = f(mesh.nodes[i]);
    return v;
}

double max_asymmetry(const Eigen::SparseMatrix<double>& A) {
    const Eigen::MatrixXd D(A);
    return (D - D.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("current bases") {
    const auto ref = CurrentBasis::reference(5);
    CHECK(ref.pattern_count() == 4);
    CHECK(ref.patterns(0, 0) == 1.0);
    CHECK(ref.patterns(4, 0) == -1.0);
    CHECK(validate_current_basis(ref).ok);
    CHECK(validate_current_basis(CurrentBasis::adjacent(5)).ok);
    CurrentBasis bad = ref;
    bad.patterns(0, 0) = 2.0;
    CHECK_FALSE(validate_current_basis(bad).ok);
    CurrentBasis dependent = ref;
    dependent.patterns.col(1) = dependent.patterns.col(0);
    CHECK_FALSE(validate_current_basis(dependent).ok);
}

TEST_CASE("system matrix structure") {
    const auto lay = DiskElectrodeLayout::equally_spaced(6, 0.25);
    const TriMesh mesh = build_disk_mesh(lay, {0.3, 0.5});
    REQUIRE(mesh.node_count() <= 200);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh.node_count());
    const Eigen::VectorXd z = Eigen::VectorXd::Ones(6);
    const CemSystem sys(mesh, one, z);
    CHECK(max_asymmetry(sys.matrix()) < 1e-12);

    const CemSystem scaled(mesh, 2.0 * one, 0.5 * z);
    CHECK((Eigen::MatrixXd(scaled.stiffness()) - 2.0 * Eigen::MatrixXd(sys.stiffness())).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((Eigen::MatrixXd(scaled.matrix()) - 2.0 * Eigen::MatrixXd(sys.matrix())).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(sys.matrix())};
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    CHECK_THROWS_AS(CemSystem(mesh, -one, z), std::invalid_argument);
    CHECK_THROWS_AS(CemSystem(mesh, one, Eigen::VectorXd::Zero(6)), std::invalid_argument);
    CHECK_THROWS_AS(CemSystem(mesh, one, Eigen::VectorXd::Ones(5)), std::invalid_argument);
}

TEST_CASE("forward solve") {
    const int M = 8;
    const auto lay = DiskElectrodeLayout::equally_spaced(M, 0.2);
    const TriMesh mesh = build_disk_mesh(lay, {0.15, 0.5});
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh.node_count());
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(M, 0.3);

    SUBCASE("zero pattern gives the zero solution") {
        CurrentBasis b = CurrentBasis::reference(M);
        b.patterns.conservativeResize(M, M);
        b.patterns.col(M - 1).setZero();
        const auto sol = CemSystem(mesh, one, z).solve(b);
        CHECK(sol.u.col(M - 1).cwiseAbs().maxCoeff() == 0.0);
        CHECK(sol.U.col(M - 1).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::MatrixXd flux = flux_residual(sol, z, mesh);
        CHECK(flux.col(M - 1).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("rotating the pattern rotates the voltages") {
        // The interior nodes are not rotationally symmetric, so pattern 0 is solved on the
        // mesh of the layout rotated by one electrode spacing.
        CurrentBasis b0, b1;
        b0.patterns = Eigen::MatrixXd::Zero(M, 1);
        b0.patterns(0, 0) = 1.0;
        b0.patterns(3, 0) = -1.0;
        b1.patterns = Eigen::MatrixXd::Zero(M, 1);
        b1.patterns(1, 0) = 1.0;
        b1.patterns(4, 0) = -1.0;
        const CemSystem sys(mesh, one, z);
        const auto s1 = sys.solve(b1);
        const auto rot = DiskElectrodeLayout::equally_spaced(M, 0.2, 1.0, kTwoPi / M);
        const TriMesh rmesh = build_disk_mesh(rot, {0.15, 0.5});
        const auto sr = CemSystem(rmesh, Eigen::VectorXd::Ones(rmesh.node_count()), z).solve(b0);
        for (int m = 0; m < M; ++m) CHECK(std::abs(sr.U(m, 0) - s1.U((m + 1) % M, 0)) < 1e-9);
    }

    SUBCASE("scaling sigma and 1/z scales the solution") {
        const auto sigma = field(mesh, [](const Vec2& x) { return 1.0 + 0.5 * x.x() * x.x(); });
        const auto b = CurrentBasis::reference(M);
        const auto s1 = CemSystem(mesh, sigma, z).solve(b);
        const double t = 3.7;
        const auto st = CemSystem(mesh, t * sigma, z / t).solve(b);
        CHECK((st.U - s1.U / t).cwiseAbs().maxCoeff() < 1e-10 * s1.U.cwiseAbs().maxCoeff());
        CHECK((st.u - s1.u / t).cwiseAbs().maxCoeff() < 1e-10 * s1.u.cwiseAbs().maxCoeff());
    }

    SUBCASE("flux residual and gauge") {
        const auto sigma = field(mesh, [](const Vec2& x) { return 2.0 + std::sin(3 * x.x()) * x.y(); });
        Eigen::VectorXd zz(M);
        for (int m = 0; m < M; ++m) zz[m] = 0.05 + 0.1 * m;
        const auto b = CurrentBasis::adjacent(M);
        const CemSystem sys(mesh, sigma, zz);
        const auto sol = sys.solve(b);
        CHECK(sys.last_residual() <= 1e-10);
        const Eigen::MatrixXd flux = flux_residual(sol, zz, mesh);
        for (int j = 0; j < b.pattern_count(); ++j) {
            CHECK(flux.col(j).cwiseAbs().maxCoeff() <= 1e-8 * b.patterns.col(j).norm());
            CHECK(std::abs(flux.col(j).sum()) < 1e-12);
            CHECK(std::abs(sol.U.col(j).sum()) < 1e-12);
        }
        // Source electrode sits above the sink.
        for (int j = 0; j < b.pattern_count(); ++j) CHECK(sol.U(j, j) > sol.U(j + 1, j));
    }
}

TEST_CASE("stacking") {
    ForwardSolution sol;
    sol.U = Eigen::MatrixXd::Zero(3, 2);
    CHECK(stack_measurements(sol).size() == 6);
    CHECK(stack_measurements(sol).cwiseAbs().maxCoeff() == 0.0);
    sol.U << 1, 4, 2, 5, -3, -9;
    const Eigen::VectorXd s = stack_measurements(sol);
    CHECK(s[3] == 4.0);
    CHECK(unstack_measurements(s, 3) == sol.U);
    CHECK_THROWS(unstack_measurements(Eigen::VectorXd::Zero(5), 3));
}

TEST_CASE("quotient norm") {
    CHECK(quotient_norm(Eigen::VectorXd::Constant(7, 3.25)) == 0.0);
    Eigen::VectorXd v(2);
    v << 1, -1;
    CHECK(quotient_norm(v) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    std::mt19937_64 rng(23);
    std::normal_distribution<double> N;
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd r(12);
        for (auto& x : r) x = N(rng) + 5.0;
        const double q = quotient_norm(r);
        CHECK(std::abs(q - oracle::quotient_norm_grid(r)) < 1e-6);
        CHECK(std::abs(q - oracle::quotient_norm_search(r)) < 1e-10);
    }
}

TEST_CASE("reciprocity and mesh convergence") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 3; ++t) {
        const int M = 5 + t;
        const auto lay = DiskElectrodeLayout::equally_spaced(M, 0.15 + 0.1 * U(rng), 1.0, U(rng));
        const TriMesh mesh = build_disk_mesh(lay, {0.12 + 0.05 * U(rng), 0.5});
        const double a = U(rng), b = U(rng);
        const auto sigma = field(mesh, [&](const Vec2& x) { return 1.0 + a * x.x() + b * x.y() * x.y(); });
        Eigen::VectorXd z(M);
        for (auto& x : z) x = 0.05 + U(rng);
        const auto basis = CurrentBasis::reference(M);
        const auto sol = CemSystem(mesh, sigma, z).solve(basis);
        const Eigen::MatrixXd G = basis.patterns.transpose() * sol.U;
        CHECK((G - G.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * G.cwiseAbs().maxCoeff());
    }

    const int M = 6;
    const auto lay = DiskElectrodeLayout::equally_spaced(M, 0.2);
    auto smooth = [](const Vec2& x) { return 1.0 + 0.4 * std::cos(2 * x.x()) * x.y(); };
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(M, 0.2);
    std::vector<Eigen::MatrixXd> Us;
    for (double h : {0.2, 0.1, 0.05}) {
        const TriMesh mesh = build_disk_mesh(lay, {h, 0.5});
        Us.push_back(CemSystem(mesh, field(mesh, smooth), z).solve(CurrentBasis::reference(M)).U);
    }
    CHECK((Us[2] - Us[1]).norm() < (Us[1] - Us[0]).norm());
}
