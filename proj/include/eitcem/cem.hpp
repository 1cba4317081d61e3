#pragma once

#include "eitcem/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <memory>
#include <stdexcept>

namespace eitcem {

/// Lower bound enforced on conductivities and contact resistances.
inline constexpr double kMinConductivity = 1e-4;
inline constexpr double kMinContact = 1e-4;

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Net current patterns, one zero-sum column per pattern (M x (M-1)).
struct CurrentBasis {
    Eigen::MatrixXd patterns;

    int electrode_count() const { return static_cast<int>(patterns.rows()); }
    int pattern_count() const { return static_cast<int>(patterns.cols()); }

    /// I^(j) = e_j - e_M.
    static CurrentBasis reference(int M);
    /// I^(j) = e_j - e_{j+1}.
    static CurrentBasis adjacent(int M);
    /// Extraction patterns e_m - (1/M) 1, m = 1..M, used to read mean-free voltages.
    static CurrentBasis measurement(int M);
};

ValidationReport validate_current_basis(const CurrentBasis& basis);

/// Electrode voltages and interior potentials for every pattern of a basis. Column j
/// belongs to pattern j; U columns are mean-free.
struct ForwardSolution {
    Eigen::MatrixXd u;  // nodes x patterns
    Eigen::MatrixXd U;  // electrodes x patterns
    CurrentBasis basis;
};

/// Galerkin system of the complete electrode model on a P1 mesh. Unknowns are the nodal
/// potential and the coefficients of U in the zero-sum basis {e_j - (1/M) 1},
/// j = 1..M-1, which removes the constant kernel. Element conductivity is the mean of
/// the three nodal values.
class CemSystem {
public:
    CemSystem(const TriMesh& mesh, const Eigen::VectorXd& sigma, const Eigen::VectorXd& z);

    const TriMesh& mesh() const { return *mesh_; }
    const Eigen::VectorXd& sigma() const { return sigma_; }
    const Eigen::VectorXd& contacts() const { return z_; }
    int electrode_count() const { return M_; }
    int node_count() const { return mesh_->node_count(); }

    const Eigen::SparseMatrix<double>& matrix() const { return A_; }
    /// Stiffness part sum_T sigma_T int grad phi_i . grad phi_j only.
    const Eigen::SparseMatrix<double>& stiffness() const { return K_; }
    /// M x (M-1) zero-sum basis.
    const Eigen::MatrixXd& zero_sum_basis() const { return Q_; }

    /// Solves every pattern of `basis` with the stored factorization.
    ForwardSolution solve(const CurrentBasis& basis) const;

    /// Relative residual of the last solve (max over right-hand sides).
    double last_residual() const { return last_residual_; }

private:
    const TriMesh* mesh_;
    Eigen::VectorXd sigma_, z_;
    int M_;
    Eigen::SparseMatrix<double> A_, K_;
    Eigen::MatrixXd Q_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
    mutable double last_residual_ = 0.0;
};

ForwardSolution solve_forward(const CemSystem& system, const CurrentBasis& basis);

/// Stacks [U^(1); ...; U^(J)].
Eigen::VectorXd stack_measurements(const ForwardSolution& sol);
Eigen::MatrixXd unstack_measurements(const Eigen::VectorXd& stacked, int M);

/// inf_c |V - c 1|.
double quotient_norm(const Eigen::VectorXd& V);

/// I_m - z_m^{-1} int_{E_m} (U_m - u) dS per electrode (rows) and pattern (columns).
Eigen::MatrixXd flux_residual(const ForwardSolution& sol, const Eigen::VectorXd& z,
                              const TriMesh& mesh);

/// int_{E_m} f dS for a nodal P1 field f.
double electrode_integral(const TriMesh& mesh, int m, const Eigen::VectorXd& f);

}  // namespace eitcem
