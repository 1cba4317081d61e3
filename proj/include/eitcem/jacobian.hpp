#pragma once

#include "eitcem/cem.hpp"

#include <functional>
#include <vector>

namespace eitcem {

/// Derivatives of the stacked measurement vector. Row j*M + m is electrode m of pattern j.
/// Je columns are theta_1..theta_M followed by alpha_1..alpha_M.
struct JacobianBlocks {
    Eigen::MatrixXd sigma;  // M(M-1) x nodes
    Eigen::MatrixXd z;      // M(M-1) x M
    Eigen::MatrixXd e;      // M(M-1) x 2M
};

/// Solutions for the extraction patterns e_m - (1/M) 1. Pairing a forward solution with
/// these gives the mean-free voltage rows.
ForwardSolution measurement_adjoint(const CemSystem& system);

Eigen::MatrixXd jac_sigma(const CemSystem& system, const ForwardSolution& sol,
                          const ForwardSolution& adjoint);
Eigen::MatrixXd jac_contact(const CemSystem& system, const ForwardSolution& sol,
                            const ForwardSolution& adjoint);
/// Requires the electrode endpoints of `layout` to be mesh nodes.
Eigen::MatrixXd jac_electrode(const CemSystem& system, const ForwardSolution& sol,
                              const ForwardSolution& adjoint, const DiskElectrodeLayout& layout);

/// All three blocks. `layout` may be null, in which case `e` is left empty.
JacobianBlocks compute_jacobians(const CemSystem& system, const ForwardSolution& sol,
                                 const DiskElectrodeLayout* layout);

// --- finite-difference oracle ----------------------------------------------------------

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct StepPolicy {
    double relative = 1e-5;  // step = relative * max(|x_k|, floor)
    double floor = 1.0;
    bool absolute = false;   // use `relative` as an absolute step instead
};

/// Central differences of `f` at `x0` for the listed components (all when empty).
Eigen::MatrixXd fd_jacobian(const VectorMap& f, const Eigen::VectorXd& x0,
                            const std::vector<int>& components = {},
                            const StepPolicy& policy = {});

/// Per column: max |a - f| / max |f|. Columns whose reference is identically zero compare
/// |a| against `zero_scale`.
Eigen::VectorXd relative_column_errors(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd,
                                       double zero_scale = 1.0);

/// Maximum of relative_column_errors.
double max_relative_column_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd,
                                 double zero_scale = 1.0);

/// Measurement map over the disk electrode shape vector (theta; alpha). Every call
/// regenerates the mesh with `spec`; `sigma` is evaluated at the new nodes. When
/// `reference` is given, the call throws if the new mesh topology differs from it.
VectorMap disk_electrode_measurement_map(const RefinementSpec& spec, double radius,
                                         std::function<double(const Vec2&)> sigma,
                                         const Eigen::VectorXd& z, const CurrentBasis& basis,
                                         const TriMesh* reference = nullptr);

/// Same triangles and boundary labels; node positions may differ.
bool same_topology(const TriMesh& a, const TriMesh& b);

// --- analytic vs FD comparison on a disk ------------------------------------------------

struct JacobianCheckSetup {
    DiskElectrodeLayout layout;
    RefinementSpec mesh_spec{0.25, 0.5};
    std::function<double(const Vec2&)> sigma;
    Eigen::VectorXd z;
    CurrentBasis basis;
    double step = 1e-5;  // relative for sigma and z, absolute (radians) for the shape
    bool check_sigma = true, check_contact = true, check_electrode = true;
    bool flip_sign = false;  // negates the analytic blocks; mutation check for the gate
};

/// Per-column relative errors; empty for blocks that were not checked.
struct JacobianCheckResult {
    int nodes = 0;
    Eigen::VectorXd sigma_columns, z_columns, e_columns;
};

/// Builds the disk mesh, computes the analytic blocks and compares them with central
/// differences. The shape FD remeshes at every step and requires unchanged topology.
JacobianCheckResult check_jacobians(const JacobianCheckSetup& setup);

}  // namespace eitcem
