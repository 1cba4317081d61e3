#pragma once

#include "eitcem/jacobian.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace eitcem {

// --- priors and noise ------------------------------------------------------------------

struct PriorSpec {
    double eta1_sq = 0.5;  // pointwise conductivity variance
    double lambda = 1.0;   // correlation length
    Eigen::VectorXd z_mean;  // defaults to ones(M) when empty
    double eta2 = 10.0;
    DiskElectrodeLayout e_mean;
    double eta3 = 0.125;
};

ValidationReport validate_prior_spec(const PriorSpec& spec);

/// Gamma_ij = eta1^2 exp(-|x_i - x_j|^2 / (2 lambda^2)).
Eigen::MatrixXd squared_exponential_covariance(const std::vector<Vec2>& points, double eta1_sq,
                                               double lambda);

/// Lower Cholesky factor C of Gamma + jitter*I, so that L = C^{-1} satisfies
/// L^T L = (Gamma + jitter I)^{-1}. Jitter starts at 1e-8*scale and grows by 10x.
struct CovarianceFactor {
    Eigen::MatrixXd C;
    double jitter = 0.0;

    /// |L v|^2 = v^T Gamma^{-1} v.
    double weighted_norm2(const Eigen::VectorXd& v) const;
    /// L v.
    Eigen::VectorXd apply_L(const Eigen::VectorXd& v) const;
    /// L^T v.
    Eigen::VectorXd apply_Lt(const Eigen::VectorXd& v) const;
    /// Explicit L (lower triangular); for tests and small problems.
    Eigen::MatrixXd L() const;
};

CovarianceFactor factor_covariance(const Eigen::MatrixXd& gamma, double scale);
CovarianceFactor isotropic_factor(int n, double eta);

struct PriorFactors {
    CovarianceFactor sigma, z, e;
};

PriorFactors build_priors(const PriorSpec& spec, const TriMesh& reference);

struct NoiseSpec {
    enum class Mode { Uniform, PerComponent };
    Mode mode = Mode::Uniform;
    double eta0 = 1e-3;       // uniform: std = eta0 * max_ij |U_i - U_j|
    double relative = 0.01;   // per-component: variance relative^2 |U|^2 ...
    double range = 0.001;     // ... + range^2 max_np |U_n - U_p|^2 within the pattern
};

ValidationReport validate_noise_spec(const NoiseSpec& spec);

/// Standard deviation per stacked component for voltages U (M x patterns).
Eigen::VectorXd noise_std(const NoiseSpec& spec, const Eigen::MatrixXd& U);

// --- generic Gauss-Newton pieces ---------------------------------------------------------

/// One block of the compound variable with its prior factor.
struct PriorBlock {
    int offset = 0;
    const CovarianceFactor* factor = nullptr;
};

/// Linearized problem at b: minimize |L0 (J d - r)|^2 + |L (d - (b - b0))|^2 over d, where
/// r = U(b) - V and L0 = diag(1 / noise_std).
struct GaussNewtonSystem {
    Eigen::MatrixXd J;
    Eigen::VectorXd residual;
    Eigen::VectorXd noise_std;
    Eigen::VectorXd b_minus_b0;
    std::vector<PriorBlock> blocks;  // must tile 0..J.cols()
    /// Linear equality constraints sum(coef * delta[index]) = value on the step.
    struct Constraint {
        std::vector<std::pair<int, double>> terms;
        double value = 0.0;
    };
    std::vector<Constraint> constraints;
};

struct StepResult {
    Eigen::VectorXd delta;         // the new iterate is b - q delta
    double normal_residual = 0.0;  // |A^T (A delta - y)| / |A^T y|
};

/// Exact least-squares step of the stacked system [L0 J; L] delta ~ [L0 r; L (b - b0)].
/// Solved through the change of variables delta = C w + (b - b0), which turns the
/// problem into min |K w - s|^2 + |w|^2 with K = L0 J C; w = K^T (K K^T + I)^{-1} s.
StepResult gn_step(const GaussNewtonSystem& sys);

struct LineSearchResult {
    bool accepted = false;
    double q = 0.0;
    Eigen::VectorXd b;
    double F = 0.0;
};

/// Candidate evaluator: may project the candidate in place; returns nullopt when the
/// candidate is infeasible.
using CandidateObjective = std::function<std::optional<double>(Eigen::VectorXd&)>;

/// Tries q = 1, 1/2, ..., 2^-max_halvings and accepts the first F(b - q delta) < F(b).
LineSearchResult line_search(const Eigen::VectorXd& b, double Fb, const Eigen::VectorXd& delta,
                             const CandidateObjective& objective, int max_halvings = 8);

/// Golden-section minimization of f on [lo, hi] until the bracket is below tol.
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol);

// --- the reconstruction problem ---------------------------------------------------------

enum class ReconstructionMode { Fixed, Full, FixedZ };

ReconstructionMode parse_reconstruction_mode(const std::string& name);
std::string to_string(ReconstructionMode mode);

struct ObjectiveTerms {
    double data = 0.0, sigma = 0.0, z = 0.0, e = 0.0;
    double total() const { return data + sigma + z + e; }
};

struct IterateState {
    Eigen::VectorXd sigma;  // nodal, reference mesh
    Eigen::VectorXd z;
    DiskElectrodeLayout layout;
    ObjectiveTerms F;
    int iteration = 0;
};

struct IterationRecord {
    int iteration = 0;
    ObjectiveTerms F;
    double q = 0.0;
    double sigma_norm = 0.0, z_norm = 0.0, e_norm = 0.0;
    double normal_residual = 0.0;
    double sigma_min = 0.0, z_min = 0.0;
    bool layout_valid = true;
};

struct ReconstructionSetup {
    ReconstructionMode mode = ReconstructionMode::Full;
    RefinementSpec mesh_spec;   // used for the reference mesh and every solve mesh
    CurrentBasis basis;
    Eigen::VectorXd data;       // stacked measurements V
    Eigen::VectorXd noise_std;  // per component
    PriorSpec prior;
    Eigen::VectorXd z_fixed;    // FixedZ: contacts held at these values
    std::optional<DiskElectrodeLayout> layout_fixed;  // Fixed: defaults to prior.e_mean
    int max_iterations = 50;
    double relative_tolerance = 1e-6;
    int max_halvings = 8;
    double sigma_init = 0.0;    // <= 0 selects the homogeneous estimate
    /// Fit a common contact value together with tau in the homogeneous estimate instead of
    /// holding contacts at their prior mean; the iteration then starts from that value.
    /// The contact prior mean is unaffected.
    bool joint_contact_init = true;
};

struct HomogeneousEstimate {
    double tau = 1.0;
    double contact = 0.0;
};

struct ReconstructionResult {
    IterateState state;
    std::vector<IterationRecord> log;
    double tau = 0.0;  // homogeneous estimate
    double contact_start = 0.0;  // common starting contact value, 0 if the prior mean was used
    std::string stop_reason;
    bool failed_at_start = false;  // line search failed at the first iteration
};

/// Forward model, objective and Gauss-Newton loop for one mode. Conductivity lives on a
/// static reference mesh. When electrodes move, each evaluation builds a solve mesh for
/// the current layout and carries sigma over by P1 interpolation.
class MapProblem {
public:
    explicit MapProblem(ReconstructionSetup setup);

    const ReconstructionSetup& setup() const { return setup_; }
    const TriMesh& reference_mesh() const { return reference_; }
    const PriorFactors& priors() const { return priors_; }
    int electrode_count() const { return M_; }
    bool estimates_z() const { return setup_.mode != ReconstructionMode::FixedZ; }
    bool estimates_e() const { return setup_.mode != ReconstructionMode::Fixed; }

    /// Argmin over tau of |L0 (U(tau 1, z) - V)|^2 with the prior-mean layout. z is the
    /// fixed contact vector in FixedZ mode, the prior mean without joint_contact_init, and
    /// otherwise a common value minimized jointly with tau.
    double homogeneous_init() const;
    /// tau together with the common contact value of the joint fit (0 when not fitted).
    HomogeneousEstimate homogeneous_estimate() const;

    /// Sets the conductivity prior mean to tau * ones.
    void set_sigma_prior_mean(double tau) { tau_ = tau; }
    double sigma_prior_mean() const { return tau_; }

    /// b0: prior means, or the fixed values for parameters that are not estimated.
    IterateState prior_state() const;

    ObjectiveTerms objective(const IterateState& state) const;
    /// Stacked U(b).
    Eigen::VectorXd predict(const IterateState& state) const;

    Eigen::VectorXd pack(const IterateState& state) const;
    IterateState unpack(const Eigen::VectorXd& b) const;
    /// Clamps sigma, z and alpha to their bounds. Returns false for an invalid layout.
    bool project(Eigen::VectorXd& b) const;
    /// Lower bounds in pack order; -inf for angles.
    Eigen::VectorXd lower_bounds() const;

    /// Constrains the step so that parameters the line search would clamp even at its
    /// smallest q are held in place, and no gap between neighbouring electrodes shrinks by more than half.
    /// Recomputes `step` when constraints are added.
    void add_step_constraints(const IterateState& state, GaussNewtonSystem& sys,
                              StepResult& step) const;

    /// Linearization at `state` (Jacobian columns in pack order).
    GaussNewtonSystem linearize(const IterateState& state) const;

    /// Damped Gauss-Newton iteration from b0. Sets the conductivity prior mean to the homogeneous estimate
    /// unless `sigma_init` is positive.
    ReconstructionResult run(const std::function<void(const IterationRecord&)>& on_iteration = {});

private:
    struct Evaluation;
    Evaluation evaluate(const IterateState& state) const;
    ObjectiveTerms terms(const IterateState& state, const Eigen::VectorXd& predicted) const;

    ReconstructionSetup setup_;
    int M_ = 0;
    DiskElectrodeLayout base_layout_;
    TriMesh reference_;
    PriorFactors priors_;
    double tau_ = 1.0;
};

std::string iteration_log_csv(const std::vector<IterationRecord>& log);

}  // namespace eitcem
