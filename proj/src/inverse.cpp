#include "eitcem/inverse.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <limits>
#include <numeric>
#include <cmath>
#include <memory>
#include <sstream>

namespace eitcem {

ValidationReport validate_prior_spec(const PriorSpec& spec) {
    ValidationReport rep;
    if (!(spec.eta1_sq > 0.0)) rep.fail("eta1_sq must be positive");
    if (!(spec.lambda > 0.0)) rep.fail("lambda must be positive");
    if (!(spec.eta2 > 0.0)) rep.fail("eta2 must be positive");
    if (!(spec.eta3 > 0.0)) rep.fail("eta3 must be positive");
    if (spec.z_mean.size() > 0 && spec.z_mean.size() != spec.e_mean.count())
        rep.fail("z_mean length differs from the electrode count");
    for (Eigen::Index m = 0; m < spec.z_mean.size(); ++m)
        if (!(spec.z_mean[m] > 0.0)) rep.fail("z_mean entries must be positive");
    const auto lay = validate_disk_layout(spec.e_mean);
    for (const auto& v : lay.violations) rep.fail("prior layout: " + v);
    return rep;
}

Eigen::MatrixXd squared_exponential_covariance(const std::vector<Vec2>& points, double eta1_sq,
                                               double lambda) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd G(n, n);
    const double inv = 1.0 / (2.0 * lambda * lambda);
    for (Eigen::Index i = 0; i < n; ++i) {
        G(i, i) = eta1_sq;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = eta1_sq * std::exp(-(points[i] - points[j]).squaredNorm() * inv);
            G(i, j) = v;
            G(j, i) = v;
        }
    }
    return G;
}

double CovarianceFactor::weighted_norm2(const Eigen::VectorXd& v) const {
    return apply_L(v).squaredNorm();
}

Eigen::VectorXd CovarianceFactor::apply_L(const Eigen::VectorXd& v) const {
    return C.triangularView<Eigen::Lower>().solve(v);
}

Eigen::VectorXd CovarianceFactor::apply_Lt(const Eigen::VectorXd& v) const {
    return C.transpose().triangularView<Eigen::Upper>().solve(v);
}

Eigen::MatrixXd CovarianceFactor::L() const {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(C.rows(), C.cols());
    return C.triangularView<Eigen::Lower>().solve(I);
}

CovarianceFactor factor_covariance(const Eigen::MatrixXd& gamma, double scale) {
    const Eigen::Index n = gamma.rows();
    CovarianceFactor f;
    double jitter = 1e-8 * scale;
    for (int attempt = 0; attempt < 8; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd G = gamma;
        G.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd C = llt.matrixL();
        if (!(C.diagonal().array() > 0.0).all() || !C.allFinite()) continue;
        f.C = std::move(C);
        f.jitter = jitter;
        return f;
    }
    throw SolverError("covariance factorization failed after jitter escalation (n = " +
                      std::to_string(n) + ")");
}

CovarianceFactor isotropic_factor(int n, double eta) {
    CovarianceFactor f;
    f.C = eta * Eigen::MatrixXd::Identity(n, n);
    return f;
}

PriorFactors build_priors(const PriorSpec& spec, const TriMesh& reference) {
    const auto rep = validate_prior_spec(spec);
    if (!rep.ok) throw std::invalid_argument(rep.summary());
    PriorFactors p;
    p.sigma = factor_covariance(
        squared_exponential_covariance(reference.nodes, spec.eta1_sq, spec.lambda), spec.eta1_sq);
    p.z = isotropic_factor(spec.e_mean.count(), spec.eta2);
    p.e = isotropic_factor(2 * spec.e_mean.count(), spec.eta3);
    return p;
}

ValidationReport validate_noise_spec(const NoiseSpec& spec) {
    ValidationReport rep;
    if (spec.mode == NoiseSpec::Mode::Uniform) {
        if (!(spec.eta0 >= 0.0)) rep.fail("eta0 must be non-negative");
    } else {
        if (!(spec.relative >= 0.0)) rep.fail("relative noise level must be non-negative");
        if (!(spec.range >= 0.0)) rep.fail("range noise level must be non-negative");
    }
    return rep;
}

Eigen::VectorXd noise_std(const NoiseSpec& spec, const Eigen::MatrixXd& U) {
    const Eigen::Index M = U.rows(), J = U.cols();
    Eigen::VectorXd sd(M * J);
    if (spec.mode == NoiseSpec::Mode::Uniform) {
        const double range = U.size() ? U.maxCoeff() - U.minCoeff() : 0.0;
        sd.setConstant(spec.eta0 * range);
        return sd;
    }
    for (Eigen::Index j = 0; j < J; ++j) {
        const double range = U.col(j).maxCoeff() - U.col(j).minCoeff();
        for (Eigen::Index m = 0; m < M; ++m) {
            const double var = std::pow(spec.relative * U(m, j), 2) + std::pow(spec.range * range, 2);
            sd[j * M + m] = std::sqrt(var);
        }
    }
    return sd;
}

// ---------------------------------------------------------------------------------------

StepResult gn_step(const GaussNewtonSystem& sys) {
    const Eigen::Index m = sys.J.rows(), n = sys.J.cols();
    if (sys.residual.size() != m || sys.noise_std.size() != m || sys.b_minus_b0.size() != n)
        throw std::invalid_argument("Gauss-Newton system dimensions are inconsistent");
    {
        Eigen::Index covered = 0;
        for (const auto& blk : sys.blocks) {
            if (blk.offset != covered || !blk.factor)
                throw std::invalid_argument("prior blocks must tile the parameter vector");
            covered += blk.factor->C.rows();
        }
        if (covered != n) throw std::invalid_argument("prior blocks must tile the parameter vector");
    }
    const Eigen::VectorXd w0 = sys.noise_std.cwiseInverse();
    const Eigen::MatrixXd WJ = w0.asDiagonal() * sys.J;

    // K = L0 J C (C block diagonal, lower triangular blocks)
    Eigen::MatrixXd K(m, n);
    for (const auto& blk : sys.blocks) {
        const Eigen::Index k = blk.factor->C.rows();
        K.middleCols(blk.offset, k).noalias() =
            WJ.middleCols(blk.offset, k) * blk.factor->C.triangularView<Eigen::Lower>();
    }
    const Eigen::VectorXd s = w0.cwiseProduct(sys.residual) - WJ * sys.b_minus_b0;
    Eigen::MatrixXd G = K * K.transpose();
    G.diagonal().array() += 1.0;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success) throw SolverError("Gauss-Newton dual system failed");
    Eigen::VectorXd w = K.transpose() * ldlt.solve(s);

    if (!sys.constraints.empty()) {
        // Linear constraints a . delta = t with delta = C w + (b - b0), i.e.
        // (C^T a) . w = t - a . (b - b0). With H = K^T K + I,
        // H^{-1} v = v - K^T (K K^T + I)^{-1} K v, and the multipliers solve
        // (G H^{-1} G^T) mu = G w - h.
        auto hinv = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            return v - K.transpose() * ldlt.solve(K * v);
        };
        const Eigen::Index k = static_cast<Eigen::Index>(sys.constraints.size());
        Eigen::MatrixXd Gt = Eigen::MatrixXd::Zero(n, k);
        Eigen::VectorXd h(k);
        for (Eigen::Index c = 0; c < k; ++c) {
            const auto& con = sys.constraints[c];
            h[c] = con.value;
            for (const auto& [i, coef] : con.terms) {
                const PriorBlock* blk = nullptr;
                for (const auto& pb : sys.blocks)
                    if (i >= pb.offset && i < pb.offset + pb.factor->C.rows()) blk = &pb;
                if (!blk) throw std::invalid_argument("constraint index outside the parameter vector");
                const Eigen::Index r = i - blk->offset;
                Gt.col(c).segment(blk->offset, r + 1) +=
                    coef * blk->factor->C.row(r).head(r + 1).transpose();
                h[c] -= coef * sys.b_minus_b0[i];
            }
        }
        Eigen::MatrixXd HGt(n, k);
        for (Eigen::Index c = 0; c < k; ++c) HGt.col(c) = hinv(Gt.col(c));
        const Eigen::MatrixXd S = Gt.transpose() * HGt;
        const Eigen::VectorXd mu = S.ldlt().solve(Gt.transpose() * w - h);
        w -= HGt * mu;
    }

    StepResult out;
    out.delta = sys.b_minus_b0;
    Eigen::VectorXd Ltw(n), LtLb(n);
    for (const auto& blk : sys.blocks) {
        const Eigen::Index k = blk.factor->C.rows();
        const auto& f = *blk.factor;
        out.delta.segment(blk.offset, k) +=
            f.C.triangularView<Eigen::Lower>() * w.segment(blk.offset, k);
        Ltw.segment(blk.offset, k) = f.apply_Lt(w.segment(blk.offset, k));
        LtLb.segment(blk.offset, k) = f.apply_Lt(f.apply_L(sys.b_minus_b0.segment(blk.offset, k)));
    }
    // A^T (A delta - y) = J^T L0 (K w - s) + L^T w;  A^T y = J^T L0^2 r + L^T L (b - b0)
    Eigen::VectorXd g = WJ.transpose() * (K * w - s) + Ltw;
    if (!sys.constraints.empty()) {
        // Remove the multiplier part: project g onto the complement of the constraint rows.
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, sys.constraints.size());
        for (std::size_t c = 0; c < sys.constraints.size(); ++c)
            for (const auto& [i, coef] : sys.constraints[c].terms) A(i, c) += coef;
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, A.cols());
        g -= Q * (Q.transpose() * g);
    }
    const Eigen::VectorXd aty = WJ.transpose() * w0.cwiseProduct(sys.residual) + LtLb;
    const double scale = aty.norm();
    out.normal_residual = scale > 0.0 ? g.norm() / scale : g.norm();
    return out;
}

LineSearchResult line_search(const Eigen::VectorXd& b, double Fb, const Eigen::VectorXd& delta,
                             const CandidateObjective& objective, int max_halvings) {
    LineSearchResult res;
    if (!delta.allFinite() || delta.cwiseAbs().maxCoeff() == 0.0) return res;
    double q = 1.0;
    for (int k = 0; k <= max_halvings; ++k, q *= 0.5) {
        Eigen::VectorXd cand = b - q * delta;
        const auto F = objective(cand);
        if (F && std::isfinite(*F) && *F < Fb) {
            res.accepted = true;
            res.q = q;
            res.b = std::move(cand);
            res.F = *F;
            return res;
        }
    }
    return res;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? c : d;
}

// ---------------------------------------------------------------------------------------

ReconstructionMode parse_reconstruction_mode(const std::string& name) {
    if (name == "fixed") return ReconstructionMode::Fixed;
    if (name == "full") return ReconstructionMode::Full;
    if (name == "fixed-z") return ReconstructionMode::FixedZ;
    throw std::invalid_argument("unknown reconstruction mode '" + name +
                                "' (expected fixed, full or fixed-z)");
}

std::string to_string(ReconstructionMode mode) {
    switch (mode) {
        case ReconstructionMode::Fixed: return "fixed";
        case ReconstructionMode::Full: return "full";
        case ReconstructionMode::FixedZ: return "fixed-z";
    }
    return "?";
}

struct MapProblem::Evaluation {
    std::shared_ptr<const TriMesh> mesh;
    Eigen::SparseMatrix<double> P;  // reference -> solve mesh; empty when identical
    std::unique_ptr<CemSystem> system;
    ForwardSolution sol;
    Eigen::VectorXd predicted;
};

MapProblem::MapProblem(ReconstructionSetup setup) : setup_(std::move(setup)) {
    auto& pr = setup_.prior;
    M_ = pr.e_mean.count();
    if (pr.z_mean.size() == 0) pr.z_mean = Eigen::VectorXd::Ones(M_);
    if (setup_.basis.electrode_count() != M_)
        throw std::invalid_argument("current basis does not match the electrode count");
    const Eigen::Index rows = static_cast<Eigen::Index>(M_) * setup_.basis.pattern_count();
    if (setup_.data.size() != rows)
        throw std::invalid_argument("data length " + std::to_string(setup_.data.size()) +
                                    " does not match M * patterns = " + std::to_string(rows));
    if (setup_.noise_std.size() != rows || !(setup_.noise_std.array() > 0.0).all())
        throw std::invalid_argument("noise standard deviations must be positive, one per datum");
    if (setup_.mode == ReconstructionMode::FixedZ) {
        if (setup_.z_fixed.size() != M_ || !(setup_.z_fixed.array() > 0.0).all())
            throw std::invalid_argument("fixed-z mode needs M positive contact resistances");
    }
    base_layout_ = setup_.mode == ReconstructionMode::Fixed && setup_.layout_fixed
                       ? *setup_.layout_fixed
                       : pr.e_mean;
    if (base_layout_.count() != M_)
        throw std::invalid_argument("fixed layout does not match the electrode count");
    reference_ = build_disk_mesh(base_layout_, setup_.mesh_spec);
    priors_ = build_priors(pr, reference_);
}

MapProblem::Evaluation MapProblem::evaluate(const IterateState& state) const {
    Evaluation ev;
    Eigen::VectorXd sigma;
    if (!estimates_e()) {
        ev.mesh = std::shared_ptr<const TriMesh>(&reference_, [](const TriMesh*) {});
        sigma = state.sigma;
    } else {
        ev.mesh = std::make_shared<const TriMesh>(build_disk_mesh(state.layout, setup_.mesh_spec));
        ev.P = p1_interpolation_matrix(reference_, ev.mesh->nodes);
        sigma = ev.P * state.sigma;
    }
    ev.system = std::make_unique<CemSystem>(*ev.mesh, sigma, state.z);
    ev.sol = ev.system->solve(setup_.basis);
    ev.predicted = stack_measurements(ev.sol);
    return ev;
}

ObjectiveTerms MapProblem::terms(const IterateState& state,
                                 const Eigen::VectorXd& predicted) const {
    ObjectiveTerms t;
    t.data = (predicted - setup_.data).cwiseQuotient(setup_.noise_std).squaredNorm();
    const Eigen::VectorXd ds =
        state.sigma - Eigen::VectorXd::Constant(state.sigma.size(), tau_);
    t.sigma = priors_.sigma.weighted_norm2(ds);
    if (estimates_z()) t.z = priors_.z.weighted_norm2(state.z - setup_.prior.z_mean);
    if (estimates_e())
        t.e = priors_.e.weighted_norm2(state.layout.shape_vector() -
                                       setup_.prior.e_mean.shape_vector());
    return t;
}

ObjectiveTerms MapProblem::objective(const IterateState& state) const {
    return terms(state, evaluate(state).predicted);
}

Eigen::VectorXd MapProblem::predict(const IterateState& state) const {
    return evaluate(state).predicted;
}

HomogeneousEstimate MapProblem::homogeneous_estimate() const {
    const double lo = std::log(1e-3), hi = std::log(1e3);
    auto solve = [&](double tau, const Eigen::VectorXd& z) {
        const Eigen::VectorXd s = Eigen::VectorXd::Constant(reference_.node_count(), tau);
        return stack_measurements(CemSystem(reference_, s, z).solve(setup_.basis));
    };
    const Eigen::VectorXd w = setup_.noise_std.cwiseInverse();
    if (setup_.mode == ReconstructionMode::FixedZ || !setup_.joint_contact_init) {
        const Eigen::VectorXd z =
            setup_.mode == ReconstructionMode::FixedZ ? setup_.z_fixed : setup_.prior.z_mean;
        auto misfit = [&](double log_tau) {
            return (solve(std::exp(log_tau), z) - setup_.data).cwiseProduct(w).squaredNorm();
        };
        return {std::exp(golden_section(misfit, lo, hi, 1e-4)), 0.0};
    }
    // Joint fit of tau and a common contact value zeta. U(tau, zeta) = U(1, tau zeta) / tau,
    // so for a fixed product p = tau zeta the best 1/tau is a linear least-squares fit.
    const Eigen::VectorXd wv = setup_.data.cwiseProduct(w);
    auto best_tau = [&](double log_p, double* misfit) {
        const Eigen::VectorXd wu =
            solve(1.0, Eigen::VectorXd::Constant(M_, std::exp(log_p))).cwiseProduct(w);
        const double uv = wu.dot(wv);
        double tau = uv > 0.0 ? wu.squaredNorm() / uv : std::exp(hi);
        tau = std::clamp(tau, std::exp(lo), std::exp(hi));
        if (misfit) *misfit = (wu / tau - wv).squaredNorm();
        return tau;
    };
    const double log_p = golden_section(
        [&](double lp) {
            double f = 0.0;
            best_tau(lp, &f);
            return f;
        },
        std::log(1e-4), std::log(1e3), 1e-4);
    const double tau = best_tau(log_p, nullptr);
    return {tau, std::exp(log_p) / tau};
}

double MapProblem::homogeneous_init() const {
    return homogeneous_estimate().tau;
}

IterateState MapProblem::prior_state() const {
    IterateState s;
    s.sigma = Eigen::VectorXd::Constant(reference_.node_count(), tau_);
    s.z = setup_.mode == ReconstructionMode::FixedZ ? setup_.z_fixed : setup_.prior.z_mean;
    s.layout = base_layout_;
    return s;
}

Eigen::VectorXd MapProblem::pack(const IterateState& state) const {
    const Eigen::Index N = reference_.node_count();
    const Eigen::Index nz = estimates_z() ? M_ : 0, ne = estimates_e() ? 2 * M_ : 0;
    Eigen::VectorXd b(N + nz + ne);
    b.head(N) = state.sigma;
    if (nz) b.segment(N, nz) = state.z;
    if (ne) b.tail(ne) = state.layout.shape_vector();
    return b;
}

IterateState MapProblem::unpack(const Eigen::VectorXd& b) const {
    const Eigen::Index N = reference_.node_count();
    IterateState s = prior_state();
    s.sigma = b.head(N);
    if (estimates_z()) s.z = b.segment(N, M_);
    if (estimates_e())
        s.layout = DiskElectrodeLayout::from_shape_vector(base_layout_.radius, b.tail(2 * M_));
    return s;
}

void MapProblem::add_step_constraints(const IterateState& state, GaussNewtonSystem& sys,
                                      StepResult& step) const {
    const Eigen::VectorXd b = pack(state), lb = lower_bounds();
    const Eigen::Index E = b.size() - (estimates_e() ? 2 * M_ : 0);
    std::vector<int> held;
    std::vector<std::pair<int, int>> pairs;
    for (int round = 0; round < 10; ++round) {
        bool added = false;
        // Parameters that would be clamped even at the smallest trial step are held.
        const double q_min = std::ldexp(1.0, -setup_.max_halvings);
        for (Eigen::Index i = 0; i < b.size(); ++i)
            if (step.delta[i] > 0.0 && b[i] - q_min * step.delta[i] < lb[i] &&
                std::find(held.begin(), held.end(), i) == held.end()) {
                held.push_back(static_cast<int>(i));
                sys.constraints.push_back({{{static_cast<int>(i), 1.0}}, 0.0});
                added = true;
            }
        // A gap between neighbouring electrodes may shrink by at most half per step.
        if (estimates_e()) {
            std::vector<int> order(M_);
            std::iota(order.begin(), order.end(), 0);
            const auto theta = [&](int m) { return b[E + m]; };
            std::sort(order.begin(), order.end(), [&](int i, int j) {
                return wrap_angle(theta(i)) < wrap_angle(theta(j));
            });
            for (int k = 0; k < M_; ++k) {
                const int i = order[k], j = order[(k + 1) % M_];
                double sep = wrap_angle(theta(j)) - wrap_angle(theta(i));
                if (sep <= 0.0) sep += kTwoPi;
                const int ti = static_cast<int>(E + i), tj = static_cast<int>(E + j);
                const int ai = ti + M_, aj = tj + M_;
                const double gap = sep - b[ai] - b[aj];
                const double after = (sep + step.delta[ti] - step.delta[tj]) -
                                     (b[ai] - step.delta[ai]) - (b[aj] - step.delta[aj]);
                if (after < 0.5 * gap &&
                    std::find(pairs.begin(), pairs.end(), std::make_pair(i, j)) == pairs.end()) {
                    pairs.emplace_back(i, j);
                    // after = gap + d_ti - d_tj + d_ai + d_aj; pin it to gap / 2.
                    sys.constraints.push_back(
                        {{{ti, 1.0}, {tj, -1.0}, {ai, 1.0}, {aj, 1.0}}, -0.5 * gap});
                    added = true;
                }
            }
        }
        if (!added) break;
        step = gn_step(sys);
    }
}

Eigen::VectorXd MapProblem::lower_bounds() const {
    const Eigen::Index N = reference_.node_count();
    Eigen::VectorXd lb = Eigen::VectorXd::Constant(pack(prior_state()).size(),
                                                   -std::numeric_limits<double>::infinity());
    lb.head(N).setConstant(kMinConductivity);
    if (estimates_z()) lb.segment(N, M_).setConstant(kMinContact);
    if (estimates_e()) lb.tail(M_).setConstant(kMinHalfWidth);
    return lb;
}

bool MapProblem::project(Eigen::VectorXd& b) const {
    const Eigen::Index N = reference_.node_count();
    b.head(N) = b.head(N).cwiseMax(kMinConductivity);
    if (estimates_z()) b.segment(N, M_) = b.segment(N, M_).cwiseMax(kMinContact);
    if (estimates_e()) {
        b.tail(M_) = b.tail(M_).cwiseMax(kMinHalfWidth);
        const auto lay = DiskElectrodeLayout::from_shape_vector(base_layout_.radius, b.tail(2 * M_));
        if (!validate_disk_layout(lay).ok) return false;
    }
    return b.allFinite();
}

GaussNewtonSystem MapProblem::linearize(const IterateState& state) const {
    const Evaluation ev = evaluate(state);
    const JacobianBlocks jb =
        compute_jacobians(*ev.system, ev.sol, estimates_e() ? &state.layout : nullptr);
    const Eigen::Index N = reference_.node_count();
    const Eigen::Index nz = estimates_z() ? M_ : 0, ne = estimates_e() ? 2 * M_ : 0;
    GaussNewtonSystem sys;
    sys.J.resize(ev.predicted.size(), N + nz + ne);
    if (ev.P.size() == 0)
        sys.J.leftCols(N) = jb.sigma;
    else
        sys.J.leftCols(N) = jb.sigma * ev.P;
    if (nz) sys.J.middleCols(N, nz) = jb.z;
    if (ne) sys.J.rightCols(ne) = jb.e;
    sys.residual = ev.predicted - setup_.data;
    sys.noise_std = setup_.noise_std;
    sys.b_minus_b0 = pack(state) - pack(prior_state());
    sys.blocks.push_back({0, &priors_.sigma});
    if (nz) sys.blocks.push_back({static_cast<int>(N), &priors_.z});
    if (ne) sys.blocks.push_back({static_cast<int>(N + nz), &priors_.e});
    return sys;
}

namespace {

IterationRecord make_record(int it, const IterateState& s, double q, double nres) {
    IterationRecord r;
    r.iteration = it;
    r.F = s.F;
    r.q = q;
    r.sigma_norm = s.sigma.norm();
    r.z_norm = s.z.norm();
    r.e_norm = s.layout.shape_vector().norm();
    r.normal_residual = nres;
    r.sigma_min = s.sigma.minCoeff();
    r.z_min = s.z.minCoeff();
    r.layout_valid = validate_disk_layout(s.layout).ok;
    return r;
}

}  // namespace

ReconstructionResult MapProblem::run(const std::function<void(const IterationRecord&)>& on_iteration) {
    ReconstructionResult out;
    IterateState state;
    if (setup_.sigma_init > 0.0) {
        tau_ = setup_.sigma_init;
        state = prior_state();
    } else {
        const HomogeneousEstimate h = homogeneous_estimate();
        tau_ = h.tau;
        state = prior_state();
        if (h.contact > 0.0 && estimates_z()) {
            state.z.setConstant(std::max(h.contact, kMinContact));
            out.contact_start = h.contact;
        }
    }
    out.tau = tau_;
    state.F = objective(state);
    out.log.push_back(make_record(0, state, 0.0, 0.0));
    if (on_iteration) on_iteration(out.log.back());

    out.stop_reason = "iteration limit";
    // Relative decrease means nothing once F is at rounding level.
    const double F_floor = 1e-12 * static_cast<double>(setup_.data.size());
    for (int it = 1; it <= setup_.max_iterations; ++it) {
        if (state.F.total() <= F_floor) {
            out.stop_reason = "objective at rounding level";
            break;
        }
        GaussNewtonSystem sys = linearize(state);
        StepResult step = gn_step(sys);
        add_step_constraints(state, sys, step);

        ObjectiveTerms accepted_terms;
        const CandidateObjective eval = [&](Eigen::VectorXd& cand) -> std::optional<double> {
            if (!project(cand)) return std::nullopt;
            try {
                const IterateState s = unpack(cand);
                const ObjectiveTerms t = objective(s);
                accepted_terms = t;
                return t.total();
            } catch (const MeshError&) {
                return std::nullopt;
            }
        };
        const double F_old = state.F.total();
        const LineSearchResult ls =
            line_search(pack(state), F_old, step.delta, eval, setup_.max_halvings);
        if (!ls.accepted) {
            out.stop_reason = "line search found no decrease";
            out.failed_at_start = it == 1;
            break;
        }
        // The evaluator ran for every tried q; the accepted one was the last.
        state = unpack(ls.b);
        state.F = accepted_terms;
        state.iteration = it;
        out.log.push_back(make_record(it, state, ls.q, step.normal_residual));
        if (on_iteration) on_iteration(out.log.back());
        if (ls.F <= F_floor) {
            out.stop_reason = "objective at rounding level";
            break;
        }
        if ((F_old - ls.F) / F_old < setup_.relative_tolerance) {
            out.stop_reason = "relative decrease below tolerance";
            break;
        }
    }
    out.state = state;
    return out;
}

std::string iteration_log_csv(const std::vector<IterationRecord>& log) {
    std::ostringstream os;
    os << "iter,F,F_data,F_sigma,F_z,F_e,q\n";
    for (const auto& r : log)
        os << r.iteration << ',' << format_double(r.F.total()) << ',' << format_double(r.F.data)
           << ',' << format_double(r.F.sigma) << ',' << format_double(r.F.z) << ','
           << format_double(r.F.e) << ',' << format_double(r.q) << '\n';
    return os.str();
}

}  // namespace eitcem
