#pragma once

#include "mfdelay/backward.hpp"

namespace mfdelay {

/// Full argument tuple of the Hamiltonian
///   H = f + b p + sigma q + sum_j gamma(e_j) r_j w_j + g lambda.
/// The same expression serves both horizon modes; they differ only in which
/// arguments the model actually reads and in how the adjoint drivers are
/// assembled from H's derivatives.
struct HamiltonianPoint {
    double t = 0.0;
    std::vector<double> x, m;
    double m_phi = 0.0;
    double y = 0.0, n = 0.0, z = 0.0;
    std::vector<double> k;
    double u = 0.0;
    double p = 0.0, q = 0.0;
    std::vector<double> r;
    double lambda = 0.0;

    CoeffArgs args() const {
        CoeffArgs a;
        a.t = t;
        a.x = x;
        a.m = m;
        a.m_phi = m_phi;
        a.y = y;
        a.y_mean = n;
        a.z = z;
        a.k = k;
        a.u = u;
        return a;
    }
};

double eval_H(const CoefficientModel& model, const HamiltonianPoint& pt);

/// Partial derivative of H with respect to one state/control coordinate.
/// Under the finitely supported jump measure the Frechet derivative in k
/// reduces to the per-mark partials, so DerivKey::k(j) covers that case.
double grad_H(const CoefficientModel& model, const HamiltonianPoint& pt, const DerivKey& key);

/// Adjoint solution: costate p per particle, martingale loadings q and r,
/// the deterministic lambda path and the driver values Upsilon actually used
/// (positive orientation, i.e. the drift of dp = -E[Upsilon | F_t] dt).
struct AdjointState {
    std::vector<Trajectory> p;
    std::vector<std::vector<double>> q;       // [particle][step]
    std::vector<std::vector<double>> r;       // [particle][step * marks]
    Trajectory lambda;
    std::vector<std::vector<double>> upsilon; // [particle][step]

    /// Deterministic adjoint pair lifted to ensemble shape; used when closed
    /// forms stand in for the regression solve.
    static AdjointState from_deterministic(const Trajectory& p_path,
                                           const Trajectory& lambda_path,
                                           std::size_t n_particles, std::size_t n_marks);
};

/// Forward Euler for the lambda equation from lambda(0) = h1'(Y(0)) (finite)
/// or h'(Y(0)) (infinite). The drift is dH/dy, plus E[dH/dn] in infinite
/// mode; the martingale parts vanish in the supported regime where g and f
/// are z- and k-free.
Trajectory solve_lambda_forward(const CoefficientModel& model, const BackwardTriple& triple,
                                const ParticleEnsemble& ens, const ControlProcess& pi);

/// Derivative-of-H paths along a completed solution, the inputs of the
/// Upsilon driver.
struct HamiltonianDerivativePaths {
    // dH/dx_i per measure: [measure][node][particle]
    std::vector<std::vector<std::vector<double>>> dH_dx;
    // finite mode: cross-sectional average of dH/dm_phi per node, and
    // Phi'(X(t)) per node and particle
    std::vector<double> dH_dmphi_avg;
    std::vector<std::vector<double>> phi_prime;
    // infinite mode: cross-sectional average of dH/dm_i per measure and node
    std::vector<std::vector<double>> dH_dm_avg;
};

HamiltonianDerivativePaths build_hamiltonian_derivative_paths(const CoefficientModel& model,
                                                              const ParticleEnsemble& ens,
                                                              const BackwardTriple& triple,
                                                              const AdjointState& adj,
                                                              const ControlProcess& pi);

/// Upsilon at one main node, per particle, in the orientation each horizon
/// section prints it:
///   finite:   -sum_i conv(dH/dx_i) - E[dH/dm(t)] Phi'(X(t))
///   infinite: +sum_i conv(dH/dx_i + E[dH/dm_i])
/// where conv is the time-advanced convolution with horizon clamping.
std::vector<double> compute_upsilon(const CoefficientModel& model,
                                    const HamiltonianDerivativePaths& paths,
                                    const TimeGrid& grid, std::size_t node_k);

/// Regression-based backward induction for the anticipated costate equation
///   dp = -E[Upsilon~ | F_t] dt + q dB + r dN~,
/// with Upsilon~ the positive orientation above for either mode. Terminal:
///   finite:   p(T) = a lambda(T) + dh2/dx(T) + dh2/dn(T) psi'(X(T))
///   infinite: p(T_max) = 0 (truncation; transversality supplies the tail).
/// The driver reads dH/dx over [t, t + delta]: future nodes use the stored
/// adjoints, the current node uses the fitted continuation of p and the
/// freshly regressed q, r.
AdjointState solve_adjoint_backward(const CoefficientModel& model, const ParticleEnsemble& ens,
                                    const BackwardTriple& triple, const Trajectory& lambda,
                                    const ControlProcess& pi, const RegressionBasis& basis);

/// dH/du along the solution and adjoints: [particle][step].
std::vector<std::vector<double>> control_derivative_path(const CoefficientModel& model,
                                                         const ParticleEnsemble& ens,
                                                         const BackwardTriple& triple,
                                                         const AdjointState& adj,
                                                         const ControlProcess& pi);

/// Truncation diagnostics for the costate system: kappa-weighted norms of
/// (p, q, r) and the plain L2 norm of lambda, with a superlinear-growth flag
/// on E[sup e^{kappa t} p(t)^2] over the final quarter of the horizon.
struct AdjointDecayNorms {
    double sup_weighted_p = 0.0;      // E[sup_t e^{kappa t} p(t)^2]
    double lambda_l2 = 0.0;           // integral lambda^2 dt
    double weighted_qr_integral = 0.0; // E[int e^{kappa t}(q^2 + sum r^2 w) dt]
    bool divergence_flag = false;
};

AdjointDecayNorms adjoint_decay_norms(const AdjointState& adj, const JumpSpec& jumps,
                                      double kappa);

} // namespace mfdelay
