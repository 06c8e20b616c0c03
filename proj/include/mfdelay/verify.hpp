#pragma once

#include <optional>

#include "mfdelay/hamiltonian.hpp"

namespace mfdelay {

/// Information available to the controller: the full filtration, or the
/// filtration lagged by a fixed grid-aligned delay.
struct InformationFlow {
    enum class Mode { FullInfo, DelayedInfo };
    Mode mode = Mode::FullInfo;
    double lag = 0.0;

    static InformationFlow full() { return {Mode::FullInfo, 0.0}; }
    static InformationFlow delayed(double lag) { return {Mode::DelayedInfo, lag}; }
};

/// First-variation processes of the state system along a control direction
/// eta; the forward variation is zero on the prehistory.
struct DerivativeProcesses {
    std::vector<Trajectory> X;          // per particle
    std::vector<Trajectory> Y;
    std::vector<std::vector<double>> Z; // [particle][step]
    std::vector<std::vector<double>> K; // [particle][step * marks]
};

/// Euler scheme for the linearized forward/backward system, with the
/// coefficient gradients evaluated along the base solution and the
/// mean-field terms closed by ensemble averages of the variation lifts.
DerivativeProcesses simulate_derivative_processes(const CoefficientModel& model,
                                                  const ControlProcess& pi,
                                                  const Perturbation& eta,
                                                  const ParticleEnsemble& ens,
                                                  const BackwardTriple& triple,
                                                  const RegressionBasis& basis);

struct ObjectiveEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::vector<double> per_particle;
};

/// Monte Carlo objective along a solved system: running cost plus the
/// initial/terminal utilities of the active horizon mode.
ObjectiveEstimate evaluate_objective(const CoefficientModel& model, const ParticleEnsemble& ens,
                                     const BackwardTriple& triple, const ControlProcess& pi);

/// Convenience: noise -> forward -> backward -> objective for one control.
ObjectiveEstimate objective_for_control(const CoefficientModel& model, const ControlProcess& pi,
                                        std::shared_ptr<const NoiseEnsemble> noise,
                                        const RegressionBasis& basis);

struct GradientCheckResult {
    double lhs = 0.0; // common-random-number central difference of J
    double rhs = 0.0; // E[ sum dH/du eta dt ] along the adjoints
    double ci = 0.0;  // 3 standard errors of the paired per-particle gap
};

/// Base solution and adjoints at one control, reusable across perturbation
/// directions (all directions then share the same random numbers).
struct GradientCheckContext {
    ControlProcess pi;
    std::shared_ptr<const NoiseEnsemble> noise;
    ParticleEnsemble ens;
    BackwardTriple triple;
    Trajectory lambda;
    AdjointState adj;
    std::vector<std::vector<double>> dhdu; // [particle][step]
};

GradientCheckContext make_gradient_context(const CoefficientModel& model,
                                           const ControlProcess& pi, const TimeGrid& grid,
                                           std::size_t n_particles, std::uint64_t seed,
                                           const RegressionBasis& basis);

/// Checks dJ/ds (pi + s eta) at 0 against the Hamiltonian form. Both J
/// evaluations reuse one noise ensemble; the perturbed controls must stay in
/// U or a PreconditionError is thrown.
GradientCheckResult gradient_identity_check(const CoefficientModel& model,
                                            const GradientCheckContext& ctx,
                                            const Perturbation& eta, double s_fd,
                                            const RegressionBasis& basis);

/// Convenience form building the context internally.
GradientCheckResult gradient_identity_check(const CoefficientModel& model,
                                            const ControlProcess& pi, const Perturbation& eta,
                                            double s_fd, const TimeGrid& grid,
                                            std::size_t n_particles, std::uint64_t seed,
                                            const RegressionBasis& basis);

struct ResidualPath {
    std::vector<double> residual;  // one per main step
    std::vector<double> std_error;
    double sup_norm = 0.0;
};

/// Estimate of E[dH/du(t) | G_t] per node: the cross-sectional average under
/// full information, or the RMS of a regression on lagged features under
/// delayed information.
ResidualPath necessary_residual(const CoefficientModel& model, const ControlProcess& pi,
                                const ParticleEnsemble& ens, const BackwardTriple& triple,
                                const AdjointState& adj, const InformationFlow& flow,
                                const RegressionBasis& basis);

struct ControlComparison {
    double value_candidate = 0.0;
    double value_alternative = 0.0;
    double se_diff = 0.0;
    bool pass = false; // J(candidate) >= J(alternative) - 3 se
};

struct SufficientProbeReport {
    std::size_t n_probe = 0;
    std::size_t concavity_violations = 0;
    bool degenerate_max = false;    // H flat in u: every value maximizes
    double max_argmax_gap = 0.0;    // worst |argmax - pi_hat| over probed nodes
    double grid_resolution = 0.0;   // U width / 100
    bool conditional_max_pass = false;
    std::vector<ControlComparison> comparisons;
    bool comparisons_pass = true;
};

/// The two sufficient-principle conditions probed numerically: midpoint
/// concavity of H in (x, m, y, z, k, u) at random point pairs along the
/// solution, the conditional-maximum property on a 101-point control grid,
/// plus objective comparisons against supplied alternative controls.
SufficientProbeReport sufficient_conditions_probe(const CoefficientModel& model,
                                                  const ControlProcess& pi_hat,
                                                  const ParticleEnsemble& ens,
                                                  const BackwardTriple& triple,
                                                  const AdjointState& adj,
                                                  const std::vector<ControlProcess>& alternatives,
                                                  std::size_t n_probe, std::uint64_t seed,
                                                  const RegressionBasis& basis);

struct TransversalityRow {
    double T = 0.0;
    double p_dX = 0.0, p_dX_se = 0.0;       // E[p(T)(X_hat - X_alt)(T)]
    double lam_dY = 0.0, lam_dY_se = 0.0;   // E[lambda(T)(Y_hat - Y_alt)(T)]
    double p_X_alt = 0.0, p_X_alt_se = 0.0; // E[p(T) X_alt(T)]
    double p_derX = 0.0;                    // E[p(T) calX(T)]
    double lam_derY = 0.0;                  // E[lambda(T) calY(T)]
};

struct TransversalityTable {
    std::vector<TransversalityRow> rows;
    double fitted_slope = 0.0; // log-linear fit of |E[p(T) X_alt(T)]| over T
    bool decay_ok = false;     // fitted slope negative
};

/// Supplies the candidate's adjoint state at a given horizon; the default
/// provider solves lambda and (p, q, r) numerically.
using AdjointProvider = std::function<AdjointState(
    const CoefficientModel&, const ParticleEnsemble&, const BackwardTriple&,
    const ControlProcess&, const RegressionBasis&)>;

/// Boundary pairings at increasing horizons. Controls are produced per grid
/// by the two generators; the derivative-process columns use the direction
/// eta = pi_alt - pi_hat. With solve_alternative_backward off, the
/// lambda (Y_hat - Y_alt) column is reported as NaN; the consumption example
/// needs this because its log driver has no finite value at zero consumption
/// (under truncation that column is identically zero anyway).
TransversalityTable transversality_check(
    const CoefficientModel& model_template, const std::vector<double>& T_list, double dt,
    const std::function<ControlProcess(const TimeGrid&)>& pi_hat_gen,
    const std::function<ControlProcess(const TimeGrid&)>& pi_alt_gen, std::size_t n_particles,
    std::uint64_t seed, const RegressionBasis& basis,
    const std::optional<AdjointProvider>& provider = std::nullopt,
    bool solve_alternative_backward = true);

/// Discrete Fubini pairing gap
///   | sum_t X(t) conv(phi, t) - sum_t phi(t) segment(X, t) | * dt
/// over the main grid, with X forced to zero on the prehistory. Exact (to
/// round-off) for every atom-type measure by the change of variable r = t-s.
double fubini_identity_check(const Trajectory& phi, const Trajectory& X, const DelayMeasure& mu);

} // namespace mfdelay
