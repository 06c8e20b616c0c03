#pragma once

#include "mfdelay/verify.hpp"

namespace mfdelay {

/// Optimal-consumption model: cash flow
///   dX = [b0(t, E[X]) - pi] dt + sigma0 dB + gamma_scale int e N~(dt,de)
/// with b0(t, m) = c m, recursive utility driver
///   g = -alpha Y + beta E[Y] - ln pi
/// and J(pi) = E[Y(0)]. Solved on a truncated infinite horizon; mu_0 is the
/// Dirac measure at 0. Decay of the boundary pairing requires c < alpha - beta.
struct ConsumptionModel {
    double x_init = 1.0;
    double c = 0.05;
    double alpha = 0.4;
    double beta = 0.1;
    double sigma0 = 0.0;       // optional diffusion
    double gamma_scale = 0.0;  // optional jump loading gamma(e) = gamma_scale * e
    JumpSpec jumps;            // empty by default
    double delta = 0.0;        // delay span carried by the grid
    double T_max = 5.0;
    double kappa = 0.05;
    double pi0 = 0.5;          // candidate constant consumption rate
    Interval U{1e-2, 10.0};
};

CoefficientModel make_consumption_model(const ConsumptionModel& cm);

/// lambda(t) = e^{-(alpha - beta) t}.
double closed_form_lambda(double alpha, double beta, double t);

/// Backward Euler for the deterministic costate display
///   p(t) = p(T) - int_t^T d b0/d m (s) p(s) ds,
/// which for b0 = c m has the solution p(t) = p_T e^{-c (T - t)}.
Trajectory solve_p_deterministic(const ConsumptionModel& cm, const TimeGrid& grid, double p_T);

/// Candidate consumption pi = -lambda / p clamped into U. Throws when p
/// touches zero (consumption unbounded) or -lambda/p is not positive.
ControlProcess optimal_consumption(const Trajectory& lambda_path, const Trajectory& p_path,
                                   const Interval& U);

struct CheckOutcome {
    bool pass = false;
    double value = 0.0;     // measured quantity
    double threshold = 0.0; // tolerance it was compared against
    std::string detail;
};

struct ExampleReport {
    // lambda path against the closed form
    Trajectory lambda_numeric;
    std::vector<double> lambda_closed;
    CheckOutcome lambda_check;

    // deterministic costate display against p_T e^{-c(T-t)}
    Trajectory p_deterministic;
    std::vector<double> p_closed;
    CheckOutcome p_check;

    // necessary-condition residual at the candidate and at 1.5 x candidate
    ResidualPath residual_candidate;
    CheckOutcome residual_check;
    ResidualPath residual_scaled;
    double scaled_exceed_fraction = 0.0;
    CheckOutcome scaled_check;

    // zero-consumption mean path against x e^{c t} and the Gronwall bound
    std::vector<double> forward_mean, forward_se, forward_exact;
    CheckOutcome forward_check;
    bool gronwall_ok = false;

    // boundary-pairing decay over increasing horizons
    TransversalityTable transversality;
    double expected_decay = 0.0; // -(alpha - beta - c)
    bool decay_condition_holds = false; // c < alpha - beta
    CheckOutcome transversality_check_outcome;

    // concavity + conditional maximum + objective comparisons. The paper's
    // example only applies the necessary principle: with the -ln(pi) driver
    // the Hamiltonian is convex in the control along the candidate, so the
    // concavity/conditional-maximum findings are informational and only the
    // objective comparisons against the supplied alternatives gate the run.
    SufficientProbeReport sufficient;
    CheckOutcome comparison_check;

    // residual under delayed information, reported without a verdict (the
    // closed form assumes full information)
    std::optional<ResidualPath> residual_delayed;

    bool overall_pass = false;
};

struct RunExampleOptions {
    std::size_t n_particles = 10000;
    std::uint64_t seed = 12345;
    double dt = 1e-2;
    RegressionBasis basis = polynomial_basis(2);
    std::vector<double> T_list;            // defaults to 5 horizons up to T_max
    InformationFlow flow = InformationFlow::full();
    // Constant-control alternatives as multiples of pi0. The candidate prices
    // consumption through p < 0, so it dominates higher consumption rates;
    // these default to upward perturbations accordingly.
    std::vector<double> alternative_scales{1.25, 1.5, 2.0};
    std::size_t n_probe = 1000;
};

/// End-to-end reproduction of the consumption example: simulate under the
/// candidate and under zero consumption, check lambda and p against their
/// closed forms, the optimality residual, the transversality decay rate and
/// the objective comparisons, and assemble a pass/fail report.
ExampleReport run_example(const ConsumptionModel& cm, const RunExampleOptions& opt);

} // namespace mfdelay
