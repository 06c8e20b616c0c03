#pragma once

#include <optional>

#include "mfdelay/model.hpp"
#include "mfdelay/verify.hpp"

namespace mfdelay {

/// Experiment description parsed from the key = value config file. Field
/// defaults are the documented ones; per-model defaults (control interval,
/// candidate control, check list) are filled during validation.
struct ExperimentConfig {
    std::string model = "recursive_utility";
    bool infinite_horizon = true;
    double T = 5.0;
    double dt = 1e-2;
    double delta = 0.0;
    double kappa = 0.05;
    std::size_t n_particles = 10000;
    std::uint64_t seed = 12345;
    int basis_degree = 2;
    bool basis_lifts = false;
    double ridge = 1e-8;
    InformationFlow flow = InformationFlow::full();
    std::vector<std::string> checks;
    std::string out_dir = "out";
    std::size_t threads = 1;

    double u_lo = 0.0, u_hi = 1.0;
    double control_value = 0.0;
    std::vector<std::string> delay_measures{"dirac0"};
    std::vector<double> jump_marks, jump_weights;
    std::vector<double> T_list;

    // recursive_utility parameters
    double x0 = 1.0, c = 0.05, alpha = 0.4, beta = 0.1, pi0 = 0.5, sigma0 = 0.0;
    // linear_toy parameters
    double c1 = 0.5, c2 = 0.0, cu = 1.0, gy = 0.0, h1y = 0.0, h2x = 1.0, a = 0.0;
    // expression-model coefficients
    std::string expr_b = "0", expr_sigma = "0", expr_gamma = "0", expr_g = "0",
                expr_f = "0", expr_h1 = "0", expr_h = "0", expr_x0;

    // check tolerances
    double tol_residual = 0.05;
    double tol_gradient = 0.02;
    double tol_transversality_rel = 0.15;
    double tol_scaling_lo = 1.8, tol_scaling_hi = 2.2;
    double tol_fubini = 1e-12;
    double tol_hamiltonian = 1e-12;
    double s_fd = 1e-3;
    std::size_t gradient_bumps = 5;
    std::size_t n_probe = 1000;

    /// Deterministic serialization of every effective setting; its hash keys
    /// the reproducibility contract.
    std::string canonical() const;
};

struct ParseResult {
    std::optional<ExperimentConfig> config; // set only when errors is empty
    std::vector<std::string> errors;        // one entry per violation, key named
    std::vector<std::string> warnings;
};

ParseResult parse_config_file(const std::string& path);
ParseResult parse_config_text(const std::string& text);

/// Instantiates the configured coefficient model (validated config assumed).
CoefficientModel build_model(const ExperimentConfig& config);

/// Consumption-example parameters for a recursive_utility config.
struct ConsumptionModel;
ConsumptionModel consumption_params(const ExperimentConfig& config);

/// FNV-1a hash of the canonical config serialization.
std::uint64_t config_hash(const ExperimentConfig& config);

} // namespace mfdelay
