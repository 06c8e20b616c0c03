#pragma once

#include <memory>

#include "mfdelay/model.hpp"

namespace mfdelay {

/// Interacting-particle solution of the forward equation. The mean-field
/// paths are the empirical closures fed back into the coefficients:
/// mean_lift[k][i] approximates E[X_i(t_k)] and mean_phi[k] approximates
/// E[Phi(X(t_k))].
struct ParticleEnsemble {
    TimeGrid grid;
    std::vector<Trajectory> X;
    std::vector<std::vector<double>> mean_lift; // [main node][measure]
    std::vector<double> mean_phi;               // [main node]
    std::shared_ptr<const NoiseEnsemble> noise;

    std::size_t n_particles() const { return X.size(); }
};

/// Euler scheme for the forward delayed mean-field jump SDE. Coefficients are
/// evaluated at left endpoints (predictable versions); the step-k particle
/// averages close the mean-field terms of step k; jumps enter through the
/// compensated increments count - w_j dt.
ParticleEnsemble simulate_forward(const CoefficientModel& model, const ControlProcess& pi,
                                  std::shared_ptr<const NoiseEnsemble> noise,
                                  const TimeGrid& grid);

/// Summary norms used by the infinite-horizon decay diagnostics.
struct MeanSquareNorms {
    double l2_time_integral = 0.0;   // E[ integral |X|^2 dt ]
    double sup_weighted = 0.0;       // E[ sup_t e^{kappa t} X(t)^2 ]
    double weighted_integral = 0.0;  // E[ integral e^{kappa t} X(t)^2 dt ]
    bool divergence_flag = false;    // running integral superlinear on the last quarter
};

MeanSquareNorms mean_square_norms(const ParticleEnsemble& ens, double kappa);

/// Atom shifts+masses of every measure on a grid, computed once per solve.
struct CompiledDelay {
    std::vector<std::vector<long>> shifts;   // [measure][atom]
    std::vector<std::vector<double>> masses; // [measure][atom]

    CompiledDelay() = default;
    CompiledDelay(const DelaySpec& spec, const TimeGrid& grid);

    std::size_t dimension() const { return shifts.size(); }

    double lift(const Trajectory& x, std::size_t node_idx, std::size_t measure) const {
        const auto& sh = shifts[measure];
        const auto& ms = masses[measure];
        double acc = 0.0;
        for (std::size_t a = 0; a < sh.size(); ++a)
            acc += ms[a] * x[static_cast<std::size_t>(static_cast<long>(node_idx) + sh[a])];
        return acc;
    }

    void lift_all(const Trajectory& x, std::size_t node_idx, std::vector<double>& out) const {
        out.resize(shifts.size());
        for (std::size_t i = 0; i < shifts.size(); ++i) out[i] = lift(x, node_idx, i);
    }
};

} // namespace mfdelay
