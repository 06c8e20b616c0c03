#pragma once

#include "mfdelay/forward.hpp"
#include "mfdelay/regression.hpp"

namespace mfdelay {

/// Regression-based solution of the backward equation: value paths Y per
/// particle, diffusion loadings Z per step and jump loadings K per step and
/// mark. Y is stored on the full grid with zero prehistory.
struct BackwardTriple {
    std::vector<Trajectory> Y;
    std::vector<std::vector<double>> Z; // [particle][step]
    std::vector<std::vector<double>> K; // [particle][step * n_marks]

    double k_at(std::size_t p, std::size_t step, std::size_t mark, std::size_t n_marks) const {
        return K[p][step * n_marks + mark];
    }
};

/// Backward induction from Y(T) = a X(T). Per step k:
///   Z_k = E[(Y_{k+1} - E[Y_{k+1}|F_k]) dB_k | F_k] / dt
///   K_k(e_j) = E[(Y_{k+1} - E[Y_{k+1}|F_k]) (N_j - w_j dt) | F_k] / (w_j dt)
///   Y_k = E[Y_{k+1}|F_k] + g(t_k, ...) dt
/// with every conditional expectation realized by cross-sectional least
/// squares on the basis. Centering the martingale-increment targets on the
/// fitted continuation leaves the population value unchanged and removes the
/// dominant Monte Carlo variance term. E[Y] in the driver is the ensemble
/// average at the current backward step.
BackwardTriple solve_backward(const CoefficientModel& model, const ParticleEnsemble& ens,
                              const ControlProcess& pi, const RegressionBasis& basis);

/// Martingale-consistency diagnostic: root-mean-square of the basis
/// projection of Y(t) - Y(T') - sum g dt over [t, T'), which vanishes for an
/// exact solution. t and T' are main-node indices with t <= T'.
double bsde_consistency_check(const BackwardTriple& triple, const CoefficientModel& model,
                              const ParticleEnsemble& ens, const ControlProcess& pi,
                              std::size_t t_node, std::size_t T_node,
                              const RegressionBasis& basis);

} // namespace mfdelay
