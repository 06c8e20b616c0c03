#pragma once

#include "mfdelay/backward.hpp"

namespace mfdelay {

/// Binds a solved (X, Y, Z, K) system so coefficient arguments at any
/// (particle, main node) can be produced, plus derivative-of-H evaluation
/// with caller-supplied adjoint values. Z and K are left-evaluated per step;
/// at the terminal node, where no step exists, they are zero.
struct SolutionView {
    const CoefficientModel& model;
    const ParticleEnsemble& ens;
    const BackwardTriple& triple;
    const ControlProcess& pi;
    CompiledDelay delay;
    std::vector<double> y_means;
    std::vector<double> zero_marks;
    std::size_t n, n_steps, n_marks;

    SolutionView(const CoefficientModel& m, const ParticleEnsemble& e, const BackwardTriple& tr,
                 const ControlProcess& c);

    /// Arguments at particle p, main node k. The lift buffer backs the x
    /// span, so the result is valid until the next call with that buffer.
    CoeffArgs args_at(std::size_t p, std::size_t k, std::vector<double>& lift_buf) const;

    /// dH/d(key) at given arguments with explicit adjoint values.
    double dH(const CoeffArgs& a, const DerivKey& key, double p_val, double q_val,
              const double* r_vals, double lambda_val) const;
};

} // namespace mfdelay
