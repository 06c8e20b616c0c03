#pragma once

#include "mfdelay/noise.hpp"
#include "mfdelay/regression.hpp"

namespace mfdelay {

/// One backward LSMC step shared by the value, costate and derivative
/// solvers: continuation E[V_{k+1} | F_k], diffusion loading and per-mark
/// jump loadings, all realized on one factored step regression.
///
/// The loadings come from the centered product targets
///   z = E[(V - E[V|F]) dB | F] / dt,
///   k_j = E[(V - E[V|F]) dN~_j | F] / (w_j dt),
/// run twice: the second stage subtracts z1 (dB^2 - dt) (resp.
/// k1 (dN~^2 - w dt)), which is conditionally centered, so the population
/// value is unchanged while the quadratic-increment variance cancels. The
/// continuation is then refit on V - z dB - k dN~ for the same reason.
struct MartingaleStep {
    std::vector<double> cont; // E[V_{k+1} | F_k] per particle
    std::vector<double> z;    // per particle
    std::vector<double> k;    // per particle x mark, row-major
};

void backward_martingale_step(const CrossSectionRegression& reg, const NoiseEnsemble& noise,
                              std::size_t step, std::span<const double> next,
                              MartingaleStep& out);

} // namespace mfdelay
