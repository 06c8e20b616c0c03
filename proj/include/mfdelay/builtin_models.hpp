#pragma once

#include "mfdelay/model.hpp"

namespace mfdelay {

/// Finite-horizon linear benchmark:
///   dX = (c1 X(t) + c2 X(t - delta) + cu u) dt + sigma0 dB
///   dY = -gy Y dt + Z dB,  Y(T) = a X(T)
///   J  = E[ h1y Y(0) + h2x X(T) ]
/// With c2 = 0 the delay lift collapses to the current state.
struct LinearToyParams {
    double c1 = 0.5;
    double c2 = 0.0;
    double cu = 1.0;
    double sigma0 = 0.2;
    double gy = 0.0;
    double h1y = 0.0;
    double h2x = 1.0;
    double a = 0.0;
    double delta = 0.0;
    double T = 1.0;
    double x_init = 1.0;
    double u_lo = -1.0, u_hi = 1.0;
};
CoefficientModel make_linear_toy(const LinearToyParams& p);

/// Pure compensated-jump test: b = sigma = 0, gamma(e) = e, so X is the
/// martingale x0 + int e N~(dt, de) and its mean must stay at x0.
struct JumpMartingaleParams {
    double x_init = 1.0;
    std::vector<double> marks{0.3};
    std::vector<double> weights{2.0};
    double T = 1.0;
};
CoefficientModel make_jump_martingale(const JumpMartingaleParams& p);

/// Martingale-representation benchmark: X = B, g = 0, Y(T) = X(T), so
/// Y(t) = X(t), Z = 1 and K = 0.
struct BrownianBsdeParams {
    double T = 1.0;
    double x_init = 0.0;
    double a = 1.0;
};
CoefficientModel make_brownian_bsde(const BrownianBsdeParams& p);

} // namespace mfdelay
