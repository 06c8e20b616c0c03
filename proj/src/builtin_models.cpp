#include "mfdelay/builtin_models.hpp"

namespace mfdelay {

CoefficientModel make_linear_toy(const LinearToyParams& p) {
    CoefficientModel m;
    const bool delayed = p.delta > 0.0;

    std::vector<DelayMeasure> measures{DelayMeasure::dirac_at_zero()};
    if (delayed) measures.push_back(DelayMeasure::dirac_at_minus_delta(p.delta));
    m.delay = DelaySpec(delayed ? p.delta : 0.0, std::move(measures));

    const double c1 = p.c1, c2 = p.c2, cu = p.cu;
    m.b.value = [c1, c2, cu, delayed](const CoeffArgs& a) {
        return c1 * a.x[0] + (delayed ? c2 * a.x[1] : 0.0) + cu * a.u;
    };
    m.b.partials[DerivKey::x(0)] = [c1](const CoeffArgs&) { return c1; };
    if (delayed) m.b.partials[DerivKey::x(1)] = [c2](const CoeffArgs&) { return c2; };
    m.b.partials[DerivKey::u()] = [cu](const CoeffArgs&) { return cu; };

    const double s0 = p.sigma0;
    m.sigma.value = [s0](const CoeffArgs&) { return s0; };
    m.gamma.value = [](const CoeffArgs&, double) { return 0.0; };

    const double gy = p.gy;
    m.g.value = [gy](const CoeffArgs& a) { return gy * a.y; };
    if (gy != 0.0) m.g.partials[DerivKey::y()] = [gy](const CoeffArgs&) { return gy; };
    m.f.value = [](const CoeffArgs&) { return 0.0; };

    const double h1y = p.h1y, h2x = p.h2x;
    m.h1.value = [h1y](double y) { return h1y * y; };
    m.h1.deriv = [h1y](double) { return h1y; };
    m.h2.value = [h2x](double x, double) { return h2x * x; };
    m.h2.dx = [h2x](double, double) { return h2x; };

    m.Phi.value = [](double x) { return x; };
    m.Phi.deriv = [](double) { return 1.0; };
    m.psi.value = [](double x) { return x; };
    m.psi.deriv = [](double) { return 1.0; };

    m.a = p.a;
    m.U = Interval{p.u_lo, p.u_hi};
    m.jumps = JumpSpec{};
    m.horizon = FiniteHorizon{p.T};
    const double xi = p.x_init;
    m.x0 = [xi](double) { return xi; };
    return m;
}

CoefficientModel make_jump_martingale(const JumpMartingaleParams& p) {
    CoefficientModel m;
    m.delay = DelaySpec(0.0, {DelayMeasure::dirac_at_zero()});
    m.b.value = [](const CoeffArgs&) { return 0.0; };
    m.sigma.value = [](const CoeffArgs&) { return 0.0; };
    m.gamma.value = [](const CoeffArgs&, double e) { return e; };
    m.g.value = [](const CoeffArgs&) { return 0.0; };
    m.f.value = [](const CoeffArgs&) { return 0.0; };
    m.Phi.value = [](double x) { return x; };
    m.Phi.deriv = [](double) { return 1.0; };
    m.psi = m.Phi;
    m.U = Interval{0.0, 1.0};
    m.jumps = JumpSpec(p.marks, p.weights);
    m.horizon = FiniteHorizon{p.T};
    const double xi = p.x_init;
    m.x0 = [xi](double) { return xi; };
    return m;
}

CoefficientModel make_brownian_bsde(const BrownianBsdeParams& p) {
    CoefficientModel m;
    m.delay = DelaySpec(0.0, {DelayMeasure::dirac_at_zero()});
    m.b.value = [](const CoeffArgs&) { return 0.0; };
    m.sigma.value = [](const CoeffArgs&) { return 1.0; };
    m.gamma.value = [](const CoeffArgs&, double) { return 0.0; };
    m.g.value = [](const CoeffArgs&) { return 0.0; };
    m.f.value = [](const CoeffArgs&) { return 0.0; };
    m.Phi.value = [](double x) { return x; };
    m.Phi.deriv = [](double) { return 1.0; };
    m.psi = m.Phi;
    m.a = p.a;
    m.U = Interval{0.0, 1.0};
    m.jumps = JumpSpec{};
    m.horizon = FiniteHorizon{p.T};
    const double xi = p.x_init;
    m.x0 = [xi](double) { return xi; };
    return m;
}

} // namespace mfdelay
