#include <doctest.h>

#include <cmath>

#include "mfdelay/builtin_models.hpp"
#include "mfdelay/forward.hpp"
#include "mfdelay/recursive_utility.hpp"

using namespace mfdelay;

namespace {

ParticleEnsemble run(const CoefficientModel& model, const ControlProcess& pi, std::size_t n,
                     std::uint64_t seed) {
    const TimeGrid g = pi.grid();
    auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, n, seed);
    return simulate_forward(model, pi, noise, g);
}

} // namespace

TEST_CASE("deterministic exponential growth at Euler order") {
    // dX = c X dt with X(0) = 1: the Euler error at T is bounded by
    // x e^{cT} c^2 T dt (one-step truncation x c^2 dt^2 / 2 accumulated).
    LinearToyParams p;
    p.c1 = 0.8;
    p.cu = 0.0;
    p.sigma0 = 0.0;
    p.T = 1.0;
    p.x_init = 1.0;
    const CoefficientModel model = make_linear_toy(p);
    const double dt = 1e-3;
    const TimeGrid g = make_grid(p.T, dt, 0.0);
    const auto ens = run(model, ControlProcess::constant(g, 0.0, model.U), 1, 1);
    const double exact = std::exp(p.c1 * p.T);
    const double bound = exact * p.c1 * p.c1 * p.T * dt;
    CHECK(std::abs(ens.X[0].at_main(g.n_steps()) - exact) <= bound);
}

TEST_CASE("zero coefficients freeze the state") {
    LinearToyParams p;
    p.c1 = 0.0;
    p.cu = 0.0;
    p.sigma0 = 0.0;
    p.x_init = 2.5;
    const CoefficientModel model = make_linear_toy(p);
    const TimeGrid g = make_grid(1.0, 0.05, 0.0);
    const auto ens = run(model, ControlProcess::constant(g, 0.3, model.U), 8, 3);
    for (const auto& traj : ens.X)
        for (std::size_t k = 0; k < g.n_main; ++k) CHECK(traj.at_main(k) == 2.5);
}

TEST_CASE("control-independent coefficients ignore the control") {
    LinearToyParams p;
    p.cu = 0.0;
    p.sigma0 = 0.3;
    const CoefficientModel model = make_linear_toy(p);
    const TimeGrid g = make_grid(1.0, 0.02, 0.0);
    auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, 16, 5);
    const auto a = simulate_forward(model, ControlProcess::constant(g, -1.0, model.U), noise, g);
    const auto b = simulate_forward(model, ControlProcess::constant(g, 1.0, model.U), noise, g);
    for (std::size_t i = 0; i < 16; ++i) CHECK(a.X[i].values() == b.X[i].values());
}

TEST_CASE("compensated jumps keep the ensemble mean at x0") {
    const JumpMartingaleParams jp;
    const CoefficientModel model = make_jump_martingale(jp);
    const TimeGrid g = make_grid(jp.T, 0.01, 0.0);
    const std::size_t n = 20000;
    const auto ens = run(model, ControlProcess::constant(g, 0.0, model.U), n, 7);
    for (std::size_t k = 0; k < g.n_main; ++k) {
        double mean = 0.0;
        for (std::size_t p = 0; p < n; ++p) mean += ens.X[p].at_main(k);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double d = ens.X[p].at_main(k) - mean;
            var += d * d;
        }
        const double se = std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
        CHECK(std::abs(mean - jp.x_init) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("mean-field drift reproduces the exponential mean path") {
    // Zero-consumption cash flow with b0(t, m) = c m: E[X(t)] solves
    // h' = c h, so the particle mean tracks x e^{ct} up to Euler bias.
    ConsumptionModel cm;
    cm.c = 0.4;
    cm.sigma0 = 0.25;
    cm.T_max = 1.0;
    const CoefficientModel model = make_consumption_model(cm);
    const double dt = 0.01;
    const TimeGrid g = make_grid(cm.T_max, dt, 0.0);
    const std::size_t n = 20000;
    auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, n, 11);
    const ControlProcess zero = ControlProcess::constant(g, 0.0, Interval{0.0, 1.0});
    const auto ens = simulate_forward(model, zero, noise, g);

    const double euler_bias = cm.x_init * cm.c * cm.c * cm.T_max * std::exp(cm.c * cm.T_max) * dt;
    for (std::size_t k = 0; k < g.n_main; ++k) {
        double mean = 0.0;
        for (std::size_t p = 0; p < n; ++p) mean += ens.X[p].at_main(k);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double d = ens.X[p].at_main(k) - mean;
            var += d * d;
        }
        const double se = std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
        const double exact = cm.x_init * std::exp(cm.c * g.time(g.main_index(k)));
        CHECK(std::abs(mean - exact) <= 3.0 * se + euler_bias);
    }
}

TEST_CASE("particles decouple when coefficients ignore the mean field") {
    LinearToyParams p;
    p.c1 = 0.5;
    p.sigma0 = 0.4;
    const CoefficientModel model = make_linear_toy(p);
    const TimeGrid g = make_grid(1.0, 0.02, 0.0);
    // Same seed, different ensemble sizes: particle 0 sees the same
    // substream, so its path must be identical when the mean field is unused.
    auto noise4 = std::make_shared<const NoiseEnsemble>(g, model.jumps, 4, 17);
    auto noise8 = std::make_shared<const NoiseEnsemble>(g, model.jumps, 8, 17);
    const ControlProcess pi = ControlProcess::constant(g, 0.2, model.U);
    const auto a = simulate_forward(model, pi, noise4, g);
    const auto b = simulate_forward(model, pi, noise8, g);
    CHECK(a.X[0].values() == b.X[0].values());
}

TEST_CASE("weak Euler order on the linear benchmark") {
    LinearToyParams p;
    p.c1 = 1.0;
    p.cu = 0.0;
    p.sigma0 = 0.1;
    p.T = 1.0;
    const std::size_t n = 100000;
    const double exact = std::exp(p.c1 * p.T);

    std::vector<double> log_dt, log_err;
    for (double inv : {32.0, 64.0, 128.0, 256.0}) {
        const double dt = 1.0 / inv;
        const CoefficientModel model = make_linear_toy(p);
        const TimeGrid g = make_grid(p.T, dt, 0.0);
        auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, n, 23);
        const auto ens =
            simulate_forward(model, ControlProcess::constant(g, 0.0, model.U), noise, g);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += ens.X[i].at_main(g.n_steps());
        mean /= static_cast<double>(n);
        log_dt.push_back(std::log(dt));
        log_err.push_back(std::log(std::abs(mean - exact)));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(log_dt.size());
    for (std::size_t i = 0; i < log_dt.size(); ++i) {
        sx += log_dt[i];
        sy += log_err[i];
        sxx += log_dt[i] * log_dt[i];
        sxy += log_dt[i] * log_err[i];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(slope >= 0.7);
    CHECK(slope <= 1.3);
}

TEST_CASE("Ornstein-Uhlenbeck second moment tracks the Lyapunov equation") {
    // dX = -theta X dt + dB: v(t) = E[X^2] solves v' = -2 theta v + 1.
    const double theta = 1.2, T = 1.0, dt = 0.005;
    LinearToyParams p;
    p.c1 = -theta;
    p.cu = 0.0;
    p.sigma0 = 1.0;
    p.T = T;
    p.x_init = 0.7;
    const CoefficientModel model = make_linear_toy(p);
    const TimeGrid g = make_grid(T, dt, 0.0);
    const std::size_t n = 40000;
    auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, n, 31);
    const auto ens = simulate_forward(model, ControlProcess::constant(g, 0.0, model.U), noise, g);

    const auto v_exact = [&](double t) {
        const double v_inf = 1.0 / (2.0 * theta);
        return v_inf + (p.x_init * p.x_init - v_inf) * std::exp(-2.0 * theta * t);
    };
    const double euler_bias = 4.0 * theta * theta * T * dt;
    for (std::size_t k = 0; k < g.n_main; k += 20) {
        double m2 = 0.0, m4 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x2 = ens.X[i].at_main(k) * ens.X[i].at_main(k);
            m2 += x2;
            m4 += x2 * x2;
        }
        m2 /= static_cast<double>(n);
        m4 /= static_cast<double>(n);
        const double se = std::sqrt((m4 - m2 * m2) / static_cast<double>(n));
        CHECK(std::abs(m2 - v_exact(g.time(g.main_index(k)))) <= 3.0 * se + euler_bias);
    }
}

TEST_CASE("mean-square norms on canonical paths") {
    LinearToyParams p;
    p.c1 = 0.0;
    p.cu = 0.0;
    p.sigma0 = 0.0;
    p.x_init = 0.0;
    const TimeGrid g = make_grid(1.0, 0.01, 0.0);
    SUBCASE("zero path") {
        const CoefficientModel model = make_linear_toy(p);
        const auto ens = run(model, ControlProcess::constant(g, 0.0, model.U), 4, 1);
        const auto norms = mean_square_norms(ens, 0.5);
        CHECK(norms.l2_time_integral == 0.0);
        CHECK(norms.sup_weighted == 0.0);
        CHECK_FALSE(norms.divergence_flag);
    }
    SUBCASE("unit path integrates to the horizon") {
        p.x_init = 1.0;
        const CoefficientModel model = make_linear_toy(p);
        const auto ens = run(model, ControlProcess::constant(g, 0.0, model.U), 4, 1);
        const auto norms = mean_square_norms(ens, 0.0);
        CHECK(norms.l2_time_integral == doctest::Approx(1.0));
        CHECK(norms.sup_weighted == doctest::Approx(1.0));
        CHECK_FALSE(norms.divergence_flag);
    }
    SUBCASE("explosive growth is flagged") {
        p.x_init = 1.0;
        p.c1 = 3.0;
        const CoefficientModel model = make_linear_toy(p);
        const auto ens = run(model, ControlProcess::constant(g, 0.0, model.U), 4, 1);
        CHECK(mean_square_norms(ens, 0.0).divergence_flag);
    }
}

TEST_CASE("non-finite states abort with particle and step") {
    LinearToyParams p;
    p.c1 = 60.0; // overflows well before the horizon
    p.x_init = 1e300;
    p.sigma0 = 0.0;
    p.cu = 0.0;
    p.T = 10.0;
    const CoefficientModel model = make_linear_toy(p);
    const TimeGrid g = make_grid(p.T, 0.5, 0.0);
    auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, 2, 1);
    try {
        simulate_forward(model, ControlProcess::constant(g, 0.0, model.U), noise, g);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("particle") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
    }
}

TEST_CASE("stored mean-field paths match their recomputation from X") {
    ConsumptionModel cm;
    cm.sigma0 = 0.3;
    cm.T_max = 1.0;
    const CoefficientModel model = make_consumption_model(cm);
    const TimeGrid g = make_grid(cm.T_max, 0.02, 0.0);
    auto noise = std::make_shared<const NoiseEnsemble>(g, model.jumps, 64, 3);
    const ControlProcess pi = ControlProcess::constant(g, cm.pi0, model.U);
    const auto ens = simulate_forward(model, pi, noise, g);

    const CompiledDelay delay(model.delay, g);
    for (std::size_t k = 0; k < g.n_main; ++k) {
        const std::size_t node = g.main_index(k);
        double lift = 0.0, phi = 0.0;
        for (std::size_t p = 0; p < 64; ++p) {
            lift += delay.lift(ens.X[p], node, 0);
            phi += model.Phi.value(ens.X[p][node]);
        }
        CHECK(ens.mean_lift[k][0] == lift / 64.0);
        CHECK(ens.mean_phi[k] == phi / 64.0);
    }
}
