#include <doctest.h>

#include <cmath>

#include "mfdelay/recursive_utility.hpp"

using namespace mfdelay;

TEST_CASE("closed-form lambda values") {
    CHECK(closed_form_lambda(0.7, 0.7, 3.0) == 1.0);
    CHECK(closed_form_lambda(1.0, 0.5, 2.0) == doctest::Approx(0.3678794).epsilon(1e-6));
    CHECK(closed_form_lambda(0.4, 0.1, 0.0) == 1.0); // lambda(0) = h1'(Y(0)) = 1
}

TEST_CASE("deterministic costate display p(t) = p_T e^{-c (T - t)}") {
    SUBCASE("c = 0 freezes p") {
        ConsumptionModel cm;
        cm.c = 0.0;
        const TimeGrid g = make_grid(1.0, 0.01, 0.0);
        const Trajectory p = solve_p_deterministic(cm, g, -2.0);
        for (std::size_t k = 0; k < g.n_main; ++k) CHECK(p.at_main(k) == -2.0);
    }
    SUBCASE("linear ODE oracle") {
        ConsumptionModel cm;
        cm.c = 0.1;
        const double dt = 1e-4;
        const TimeGrid g = make_grid(1.0, dt, 0.0);
        const Trajectory p = solve_p_deterministic(cm, g, -1.0);
        CHECK(std::abs(p.at_main(0) - (-std::exp(-0.1))) <= 0.1 * 0.1 * 1.0 * dt);
    }
    SUBCASE("halving dt halves the error") {
        ConsumptionModel cm;
        cm.c = 0.3;
        std::vector<double> errs;
        for (double dt : {1e-2, 5e-3, 2.5e-3}) {
            const TimeGrid g = make_grid(1.0, dt, 0.0);
            const Trajectory p = solve_p_deterministic(cm, g, 1.0);
            errs.push_back(std::abs(p.at_main(0) - std::exp(-0.3)));
        }
        CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.1));
        CHECK(errs[1] / errs[2] == doctest::Approx(2.0).epsilon(0.1));
    }
}

TEST_CASE("candidate consumption from the maximum condition") {
    const TimeGrid g = make_grid(1.0, 0.25, 0.0);
    const Interval U{0.01, 10.0};

    SUBCASE("direct substitution") {
        Trajectory lam(g, 1.0), p(g, -2.0);
        const ControlProcess pi = optimal_consumption(lam, p, U);
        for (std::size_t k = 0; k < g.n_main; ++k) CHECK(pi.at_step(k) == 0.5);
    }
    SUBCASE("first-order consistency dgdpi(pi) = p / lambda") {
        Trajectory lam(g), p(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            lam[i] = std::exp(-0.3 * std::max(0.0, g.time(i)));
            p[i] = -lam[i] / (0.4 + 0.1 * static_cast<double>(i));
        }
        const ControlProcess pi = optimal_consumption(lam, p, U);
        for (std::size_t k = 0; k < g.n_main; ++k) {
            const std::size_t idx = g.main_index(k);
            const double dg_dpi = -1.0 / pi.at_step(k);
            CHECK(std::abs(dg_dpi - p[idx] / lam[idx]) <= 1e-12);
        }
    }
    SUBCASE("algebraic inversion recovers a constant candidate") {
        const double pi0 = 0.8;
        Trajectory lam(g), p(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            lam[i] = std::exp(-0.3 * std::max(0.0, g.time(i)));
            p[i] = -lam[i] / pi0;
        }
        const ControlProcess pi = optimal_consumption(lam, p, U);
        for (std::size_t k = 0; k < g.n_main; ++k)
            CHECK(pi.at_step(k) == doctest::Approx(pi0).epsilon(1e-12));
    }
    SUBCASE("costate touching zero is unbounded consumption") {
        Trajectory lam(g, 1.0), p(g, 0.0);
        CHECK_THROWS_AS(optimal_consumption(lam, p, U), NumericError);
    }
    SUBCASE("positive costate has no positive consumption") {
        Trajectory lam(g, 1.0), p(g, 2.0);
        CHECK_THROWS_AS(optimal_consumption(lam, p, U), PreconditionError);
    }
}

TEST_CASE("lambda monotonicity in the impatience rate") {
    // increasing alpha decreases lambda pointwise for t > 0
    for (double t : {0.5, 1.0, 3.0}) {
        CHECK(closed_form_lambda(0.6, 0.1, t) < closed_form_lambda(0.4, 0.1, t));
    }
    // lambda strictly decreasing iff alpha > beta
    CHECK(closed_form_lambda(0.4, 0.1, 1.0) < 1.0);
    CHECK(closed_form_lambda(0.1, 0.4, 1.0) > 1.0);
}

TEST_CASE("end-to-end consumption example at desk scale") {
    ConsumptionModel cm; // defaults: x=1, c=0.05, alpha=0.4, beta=0.1
    cm.T_max = 5.0;
    RunExampleOptions opt;
    opt.n_particles = 256; // deterministic model: small ensemble suffices
    opt.dt = 1e-2;
    opt.n_probe = 200;

    const ExampleReport rep = run_example(cm, opt);

    CHECK(rep.lambda_check.pass);
    CHECK(rep.p_check.pass);
    CHECK(rep.residual_check.pass);
    CHECK(rep.scaled_check.pass);
    CHECK(rep.scaled_exceed_fraction >= 0.9);
    CHECK(rep.forward_check.pass);
    CHECK(rep.gronwall_ok);
    CHECK(rep.decay_condition_holds);
    CHECK(rep.transversality_check_outcome.pass);
    CHECK(std::abs(rep.transversality.fitted_slope - rep.expected_decay) <=
          0.15 * std::abs(rep.expected_decay));
    CHECK(rep.comparison_check.pass);
    CHECK(rep.overall_pass);

    // candidate consumption is positive and the costate negative throughout
    for (std::size_t k = 0; k < rep.lambda_numeric.grid().n_main; ++k) {
        CHECK(rep.lambda_numeric.at_main(k) > 0.0);
        CHECK(rep.p_deterministic.at_main(k) < 0.0);
    }
}

TEST_CASE("violated decay condition is reported, not hidden") {
    ConsumptionModel cm;
    cm.c = 0.5; // c > alpha - beta
    cm.T_max = 3.0;
    RunExampleOptions opt;
    opt.n_particles = 64;
    opt.dt = 1e-2;
    opt.n_probe = 50;
    const ExampleReport rep = run_example(cm, opt);
    CHECK_FALSE(rep.decay_condition_holds);
    CHECK(rep.transversality.fitted_slope > 0.0);
    // the check passes by detecting the divergence it predicts
    CHECK(rep.transversality_check_outcome.pass);
}

TEST_CASE("alpha = beta degenerates lambda to 1") {
    ConsumptionModel cm;
    cm.alpha = 0.3;
    cm.beta = 0.3;
    cm.c = 0.0;
    cm.T_max = 2.0;
    RunExampleOptions opt;
    opt.n_particles = 64;
    opt.dt = 1e-2;
    opt.n_probe = 50;
    const ExampleReport rep = run_example(cm, opt);
    for (std::size_t k = 0; k < rep.lambda_numeric.grid().n_main; ++k)
        CHECK(rep.lambda_numeric.at_main(k) == doctest::Approx(1.0).epsilon(1e-12));
    // pi = -1/p: with p = -lambda/pi0 = -1/pi0 the candidate is pi0
    CHECK(rep.residual_check.pass);
}

TEST_CASE("delayed information is reported without a verdict") {
    ConsumptionModel cm;
    cm.T_max = 1.0;
    RunExampleOptions opt;
    opt.n_particles = 32;
    opt.dt = 1e-2;
    opt.n_probe = 10;
    opt.flow = InformationFlow::delayed(0.1);
    const ExampleReport rep = run_example(cm, opt);
    REQUIRE(rep.residual_delayed.has_value());
    CHECK(rep.residual_delayed->residual.size() == rep.residual_candidate.residual.size());
}
