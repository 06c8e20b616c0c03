#include <doctest.h>

#include <cmath>

#include "mfdelay/expressions.hpp"
#include "mfdelay/noise.hpp"

using namespace mfdelay;

namespace {

CoeffArgs sample_args(std::vector<double>& x, std::vector<double>& m) {
    x = {1.5, -0.5};
    m = {0.25, 2.0};
    CoeffArgs a;
    a.t = 0.75;
    a.x = x;
    a.m = m;
    a.m_phi = -1.25;
    a.y = 2.0;
    a.y_mean = 0.5;
    a.z = -3.0;
    a.u = 0.8;
    return a;
}

} // namespace

TEST_CASE("expression parsing and evaluation") {
    std::vector<double> xb, mb;
    const CoeffArgs a = sample_args(xb, mb);

    CHECK(Expression::parse("2 + 3 * 4").eval(a, false) == 14.0);
    CHECK(Expression::parse("(2 + 3) * 4").eval(a, false) == 20.0);
    CHECK(Expression::parse("2 ^ 3 ^ 2").eval(a, false) == 512.0); // right-assoc
    CHECK(Expression::parse("-u^2").eval(a, false) == doctest::Approx(-0.64));
    CHECK(Expression::parse("x1 + 2*x2").eval(a, false) == doctest::Approx(0.5));
    CHECK(Expression::parse("exp(0) + log(1)").eval(a, false) == 1.0);
    CHECK(Expression::parse("min(y, n) + max(y, n)").eval(a, false) == doctest::Approx(2.5));
    CHECK(Expression::parse("1e-2 * t").eval(a, false) == doctest::Approx(0.0075));

    // m binds per horizon channel
    CHECK(Expression::parse("m").eval(a, false) == 0.25);
    CHECK(Expression::parse("m").eval(a, true) == -1.25);
}

TEST_CASE("expression parse errors carry a position") {
    for (const char* bad : {"2 +", "foo(1)", "x0", "min(1)", "2 * (3", "1 2", "q"}) {
        CHECK_THROWS_AS(Expression::parse(bad), PreconditionError);
    }
    try {
        Expression::parse("1 + : 2");
        FAIL("expected throw");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("position") != std::string::npos);
    }
}

TEST_CASE("symbolic derivatives match finite differences") {
    const char* exprs[] = {
        "x1^2 + 3*x1*u - exp(-0.5*y) + log(u) + z/(1 + x1^2)",
        "min(x1, u) + max(y, 2*z)",
        "u^x1",
        "(x1 - m)^3 / (1 + u)",
    };
    RandomStream rs(5);
    for (const char* text : exprs) {
        const Expression expr = Expression::parse(text);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> x{rs.uniform(0.5, 2.0)};
            std::vector<double> m{rs.uniform(0.5, 2.0)};
            CoeffArgs a;
            a.t = rs.uniform(0.0, 1.0);
            a.x = x;
            a.m = m;
            a.y = rs.uniform(0.5, 2.0);
            a.y_mean = rs.uniform(0.5, 2.0);
            a.z = rs.uniform(0.5, 2.0);
            a.u = rs.uniform(0.5, 2.0);

            for (const DerivKey& key : {DerivKey::x(0), DerivKey::m(0), DerivKey::y(),
                                        DerivKey::z(), DerivKey::u()}) {
                const double analytic = expr.derivative(key, false).eval(a, false);
                // manual central difference on a copy of the coordinate
                const double h = 1e-6;
                auto bump = [&](double sign) {
                    CoeffArgs b = a;
                    std::vector<double> xb = x, mb = m;
                    switch (key.tag) {
                    case DerivKey::Tag::X: xb[0] += sign * h; break;
                    case DerivKey::Tag::M: mb[0] += sign * h; break;
                    case DerivKey::Tag::Y: b.y += sign * h; break;
                    case DerivKey::Tag::Z: b.z += sign * h; break;
                    case DerivKey::Tag::U: b.u += sign * h; break;
                    default: break;
                    }
                    b.x = xb;
                    b.m = mb;
                    return expr.eval(b, false);
                };
                const double fd = (bump(1.0) - bump(-1.0)) / (2.0 * h);
                CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("independence is an exact zero derivative") {
    const Expression expr = Expression::parse("x1^2 + exp(u)");
    CHECK(expr.derivative(DerivKey::y(), false).is_zero());
    CHECK(expr.derivative(DerivKey::z(), false).is_zero());
    CHECK(expr.derivative(DerivKey::k(0), false).is_zero());
    CHECK_FALSE(expr.derivative(DerivKey::u(), false).is_zero());
    CHECK(expr.max_x_index() == 1);
}

TEST_CASE("expression-backed coefficients register their partials") {
    const Expression expr = Expression::parse("0.3*x1 + u^2 - m");
    const CoefficientFn fn = coefficient_from_expression(expr, false);
    std::vector<double> x{2.0}, m{0.5};
    CoeffArgs a;
    a.x = x;
    a.m = m;
    a.u = 3.0;
    CHECK(fn(a) == doctest::Approx(0.3 * 2.0 + 9.0 - 0.5));
    CHECK(fn.partial(a, DerivKey::x(0), 1e-5) == doctest::Approx(0.3));
    CHECK(fn.partial(a, DerivKey::u(), 1e-5) == doctest::Approx(6.0));
    CHECK(fn.partial(a, DerivKey::m(0), 1e-5) == doctest::Approx(-1.0));
    CHECK(fn.partial(a, DerivKey::y(), 1e-5) == 0.0); // exact independence

    // finite-horizon binding routes m to the Phi channel
    const CoefficientFn fn_phi = coefficient_from_expression(expr, true);
    a.m_phi = 4.0;
    CHECK(fn_phi(a) == doctest::Approx(0.6 + 9.0 - 4.0));
    CHECK(fn_phi.partial(a, DerivKey::m_phi(), 1e-5) == doctest::Approx(-1.0));
    CHECK(fn_phi.partial(a, DerivKey::m(0), 1e-5) == 0.0);
}

TEST_CASE("utility expressions differentiate in y") {
    const UtilityFn fn = utility_from_expression(Expression::parse("y^2 - y"));
    CHECK(fn.value(3.0) == doctest::Approx(6.0));
    CHECK(fn.deriv(3.0) == doctest::Approx(5.0));
}
