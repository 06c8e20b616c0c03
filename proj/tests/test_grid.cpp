#include <doctest.h>

#include "mfdelay/grid.hpp"

using namespace mfdelay;

TEST_CASE("grid nodes cover prehistory and main segment") {
    const TimeGrid g = make_grid(1.0, 0.25, 0.5);
    REQUIRE(g.size() == 7);
    const double expected[] = {-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t i = 0; i < 7; ++i) CHECK(g.time(i) == doctest::Approx(expected[i]));
    CHECK(g.n_pre == 2);
    CHECK(g.n_main == 5);
    CHECK(g.time(g.main_index(0)) == doctest::Approx(0.0));
    CHECK(g.delta() == doctest::Approx(0.5));
    CHECK(g.t_end() == doctest::Approx(1.0));
}

TEST_CASE("grid rejects non-integral delay ratio and names it") {
    try {
        make_grid(0.9, 0.3, 0.5);
        FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("delta/dt") != std::string::npos);
        CHECK(msg.find("1.6") != std::string::npos); // 0.5 / 0.3
    }
    CHECK_THROWS_AS(make_grid(1.0, 0.3, 0.0), PreconditionError); // T/dt non-integral
    CHECK_THROWS_AS(make_grid(-1.0, 0.1, 0.0), PreconditionError);
    CHECK_THROWS_AS(make_grid(1.0, 0.0, 0.0), PreconditionError);
}

TEST_CASE("zero delay leaves no prehistory beyond the node at 0") {
    const TimeGrid g = make_grid(1.0, 0.25, 0.0);
    CHECK(g.n_pre == 0);
    CHECK(g.size() == 5);
    CHECK(g.time(0) == doctest::Approx(0.0));
}

TEST_CASE("grid closure: delayed lookups land on nodes") {
    const TimeGrid g = make_grid(2.0, 0.125, 0.5);
    for (std::size_t k = 0; k < g.n_main; ++k) {
        const double t = g.time(g.main_index(k));
        for (std::size_t j = 0; j <= g.n_pre; ++j) {
            const double s = -static_cast<double>(j) * g.dt;
            CHECK_NOTHROW(g.index_of(t + s));
        }
    }
    CHECK_THROWS_AS(g.index_of(0.1234), std::out_of_range);
    CHECK_THROWS_AS(g.index_of(2.5), std::out_of_range);
}

TEST_CASE("trajectory evaluation is left-constant") {
    const TimeGrid g = make_grid(1.0, 0.25, 0.5);
    Trajectory tr(g);
    for (std::size_t i = 0; i < g.size(); ++i) tr[i] = static_cast<double>(i);
    CHECK(tr.at_time(0.25) == doctest::Approx(3.0));
    CHECK(tr.at_time(0.3) == doctest::Approx(3.0));  // between nodes -> left value
    CHECK(tr.at_time(0.49) == doctest::Approx(3.0));
    CHECK(tr.at_time(-0.5) == doctest::Approx(0.0));
    CHECK(tr.at_time(1.0) == doctest::Approx(6.0));
    CHECK_THROWS_AS(tr.at_time(1.1), std::out_of_range);
    CHECK_THROWS_AS(tr.at_time(-0.6), std::out_of_range);
}

TEST_CASE("set_prehistory writes [-delta, 0] and nothing else") {
    SUBCASE("constant") {
        Trajectory tr(make_grid(1.0, 0.25, 0.5), -1.0);
        set_prehistory(tr, [](double) { return 5.0; });
        CHECK(tr[0] == 5.0);
        CHECK(tr[1] == 5.0);
        CHECK(tr[2] == 5.0);  // node at time 0
        CHECK(tr[3] == -1.0); // untouched main node
    }
    SUBCASE("identity") {
        Trajectory tr(make_grid(1.0, 0.25, 0.5));
        set_prehistory(tr, [](double t) { return t; });
        CHECK(tr[tr.grid().index_of(-0.25)] == doctest::Approx(-0.25));
        CHECK(tr[tr.grid().index_of(-0.5)] == doctest::Approx(-0.5));
    }
    SUBCASE("degenerate delta") {
        Trajectory tr(make_grid(1.0, 0.25, 0.0), -1.0);
        set_prehistory(tr, [](double) { return 7.0; });
        CHECK(tr[0] == 7.0);
        CHECK(tr[1] == -1.0);
    }
}
