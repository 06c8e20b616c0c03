#include <doctest.h>

#include <cmath>

#include "mfdelay/noise.hpp"

using namespace mfdelay;

TEST_CASE("jump spec validation and exact integration") {
    CHECK_THROWS_AS(JumpSpec({0.0}, {1.0}), PreconditionError);
    CHECK_THROWS_AS(JumpSpec({0.5}, {0.0}), PreconditionError);
    CHECK_THROWS_AS(JumpSpec({0.5}, {1.0, 2.0}), PreconditionError);

    const JumpSpec nu({0.5, -1.0}, {2.0, 3.0});
    CHECK(nu.total_intensity() == doctest::Approx(5.0));
    // integral of f dnu as an exact finite sum
    CHECK(nu.integrate([](double e) { return e * e; }) == doctest::Approx(2.0 * 0.25 + 3.0 * 1.0));
}

TEST_CASE("noise ensembles are bit-identical for identical inputs") {
    const TimeGrid g = make_grid(1.0, 0.01, 0.0);
    const JumpSpec nu({0.3}, {2.0});
    const NoiseEnsemble a = sample_noise(g, nu, 32, 42);
    const NoiseEnsemble b = sample_noise(g, nu, 32, 42);
    CHECK(a == b);
    const NoiseEnsemble c = sample_noise(g, nu, 32, 43);
    CHECK_FALSE(a == c);
}

TEST_CASE("per-particle substreams do not depend on the ensemble size") {
    const TimeGrid g = make_grid(0.5, 0.01, 0.0);
    const JumpSpec nu({0.3}, {1.0});
    const NoiseEnsemble small = sample_noise(g, nu, 4, 7);
    const NoiseEnsemble large = sample_noise(g, nu, 8, 7);
    for (std::size_t p = 0; p < 4; ++p) {
        for (std::size_t k = 0; k < g.n_steps(); ++k) {
            CHECK(small.db(p, k) == large.db(p, k));
            CHECK(small.count(p, k, 0) == large.count(p, k, 0));
        }
    }
}

TEST_CASE("empty jump spec produces no jump counts") {
    const TimeGrid g = make_grid(1.0, 0.1, 0.0);
    const NoiseEnsemble ne = sample_noise(g, JumpSpec{}, 16, 1);
    CHECK(ne.jumps().n_marks() == 0);
}

TEST_CASE("jump counts match Poisson moments") {
    // mark intensity w = 2, dt = 0.01: counts ~ Poisson(0.02); sample mean of
    // 1e5 particles at one step stays within 3 sqrt(0.02 / 1e5) of 0.02.
    const TimeGrid g = make_grid(0.02, 0.01, 0.0);
    const JumpSpec nu({1.0}, {2.0});
    const std::size_t n = 100000;
    const NoiseEnsemble ne = sample_noise(g, nu, n, 2024);
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += ne.count(p, 0, 0);
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean - 0.02) <= 3.0 * std::sqrt(0.02 / static_cast<double>(n)));
}

TEST_CASE("brownian increments match N(0, dt) moments") {
    const double dt = 0.01;
    const TimeGrid g = make_grid(0.02, dt, 0.0);
    const std::size_t n = 100000;
    const NoiseEnsemble ne = sample_noise(g, JumpSpec{}, n, 99);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        mean += ne.db(p, 0);
        m2 += ne.db(p, 0) * ne.db(p, 0);
    }
    mean /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    const double var = m2 - mean * mean;
    // 4 standard errors: SE(mean) = sqrt(dt/n), SE(var) ~ dt sqrt(2/n)
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(dt / static_cast<double>(n)));
    CHECK(std::abs(var - dt) <= 4.0 * dt * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("poisson sampler law at moderate intensity") {
    RandomStream rs(5);
    const double lambda = 0.5;
    const std::size_t n = 200000;
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double k = rs.poisson(lambda);
        mean += k;
        m2 += k * k;
    }
    mean /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    const double var = m2 - mean * mean;
    const double se_mean = std::sqrt(lambda / static_cast<double>(n));
    CHECK(std::abs(mean - lambda) <= 4.0 * se_mean);
    CHECK(std::abs(var - lambda) <= 4.0 * lambda * std::sqrt(3.0 / static_cast<double>(n)));
}
