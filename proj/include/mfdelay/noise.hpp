#pragma once

#include <cstdint>
#include <vector>

#include "mfdelay/grid.hpp"

namespace mfdelay {

/// Finitely supported Levy measure nu = sum_j w_j * delta_{e_j}.
/// Integrals against nu are exact finite sums; the compensator over a step
/// is w_j * dt per mark.
struct JumpSpec {
    std::vector<double> marks;   // e_j, all nonzero
    std::vector<double> weights; // w_j > 0

    JumpSpec() = default;
    JumpSpec(std::vector<double> m, std::vector<double> w);

    std::size_t n_marks() const { return marks.size(); }
    double total_intensity() const;

    template <typename F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < marks.size(); ++j) acc += weights[j] * f(marks[j]);
        return acc;
    }
};

/// Per-particle driving noise: Brownian increments over each main step and
/// Poisson jump counts per mark. Substreams are keyed by (seed, particle
/// index), so the ensemble is a pure function of its arguments and can be
/// generated in any particle order or partition with identical bits.
class NoiseEnsemble {
public:
    NoiseEnsemble(TimeGrid grid, JumpSpec jumps, std::size_t n_particles, std::uint64_t seed);

    const TimeGrid& grid() const { return grid_; }
    const JumpSpec& jumps() const { return jumps_; }
    std::size_t n_particles() const { return n_particles_; }
    std::uint64_t seed() const { return seed_; }

    /// Brownian increment of particle p over main step k (law N(0, dt)).
    double db(std::size_t p, std::size_t k) const { return db_[p * n_steps_ + k]; }

    /// Jump count of mark j for particle p over step k (law Poisson(w_j dt)).
    std::uint32_t count(std::size_t p, std::size_t k, std::size_t j) const {
        return counts_[(p * n_steps_ + k) * jumps_.n_marks() + j];
    }

    /// Compensated jump increment: count - w_j * dt.
    double compensated(std::size_t p, std::size_t k, std::size_t j) const {
        return static_cast<double>(count(p, k, j)) - jumps_.weights[j] * grid_.dt;
    }

    bool operator==(const NoiseEnsemble& other) const {
        return db_ == other.db_ && counts_ == other.counts_;
    }

private:
    TimeGrid grid_;
    JumpSpec jumps_;
    std::size_t n_particles_;
    std::size_t n_steps_;
    std::uint64_t seed_;
    std::vector<double> db_;
    std::vector<std::uint32_t> counts_;
};

NoiseEnsemble sample_noise(const TimeGrid& grid, const JumpSpec& jumps,
                           std::size_t n_particles, std::uint64_t seed);

/// Deterministic stream of doubles used wherever the library needs its own
/// randomness (probe points, particle substreams). The transforms are
/// implemented here rather than with std::*_distribution so that results are
/// bit-identical across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform01();                  // [0, 1)
    double uniform(double lo, double hi);
    double normal();                     // N(0, 1), Box-Muller cosine branch
    std::uint32_t poisson(double lambda);

private:
    std::uint64_t state_;
};

/// Substream seed for a particle: splitmix64 mixing of (seed, index).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

} // namespace mfdelay
