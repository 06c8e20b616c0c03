#include "mfdelay/noise.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mfdelay {

JumpSpec::JumpSpec(std::vector<double> m, std::vector<double> w)
    : marks(std::move(m)), weights(std::move(w)) {
    if (marks.size() != weights.size())
        throw PreconditionError("JumpSpec: marks and weights must have equal length");
    for (std::size_t j = 0; j < marks.size(); ++j) {
        if (marks[j] == 0.0)
            throw PreconditionError("JumpSpec: marks must be nonzero");
        if (!(weights[j] > 0.0))
            throw PreconditionError("JumpSpec: weights must be strictly positive");
    }
}

double JumpSpec::total_intensity() const {
    double acc = 0.0;
    for (double w : weights) acc += w;
    return acc;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    std::uint64_t t = a ^ (index * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL);
    return splitmix64(t);
}

std::uint64_t RandomStream::next_u64() { return splitmix64(state_); }

double RandomStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

double RandomStream::normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint32_t RandomStream::poisson(double lambda) {
    // Inversion by sequential search; exact and deterministic. The step
    // intensities w_j * dt are small, so the loop is short.
    if (lambda <= 0.0) return 0;
    const double u = uniform01();
    double p = std::exp(-lambda);
    double cdf = p;
    std::uint32_t k = 0;
    while (u > cdf) {
        ++k;
        p *= lambda / static_cast<double>(k);
        cdf += p;
        if (k > 100000) break; // cdf saturated by round-off
    }
    return k;
}

NoiseEnsemble::NoiseEnsemble(TimeGrid grid, JumpSpec jumps, std::size_t n_particles,
                             std::uint64_t seed)
    : grid_(grid), jumps_(std::move(jumps)), n_particles_(n_particles),
      n_steps_(grid.n_steps()), seed_(seed) {
    if (n_particles_ == 0)
        throw PreconditionError("NoiseEnsemble: n_particles must be >= 1");

    const std::size_t n_marks = jumps_.n_marks();
    db_.resize(n_particles_ * n_steps_);
    counts_.resize(n_particles_ * n_steps_ * n_marks);

    const double sqrt_dt = std::sqrt(grid_.dt);
    for (std::size_t p = 0; p < n_particles_; ++p) {
        RandomStream rs(substream_seed(seed_, p));
        for (std::size_t k = 0; k < n_steps_; ++k) {
            db_[p * n_steps_ + k] = sqrt_dt * rs.normal();
            for (std::size_t j = 0; j < n_marks; ++j) {
                counts_[(p * n_steps_ + k) * n_marks + j] =
                    rs.poisson(jumps_.weights[j] * grid_.dt);
            }
        }
    }
}

NoiseEnsemble sample_noise(const TimeGrid& grid, const JumpSpec& jumps,
                           std::size_t n_particles, std::uint64_t seed) {
    return NoiseEnsemble(grid, jumps, n_particles, seed);
}

} // namespace mfdelay
