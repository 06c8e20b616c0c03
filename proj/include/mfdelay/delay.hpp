#pragma once

#include <vector>

#include "mfdelay/grid.hpp"

namespace mfdelay {

enum class DelayKind { DiracAtZero, DiracAtMinusDelta, ExponentialDensity, DiscreteAtoms };

/// Bounded Borel measure on [-delta, 0], stored as a finite list of atoms at
/// grid-aligned offsets. The exponential density e^{rate * s} ds is atomized
/// at construction: atom k sits at the left endpoint of the k-th offset cell
/// and carries the exact cell mass, so the total mass (1 - e^{-rate*delta})/rate
/// is preserved and the discrete Fubini pairing is exact for every kind.
class DelayMeasure {
public:
    static DelayMeasure dirac_at_zero();
    static DelayMeasure dirac_at_minus_delta(double delta);
    static DelayMeasure exponential(double rate, double delta, double dt);
    static DelayMeasure discrete_atoms(std::vector<double> offsets, std::vector<double> masses,
                                       double delta);

    DelayKind kind() const { return kind_; }
    double delta() const { return delta_; }
    double rate() const { return rate_; }
    double total_mass() const { return total_mass_; }

    const std::vector<double>& offsets() const { return offsets_; } // in [-delta, 0]
    const std::vector<double>& masses() const { return masses_; }

    /// Offsets expressed as node shifts for a given grid (offset / dt, <= 0).
    /// Throws if any offset is not an integer multiple of the grid step.
    std::vector<long> shifts_on(const TimeGrid& grid) const;

private:
    DelayMeasure(DelayKind kind, double delta, double rate, std::vector<double> offsets,
                 std::vector<double> masses);

    DelayKind kind_;
    double delta_;
    double rate_;
    std::vector<double> offsets_;
    std::vector<double> masses_;
    double total_mass_;
};

/// Ordered list of delay measures sharing one delay span; component i of the
/// lifted state is the segment functional against measures[i].
struct DelaySpec {
    double delta = 0.0;
    std::vector<DelayMeasure> measures;

    DelaySpec() = default;
    DelaySpec(double d, std::vector<DelayMeasure> m);

    std::size_t dimension() const { return measures.size(); }
};

/// Segment functional: integral of X(t + s) mu(ds) over s in [-delta, 0].
/// t must be a main-grid node with t - delta inside the grid span.
double segment_functional(const Trajectory& x, double t, const DelayMeasure& mu);

/// Lifted (delayed) state vector at t, one component per measure.
std::vector<double> lifted_state(const Trajectory& x, double t, const DelaySpec& spec);

/// Time-advanced convolution: integral of phi(t - s) mu(ds), which reads phi
/// on [t, t + delta]. With horizon_clamp, lookups past the grid end
/// contribute 0 (the Fubini change of variable restricts the domain there);
/// without it such lookups throw.
double anticipated_convolution(const Trajectory& phi, double t, const DelayMeasure& mu,
                               bool horizon_clamp = true);

} // namespace mfdelay
