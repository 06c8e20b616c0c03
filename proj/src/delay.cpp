#include "mfdelay/delay.hpp"

#include <cmath>
#include <sstream>

namespace mfdelay {

DelayMeasure::DelayMeasure(DelayKind kind, double delta, double rate,
                           std::vector<double> offsets, std::vector<double> masses)
    : kind_(kind), delta_(delta), rate_(rate), offsets_(std::move(offsets)),
      masses_(std::move(masses)) {
    if (offsets_.size() != masses_.size())
        throw PreconditionError("DelayMeasure: offsets and masses must have equal length");
    if (offsets_.empty())
        throw PreconditionError("DelayMeasure: measure must carry at least one atom");
    double total = 0.0;
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
        if (offsets_[i] > 1e-12 || offsets_[i] < -delta_ - 1e-12) {
            std::ostringstream os;
            os << "DelayMeasure: atom offset " << offsets_[i] << " outside [-" << delta_
               << ", 0]";
            throw PreconditionError(os.str());
        }
        if (!(masses_[i] > 0.0))
            throw PreconditionError("DelayMeasure: atom masses must be strictly positive");
        total += masses_[i];
    }
    total_mass_ = total;
    if (!(total_mass_ > 0.0) || !std::isfinite(total_mass_))
        throw PreconditionError("DelayMeasure: total mass must be positive and finite");
}

DelayMeasure DelayMeasure::dirac_at_zero() {
    return DelayMeasure(DelayKind::DiracAtZero, 0.0, 0.0, {0.0}, {1.0});
}

DelayMeasure DelayMeasure::dirac_at_minus_delta(double delta) {
    if (!(delta > 0.0))
        throw PreconditionError("DelayMeasure: Dirac at -delta requires delta > 0");
    return DelayMeasure(DelayKind::DiracAtMinusDelta, delta, 0.0, {-delta}, {1.0});
}

DelayMeasure DelayMeasure::exponential(double rate, double delta, double dt) {
    if (!(delta > 0.0) || !(dt > 0.0))
        throw PreconditionError("DelayMeasure: exponential density requires delta > 0, dt > 0");
    const double cells_d = delta / dt;
    const double cells_r = std::round(cells_d);
    if (std::abs(cells_d - cells_r) > 1e-9)
        throw PreconditionError("DelayMeasure: delta must be an integer multiple of dt");
    const auto n = static_cast<std::size_t>(cells_r);

    // Left-endpoint atomization; cell k = [s_k, s_k + dt), s_k = -delta + k dt.
    std::vector<double> offsets(n), masses(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = -delta + static_cast<double>(k) * dt;
        offsets[k] = s;
        if (rate == 0.0) {
            masses[k] = dt;
        } else {
            masses[k] = (std::exp(rate * (s + dt)) - std::exp(rate * s)) / rate;
        }
    }
    return DelayMeasure(DelayKind::ExponentialDensity, delta, rate, std::move(offsets),
                        std::move(masses));
}

DelayMeasure DelayMeasure::discrete_atoms(std::vector<double> offsets,
                                          std::vector<double> masses, double delta) {
    return DelayMeasure(DelayKind::DiscreteAtoms, delta, 0.0, std::move(offsets),
                        std::move(masses));
}

std::vector<long> DelayMeasure::shifts_on(const TimeGrid& grid) const {
    std::vector<long> shifts(offsets_.size());
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
        const double steps = offsets_[i] / grid.dt;
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-7) {
            std::ostringstream os;
            os << "DelayMeasure: atom offset " << offsets_[i]
               << " is not grid-aligned (dt = " << grid.dt << ")";
            throw PreconditionError(os.str());
        }
        shifts[i] = static_cast<long>(rounded);
    }
    return shifts;
}

DelaySpec::DelaySpec(double d, std::vector<DelayMeasure> m) : delta(d), measures(std::move(m)) {
    if (measures.empty())
        throw PreconditionError("DelaySpec: at least one measure required");
    for (const auto& mu : measures) {
        if (mu.delta() > delta + 1e-12)
            throw PreconditionError("DelaySpec: measure reaches further back than delta");
    }
}

double segment_functional(const Trajectory& x, double t, const DelayMeasure& mu) {
    const TimeGrid& g = x.grid();
    const std::size_t idx = g.index_of(t);
    const auto shifts = mu.shifts_on(g);
    const auto& masses = mu.masses();
    double acc = 0.0;
    for (std::size_t a = 0; a < shifts.size(); ++a) {
        const long j = static_cast<long>(idx) + shifts[a];
        if (j < 0) {
            std::ostringstream os;
            os << "segment_functional: lookup at t + s = " << t + mu.offsets()[a]
               << " precedes the grid start " << g.t_start();
            throw std::out_of_range(os.str());
        }
        acc += masses[a] * x[static_cast<std::size_t>(j)];
    }
    return acc;
}

std::vector<double> lifted_state(const Trajectory& x, double t, const DelaySpec& spec) {
    std::vector<double> out(spec.measures.size());
    for (std::size_t i = 0; i < spec.measures.size(); ++i)
        out[i] = segment_functional(x, t, spec.measures[i]);
    return out;
}

double anticipated_convolution(const Trajectory& phi, double t, const DelayMeasure& mu,
                               bool horizon_clamp) {
    const TimeGrid& g = phi.grid();
    const std::size_t idx = g.index_of(t);
    const auto shifts = mu.shifts_on(g);
    const auto& masses = mu.masses();
    const long last = static_cast<long>(g.size()) - 1;
    double acc = 0.0;
    for (std::size_t a = 0; a < shifts.size(); ++a) {
        const long j = static_cast<long>(idx) - shifts[a]; // shifts <= 0, so j >= idx
        if (j > last) {
            if (horizon_clamp) continue;
            std::ostringstream os;
            os << "anticipated_convolution: lookup at t - s = " << t - mu.offsets()[a]
               << " past the grid end " << g.t_end();
            throw std::out_of_range(os.str());
        }
        acc += masses[a] * phi[static_cast<std::size_t>(j)];
    }
    return acc;
}

} // namespace mfdelay
