#include "mfdelay/grid.hpp"

#include <cmath>
#include <sstream>

namespace mfdelay {

namespace {

// Checks that ratio is an integer within tol and returns it rounded.
long integral_ratio(double num, double den, const char* name, double tol = 1e-9) {
    const double r = num / den;
    const double rounded = std::round(r);
    if (std::abs(r - rounded) > tol) {
        std::ostringstream os;
        os << "make_grid: " << name << " = " << r << " is not an integer (" << num
           << " / " << den << ")";
        throw PreconditionError(os.str());
    }
    return static_cast<long>(rounded);
}

} // namespace

TimeGrid make_grid(double T, double dt, double delta) {
    if (!(T > 0.0)) throw PreconditionError("make_grid: horizon T must be positive");
    if (!(dt > 0.0)) throw PreconditionError("make_grid: step dt must be positive");
    if (delta < 0.0) throw PreconditionError("make_grid: delay delta must be nonnegative");

    const long n_main_steps = integral_ratio(T, dt, "T/dt");
    const long n_pre_steps = integral_ratio(delta, dt, "delta/dt");

    TimeGrid g;
    g.dt = dt;
    g.n_pre = static_cast<std::size_t>(n_pre_steps);
    g.n_main = static_cast<std::size_t>(n_main_steps) + 1;
    return g;
}

std::size_t TimeGrid::index_of(double t) const {
    const double pos = (t - t_start()) / dt;
    const double rounded = std::round(pos);
    if (std::abs(pos - rounded) > 1e-7 || rounded < 0.0 ||
        rounded >= static_cast<double>(size())) {
        std::ostringstream os;
        os << "time " << t << " is not a node of the grid [" << t_start() << ", "
           << t_end() << "] with dt = " << dt;
        throw std::out_of_range(os.str());
    }
    return static_cast<std::size_t>(rounded);
}

std::size_t TimeGrid::floor_index(double t) const {
    // Round-off slop of half a step keeps node-coincident queries exact.
    const double pos = (t - t_start()) / dt;
    if (pos < -1e-9 || pos > static_cast<double>(size() - 1) + 1e-9) {
        std::ostringstream os;
        os << "time " << t << " outside grid span [" << t_start() << ", " << t_end() << "]";
        throw std::out_of_range(os.str());
    }
    const double shifted = std::floor(pos + 1e-9);
    const auto idx = static_cast<std::size_t>(std::max(0.0, shifted));
    return std::min(idx, size() - 1);
}

void set_prehistory(Trajectory& traj, const std::function<double(double)>& x0) {
    const TimeGrid& g = traj.grid();
    for (std::size_t idx = 0; idx <= g.n_pre; ++idx) {
        traj[idx] = x0(g.time(idx));
    }
}

} // namespace mfdelay
