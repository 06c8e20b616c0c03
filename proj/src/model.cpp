#include "mfdelay/model.hpp"

#include <cmath>
#include <sstream>

namespace mfdelay {

std::string to_string(const DerivKey& key) {
    using Tag = DerivKey::Tag;
    std::ostringstream os;
    switch (key.tag) {
    case Tag::X: os << "x" << key.index + 1; break;
    case Tag::M: os << "m" << key.index + 1; break;
    case Tag::MPhi: os << "m_phi"; break;
    case Tag::Y: os << "y"; break;
    case Tag::N: os << "n"; break;
    case Tag::Z: os << "z"; break;
    case Tag::K: os << "k" << key.index + 1; break;
    case Tag::U: os << "u"; break;
    }
    return os.str();
}

namespace {

// Owning copy of a CoeffArgs bundle so a single coordinate can be bumped.
struct ArgsScratch {
    std::vector<double> x, m, k;
    CoeffArgs args;

    explicit ArgsScratch(const CoeffArgs& a)
        : x(a.x.begin(), a.x.end()), m(a.m.begin(), a.m.end()), k(a.k.begin(), a.k.end()),
          args(a) {
        args.x = x;
        args.m = m;
        args.k = k;
    }

    void bump(const DerivKey& key, double h) {
        using Tag = DerivKey::Tag;
        switch (key.tag) {
        case Tag::X: x.at(key.index) += h; break;
        case Tag::M: m.at(key.index) += h; break;
        case Tag::MPhi: args.m_phi += h; break;
        case Tag::Y: args.y += h; break;
        case Tag::N: args.y_mean += h; break;
        case Tag::Z: args.z += h; break;
        case Tag::K: k.at(key.index) += h; break;
        case Tag::U: args.u += h; break;
        }
    }
};

double coordinate(const CoeffArgs& a, const DerivKey& key) {
    using Tag = DerivKey::Tag;
    switch (key.tag) {
    case Tag::X: return key.index < a.x.size() ? a.x[key.index] : 0.0;
    case Tag::M: return key.index < a.m.size() ? a.m[key.index] : 0.0;
    case Tag::MPhi: return a.m_phi;
    case Tag::Y: return a.y;
    case Tag::N: return a.y_mean;
    case Tag::Z: return a.z;
    case Tag::K: return key.index < a.k.size() ? a.k[key.index] : 0.0;
    case Tag::U: return a.u;
    }
    return 0.0;
}

template <typename Eval>
double central_difference(const CoeffArgs& a, const DerivKey& key, double fd_step, Eval&& eval) {
    const double h = fd_step * std::max(1.0, std::abs(coordinate(a, key)));
    if (h == 0.0) throw NumericError("finite-difference step underflowed to zero");
    ArgsScratch plus(a), minus(a);
    plus.bump(key, h);
    minus.bump(key, -h);
    return (eval(plus.args) - eval(minus.args)) / (2.0 * h);
}

} // namespace

double CoefficientFn::partial(const CoeffArgs& a, const DerivKey& key, double fd_step) const {
    if (auto it = partials.find(key); it != partials.end()) return it->second(a);
    if (!fd_fallback) return 0.0;
    return central_difference(a, key, fd_step,
                              [this](const CoeffArgs& pa) { return value(pa); });
}

double JumpCoefficientFn::partial(const CoeffArgs& a, double e, const DerivKey& key,
                                  double fd_step) const {
    if (auto it = partials.find(key); it != partials.end()) return it->second(a, e);
    if (!fd_fallback) return 0.0;
    return central_difference(a, key, fd_step,
                              [this, e](const CoeffArgs& pa) { return value(pa, e); });
}

namespace {

CoeffArgs random_point(RandomStream& rs, const CoefficientModel& model,
                       std::vector<double>& x_buf, std::vector<double>& m_buf,
                       std::vector<double>& k_buf) {
    const std::size_t n = model.n_lifts();
    x_buf.resize(n);
    m_buf.resize(n);
    k_buf.resize(model.jumps.n_marks());
    for (auto& v : x_buf) v = rs.uniform(-2.0, 2.0);
    for (auto& v : m_buf) v = rs.uniform(-2.0, 2.0);
    for (auto& v : k_buf) v = rs.uniform(-1.0, 1.0);

    CoeffArgs a;
    a.t = rs.uniform(0.0, model.horizon_T());
    a.x = x_buf;
    a.m = m_buf;
    a.m_phi = rs.uniform(-2.0, 2.0);
    a.y = rs.uniform(-2.0, 2.0);
    a.y_mean = rs.uniform(-2.0, 2.0);
    a.z = rs.uniform(-2.0, 2.0);
    a.k = k_buf;
    // Keep u a finite-difference step clear of the interval edges so probes of
    // log-type drivers stay inside their domain.
    const double pad = std::min(0.1 * model.U.width(), 10.0 * model.fd_step);
    a.u = rs.uniform(model.U.lo + pad, model.U.hi - pad);
    return a;
}

void check_one(const char* name, const DerivKey& key, double analytic, double fd) {
    const double tol = 1e-5 * std::max(1.0, std::abs(analytic));
    if (std::abs(analytic - fd) > tol) {
        std::ostringstream os;
        os << "derivative probe failed for " << name << " w.r.t. " << to_string(key)
           << ": analytic " << analytic << " vs central difference " << fd;
        throw PreconditionError(os.str());
    }
}

} // namespace

void verify_model_derivatives(const CoefficientModel& model, std::size_t n_points,
                              std::uint64_t probe_seed) {
    RandomStream rs(probe_seed);
    std::vector<double> x_buf, m_buf, k_buf;

    for (std::size_t p = 0; p < n_points; ++p) {
        const CoeffArgs a = random_point(rs, model, x_buf, m_buf, k_buf);

        const auto probe_scalar = [&](const char* name, const CoefficientFn& fn) {
            for (const auto& [key, partial] : fn.partials) {
                const double analytic = partial(a);
                const double fd = central_difference(
                    a, key, model.fd_step, [&fn](const CoeffArgs& pa) { return fn.value(pa); });
                check_one(name, key, analytic, fd);
            }
        };
        probe_scalar("b", model.b);
        probe_scalar("sigma", model.sigma);
        probe_scalar("g", model.g);
        probe_scalar("f", model.f);

        for (const auto& [key, partial] : model.gamma.partials) {
            for (double e : model.jumps.marks) {
                const double analytic = partial(a, e);
                const double fd = central_difference(
                    a, key, model.fd_step,
                    [&](const CoeffArgs& pa) { return model.gamma.value(pa, e); });
                check_one("gamma", key, analytic, fd);
            }
        }
    }
}

ControlProcess::ControlProcess(const TimeGrid& grid, std::vector<double> values, Interval range)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid.n_main)
        throw PreconditionError("ControlProcess: values must cover every main node");
    for (auto& v : values_) v = range.clamp(v);
}

ControlProcess ControlProcess::constant(const TimeGrid& grid, double v, Interval range) {
    return ControlProcess(grid, std::vector<double>(grid.n_main, v), range);
}

Perturbation Perturbation::bump(const TimeGrid& grid, double t0, double width, double height) {
    Perturbation eta;
    eta.values.assign(grid.n_main, 0.0);
    for (std::size_t k = 0; k < grid.n_main; ++k) {
        const double t = grid.time(grid.main_index(k));
        if (t >= t0 - 1e-12 && t < t0 + width - 1e-12) eta.values[k] = height;
    }
    eta.bound = std::abs(height);
    return eta;
}

Perturbation Perturbation::constant(const TimeGrid& grid, double height) {
    Perturbation eta;
    eta.values.assign(grid.n_main, height);
    eta.bound = std::abs(height);
    return eta;
}

ControlProcess shifted_control(const ControlProcess& pi, const Perturbation& eta, double s,
                               const Interval& U) {
    std::vector<double> vals(pi.values());
    for (std::size_t k = 0; k < vals.size(); ++k) {
        vals[k] += s * eta.values[k];
        if (!U.contains(vals[k])) {
            std::ostringstream os;
            os << "perturbed control leaves U = [" << U.lo << ", " << U.hi << "] at step " << k
               << " (value " << vals[k] << ")";
            throw PreconditionError(os.str());
        }
    }
    return ControlProcess(pi.grid(), std::move(vals), U);
}

ControlProcess shifted_control_clamped(const ControlProcess& pi, const Perturbation& eta,
                                       double s, const Interval& U) {
    std::vector<double> vals(pi.values());
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = U.clamp(vals[k] + s * eta.values[k]);
    return ControlProcess(pi.grid(), std::move(vals), U);
}

} // namespace mfdelay
