#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mfdelay/delay.hpp"
#include "mfdelay/noise.hpp"

namespace mfdelay {

/// Argument bundle passed to every coefficient function. Models read the
/// fields they care about and ignore the rest; the finite-horizon forward
/// coefficients, for example, never look at m or y.
struct CoeffArgs {
    double t = 0.0;
    std::span<const double> x;  // lifted delayed state, one entry per delay measure
    std::span<const double> m;  // particle-average lifted state E[X(t)]
    double m_phi = 0.0;         // E[Phi(X(t))], the scalar mean-field channel of f
    double y = 0.0;             // backward value Y(t)
    double y_mean = 0.0;        // E[Y(t)]
    double z = 0.0;             // diffusion loading Z(t)
    std::span<const double> k;  // jump loadings K(t, e_j)
    double u = 0.0;             // control value
};

/// Partial-derivative selector. X, M and K carry a component index.
struct DerivKey {
    enum class Tag : std::uint8_t { X, M, MPhi, Y, N, Z, K, U };
    Tag tag;
    std::size_t index = 0;

    bool operator<(const DerivKey& o) const {
        return tag != o.tag ? tag < o.tag : index < o.index;
    }
    static DerivKey x(std::size_t i) { return {Tag::X, i}; }
    static DerivKey m(std::size_t i) { return {Tag::M, i}; }
    static DerivKey m_phi() { return {Tag::MPhi, 0}; }
    static DerivKey y() { return {Tag::Y, 0}; }
    static DerivKey n() { return {Tag::N, 0}; }
    static DerivKey z() { return {Tag::Z, 0}; }
    static DerivKey k(std::size_t j) { return {Tag::K, j}; }
    static DerivKey u() { return {Tag::U, 0}; }
};

std::string to_string(const DerivKey& key);

/// Scalar coefficient (b, sigma, g or f). A partial derivative is taken from
/// the registered closure when present, by central finite differences when
/// fd_fallback is set, and is identically zero otherwise — so declaring a
/// coefficient independent of a variable is exact, not approximate.
struct CoefficientFn {
    std::function<double(const CoeffArgs&)> value;
    std::map<DerivKey, std::function<double(const CoeffArgs&)>> partials;
    bool fd_fallback = false;

    double operator()(const CoeffArgs& a) const { return value(a); }
    double partial(const CoeffArgs& a, const DerivKey& key, double fd_step) const;
};

/// Jump coefficient gamma(t, x, m, u, e); same derivative conventions.
struct JumpCoefficientFn {
    std::function<double(const CoeffArgs&, double e)> value;
    std::map<DerivKey, std::function<double(const CoeffArgs&, double e)>> partials;
    bool fd_fallback = false;

    double operator()(const CoeffArgs& a, double e) const { return value(a, e); }
    double partial(const CoeffArgs& a, double e, const DerivKey& key, double fd_step) const;
};

/// Scalar terminal/initial utility with registered derivative.
struct UtilityFn {
    std::function<double(double)> value = [](double) { return 0.0; };
    std::function<double(double)> deriv = [](double) { return 0.0; };
};

/// Terminal coupling h2(x, n) with both partials.
struct TerminalFn {
    std::function<double(double, double)> value = [](double, double) { return 0.0; };
    std::function<double(double, double)> dx = [](double, double) { return 0.0; };
    std::function<double(double, double)> dn = [](double, double) { return 0.0; };
};

struct FiniteHorizon {
    double T = 1.0;
};
struct InfiniteHorizon {
    double T_max = 10.0; // truncation point
    double kappa = 0.1;  // decay rate used by the norm diagnostics
};
using HorizonMode = std::variant<FiniteHorizon, InfiniteHorizon>;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
};

/// The model tuple. b and sigma see (t, x, m, u); gamma additionally sees the
/// mark e; g and f see the full argument bundle. h1/h2 enter the finite
/// objective, h the infinite one; Phi and psi are the mean-field lifts of the
/// running cost and of h2 respectively.
struct CoefficientModel {
    CoefficientFn b;
    CoefficientFn sigma;
    JumpCoefficientFn gamma;
    CoefficientFn g;
    CoefficientFn f;

    UtilityFn h1; // initial utility h1(Y(0))
    TerminalFn h2;
    UtilityFn h;  // infinite-horizon utility h(Y(0))

    UtilityFn Phi; // running mean-field lift; value + derivative
    UtilityFn psi; // terminal mean-field lift

    double a = 0.0; // terminal condition Y(T) = a X(T)
    Interval U;
    DelaySpec delay;
    JumpSpec jumps;
    HorizonMode horizon = FiniteHorizon{1.0};

    std::function<double(double)> x0 = [](double) { return 0.0; }; // prehistory

    double fd_step = 1e-5;

    std::size_t n_lifts() const { return delay.dimension(); }
    bool is_infinite() const { return std::holds_alternative<InfiniteHorizon>(horizon); }
    double horizon_T() const {
        return is_infinite() ? std::get<InfiniteHorizon>(horizon).T_max
                             : std::get<FiniteHorizon>(horizon).T;
    }
    double kappa() const {
        return is_infinite() ? std::get<InfiniteHorizon>(horizon).kappa : 0.0;
    }
};

/// Registration probe: every registered analytic partial of b, sigma, gamma,
/// g and f is compared against a central finite difference at n_points random
/// points; a mismatch beyond 1e-5 relative throws with the offending
/// coefficient and variable named.
void verify_model_derivatives(const CoefficientModel& model, std::size_t n_points = 100,
                              std::uint64_t probe_seed = 0x5eedD11ceULL);

/// Cadlag control path on the main grid, clamped into U at construction.
class ControlProcess {
public:
    ControlProcess() = default;
    ControlProcess(const TimeGrid& grid, std::vector<double> values, Interval range);

    static ControlProcess constant(const TimeGrid& grid, double v, Interval range);

    const TimeGrid& grid() const { return grid_; }
    double at_step(std::size_t k) const { return values_[k]; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

/// Bounded perturbation direction eta for control variations.
struct Perturbation {
    std::vector<double> values; // one per main node
    double bound = 0.0;

    static Perturbation bump(const TimeGrid& grid, double t0, double width, double height);
    static Perturbation constant(const TimeGrid& grid, double height);
};

/// pi + s * eta; throws PreconditionError when any value leaves U.
ControlProcess shifted_control(const ControlProcess& pi, const Perturbation& eta, double s,
                               const Interval& U);

/// pi + s * eta clamped into U (used for probe alternatives).
ControlProcess shifted_control_clamped(const ControlProcess& pi, const Perturbation& eta,
                                       double s, const Interval& U);

} // namespace mfdelay
