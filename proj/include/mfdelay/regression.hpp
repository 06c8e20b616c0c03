#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mfdelay/errors.hpp"

namespace mfdelay {

/// Feature set for the cross-sectional least-squares realization of
/// conditional expectations E[ . | F_t]. Each feature sees the particle's
/// current state, its lifted delayed state and the time.
struct RegressionBasis {
    using Feature = std::function<double(double x, std::span<const double> lifts, double t)>;
    std::vector<Feature> features;
    double ridge = 1e-8;

    std::size_t size() const { return features.size(); }
};

/// Single constant feature: the fit is the cross-sectional mean.
RegressionBasis constant_basis();

/// Monomials 1, x, ..., x^degree, optionally followed by lift_i, ...,
/// lift_i^degree for each of n_lifts lifted components.
RegressionBasis polynomial_basis(int degree, std::size_t n_lifts = 0, double ridge = 1e-8);

/// Ridge least squares on a fixed design matrix, factored once and reused
/// for several targets (Y, Z, K, p, Upsilon share the step's features).
class CrossSectionRegression {
public:
    /// design is row-major n x f. Throws NumericError with a ridge hint when
    /// the normal equations are numerically rank-deficient.
    CrossSectionRegression(std::vector<double> design, std::size_t n, std::size_t f,
                           double ridge);

    std::size_t n_samples() const { return n_; }
    std::size_t n_features() const { return f_; }

    std::vector<double> coefficients(std::span<const double> target) const;
    /// Fitted values A * beta_hat at the design points.
    std::vector<double> fit(std::span<const double> target) const;
    void fit_into(std::span<const double> target, std::span<double> out) const;

private:
    std::vector<double> design_; // n x f row-major
    std::size_t n_, f_;
    std::vector<double> chol_;   // f x f lower Cholesky factor of A^T A + ridge I
};

/// Evaluates the basis on a cross-section and returns the factored regression.
CrossSectionRegression make_step_regression(const RegressionBasis& basis,
                                            std::span<const double> x,
                                            const std::vector<std::vector<double>>& lifts,
                                            double t);

} // namespace mfdelay
