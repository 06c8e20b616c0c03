#include "mfdelay/regression.hpp"

#include <cmath>

namespace mfdelay {

RegressionBasis constant_basis() {
    RegressionBasis b;
    b.features.push_back([](double, std::span<const double>, double) { return 1.0; });
    b.ridge = 0.0;
    return b;
}

RegressionBasis polynomial_basis(int degree, std::size_t n_lifts, double ridge) {
    if (degree < 0) throw PreconditionError("polynomial_basis: degree must be >= 0");
    RegressionBasis b;
    b.ridge = ridge;
    b.features.push_back([](double, std::span<const double>, double) { return 1.0; });
    for (int d = 1; d <= degree; ++d) {
        b.features.push_back([d](double x, std::span<const double>, double) {
            double v = 1.0;
            for (int i = 0; i < d; ++i) v *= x;
            return v;
        });
    }
    for (std::size_t i = 0; i < n_lifts; ++i) {
        for (int d = 1; d <= degree; ++d) {
            b.features.push_back([i, d](double, std::span<const double> lifts, double) {
                const double base = i < lifts.size() ? lifts[i] : 0.0;
                double v = 1.0;
                for (int j = 0; j < d; ++j) v *= base;
                return v;
            });
        }
    }
    return b;
}

CrossSectionRegression::CrossSectionRegression(std::vector<double> design, std::size_t n,
                                               std::size_t f, double ridge)
    : design_(std::move(design)), n_(n), f_(f) {
    if (design_.size() != n_ * f_)
        throw PreconditionError("CrossSectionRegression: design size mismatch");

    // Normal matrix G = A^T A + ridge I, accumulated serially for
    // determinism. Extended precision keeps the accumulation error well
    // below the ridge even for 1e4+ identical rows, where the Cholesky
    // pivots are exactly ridge-sized.
    std::vector<long double> G_acc(f_ * f_, 0.0L);
    for (std::size_t i = 0; i < n_; ++i) {
        const double* row = &design_[i * f_];
        for (std::size_t a = 0; a < f_; ++a)
            for (std::size_t b = a; b < f_; ++b)
                G_acc[a * f_ + b] += static_cast<long double>(row[a]) * row[b];
    }
    std::vector<double> G(f_ * f_, 0.0);
    for (std::size_t a = 0; a < f_; ++a) {
        G[a * f_ + a] = static_cast<double>(G_acc[a * f_ + a]) + ridge;
        for (std::size_t b = a + 1; b < f_; ++b) {
            G[a * f_ + b] = static_cast<double>(G_acc[a * f_ + b]);
            G[b * f_ + a] = G[a * f_ + b];
        }
    }

    // In-place Cholesky; a tiny pivot means the basis is rank-deficient on
    // this cross-section.
    chol_.assign(f_ * f_, 0.0);
    for (std::size_t i = 0; i < f_; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = G[i * f_ + j];
            for (std::size_t k = 0; k < j; ++k) s -= chol_[i * f_ + k] * chol_[j * f_ + k];
            if (i == j) {
                if (s <= 1e-300)
                    throw NumericError(
                        "regression basis is rank-deficient on this cross-section; "
                        "increase the ridge regularizer or drop collinear features");
                chol_[i * f_ + i] = std::sqrt(s);
            } else {
                chol_[i * f_ + j] = s / chol_[j * f_ + j];
            }
        }
    }
}

std::vector<double> CrossSectionRegression::coefficients(std::span<const double> target) const {
    if (target.size() != n_)
        throw PreconditionError("CrossSectionRegression: target length mismatch");
    std::vector<long double> rhs_acc(f_, 0.0L);
    for (std::size_t i = 0; i < n_; ++i) {
        const double* row = &design_[i * f_];
        const double y = target[i];
        for (std::size_t a = 0; a < f_; ++a)
            rhs_acc[a] += static_cast<long double>(row[a]) * y;
    }
    std::vector<double> rhs(rhs_acc.begin(), rhs_acc.end());
    // Forward then backward substitution with the Cholesky factor.
    for (std::size_t i = 0; i < f_; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol_[i * f_ + k] * rhs[k];
        rhs[i] = s / chol_[i * f_ + i];
    }
    for (std::size_t ii = f_; ii-- > 0;) {
        double s = rhs[ii];
        for (std::size_t k = ii + 1; k < f_; ++k) s -= chol_[k * f_ + ii] * rhs[k];
        rhs[ii] = s / chol_[ii * f_ + ii];
    }
    return rhs;
}

void CrossSectionRegression::fit_into(std::span<const double> target,
                                      std::span<double> out) const {
    const std::vector<double> beta = coefficients(target);
    for (std::size_t i = 0; i < n_; ++i) {
        const double* row = &design_[i * f_];
        double v = 0.0;
        for (std::size_t a = 0; a < f_; ++a) v += row[a] * beta[a];
        out[i] = v;
    }
}

std::vector<double> CrossSectionRegression::fit(std::span<const double> target) const {
    std::vector<double> out(n_);
    fit_into(target, out);
    return out;
}

CrossSectionRegression make_step_regression(const RegressionBasis& basis,
                                            std::span<const double> x,
                                            const std::vector<std::vector<double>>& lifts,
                                            double t) {
    const std::size_t n = x.size();
    const std::size_t f = basis.size();
    std::vector<double> design(n * f);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> lift_row =
            lifts.empty() ? std::span<const double>{} : std::span<const double>(lifts[i]);
        for (std::size_t a = 0; a < f; ++a) design[i * f + a] = basis.features[a](x[i], lift_row, t);
    }
    return CrossSectionRegression(std::move(design), n, f, basis.ridge);
}

} // namespace mfdelay
