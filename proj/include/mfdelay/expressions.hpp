#pragma once

#include <memory>
#include <set>
#include <string>

#include "mfdelay/model.hpp"

namespace mfdelay {

/// Restricted arithmetic expressions over the variables
///   t, x1..xN, m, y, n, z, u
/// with operators + - * / ^ and the functions exp, log, min, max. Used by the
/// CLI to define coefficient models; derivatives come from symbolic
/// differentiation of the expression tree (min/max differentiate along the
/// active branch).
class Expression {
public:
    Expression() = default;

    /// Throws PreconditionError with the offending position on parse errors.
    static Expression parse(const std::string& text);

    /// m_is_phi_channel selects what the variable m binds to: the scalar
    /// E[Phi(X(t))] channel (finite horizon) or the first lifted mean
    /// E[X_1(t)] (infinite horizon).
    double eval(const CoeffArgs& args, bool m_is_phi_channel) const;

    /// Symbolic partial derivative; the zero expression when the variable
    /// does not appear.
    Expression derivative(const DerivKey& key, bool m_is_phi_channel) const;

    bool is_zero() const;
    std::string to_string() const;

    /// Largest i among x-variables used (0 when none).
    std::size_t max_x_index() const;

    /// Names of all variables appearing.
    std::set<std::string> variables() const;

    struct Node; // expression tree node; defined in the implementation

private:
    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
    std::shared_ptr<const Node> root_;
};

/// Wraps an expression as a model coefficient, registering the nonzero
/// symbolic partials for every variable the expression reads.
CoefficientFn coefficient_from_expression(const Expression& expr, bool m_is_phi_channel);

/// Same for the jump coefficient; the grammar carries no mark variable, so
/// the expression is constant in e.
JumpCoefficientFn jump_coefficient_from_expression(const Expression& expr,
                                                   bool m_is_phi_channel);

/// Scalar utility u(y) from an expression in the single variable y.
UtilityFn utility_from_expression(const Expression& expr);

} // namespace mfdelay
