#pragma once

#include <vector>

#include "core/intervals.hpp"

namespace wentzell {

/// Right-continuous piecewise-constant function on [breaks.front(), breaks.back()].
class PiecewiseConstant {
public:
    PiecewiseConstant() = default;
    PiecewiseConstant(std::vector<double> breaks, std::vector<double> values);

    static PiecewiseConstant constant(double horizon, double value) {
        return PiecewiseConstant({0.0, horizon}, {value});
    }

    const std::vector<double>& breaks() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }
    double begin() const { return breaks_.front(); }
    double end() const { return breaks_.back(); }

    /// Value on the piece containing t; the last piece is closed at the end.
    double operator()(double t) const;
    double sup_abs() const;
    /// Exact integral over (s, t), s <= t.
    double integral(double s, double t) const;
    /// Exact integral of the square over (s, t).
    double integral_of_square(double s, double t) const;
    bool is_zero() const;

private:
    std::size_t piece(double t) const;

    std::vector<double> breaks_;
    std::vector<double> values_;
    std::vector<double> cumulative_;
    std::vector<double> cumulative_square_;
};

/// Drift coefficient a(t) and noise coefficient b(t), deterministic in time.
///
/// delta = 2|a|_inf + |b|_inf^2 is the decay margin used by the high-mode
/// estimate of the adjoint equation.
class CoefficientPair {
public:
    CoefficientPair(PiecewiseConstant a, PiecewiseConstant b);

    static CoefficientPair constant(double horizon, double a, double b) {
        return {PiecewiseConstant::constant(horizon, a), PiecewiseConstant::constant(horizon, b)};
    }

    const PiecewiseConstant& a() const { return a_; }
    const PiecewiseConstant& b() const { return b_; }
    double horizon() const { return a_.end(); }
    double a_sup() const { return a_sup_; }
    double b_sup() const { return b_sup_; }
    double delta() const { return delta_; }

    /// All breakpoints of a and b, merged and sorted.
    std::vector<double> breakpoints() const;

    /// Throws ConfigError unless every breakpoint is a multiple of dt.
    void check_aligned(double dt) const;

private:
    PiecewiseConstant a_;
    PiecewiseConstant b_;
    double a_sup_;
    double b_sup_;
    double delta_;
};

/// Exponent profile g(s) = -mu (q - s) + a_weight * ∫_s^q a + bsq_weight * ∫_0^s b^2,
/// affine in s on every piece where a and b are constant.
struct ExponentProfile {
    double mu = 0.0;
    double a_weight = 0.0;
    double bsq_weight = 0.0;
};

/// Exact value of ∫_{where ∩ (p, q)} exp(g(s)) ds for the profile above.
double integrate_exponential(const CoefficientPair& c, const IntervalSet& where, double p, double q,
                             const ExponentProfile& profile);

/// Same integral over the whole of (p, q).
double integrate_exponential(const CoefficientPair& c, double p, double q, const ExponentProfile& profile);

/// (1 - exp(-x)) / x, continuous at 0.
double relative_expm1(double x);

}  // namespace wentzell
