#include "core/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell {

PiecewiseConstant::PiecewiseConstant(std::vector<double> breaks, std::vector<double> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.size() < 2 || values_.size() + 1 != breaks_.size())
        throw ConfigError("piecewise coefficient needs n+1 breakpoints for n values");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
        if (!(breaks_[i] > breaks_[i - 1])) throw ConfigError("coefficient breakpoints must increase");
    for (double v : values_)
        if (!std::isfinite(v)) throw ConfigError("coefficient values must be finite");

    cumulative_.assign(breaks_.size(), 0.0);
    cumulative_square_.assign(breaks_.size(), 0.0);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double len = breaks_[i + 1] - breaks_[i];
        cumulative_[i + 1] = cumulative_[i] + values_[i] * len;
        cumulative_square_[i + 1] = cumulative_square_[i] + values_[i] * values_[i] * len;
    }
}

std::size_t PiecewiseConstant::piece(double t) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    if (it == breaks_.begin()) return 0;
    const auto idx = static_cast<std::size_t>(it - breaks_.begin()) - 1;
    return std::min(idx, values_.size() - 1);
}

double PiecewiseConstant::operator()(double t) const { return values_[piece(t)]; }

double PiecewiseConstant::sup_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double PiecewiseConstant::integral(double s, double t) const {
    auto primitive = [&](double x) {
        const std::size_t k = piece(x);
        return cumulative_[k] + values_[k] * (x - breaks_[k]);
    };
    return primitive(t) - primitive(s);
}

double PiecewiseConstant::integral_of_square(double s, double t) const {
    auto primitive = [&](double x) {
        const std::size_t k = piece(x);
        return cumulative_square_[k] + values_[k] * values_[k] * (x - breaks_[k]);
    };
    return primitive(t) - primitive(s);
}

bool PiecewiseConstant::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

CoefficientPair::CoefficientPair(PiecewiseConstant a, PiecewiseConstant b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.begin() != 0.0 || b_.begin() != 0.0) throw ConfigError("coefficients must start at t = 0");
    if (std::abs(a_.end() - b_.end()) > 1e-12 * std::max(1.0, a_.end()))
        throw ConfigError("coefficients a and b must share the horizon");
    a_sup_ = a_.sup_abs();
    b_sup_ = b_.sup_abs();
    delta_ = 2.0 * a_sup_ + b_sup_ * b_sup_;
}

std::vector<double> CoefficientPair::breakpoints() const {
    std::vector<double> out = a_.breaks();
    out.insert(out.end(), b_.breaks().begin(), b_.breaks().end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void CoefficientPair::check_aligned(double dt) const {
    for (double t : breakpoints()) {
        const double k = std::round(t / dt);
        if (std::abs(t - k * dt) > 1e-9 * std::max(dt, std::abs(t))) {
            std::ostringstream os;
            os << "coefficient breakpoint " << t << " is not a multiple of the step dt=" << dt;
            throw ConfigError(os.str());
        }
    }
}

double relative_expm1(double x) {
    if (x == 0.0) return 1.0;
    return -std::expm1(-x) / x;
}

namespace {

std::vector<double> merged_cuts(const CoefficientPair& c, double p, double q) {
    std::vector<double> cuts{p, q};
    for (double t : c.breakpoints())
        if (t > p && t < q) cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

double integrate_pieces(const CoefficientPair& c, const std::vector<Interval>& pieces, double q,
                        const ExponentProfile& g) {
    const auto& a = c.a();
    const auto& b = c.b();
    double total = 0.0;
    for (const auto& piece : pieces) {
        const auto cuts = merged_cuts(c, piece.lo, piece.hi);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const Interval cut{cuts[i], cuts[i + 1]};
            const double mid = 0.5 * (cut.lo + cut.hi);
            const double a_c = a(mid);
            const double b_c = b(mid);
            const double len = cut.length();
            // g is affine on the cut: g(s) = g(hi) - slope * (hi - s).
            const double g_hi = -g.mu * (q - cut.hi) + g.a_weight * a.integral(cut.hi, q) +
                                g.bsq_weight * b.integral_of_square(0.0, cut.hi);
            const double slope = g.mu - g.a_weight * a_c + g.bsq_weight * b_c * b_c;
            total += std::exp(g_hi) * len * relative_expm1(slope * len);
        }
    }
    return total;
}

}  // namespace

double integrate_exponential(const CoefficientPair& c, const IntervalSet& where, double p, double q,
                             const ExponentProfile& profile) {
    if (!(q > p)) return 0.0;
    return integrate_pieces(c, where.clip(p, q), q, profile);
}

double integrate_exponential(const CoefficientPair& c, double p, double q, const ExponentProfile& profile) {
    if (!(q > p)) return 0.0;
    return integrate_pieces(c, {{p, q}}, q, profile);
}

}  // namespace wentzell
