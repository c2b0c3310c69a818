#pragma once

#include <vector>

namespace wentzell {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

/// Finite union of disjoint open intervals, kept sorted. Touching endpoints
/// are allowed; overlapping intervals are rejected.
class IntervalSet {
public:
    IntervalSet() = default;
    explicit IntervalSet(std::vector<Interval> intervals);

    static IntervalSet single(double lo, double hi) { return IntervalSet({{lo, hi}}); }

    const std::vector<Interval>& intervals() const { return intervals_; }
    bool empty() const { return intervals_.empty(); }
    double measure() const;

    /// Lebesgue measure of the set intersected with (s, t).
    double measure_within(double s, double t) const;

    /// Pieces of the set inside (s, t) with positive length, in order.
    std::vector<Interval> clip(double s, double t) const;

    bool contains(double x) const;
    double inf() const;
    double sup() const;

    /// True when every interval lies in [lo, hi].
    bool inside(double lo, double hi) const;

private:
    std::vector<Interval> intervals_;
};

}  // namespace wentzell
