#include "core/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell {

IntervalSet::IntervalSet(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
    for (const auto& iv : intervals_) {
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi)) {
            std::ostringstream os;
            os << "interval (" << iv.lo << ", " << iv.hi << ") must satisfy lo < hi";
            throw ArgumentError(os.str());
        }
    }
    std::sort(intervals_.begin(), intervals_.end(),
              [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    for (std::size_t i = 1; i < intervals_.size(); ++i) {
        if (intervals_[i].lo < intervals_[i - 1].hi) {
            std::ostringstream os;
            os << "intervals (" << intervals_[i - 1].lo << ", " << intervals_[i - 1].hi << ") and ("
               << intervals_[i].lo << ", " << intervals_[i].hi << ") overlap";
            throw ArgumentError(os.str());
        }
    }
}

double IntervalSet::measure() const {
    double m = 0.0;
    for (const auto& iv : intervals_) m += iv.length();
    return m;
}

double IntervalSet::measure_within(double s, double t) const {
    double m = 0.0;
    for (const auto& iv : intervals_) {
        const double lo = std::max(iv.lo, s);
        const double hi = std::min(iv.hi, t);
        if (hi > lo) m += hi - lo;
    }
    return m;
}

std::vector<Interval> IntervalSet::clip(double s, double t) const {
    std::vector<Interval> out;
    for (const auto& iv : intervals_) {
        const double lo = std::max(iv.lo, s);
        const double hi = std::min(iv.hi, t);
        if (hi > lo) out.push_back({lo, hi});
    }
    return out;
}

bool IntervalSet::contains(double x) const {
    return std::any_of(intervals_.begin(), intervals_.end(),
                       [x](const Interval& iv) { return iv.lo < x && x < iv.hi; });
}

double IntervalSet::inf() const {
    return intervals_.empty() ? std::numeric_limits<double>::quiet_NaN() : intervals_.front().lo;
}

double IntervalSet::sup() const {
    return intervals_.empty() ? std::numeric_limits<double>::quiet_NaN() : intervals_.back().hi;
}

bool IntervalSet::inside(double lo, double hi) const {
    return std::all_of(intervals_.begin(), intervals_.end(),
                       [=](const Interval& iv) { return iv.lo >= lo && iv.hi <= hi; });
}

}  // namespace wentzell
