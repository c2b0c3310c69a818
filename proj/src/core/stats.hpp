#pragma once

#include <span>
#include <vector>

namespace wentzell {

/// Ordinary least squares y = intercept + slope * x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    double max_abs_residual = 0.0;
    double r_squared = 0.0;
    int points = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Streaming sample mean and variance (Welford).
class RunningStats {
public:
    void add(double x);
    long count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;
    double standard_error() const;

private:
    long n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct MeanEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    long samples = 0;
};

MeanEstimate estimate_mean(std::span<const double> xs);

}  // namespace wentzell
