#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "core/coefficients.hpp"

namespace wentzell {

/// Per-path seed derived from the master seed and the path index.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t path);

/// Seeded Brownian increments on a uniform step grid of [0, T].
///
/// Increments are generated on demand from the per-path seed, so a bundle of
/// 10^4 paths x 2^14 steps costs nothing until a path is read. A coarsened
/// bundle sums groups of fine increments and therefore drives the same
/// Brownian paths at a larger step.
class BrownianBundle {
public:
    BrownianBundle(std::uint64_t seed, int n_steps, int paths, double horizon);

    std::uint64_t seed() const { return seed_; }
    int n_steps() const { return n_steps_; }
    int paths() const { return paths_; }
    double horizon() const { return horizon_; }
    double dt() const { return horizon_ / n_steps_; }
    double time(int k) const { return k == n_steps_ ? horizon_ : k * dt(); }

    /// Same paths with `factor` fine steps merged into one.
    BrownianBundle coarsened(int factor) const;

    void fill_increments(int path, std::span<double> out) const;
    std::vector<double> increments(int path) const;

    /// W(t_k), k = 0..n_steps, with W(0) = 0.
    std::vector<double> path_values(int path) const;

private:
    std::uint64_t seed_;
    int n_steps_;
    int paths_;
    double horizon_;
    int merge_ = 1;
};

BrownianBundle sample_brownian(std::uint64_t seed, int n_steps, int paths, double horizon);

/// log M(t_k) for one path, M(t) = exp(∫_0^t b dW - ½ ∫_0^t b² ds), using
/// left-point increments (exact for b constant on each step).
void log_noise_factor(std::span<const double> increments, const CoefficientPair& c, double dt,
                      std::span<double> out);

/// M(t_k) for every path, rows = paths, columns = k = 0..n_steps.
struct NoiseFactor {
    Eigen::MatrixXd values;
    double dt = 0.0;
};

NoiseFactor stochastic_factor(const BrownianBundle& bundle, const CoefficientPair& c);

/// E[M(t)^2] = exp(∫_0^t b² ds).
double noise_second_moment(const CoefficientPair& c, double t);

}  // namespace wentzell
