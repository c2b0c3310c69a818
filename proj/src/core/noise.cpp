#include "core/noise.hpp"

#include <cmath>
#include <random>

#include "core/errors.hpp"

namespace wentzell {

std::uint64_t path_seed(std::uint64_t master, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

BrownianBundle::BrownianBundle(std::uint64_t seed, int n_steps, int paths, double horizon)
    : seed_(seed), n_steps_(n_steps), paths_(paths), horizon_(horizon) {
    if (n_steps < 1) throw ArgumentError("Brownian bundle needs n_steps >= 1");
    if (paths < 1) throw ArgumentError("Brownian bundle needs paths >= 1");
    if (!(horizon > 0.0)) throw ArgumentError("Brownian bundle needs a positive horizon");
}

BrownianBundle BrownianBundle::coarsened(int factor) const {
    if (factor < 1 || n_steps_ % factor != 0) throw ArgumentError("coarsening factor must divide n_steps");
    BrownianBundle out(seed_, n_steps_ / factor, paths_, horizon_);
    out.merge_ = merge_ * factor;
    return out;
}

void BrownianBundle::fill_increments(int path, std::span<double> out) const {
    if (path < 0 || path >= paths_) throw ArgumentError("path index out of range");
    if (out.size() != static_cast<std::size_t>(n_steps_)) throw DimensionError("increment buffer has wrong length");
    std::mt19937_64 rng(path_seed(seed_, static_cast<std::uint64_t>(path)));
    const double fine_dt = dt() / merge_;
    std::normal_distribution<double> normal(0.0, std::sqrt(fine_dt));
    for (auto& dw : out) {
        double sum = 0.0;
        for (int m = 0; m < merge_; ++m) sum += normal(rng);
        dw = sum;
    }
}

std::vector<double> BrownianBundle::increments(int path) const {
    std::vector<double> out(static_cast<std::size_t>(n_steps_));
    fill_increments(path, out);
    return out;
}

std::vector<double> BrownianBundle::path_values(int path) const {
    const auto inc = increments(path);
    std::vector<double> w(inc.size() + 1, 0.0);
    for (std::size_t k = 0; k < inc.size(); ++k) w[k + 1] = w[k] + inc[k];
    return w;
}

BrownianBundle sample_brownian(std::uint64_t seed, int n_steps, int paths, double horizon) {
    return BrownianBundle(seed, n_steps, paths, horizon);
}

void log_noise_factor(std::span<const double> increments, const CoefficientPair& c, double dt,
                      std::span<double> out) {
    if (out.size() != increments.size() + 1) throw DimensionError("noise factor buffer has wrong length");
    out[0] = 0.0;
    for (std::size_t k = 0; k < increments.size(); ++k) {
        const double t = static_cast<double>(k) * dt;
        const double bk = c.b()(t + 0.5 * dt);
        out[k + 1] = out[k] + bk * increments[k] - 0.5 * bk * bk * dt;
    }
}

NoiseFactor stochastic_factor(const BrownianBundle& bundle, const CoefficientPair& c) {
    if (std::abs(c.horizon() - bundle.horizon()) > 1e-12 * bundle.horizon())
        throw ConfigError("coefficients and Brownian bundle have different horizons");
    c.check_aligned(bundle.dt());
    NoiseFactor nf;
    nf.dt = bundle.dt();
    nf.values.resize(bundle.paths(), bundle.n_steps() + 1);
    std::vector<double> inc(static_cast<std::size_t>(bundle.n_steps()));
    std::vector<double> logm(inc.size() + 1);
    for (int p = 0; p < bundle.paths(); ++p) {
        bundle.fill_increments(p, inc);
        log_noise_factor(inc, c, bundle.dt(), logm);
        for (std::size_t k = 0; k < logm.size(); ++k) nf.values(p, static_cast<Eigen::Index>(k)) = std::exp(logm[k]);
    }
    return nf;
}

double noise_second_moment(const CoefficientPair& c, double t) { return std::exp(c.b().integral_of_square(0.0, t)); }

}  // namespace wentzell
