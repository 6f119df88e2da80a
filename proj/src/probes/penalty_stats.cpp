#include "gpl/probes/penalty_stats.hpp"

#include "gpl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace gpl::probes {

void PenaltyStatsConfig::validate() const {
  if (members < 2) throw std::invalid_argument("penalty stats: members must be >= 2");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("penalty stats: sigma must be finite and >= 0");
  }
  if (!std::isfinite(beta)) throw std::invalid_argument("penalty stats: beta must be finite");
  if (samples < 10000) throw std::invalid_argument("penalty stats: samples must be >= 10000");
  if (kind != critic::PenaltyKind::wasserstein && kind != critic::PenaltyKind::popstd) {
    throw std::invalid_argument("penalty stats: kind must be wasserstein or popstd");
  }
}

double gamma_half(int k) {
  if (k < 1) throw std::invalid_argument("gamma_half: k must be >= 1");
  double g = (k % 2 == 0) ? 1.0 : std::sqrt(std::numbers::pi);
  for (int j = (k % 2 == 0) ? 2 : 1; j < k; j += 2) g *= j / 2.0;
  return g;
}

double chi_mean(int k) { return std::numbers::sqrt2 * gamma_half(k + 1) / gamma_half(k); }

double wasserstein_reference(double beta, double sigma) {
  return 2.0 * beta * sigma / std::numbers::pi;
}

double wasserstein_exact(double beta, double sigma) {
  return 2.0 * beta * sigma * std::numbers::inv_sqrtpi;
}

double popstd_reference(int members, double beta, double sigma) {
  const double n = members;
  return beta * std::sqrt(n - 1.0) / n * chi_mean(members) * sigma;
}

double popstd_exact(int members, double beta, double sigma) {
  return beta * sigma / std::sqrt(static_cast<double>(members)) * chi_mean(members - 1);
}

void for_each_value_set(const PenaltyStatsConfig& c,
                        const std::function<void(std::span<const double>)>& fn) {
  c.validate();
  Rng rng(c.seed);
  std::vector<double> q(static_cast<std::size_t>(c.members));
  for (std::int64_t i = 0; i < c.samples; ++i) {
    for (double& v : q) v = c.sigma * rng.normal();
    fn(q);
  }
}

namespace {

PenaltyStats run(const PenaltyStatsConfig& c) {
  // Welford keeps the variance accurate over 10^6+ draws.
  double mean = 0.0, m2 = 0.0;
  std::int64_t n = 0;
  for_each_value_set(c, [&](std::span<const double> q) {
    const double p = c.kind == critic::PenaltyKind::wasserstein
                         ? critic::wasserstein_penalty(q, c.beta)
                         : critic::popstd_penalty(q, c.beta);
    ++n;
    const double d = p - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (p - mean);
  });
  PenaltyStats s;
  s.estimate = mean;
  s.standard_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  s.samples = n;
  if (c.kind == critic::PenaltyKind::wasserstein) {
    s.reference = wasserstein_reference(c.beta, c.sigma);
    s.exact_reference = wasserstein_exact(c.beta, c.sigma);
  } else {
    s.reference = popstd_reference(c.members, c.beta, c.sigma);
    s.exact_reference = popstd_exact(c.members, c.beta, c.sigma);
  }
  return s;
}

}  // namespace

PenaltyStats wasserstein_expectation_mc(PenaltyStatsConfig c) {
  c.kind = critic::PenaltyKind::wasserstein;
  return run(c);
}

PenaltyStats popstd_expectation_mc(PenaltyStatsConfig c) {
  c.kind = critic::PenaltyKind::popstd;
  return run(c);
}

PenaltyStats penalty_expectation_mc(const PenaltyStatsConfig& c) { return run(c); }

}  // namespace gpl::probes
