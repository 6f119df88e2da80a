#pragma once

#include "gpl/critic/penalty.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace gpl::probes {

struct PenaltyStatsConfig {
  int members = 2;
  double sigma = 1.0;
  double beta = 0.5;
  std::int64_t samples = 1000000;
  std::uint64_t seed = 0;
  critic::PenaltyKind kind = critic::PenaltyKind::wasserstein;

  /// members >= 2, sigma >= 0, samples >= 10^4, kind wasserstein or popstd.
  void validate() const;
};

struct PenaltyStats {
  double estimate = 0.0;
  double standard_error = 0.0;
  /// Closed form as commonly stated: 2 beta sigma / pi for the pairwise
  /// penalty, beta sqrt(N-1)/N * E[chi_N] * sigma for the population std.
  double reference = 0.0;
  /// Exact expectation: 2 beta sigma / sqrt(pi), and
  /// beta sigma / sqrt(N) * E[chi_(N-1)].
  double exact_reference = 0.0;
  std::int64_t samples = 0;
};

/// Gamma(k / 2) for integer k >= 1 by the recurrence Gamma(x + 1) = x Gamma(x)
/// from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
double gamma_half(int k);

/// E[chi_k] = sqrt(2) Gamma((k + 1) / 2) / Gamma(k / 2).
double chi_mean(int k);

double wasserstein_reference(double beta, double sigma);
double wasserstein_exact(double beta, double sigma);
double popstd_reference(int members, double beta, double sigma);
double popstd_exact(int members, double beta, double sigma);

/// Calls `fn` with each of the config's i.i.d. Normal(0, sigma^2) value
/// sets, in draw order. Every estimator below consumes this same stream.
void for_each_value_set(const PenaltyStatsConfig& c,
                        const std::function<void(std::span<const double>)>& fn);

PenaltyStats wasserstein_expectation_mc(PenaltyStatsConfig c);
PenaltyStats popstd_expectation_mc(PenaltyStatsConfig c);
/// Dispatches on c.kind.
PenaltyStats penalty_expectation_mc(const PenaltyStatsConfig& c);

}  // namespace gpl::probes
