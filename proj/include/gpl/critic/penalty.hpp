#pragma once

#include "gpl/nn/ops.hpp"

#include <span>
#include <stdexcept>
#include <string>

namespace gpl::critic {

enum class PenaltyKind {
  /// beta times the mean absolute difference over ordered member pairs.
  wasserstein,
  /// beta times the population standard deviation of the members.
  popstd,
  /// min of exactly two members (clipped double Q).
  minclip,
  none,
};

enum class BetaSource { fixed, dual, end_to_end };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::wasserstein;
  BetaSource beta_source = BetaSource::dual;
  /// Used when beta_source is fixed, and as the initial value otherwise.
  double beta = 0.5;

  /// Throws std::invalid_argument when the kind cannot be used with
  /// `members` critics or the beta source cannot be used with the kind.
  void validate(int members) const;
};

std::string to_string(PenaltyKind k);
std::string to_string(BetaSource s);
PenaltyKind parse_penalty_kind(const std::string& s);
BetaSource parse_beta_source(const std::string& s);

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// beta / (N^2 - N) * sum_i sum_{j != i} |q_i - q_j|
double wasserstein_penalty(std::span<const double> values, double beta);
/// beta * sqrt(sum_i (q_i - mean)^2 / N)
double popstd_penalty(std::span<const double> values, double beta);
/// Member mean minus the penalty; min(q_1, q_2) for minclip, the mean for none.
double regularized_value(std::span<const double> values, PenaltyKind kind, double beta);

using Var = nn::Var<double>;

/// Unweighted per-row dispersion (B x N -> B x 1) used by a kind, i.e. the
/// penalty divided by beta. Zero for minclip and none.
Var dispersion(const Var& values, PenaltyKind kind);

/// Per-row regularized value, B x N -> B x 1. `beta` is a 1 x 1 node so the
/// result is differentiable in beta as well as in the member values.
Var regularized_value(const Var& values, PenaltyKind kind, const Var& beta);

}  // namespace gpl::critic
