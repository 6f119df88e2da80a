#include "gpl/critic/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gpl::critic {

void PenaltySpec::validate(int members) const {
  if (!std::isfinite(beta)) throw std::invalid_argument("penalty: beta must be finite");
  switch (kind) {
    case PenaltyKind::minclip:
      if (members != 2) {
        throw std::invalid_argument("penalty: minclip requires exactly 2 critics, got " +
                                    std::to_string(members));
      }
      break;
    case PenaltyKind::wasserstein:
    case PenaltyKind::popstd:
      if (members < 2) {
        throw std::invalid_argument("penalty: " + to_string(kind) +
                                    " requires at least 2 critics, got " +
                                    std::to_string(members));
      }
      break;
    case PenaltyKind::none:
      break;
  }
  const bool learnable = kind == PenaltyKind::wasserstein || kind == PenaltyKind::popstd;
  if (beta_source != BetaSource::fixed && !learnable) {
    throw std::invalid_argument("penalty: beta can only be learned for wasserstein or popstd");
  }
}

std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::wasserstein: return "wasserstein";
    case PenaltyKind::popstd: return "popstd";
    case PenaltyKind::minclip: return "minclip";
    case PenaltyKind::none: return "none";
  }
  return "?";
}

std::string to_string(BetaSource s) {
  switch (s) {
    case BetaSource::fixed: return "fixed";
    case BetaSource::dual: return "dual";
    case BetaSource::end_to_end: return "e2e";
  }
  return "?";
}

PenaltyKind parse_penalty_kind(const std::string& s) {
  if (s == "wasserstein") return PenaltyKind::wasserstein;
  if (s == "popstd") return PenaltyKind::popstd;
  if (s == "minclip") return PenaltyKind::minclip;
  if (s == "none") return PenaltyKind::none;
  throw std::invalid_argument("unknown penalty kind '" + s +
                              "' (expected wasserstein, popstd, minclip or none)");
}

BetaSource parse_beta_source(const std::string& s) {
  if (s == "fixed") return BetaSource::fixed;
  if (s == "dual") return BetaSource::dual;
  if (s == "e2e") return BetaSource::end_to_end;
  throw std::invalid_argument("unknown beta source '" + s + "' (expected fixed, dual or e2e)");
}

double wasserstein_penalty(std::span<const double> values, double beta) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("wasserstein_penalty: needs at least 2 values");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) acc += std::abs(values[i] - values[j]);
  }
  return beta * 2.0 * acc / static_cast<double>(n * n - n);
}

double popstd_penalty(std::span<const double> values, double beta) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("popstd_penalty: needs at least 2 values");
  const double mu = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return beta * std::sqrt(ss / static_cast<double>(n));
}

double regularized_value(std::span<const double> values, PenaltyKind kind, double beta) {
  if (values.empty()) throw std::invalid_argument("regularized_value: no values");
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  switch (kind) {
    case PenaltyKind::wasserstein: return mean - wasserstein_penalty(values, beta);
    case PenaltyKind::popstd: return mean - popstd_penalty(values, beta);
    case PenaltyKind::minclip:
      if (values.size() != 2) throw std::invalid_argument("minclip requires exactly 2 values");
      return std::min(values[0], values[1]);
    case PenaltyKind::none: return mean;
  }
  return mean;
}

Var dispersion(const Var& values, PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::wasserstein: return nn::pairwise_abs_mean(values);
    case PenaltyKind::popstd: return nn::row_population_std(values);
    case PenaltyKind::minclip:
    case PenaltyKind::none: break;
  }
  return values.tape().constant(nn::Matrix<double>::Zero(values.rows(), 1));
}

Var regularized_value(const Var& values, PenaltyKind kind, const Var& beta) {
  switch (kind) {
    case PenaltyKind::wasserstein:
    case PenaltyKind::popstd:
      if (values.cols() < 2) {
        throw std::invalid_argument("regularized_value: " + to_string(kind) +
                                    " needs at least 2 members");
      }
      return nn::row_mean(values) - nn::scale(dispersion(values, kind), beta);
    case PenaltyKind::minclip:
      if (values.cols() != 2) {
        throw std::invalid_argument("regularized_value: minclip requires exactly 2 members");
      }
      return nn::row_min(values);
    case PenaltyKind::none: return nn::row_mean(values);
  }
  return nn::row_mean(values);
}

}  // namespace gpl::critic
