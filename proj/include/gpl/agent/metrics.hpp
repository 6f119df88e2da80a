#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace gpl::agent {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Per environment step. NaN marks quantities not produced this step
/// (no update during warmup, no episode end); they serialize as null / empty.
struct StepRecord {
  std::int64_t step = 0;
  double reward = 0.0;
  double episode_return = kMissing;
  double beta = kMissing;
  double alpha = kMissing;
  double lambda = kMissing;
  double td_loss = kMissing;
  double bias = kMissing;
  double penalty_mean = kMissing;
  double entropy = kMissing;
  std::int64_t critic_updates = 0;
  std::int64_t beta_updates = 0;
  std::int64_t policy_updates = 0;
  std::int64_t alpha_updates = 0;

  bool operator==(const StepRecord&) const;
};

struct EvalRecord {
  std::int64_t step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  int episodes = 0;

  bool operator==(const EvalRecord&) const = default;
};

/// Append-only run log. When streaming is enabled, each record is also
/// written immediately as one JSON line and one CSV row.
class RunMetrics {
 public:
  RunMetrics() = default;

  void stream_to(const std::filesystem::path& dir);
  void add(const StepRecord& r);
  void add(const EvalRecord& r);
  void flush();

  const std::vector<StepRecord>& steps() const { return steps_; }
  const std::vector<EvalRecord>& evals() const { return evals_; }

  /// metrics.jsonl, steps.csv and evals.csv under `dir`.
  void write(const std::filesystem::path& dir) const;

  static std::string to_json(const StepRecord& r);
  static std::string to_json(const EvalRecord& r);
  static std::string csv_header_steps();
  static std::string csv_header_evals();
  static std::string to_csv(const StepRecord& r);
  static std::string to_csv(const EvalRecord& r);

 private:
  std::vector<StepRecord> steps_;
  std::vector<EvalRecord> evals_;
  std::shared_ptr<std::ofstream> jsonl_, steps_csv_, evals_csv_;
};

}  // namespace gpl::agent
