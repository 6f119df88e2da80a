#include "gpl/agent/metrics.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace gpl::agent {

namespace {

bool same(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b));
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::shared_ptr<std::ofstream> open(const std::filesystem::path& p, const std::string& header) {
  auto f = std::make_shared<std::ofstream>(p, std::ios::trunc);
  if (!*f) throw std::runtime_error("cannot open metrics file " + p.string());
  if (!header.empty()) *f << header << '\n';
  return f;
}

}  // namespace

bool StepRecord::operator==(const StepRecord& o) const {
  return step == o.step && same(reward, o.reward) && same(episode_return, o.episode_return) &&
         same(beta, o.beta) && same(alpha, o.alpha) && same(lambda, o.lambda) &&
         same(td_loss, o.td_loss) && same(bias, o.bias) && same(penalty_mean, o.penalty_mean) &&
         same(entropy, o.entropy) && critic_updates == o.critic_updates &&
         beta_updates == o.beta_updates && policy_updates == o.policy_updates &&
         alpha_updates == o.alpha_updates;
}

std::string RunMetrics::to_json(const StepRecord& r) {
  nlohmann::json j{{"type", "step"},
                   {"step", r.step},
                   {"reward", num(r.reward)},
                   {"episode_return", num(r.episode_return)},
                   {"beta", num(r.beta)},
                   {"alpha", num(r.alpha)},
                   {"lambda", num(r.lambda)},
                   {"td_loss", num(r.td_loss)},
                   {"bias", num(r.bias)},
                   {"penalty_mean", num(r.penalty_mean)},
                   {"entropy", num(r.entropy)},
                   {"critic_updates", r.critic_updates},
                   {"beta_updates", r.beta_updates},
                   {"policy_updates", r.policy_updates},
                   {"alpha_updates", r.alpha_updates}};
  return j.dump();
}

std::string RunMetrics::to_json(const EvalRecord& r) {
  nlohmann::json j{{"type", "eval"},
                   {"step", r.step},
                   {"mean_return", num(r.mean_return)},
                   {"std_return", num(r.std_return)},
                   {"episodes", r.episodes}};
  return j.dump();
}

std::string RunMetrics::csv_header_steps() {
  return "step,reward,episode_return,beta,alpha,lambda,td_loss,bias,penalty_mean,entropy,"
         "critic_updates,beta_updates,policy_updates,alpha_updates";
}

std::string RunMetrics::csv_header_evals() { return "step,mean_return,std_return,episodes"; }

std::string RunMetrics::to_csv(const StepRecord& r) {
  return std::to_string(r.step) + ',' + csv_num(r.reward) + ',' + csv_num(r.episode_return) +
         ',' + csv_num(r.beta) + ',' + csv_num(r.alpha) + ',' + csv_num(r.lambda) + ',' +
         csv_num(r.td_loss) + ',' + csv_num(r.bias) + ',' + csv_num(r.penalty_mean) + ',' +
         csv_num(r.entropy) + ',' + std::to_string(r.critic_updates) + ',' +
         std::to_string(r.beta_updates) + ',' + std::to_string(r.policy_updates) + ',' +
         std::to_string(r.alpha_updates);
}

std::string RunMetrics::to_csv(const EvalRecord& r) {
  return std::to_string(r.step) + ',' + csv_num(r.mean_return) + ',' + csv_num(r.std_return) +
         ',' + std::to_string(r.episodes);
}

void RunMetrics::stream_to(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  jsonl_ = open(dir / "metrics.jsonl", "");
  steps_csv_ = open(dir / "steps.csv", csv_header_steps());
  evals_csv_ = open(dir / "evals.csv", csv_header_evals());
}

void RunMetrics::add(const StepRecord& r) {
  if (!steps_.empty() && r.step <= steps_.back().step) {
    throw std::logic_error("RunMetrics: step indices must increase");
  }
  steps_.push_back(r);
  if (jsonl_) {
    *jsonl_ << to_json(r) << '\n';
    *steps_csv_ << to_csv(r) << '\n';
  }
}

void RunMetrics::add(const EvalRecord& r) {
  evals_.push_back(r);
  if (jsonl_) {
    *jsonl_ << to_json(r) << '\n';
    *evals_csv_ << to_csv(r) << '\n';
    flush();
  }
}

void RunMetrics::flush() {
  for (auto* f : {jsonl_.get(), steps_csv_.get(), evals_csv_.get()}) {
    if (f) f->flush();
  }
}

void RunMetrics::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto j = open(dir / "metrics.jsonl", "");
  auto s = open(dir / "steps.csv", csv_header_steps());
  auto e = open(dir / "evals.csv", csv_header_evals());
  // Interleave so the JSONL stays in event order.
  std::size_t ei = 0;
  for (const auto& r : steps_) {
    *j << to_json(r) << '\n';
    *s << to_csv(r) << '\n';
    while (ei < evals_.size() && evals_[ei].step == r.step) {
      *j << to_json(evals_[ei]) << '\n';
      *e << to_csv(evals_[ei]) << '\n';
      ++ei;
    }
  }
  for (; ei < evals_.size(); ++ei) {
    *j << to_json(evals_[ei]) << '\n';
    *e << to_csv(evals_[ei]) << '\n';
  }
}

}  // namespace gpl::agent
