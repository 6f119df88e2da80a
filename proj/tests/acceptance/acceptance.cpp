// Acceptance suite: one PASS/FAIL line per criterion. Long-running training
// criteria share runs through a JSON cache keyed by the serialized config.

#include "gpl/agent/agent.hpp"
#include "gpl/nn/gradient_check.hpp"
#include "gpl/pessimism/pessimism.hpp"
#include "gpl/policy/gaussian_policy.hpp"
#include "gpl/probes/bias_probe.hpp"
#include "gpl/probes/penalty_stats.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace gpl;
using nlohmann::json;
using Mat = nn::Matrix<double>;

namespace {

// Tolerances, pinned.
constexpr double kC1RelTol = 0.01;
constexpr double kC1AcrossNTol = 0.02;
constexpr double kC1MaxSeconds = 30.0;
constexpr double kC2RelTol = 0.01;
constexpr double kC2RatioSigmas = 3.0;
constexpr double kC3Tol = 1e-9;
constexpr double kC4Tol = 1e-4;
constexpr double kC9Tol = 0.3;
constexpr double kC7MaxSeconds = 15 * 60;
constexpr int kSeedsNeeded = 4;
const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

// Criterion 7 oracle: mean final evaluation return of the fixed-beta = 0.5,
// N = 2 baseline over kSeeds at desk defaults, produced offline by
// `gpl_acceptance --derive-threshold` and frozen here.
constexpr double kC7Threshold = -180.128257;

int g_failures = 0;

void report(int criterion, bool pass, const std::string& summary) {
  std::printf("[criterion %d] %s: %s\n", criterion, pass ? "PASS" : "FAIL", summary.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void info(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Mat random_matrix(nn::Index r, nn::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Cached training runs

struct RunResult {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> probe_steps;
  std::vector<double> probe_bias;
  double bias_avg = 0.0;
  double bias_abs_avg = 0.0;
  std::vector<std::int64_t> eval_steps;
  std::vector<double> eval_returns;
  double entropy_last1000 = 0.0;
  /// Mean TD-error bias estimate over the last 1000 steps.
  double td_bias_last1000 = 0.0;
  std::int64_t first_goal_step = -1;
  double final_beta = 0.0;
  double seconds = 0.0;
};

json to_json(const RunResult& r, const std::string& config, bool probed) {
  return json{{"name", r.name},
              {"config", config},
              {"probed", probed},
              {"seed", r.seed},
              {"probe_steps", r.probe_steps},
              {"probe_bias", r.probe_bias},
              {"bias_avg", r.bias_avg},
              {"bias_abs_avg", r.bias_abs_avg},
              {"eval_steps", r.eval_steps},
              {"eval_returns", r.eval_returns},
              {"entropy_last1000", r.entropy_last1000},
              {"td_bias_last1000", r.td_bias_last1000},
              {"first_goal_step", r.first_goal_step},
              {"final_beta", r.final_beta},
              {"seconds", r.seconds}};
}

RunResult from_json(const json& j) {
  RunResult r;
  r.name = j.at("name");
  r.seed = j.at("seed");
  r.probe_steps = j.at("probe_steps").get<std::vector<std::int64_t>>();
  r.probe_bias = j.at("probe_bias").get<std::vector<double>>();
  r.bias_avg = j.at("bias_avg").is_null() ? std::nan("") : j.at("bias_avg").get<double>();
  r.bias_abs_avg = j.at("bias_abs_avg").is_null() ? std::nan("") : j.at("bias_abs_avg").get<double>();
  r.eval_steps = j.at("eval_steps").get<std::vector<std::int64_t>>();
  r.eval_returns = j.at("eval_returns").get<std::vector<double>>();
  r.entropy_last1000 = j.at("entropy_last1000");
  r.td_bias_last1000 = j.value("td_bias_last1000", std::nan(""));
  r.first_goal_step = j.at("first_goal_step");
  r.final_beta = j.at("final_beta");
  r.seconds = j.at("seconds");
  return r;
}

class RunCache {
 public:
  explicit RunCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  /// Trains (or loads) one run. With `probe`, the rollout bias probe runs
  /// every 1000 steps on 10 episodes.
  RunResult get(const std::string& name, const agent::AgentConfig& config, bool probe) {
    const std::string text = agent::serialize(config);
    const fs::path file = dir_ / (name + ".json");
    if (fs::exists(file)) {
      std::ifstream in(file);
      const json j = json::parse(in, nullptr, false);
      if (!j.is_discarded() && j.value("config", "") == text && j.value("probed", false) == probe) {
        return from_json(j);
      }
    }
    info("training " + name + " (" + std::to_string(config.total_steps) + " steps)");
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    r.name = name;
    r.seed = config.seed;
    agent::RunMetrics metrics;
    metrics.stream_to(dir_ / name);
    if (probe) {
      probes::ProbeSchedule schedule;
      schedule.probe.seed = config.seed * 7717ULL;
      const auto traj = probes::tracked_run(config, schedule, name, &metrics);
      r.probe_steps = traj.steps;
      r.probe_bias = traj.bias;
      r.bias_avg = traj.time_average;
      r.bias_abs_avg = traj.time_average_abs;
    } else {
      agent::Agent a(config);
      a.train(metrics);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& e : metrics.evals()) {
      r.eval_steps.push_back(e.step);
      r.eval_returns.push_back(e.mean_return);
    }
    const auto& steps = metrics.steps();
    double ent = 0.0, td = 0.0;
    int n = 0, nt = 0;
    for (const auto& s : steps) {
      if (s.step > config.total_steps - 1000 && !std::isnan(s.entropy)) {
        ent += s.entropy;
        ++n;
      }
      if (s.step > config.total_steps - 1000 && !std::isnan(s.bias)) {
        td += s.bias;
        ++nt;
      }
      if (r.first_goal_step < 0 && s.reward > 0.0 && config.env == "point_mass") {
        r.first_goal_step = s.step;
      }
    }
    r.entropy_last1000 = n ? ent / n : std::nan("");
    r.td_bias_last1000 = nt ? td / nt : std::nan("");
    r.final_beta = steps.empty() ? std::nan("") : steps.back().beta;
    std::ofstream out(file);
    out << to_json(r, text, probe).dump(1) << '\n';
    info(fmt("  done in %.1f s", r.seconds));
    return r;
  }

 private:
  fs::path dir_;
};

agent::AgentConfig pendulum_defaults(std::uint64_t seed) {
  agent::AgentConfig c;
  c.seed = seed;
  return c;
}

agent::AgentConfig gpl_config(std::uint64_t seed) {
  return probes::arm_config(pendulum_defaults(seed), std::nullopt, seed);
}

agent::AgentConfig optimistic_config(std::uint64_t seed) {
  return probes::arm_config(pendulum_defaults(seed), 0.0, seed);
}

agent::AgentConfig baseline_config(std::uint64_t seed) {
  agent::AgentConfig c = probes::arm_config(pendulum_defaults(seed), 0.5, seed);
  c.members = 2;
  return c;
}

agent::AgentConfig point_mass_config(std::uint64_t seed, bool anneal) {
  agent::AgentConfig c;
  c.env = "point_mass";
  c.seed = seed;
  if (anneal) c.anneal = {0.5, 0.0, c.total_steps / 3};
  return c;
}

std::vector<RunResult> gpl_runs(RunCache& cache) {
  std::vector<RunResult> out;
  for (auto s : kSeeds) out.push_back(cache.get("gpl_s" + std::to_string(s), gpl_config(s), true));
  return out;
}

// ---------------------------------------------------------------------------
// Criteria

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok_ref = true, ok_n = true;
  std::uint64_t seed = 100;
  for (double beta : {0.25, 0.5, 1.0}) {
    std::vector<double> est;
    for (int n : {2, 5, 10}) {
      probes::PenaltyStatsConfig c;
      c.members = n;
      c.beta = beta;
      c.sigma = 1.0;
      c.samples = 1000000;
      c.seed = seed++;
      const auto s = probes::wasserstein_expectation_mc(c);
      const double rel = std::abs(s.estimate - s.reference) / s.reference;
      ok_ref = ok_ref && rel < kC1RelTol;
      est.push_back(s.estimate);
      info(fmt("N=%2d beta=%.2f estimate %.5f +- %.5f  reference 2b/pi %.5f (rel err %.3f)  "
               "exact 2b/sqrt(pi) %.5f",
               n, beta, s.estimate, s.standard_error, s.reference, rel, s.exact_reference));
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 3.0;
    const auto [lo, hi] = std::minmax_element(est.begin(), est.end());
    const double spread = (*hi - *lo) / mean;
    ok_n = ok_n && spread < kC1AcrossNTol;
    info(fmt("beta=%.2f spread across N %.4f", beta, spread));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, ok_ref && ok_n && secs < kC1MaxSeconds,
         fmt("within 1%% of 2*beta*sigma/pi: %s; across-N agreement within 2%%: %s; "
             "runtime %.1f s (limit 30 s)",
             ok_ref ? "yes" : "no", ok_n ? "yes" : "no", secs));
}

void criterion2() {
  bool ok = true;
  std::vector<probes::PenaltyStats> stats;
  std::uint64_t seed = 200;
  for (int n : {2, 5, 10}) {
    probes::PenaltyStatsConfig c;
    c.members = n;
    c.beta = 1.0;
    c.sigma = 1.0;
    c.samples = 1000000;
    c.seed = seed++;
    const auto s = probes::popstd_expectation_mc(c);
    const double rel = std::abs(s.estimate - s.reference) / s.reference;
    ok = ok && rel < kC2RelTol;
    stats.push_back(s);
    info(fmt("N=%2d estimate %.5f +- %.5f  stated reference %.5f (rel err %.4f)  exact %.5f", n,
             s.estimate, s.standard_error, s.reference, rel, s.exact_reference));
  }
  const auto& a = stats.front();
  const auto& b = stats.back();
  const double ratio_est = a.estimate / b.estimate;
  const double ratio_ref = a.reference / b.reference;
  const double se = ratio_est * std::hypot(a.standard_error / a.estimate,
                                           b.standard_error / b.estimate);
  const bool ratio_ok = std::abs(ratio_est - ratio_ref) < kC2RatioSigmas * se;
  info(fmt("N=2/N=10 ratio: estimates %.5f +- %.5f, stated references %.5f, exact %.5f", ratio_est,
           se, ratio_ref, a.exact_reference / b.exact_reference));
  report(2, ok && ratio_ok,
         fmt("within 1%% of the stated closed form: %s; ratio reproduced: %s", ok ? "yes" : "no",
             ratio_ok ? "yes" : "no"));
}

void criterion3() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const std::vector<double> q{n(rng), n(rng)};
    worst = std::max(worst, std::abs(critic::regularized_value(q, critic::PenaltyKind::wasserstein,
                                                               0.5) -
                                     std::min(q[0], q[1])));
  }
  report(3, worst < kC3Tol, fmt("max |reg(beta=0.5) - min| over 1e4 pairs = %.3g", worst));
}

void criterion4() {
  std::mt19937_64 rng(4);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };

  critic::CriticConfig cc;
  cc.state_dim = 3;
  cc.action_dim = 1;
  cc.members = 3;
  cc.hidden = {8, 8};
  policy::PolicyConfig pc;
  pc.state_dim = 3;
  pc.action_dim = 1;
  pc.action_low = Eigen::VectorXd::Constant(1, -2.0);
  pc.action_high = Eigen::VectorXd::Constant(1, 2.0);
  pc.hidden = {8, 8};

  for (int k = 0; k < 20; ++k) {
    const auto seed = static_cast<std::uint64_t>(1000 + k);
    for (auto variant : {nn::MlpVariant::plain, nn::MlpVariant::modern_residual}) {
      nn::MlpSpec spec{4, {8, 8}, 2, nn::Nonlinearity::relu, variant};
      if (variant == nn::MlpVariant::modern_residual) spec.hidden_widths = {8};
      nn::EnsembleMlp<double> net(spec, 3, seed);
      const Mat x = random_matrix(5, 4, rng);
      const Mat w = random_matrix(6, 1, rng);
      auto loss = [&](nn::Tape<double>& t) {
        return nn::sum(nn::matmul(net.forward(t, t.constant(x)), t.constant(w)));
      };
      note("mlp output", nn::gradient_check<double>(net.params(), loss).max_relative_error);
    }

    cc.seed = seed;
    critic::EnsembleCritic critic(cc);
    replay::Batch batch;
    batch.states = random_matrix(6, 3, rng);
    batch.actions = random_matrix(6, 1, rng, 0.5);
    batch.rewards = random_matrix(6, 1, rng);
    batch.next_states = random_matrix(6, 3, rng);
    batch.masks = Eigen::VectorXd::Ones(6);
    batch.masks(0) = 0.0;
    const Eigen::VectorXd y = random_matrix(6, 1, rng);
    auto td = [&](nn::Tape<double>& t) {
      return critic::td_loss_and_errors(t, critic, batch, y, false).loss;
    };
    note("td loss", nn::gradient_check<double>(critic.network(critic::Network::online).params(), td)
                        .max_relative_error);

    pc.seed = seed;
    policy::GaussianPolicy pol(pc);
    auto pl = [&](nn::Tape<double>& t) {
      Rng r(seed);
      return policy::policy_loss(t, pol, critic, batch.states, critic::PenaltyKind::wasserstein,
                                 0.3, 0.2, r)
          .loss;
    };
    note("policy loss (with squash correction)",
         nn::gradient_check<double>(pol.network().params(), pl).max_relative_error);

    const Mat na = random_matrix(6, 1, rng, 0.5);
    const Eigen::VectorXd lp = random_matrix(6, 1, rng);
    auto e2e = [&](nn::Tape<double>& t, nn::Var<double> b) {
      return pessimism::e2e_beta_loss(t, batch, na, lp, critic, critic::PenaltyKind::wasserstein, b,
                                      0.2, 0.99);
    };
    note("e2e beta loss",
         nn::gradient_check<double>(e2e, Mat::Constant(1, 1, -1.0 + 0.1 * k)).max_relative_error);

    for (auto kind : {critic::PenaltyKind::wasserstein, critic::PenaltyKind::popstd,
                      critic::PenaltyKind::minclip}) {
      const int n = kind == critic::PenaltyKind::minclip ? 2 : 5;
      const double beta = 0.1 + 0.05 * k;
      auto by_values = [&](nn::Tape<double>& t, nn::Var<double> v) {
        return nn::sum(critic::regularized_value(v, kind, t.constant(beta)));
      };
      note("penalty functions",
           nn::gradient_check<double>(by_values, random_matrix(4, n, rng)).max_relative_error);
      const Mat vals = random_matrix(4, n, rng);
      auto by_beta = [&](nn::Tape<double>& t, nn::Var<double> b) {
        return nn::sum(critic::regularized_value(t.constant(vals), kind, b));
      };
      note("penalty functions",
           nn::gradient_check<double>(by_beta, Mat::Constant(1, 1, beta)).max_relative_error);
    }
  }
  bool ok = true;
  std::string summary;
  for (const auto& [k, v] : worst) {
    ok = ok && v < kC4Tol;
    info(fmt("%-38s max relative error %.3g", k.c_str(), v));
    summary += (summary.empty() ? "" : ", ") + k + fmt(" %.1e", v);
  }
  report(4, ok, "20 points each; " + summary);
}

void criterion5() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(0.01, 2.0);
  int pass = 0;
  for (int k = 0; k < 100; ++k) {
    Mat e = random_matrix(5, 64, rng);
    const double shift = mag(rng) * (k % 2 == 0 ? 1.0 : -1.0);
    e.array() += shift - e.mean();
    pessimism::DualBeta d(0.5);
    d.step(e);
    if ((shift > 0 && d.beta() < 0.5) || (shift < 0 && d.beta() > 0.5)) ++pass;
  }
  report(5, pass == 100, fmt("%d/100 batches moved beta against the error sign", pass));
}

void criterion6(RunCache& cache) {
  const auto dual = gpl_runs(cache);
  int positive = 0, smaller = 0;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const auto s = kSeeds[i];
    const auto opt = cache.get("fixed0_s" + std::to_string(s), optimistic_config(s), true);
    positive += opt.bias_avg > 0.0;
    smaller += dual[i].bias_abs_avg < opt.bias_abs_avg;
    info(fmt("seed %llu: beta=0 mean bias %+.2f, mean |bias| %.2f; dual mean bias %+.2f, "
             "mean |bias| %.2f, final beta %+.3f",
             static_cast<unsigned long long>(s), opt.bias_avg, opt.bias_abs_avg, dual[i].bias_avg,
             dual[i].bias_abs_avg, dual[i].final_beta));
  }
  report(6, positive >= kSeedsNeeded && smaller >= kSeedsNeeded,
         fmt("(a) beta=0 bias positive in %d/5 seeds; (b) dual |bias| smaller in %d/5 seeds",
             positive, smaller));
}

// Property: the TD-error and rollout bias estimators agree in sign at the
// end of training in at least 4 of 5 seeds.
void estimator_sign_property(RunCache& cache) {
  const auto runs = gpl_runs(cache);
  int agree = 0;
  for (const auto& r : runs) {
    const double rollout = r.probe_bias.back();
    agree += (rollout > 0) == (r.td_bias_last1000 > 0);
    info(fmt("%s: final rollout bias %+.2f, last-1000-step TD-error bias %+.3f", r.name.c_str(),
             rollout, r.td_bias_last1000));
  }
  const bool pass = agree >= kSeedsNeeded;
  std::printf("[property estimator-sign] %s: estimators agree in sign in %d/5 seeds\n",
              pass ? "PASS" : "FAIL", agree);
  if (!pass) ++g_failures;
}

double derive_threshold(RunCache& cache) {
  double sum = 0.0;
  for (auto s : kSeeds) {
    const auto r = cache.get("baseline_s" + std::to_string(s), baseline_config(s), false);
    info(fmt("baseline seed %llu final eval %.2f", static_cast<unsigned long long>(s),
             r.eval_returns.back()));
    sum += r.eval_returns.back();
  }
  return sum / static_cast<double>(kSeeds.size());
}

void criterion7(RunCache& cache) {
  if (std::isnan(kC7Threshold)) {
    report(7, false, "threshold not derived; run gpl_acceptance --derive-threshold");
    return;
  }
  const auto runs = gpl_runs(cache);
  int reached = 0;
  bool fast = true;
  for (const auto& r : runs) {
    const double best = *std::max_element(r.eval_returns.begin(), r.eval_returns.end());
    reached += best >= kC7Threshold;
    fast = fast && r.seconds < kC7MaxSeconds;
    info(fmt("%s: best eval %.2f, final eval %.2f, %.0f s", r.name.c_str(), best,
             r.eval_returns.back(), r.seconds));
  }
  report(7, reached >= kSeedsNeeded && fast,
         fmt("reached threshold %.2f in %d/5 seeds; every seed under 15 min: %s", kC7Threshold,
             reached, fast ? "yes" : "no"));
}

void criterion8(RunCache& cache) {
  std::vector<double> annealed, plain;
  for (auto s : kSeeds) {
    const auto total = point_mass_config(s, false).total_steps;
    auto first = [&](const RunResult& r) {
      return r.first_goal_step < 0 ? static_cast<double>(total + 1)
                                   : static_cast<double>(r.first_goal_step);
    };
    const auto a = cache.get("pm_anneal_s" + std::to_string(s), point_mass_config(s, true), false);
    const auto p = cache.get("pm_plain_s" + std::to_string(s), point_mass_config(s, false), false);
    annealed.push_back(first(a));
    plain.push_back(first(p));
    info(fmt("seed %llu: first goal step annealed %lld, non-annealed %lld (-1 = never)",
             static_cast<unsigned long long>(s), static_cast<long long>(a.first_goal_step),
             static_cast<long long>(p.first_goal_step)));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double ma = median(annealed), mp = median(plain);
  report(8, ma < mp,
         fmt("median first-goal step annealed %.0f vs non-annealed %.0f (never = %lld)", ma, mp,
             static_cast<long long>(point_mass_config(1, false).total_steps + 1)));
}

void criterion9(RunCache& cache) {
  const auto runs = gpl_runs(cache);
  const double target = -1.0;  // minus the pendulum's action dimension
  int ok = 0;
  for (const auto& r : runs) {
    const bool in = std::abs(r.entropy_last1000 - target) <= kC9Tol;
    ok += in;
    info(fmt("%s: final 1000-step mean entropy %.3f (target %.1f)", r.name.c_str(),
             r.entropy_last1000, target));
  }
  report(9, ok == static_cast<int>(runs.size()),
         fmt("%d/%zu pendulum runs within +-%.1f nats of the target entropy", ok, runs.size(),
             kC9Tol));
}

void criterion10(const fs::path& dir) {
  agent::AgentConfig c = pendulum_defaults(11);
  c.total_steps = 1600;
  c.eval_interval = 400;
  agent::RunMetrics m1, m2, whole_m;
  agent::Agent a(c), b(c);
  a.train(m1);
  b.train(m2);
  const bool same = m1.steps() == m2.steps() && m1.evals() == m2.evals() &&
                    a.state_hash() == b.state_hash();

  agent::AgentConfig half = c;
  half.total_steps = 1200;  // split after updates have started
  agent::RunMetrics p1, p2;
  agent::Agent first(half);
  first.train(p1);
  const fs::path ckpt = dir / "criterion10.ckpt";
  first.save_checkpoint(ckpt);
  agent::Agent resumed = agent::Agent::load_checkpoint(ckpt);
  resumed.set_total_steps(c.total_steps);
  resumed.train(p2);
  auto joined = p1.steps();
  joined.insert(joined.end(), p2.steps().begin(), p2.steps().end());
  const bool resume = joined == m1.steps() && resumed.state_hash() == a.state_hash();
  report(10, same && resume,
         fmt("same-seed runs identical: %s; split-and-resume identical: %s", same ? "yes" : "no",
             resume ? "yes" : "no"));
}

void criterion11(const fs::path& readme) {
  std::ifstream in(readme);
  std::stringstream s;
  s << in.rdbuf();
  const std::string text = s.str();
  const bool ok = text.find("## Results out of reach") != std::string::npos &&
                  text.find("Mujoco") != std::string::npos &&
                  text.find("DMC") != std::string::npos;
  report(11, ok, ok ? "README declares the benchmark returns that are not reproduced"
                    : "README lacks the out-of-reach declaration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPL-SAC acceptance suite"};
  std::vector<int> criteria;
  std::string cache_dir = "acceptance_cache";
  std::string readme = GPL_SOURCE_DIR "/README.md";
  bool derive = false;
  bool estimator_sign = false;
  app.add_option("--criterion", criteria, "Criterion number(s) 1-11; default all")
      ->check(CLI::Range(1, 11));
  app.add_option("--cache-dir", cache_dir, "Directory for cached training runs");
  app.add_option("--readme", readme, "README checked by criterion 11");
  app.add_flag("--derive-threshold", derive,
               "Run the fixed-beta=0.5, N=2 baseline and print the criterion 7 threshold");
  app.add_flag("--estimator-sign", estimator_sign,
               "Check that the two bias estimators agree in sign on the GPL runs");
  CLI11_PARSE(app, argc, argv);

  RunCache cache(cache_dir);
  if (estimator_sign) {
    try {
      estimator_sign_property(cache);
    } catch (const std::exception& e) {
      std::printf("[property estimator-sign] FAIL: error: %s\n", e.what());
      return 1;
    }
    return g_failures == 0 ? 0 : 1;
  }
  if (derive) {
    std::printf("criterion 7 threshold: %.6f\n", derive_threshold(cache));
    return 0;
  }
  if (criteria.empty()) {
    criteria.resize(11);
    std::iota(criteria.begin(), criteria.end(), 1);
  }
  for (int c : criteria) {
    try {
      switch (c) {
        case 1: criterion1(); break;
        case 2: criterion2(); break;
        case 3: criterion3(); break;
        case 4: criterion4(); break;
        case 5: criterion5(); break;
        case 6: criterion6(cache); break;
        case 7: criterion7(cache); break;
        case 8: criterion8(cache); break;
        case 9: criterion9(cache); break;
        case 10: criterion10(cache_dir); break;
        case 11: criterion11(readme); break;
      }
    } catch (const std::exception& e) {
      report(c, false, std::string("error: ") + e.what());
    }
  }
  return g_failures == 0 ? 0 : 1;
}
