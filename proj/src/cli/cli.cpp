#include "gpl/cli/cli.hpp"

#include "gpl/agent/agent.hpp"
#include "gpl/nn/checkpoint.hpp"
#include "gpl/probes/bias_probe.hpp"
#include "gpl/probes/penalty_stats.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#ifndef GPL_VERSION
#define GPL_VERSION "unknown"
#endif
#ifndef GPL_GIT_REVISION
#define GPL_GIT_REVISION "unknown"
#endif

namespace gpl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot read config file '" + p.string() + "'");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
}

/// Agent config assembled from defaults, an optional file, then flags.
struct ConfigSource {
  std::string file;
  std::vector<std::pair<std::string, std::string>> flags;  // in command-line order
  std::vector<std::string> sets;                           // "key=value"

  void attach(CLI::App& app) {
    app.add_option("--config", file, "Plain-text 'key = value' config file")
        ->check(CLI::ExistingFile);
    for (const auto& key : agent::setting_keys()) {
      app.add_option_function<std::string>(
          flag_name(key), [this, key](const std::string& v) { flags.emplace_back(key, v); },
          "Config key '" + key + "'");
    }
    app.add_option_function<std::string>(
        "--steps", [this](const std::string& v) { flags.emplace_back("total_steps", v); },
        "Alias of --total-steps");
    app.add_option("--set", sets, "Extra KEY=VALUE settings, e.g. dynamics.max_torque=1.5");
  }

  agent::AgentConfig resolve() const {
    agent::AgentConfig c = file.empty() ? agent::AgentConfig{} : agent::deserialize(read_file(file));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects KEY=VALUE, got '" + kv + "'");
      agent::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) agent::apply_setting(c, k, v);
    c.validate();
    return c;
  }
};

fs::path output_dir(const std::string& explicit_out, const std::string& sub,
                    const std::string& leaf) {
  if (!explicit_out.empty()) return explicit_out;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "runs") / sub / leaf;
}

void write_run_header(const fs::path& dir, const agent::AgentConfig& c) {
  fs::create_directories(dir);
  write_file(dir / "config.txt", agent::serialize(c));
  write_file(dir / "version.txt", version_stamp() + "\n");
}

/// Runs tasks sequentially, or in up to `jobs` forked processes. Returns the
/// largest exit code.
int run_tasks(const std::vector<std::function<int()>>& tasks, int jobs, std::ostream& out,
              std::ostream& err) {
  int worst = kOk;
  if (jobs <= 1 || tasks.size() <= 1) {
    for (const auto& t : tasks) worst = std::max(worst, t());
    return worst;
  }
  std::size_t next = 0;
  int live = 0;
  while (next < tasks.size() || live > 0) {
    while (live < jobs && next < tasks.size()) {
      out.flush();
      err.flush();
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        int code = kRuntimeAbort;
        try {
          code = tasks[next]();
        } catch (...) {
        }
        out.flush();
        err.flush();
        _exit(code);
      }
      ++next;
      ++live;
    }
    int status = 0;
    if (wait(&status) > 0) {
      --live;
      worst = std::max(worst, WIFEXITED(status) ? WEXITSTATUS(status) : int(kRuntimeAbort));
    }
  }
  return worst;
}

std::vector<std::uint64_t> seeds_or(const std::vector<std::uint64_t>& seeds,
                                    std::uint64_t fallback) {
  return seeds.empty() ? std::vector<std::uint64_t>{fallback} : seeds;
}

// --- train ------------------------------------------------------------------

int train_one(agent::AgentConfig c, const fs::path& dir, std::ostream& out, std::ostream& err) {
  write_run_header(dir, c);
  agent::Agent a(c);
  agent::RunMetrics metrics;
  metrics.stream_to(dir);
  try {
    a.train(metrics);
  } catch (const agent::TrainingAborted& e) {
    metrics.flush();
    a.save_checkpoint(dir / "diagnostic.ckpt");
    write_file(dir / "error.txt", std::string(e.what()) + "\n");
    err << "training aborted (seed " << c.seed << "): " << e.what() << "; diagnostic state in "
        << (dir / "diagnostic.ckpt").string() << '\n';
    return kRuntimeAbort;
  }
  metrics.flush();
  a.save_checkpoint(dir / "checkpoint.ckpt");
  const auto& evals = metrics.evals();
  out << json{{"seed", c.seed},
              {"steps", a.steps_done()},
              {"final_eval", evals.empty() ? json() : num(evals.back().mean_return)},
              {"final_beta", a.beta()},
              {"final_alpha", a.alpha()},
              {"dir", dir.string()}}
             .dump()
      << '\n';
  return kOk;
}

// --- probes -----------------------------------------------------------------

json probe_row(const probes::BiasProbeResult& r, const probes::BiasProbeConfig& pc,
               agent::Agent& a, const std::string& checkpoint) {
  return json{{"estimate", num(r.estimate.value)},
              {"mean_prediction", num(r.mean_prediction)},
              {"mean_return", num(r.mean_return)},
              {"mean_discounted_log_prob", num(r.mean_discounted_log_prob)},
              {"n_samples", r.pairs},
              {"config",
               {{"checkpoint", checkpoint},
                {"episodes", pc.episodes},
                {"gamma", pc.gamma},
                {"correction", probes::to_string(pc.correction)},
                {"seed", pc.seed},
                {"alpha", a.alpha()},
                {"steps_done", a.steps_done()}}}};
}

probes::BetaArm parse_arm(const std::string& s) {
  if (s == "dual") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key 'betas': expected a number or 'dual', got '" + s + "'");
  }
}

json trajectory_json(const probes::BiasTrajectory& t) {
  return json{{"label", t.label},
              {"seed", t.seed},
              {"steps", t.steps},
              {"bias", t.bias},
              {"time_average", num(t.time_average)},
              {"time_average_abs", num(t.time_average_abs)}};
}

}  // namespace

std::string version_stamp() { return std::string(GPL_VERSION) + " (" + GPL_GIT_REVISION + ")"; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GPL-SAC: ensemble actor-critic with learned pessimism", "gpl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_stamp());

  std::string out_dir;
  int jobs = 1;

  // train
  auto* train = app.add_subcommand("train", "Train an agent; writes metrics and checkpoints");
  ConfigSource train_cfg;
  std::vector<std::uint64_t> train_seeds;
  train_cfg.attach(*train);
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--seeds", train_seeds, "Run several seeds (overrides --seed)")
      ->delimiter(',');
  train->add_option("--jobs", jobs, "Parallel processes for multi-seed runs")
      ->check(CLI::PositiveNumber);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpointed agent");
  std::string eval_ckpt;
  int eval_episodes = 10;
  std::uint64_t eval_seed = 0;
  std::string eval_mode = "mean";
  evaluate->add_option("--checkpoint", eval_ckpt, "Agent checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--episodes", eval_episodes)->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", eval_seed);
  evaluate->add_option("--mode", eval_mode)->check(CLI::IsMember({"mean", "stochastic"}));
  evaluate->add_option("--out", out_dir, "Also write eval.json here");

  // probe-bias
  auto* probe = app.add_subcommand("probe-bias", "Rollout bias probe of a checkpointed agent");
  std::string probe_ckpt;
  probes::BiasProbeConfig probe_cfg;
  std::string correction = "entropy-corrected";
  probe->add_option("--checkpoint", probe_ckpt, "Agent checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  probe->add_option("--episodes", probe_cfg.episodes);
  probe->add_option("--gamma", probe_cfg.gamma);
  probe->add_option("--seed", probe_cfg.seed);
  probe->add_option("--correction", correction)
      ->check(CLI::IsMember({"entropy-corrected", "entropy", "raw"}));
  probe->add_option("--out", out_dir, "Also append to bias_probe.jsonl here");

  // fixed-beta-experiment
  auto* fbe = app.add_subcommand("fixed-beta-experiment",
                                 "Bias trajectories of fixed-beta and dual-beta agents");
  ConfigSource fbe_cfg;
  fbe_cfg.attach(*fbe);
  std::vector<std::string> betas{"0", "0.5", "dual"};
  std::vector<std::uint64_t> fbe_seeds{0};
  probes::ProbeSchedule schedule;
  fbe->add_option("--betas", betas, "Fixed beta values and/or 'dual'")->delimiter(',');
  fbe->add_option("--seeds", fbe_seeds)->delimiter(',');
  fbe->add_option("--probe-interval", schedule.interval)->check(CLI::PositiveNumber);
  fbe->add_option("--probe-episodes", schedule.probe.episodes)->check(CLI::PositiveNumber);
  fbe->add_option("--out", out_dir, "Output directory");
  fbe->add_option("--jobs", jobs, "Parallel processes, one per arm and seed")
      ->check(CLI::PositiveNumber);

  // verify-penalty-stats
  auto* verify = app.add_subcommand("verify-penalty-stats",
                                    "Monte-Carlo expectation of a penalty vs its closed form");
  probes::PenaltyStatsConfig stats_cfg;
  std::string kind = "wasserstein";
  bool csv = false;
  verify->add_option("--n", stats_cfg.members, "Ensemble size");
  verify->add_option("--beta", stats_cfg.beta);
  verify->add_option("--sigma", stats_cfg.sigma);
  verify->add_option("--samples", stats_cfg.samples);
  verify->add_option("--seed", stats_cfg.seed);
  verify->add_option("--kind", kind)->check(CLI::IsMember({"wasserstein", "popstd"}));
  verify->add_flag("--csv", csv, "Print a CSV header and row instead of JSON");
  verify->add_option("--out", out_dir, "Also append to penalty_stats.jsonl here");

  // dump-dynamics
  auto* dump = app.add_subcommand("dump-dynamics", "Print environment equations and constants");
  ConfigSource dump_cfg;
  dump_cfg.attach(*dump);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidation;
  }

  try {
    if (train->parsed()) {
      const agent::AgentConfig base = train_cfg.resolve();
      const auto seeds = seeds_or(train_seeds, base.seed);
      std::vector<std::function<int()>> tasks;
      for (auto s : seeds) {
        agent::AgentConfig c = base;
        c.seed = s;
        const std::string leaf = c.env + "-seed" + std::to_string(s);
        fs::path dir = output_dir(out_dir, "train", leaf);
        if (seeds.size() > 1 && !out_dir.empty()) dir /= "seed" + std::to_string(s);
        tasks.emplace_back([c, dir, &out, &err] { return train_one(c, dir, out, err); });
      }
      return run_tasks(tasks, jobs, out, err);
    }

    if (evaluate->parsed()) {
      agent::Agent a = agent::Agent::load_checkpoint(eval_ckpt);
      const auto r = a.evaluate(eval_episodes, eval_seed,
                                eval_mode == "mean" ? agent::EvalMode::mean_action
                                                    : agent::EvalMode::stochastic);
      const json row{{"mean_return", r.mean},
                     {"std_return", r.std},
                     {"returns", r.returns},
                     {"config",
                      {{"checkpoint", eval_ckpt},
                       {"episodes", eval_episodes},
                       {"seed", eval_seed},
                       {"mode", eval_mode},
                       {"steps_done", a.steps_done()}}}};
      out << row.dump() << '\n';
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "eval.json", row.dump(1) + "\n");
        write_file(fs::path(out_dir) / "version.txt", version_stamp() + "\n");
      }
      return kOk;
    }

    if (probe->parsed()) {
      probe_cfg.correction = probes::parse_correction(correction);
      probe_cfg.validate();
      agent::Agent a = agent::Agent::load_checkpoint(probe_ckpt);
      const auto r = probes::rollout_bias_probe(a, probe_cfg);
      const json row = probe_row(r, probe_cfg, a, probe_ckpt);
      out << row.dump() << '\n';
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "bias_probe.jsonl", std::ios::app) << row.dump() << '\n';
      }
      return kOk;
    }

    if (fbe->parsed()) {
      const agent::AgentConfig base = fbe_cfg.resolve();
      probes::FixedBetaExperiment e;
      e.base = base;
      e.steps = base.total_steps;
      e.seeds = fbe_seeds;
      e.schedule = schedule;
      for (const auto& b : betas) e.arms.push_back(parse_arm(b));
      try {
        e.validate();
      } catch (const std::invalid_argument& ex) {
        throw ValidationError(ex.what());
      }
      const fs::path dir = output_dir(out_dir, "fixed-beta-experiment", base.env);
      write_run_header(dir, base);
      std::vector<std::function<int()>> tasks;
      std::vector<fs::path> files;
      for (const auto& arm : e.arms) {
        for (auto s : e.seeds) {
          const std::string label = probes::arm_label(arm);
          const fs::path sub = dir / (label + "-seed" + std::to_string(s));
          files.push_back(sub / "trajectory.json");
          agent::AgentConfig c = probes::arm_config(base, arm, s);
          tasks.emplace_back([c, sub, label, schedule, &err] {
            write_run_header(sub, c);
            agent::RunMetrics metrics;
            metrics.stream_to(sub);
            try {
              const auto t = probes::tracked_run(c, schedule, label, &metrics);
              write_file(sub / "trajectory.json", trajectory_json(t).dump() + "\n");
            } catch (const agent::TrainingAborted& ex) {
              write_file(sub / "error.txt", std::string(ex.what()) + "\n");
              err << "run " << sub.string() << " aborted: " << ex.what() << '\n';
              return int(kRuntimeAbort);
            }
            return int(kOk);
          });
        }
      }
      const int code = run_tasks(tasks, jobs, out, err);
      std::ofstream jsonl(dir / "trajectories.jsonl", std::ios::trunc);
      std::ofstream table(dir / "bias.csv", std::ios::trunc);
      table << "label,seed,step,bias\n";
      for (const auto& f : files) {
        if (!fs::exists(f)) continue;
        const json t = json::parse(read_file(f));
        jsonl << t.dump() << '\n';
        const auto steps = t.at("steps").get<std::vector<std::int64_t>>();
        const auto bias = t.at("bias").get<std::vector<double>>();
        for (std::size_t i = 0; i < steps.size(); ++i) {
          table << t.at("label").get<std::string>() << ',' << t.at("seed").get<std::uint64_t>()
                << ',' << steps[i] << ',' << json(bias[i]).dump() << '\n';
        }
        out << json{{"label", t.at("label")},
                    {"seed", t.at("seed")},
                    {"time_average", t.at("time_average")},
                    {"time_average_abs", t.at("time_average_abs")}}
                   .dump()
            << '\n';
      }
      return code;
    }

    if (verify->parsed()) {
      stats_cfg.kind = critic::parse_penalty_kind(kind);
      stats_cfg.validate();
      const auto s = probes::penalty_expectation_mc(stats_cfg);
      const json row{{"estimate", s.estimate},
                     {"standard_error", s.standard_error},
                     {"reference", s.reference},
                     {"exact_reference", s.exact_reference},
                     {"n_samples", s.samples},
                     {"config",
                      {{"kind", kind},
                       {"n", stats_cfg.members},
                       {"beta", stats_cfg.beta},
                       {"sigma", stats_cfg.sigma},
                       {"samples", stats_cfg.samples},
                       {"seed", stats_cfg.seed}}}};
      if (csv) {
        out << "kind,n,beta,sigma,samples,seed,estimate,standard_error,reference,exact_reference\n"
            << kind << ',' << stats_cfg.members << ',' << json(stats_cfg.beta).dump() << ','
            << json(stats_cfg.sigma).dump() << ',' << stats_cfg.samples << ',' << stats_cfg.seed
            << ',' << json(s.estimate).dump() << ',' << json(s.standard_error).dump() << ','
            << json(s.reference).dump() << ',' << json(s.exact_reference).dump() << '\n';
      } else {
        out << row.dump() << '\n';
      }
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "penalty_stats.jsonl", std::ios::app)
            << row.dump() << '\n';
      }
      return kOk;
    }

    if (dump->parsed()) {
      const agent::AgentConfig c = dump_cfg.resolve();
      out << env::make_environment(c.env, c.dynamics)->describe_dynamics();
      return kOk;
    }
  } catch (const agent::TrainingAborted& e) {
    err << "error: training aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  } catch (const nn::CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return kOk;
}

}  // namespace gpl::cli
