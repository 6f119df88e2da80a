#include "gpl/agent/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace gpl::agent {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "auto";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<nn::Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) bad(key, v, "a real number");
  return d;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  errno = 0;
  const long long n = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) bad(key, v, "an integer");
  return n;
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  errno = 0;
  if (!t.empty() && t[0] == '-') bad(key, v, "a nonnegative integer");
  const unsigned long long n = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    bad(key, v, "a nonnegative integer");
  }
  return n;
}

int parse_small(const std::string& key, const std::string& v) {
  const auto n = parse_int(key, v);
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    bad(key, v, "a 32-bit integer");
  }
  return static_cast<int>(n);
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  bad(key, v, "a boolean");
}

std::vector<nn::Index> parse_widths(const std::string& key, const std::string& v) {
  std::vector<nn::Index> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_int(key, part));
  if (out.empty()) bad(key, v, "a comma-separated width list");
  return out;
}

template <typename F>
auto rethrow_as_config(const std::string& key, F f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key(s) '" + key + "': " + e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError("config key '" + key + "': " + msg);
}

}  // namespace

void AgentConfig::validate() const {
  rethrow_as_config("env", [&] { return env::make_environment(env, dynamics); });
  require(members >= 1, "members", "must be >= 1");
  require(utd >= 1, "utd", "must be >= 1");
  require(gamma >= 0 && gamma < 1, "gamma", "must lie in [0, 1)");
  require(rho > 0 && rho < 1, "rho", "must lie in (0, 1)");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(warmup_steps >= 0, "warmup_steps", "must be >= 0");
  require(min_data >= 1, "min_data", "must be >= 1");
  require(total_steps >= 1, "total_steps", "must be >= 1");
  require(replay_capacity >= 1, "replay_capacity", "must be >= 1");
  for (auto w : critic_hidden) require(w > 0, "critic_hidden", "widths must be positive");
  for (auto w : policy_hidden) require(w > 0, "policy_hidden", "widths must be positive");
  require(!critic_hidden.empty(), "critic_hidden", "needs at least one width");
  require(!policy_hidden.empty(), "policy_hidden", "needs at least one width");
  require(critic_variant != nn::MlpVariant::modern_residual || critic_hidden.size() == 1,
          "critic_hidden", "the modern critic takes exactly one hidden width");
  rethrow_as_config("penalty, beta_source, members", [&] {
    penalty.validate(members);
    return 0;
  });
  require(!beta_nonnegative || penalty.beta >= 0, "beta_init",
          "must be >= 0 when beta_nonnegative is set");
  rethrow_as_config("anneal_start, anneal_end, anneal_steps", [&] {
    anneal.validate();
    return 0;
  });
  for (auto [k, v] : {std::pair{"critic_lr", critic_lr}, {"policy_lr", policy_lr},
                      {"beta_lr", beta_lr}, {"alpha_lr", alpha_lr}, {"alpha_init", alpha_init}}) {
    require(v > 0 && std::isfinite(v), k, "must be positive");
  }
  for (auto [k, v] : {std::pair{"adam_beta1", adam_beta1}, {"beta_beta1", beta_beta1},
                      {"alpha_beta1", alpha_beta1}}) {
    require(v > 0 && v < 1, k, "must lie in (0, 1)");
  }
  require(std::isnan(target_entropy) || std::isfinite(target_entropy), "target_entropy",
          "must be finite or 'auto'");
  require(eval_interval >= 1, "eval_interval", "must be >= 1");
  require(eval_episodes >= 1, "eval_episodes", "must be >= 1");
}

std::map<std::string, std::string> to_settings(const AgentConfig& c) {
  std::map<std::string, std::string> m;
  m["env"] = c.env;
  for (const auto& [k, v] : c.dynamics) m["dynamics." + k] = fmt(v);
  m["seed"] = std::to_string(c.seed);
  m["members"] = std::to_string(c.members);
  m["utd"] = std::to_string(c.utd);
  m["gamma"] = fmt(c.gamma);
  m["rho"] = fmt(c.rho);
  m["batch_size"] = std::to_string(c.batch_size);
  m["warmup_steps"] = std::to_string(c.warmup_steps);
  m["min_data"] = std::to_string(c.min_data);
  m["total_steps"] = std::to_string(c.total_steps);
  m["replay_capacity"] = std::to_string(c.replay_capacity);
  m["critic_hidden"] = join(c.critic_hidden);
  m["critic_variant"] = c.critic_variant == nn::MlpVariant::plain ? "plain" : "modern";
  m["policy_hidden"] = join(c.policy_hidden);
  m["penalty"] = critic::to_string(c.penalty.kind);
  m["beta_source"] = critic::to_string(c.penalty.beta_source);
  m["beta_init"] = fmt(c.penalty.beta);
  m["beta_nonnegative"] = c.beta_nonnegative ? "true" : "false";
  m["beta_errors"] = c.beta_errors == BetaErrors::last_batch ? "last" : "mean";
  m["anneal_start"] = fmt(c.anneal.start);
  m["anneal_end"] = fmt(c.anneal.end);
  m["anneal_steps"] = std::to_string(c.anneal.decay_steps);
  m["critic_lr"] = fmt(c.critic_lr);
  m["policy_lr"] = fmt(c.policy_lr);
  m["adam_beta1"] = fmt(c.adam_beta1);
  m["beta_lr"] = fmt(c.beta_lr);
  m["beta_beta1"] = fmt(c.beta_beta1);
  m["alpha_lr"] = fmt(c.alpha_lr);
  m["alpha_beta1"] = fmt(c.alpha_beta1);
  m["alpha_init"] = fmt(c.alpha_init);
  m["target_entropy"] = fmt(c.target_entropy);
  m["eval_interval"] = std::to_string(c.eval_interval);
  m["eval_episodes"] = std::to_string(c.eval_episodes);
  return m;
}

std::vector<std::string> setting_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : to_settings(AgentConfig{})) keys.push_back(k);
  return keys;
}

void apply_setting(AgentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key.rfind("dynamics.", 0) == 0) {
    c.dynamics[key.substr(9)] = parse_double(key, v);
    return;
  }
  if (key == "env") c.env = v;
  else if (key == "seed") c.seed = parse_seed(key, v);
  else if (key == "members") c.members = parse_small(key, v);
  else if (key == "utd") c.utd = parse_small(key, v);
  else if (key == "gamma") c.gamma = parse_double(key, v);
  else if (key == "rho") c.rho = parse_double(key, v);
  else if (key == "batch_size") c.batch_size = parse_small(key, v);
  else if (key == "warmup_steps") c.warmup_steps = parse_int(key, v);
  else if (key == "min_data") c.min_data = parse_int(key, v);
  else if (key == "total_steps") c.total_steps = parse_int(key, v);
  else if (key == "replay_capacity") c.replay_capacity = parse_int(key, v);
  else if (key == "critic_hidden") c.critic_hidden = parse_widths(key, v);
  else if (key == "policy_hidden") c.policy_hidden = parse_widths(key, v);
  else if (key == "critic_variant") {
    if (v == "plain") c.critic_variant = nn::MlpVariant::plain;
    else if (v == "modern") c.critic_variant = nn::MlpVariant::modern_residual;
    else bad(key, v, "'plain' or 'modern'");
  } else if (key == "penalty") {
    c.penalty.kind = rethrow_as_config(key, [&] { return critic::parse_penalty_kind(v); });
  } else if (key == "beta_source") {
    c.penalty.beta_source = rethrow_as_config(key, [&] { return critic::parse_beta_source(v); });
  } else if (key == "beta_init") c.penalty.beta = parse_double(key, v);
  else if (key == "beta_nonnegative") c.beta_nonnegative = parse_bool(key, v);
  else if (key == "beta_errors") {
    if (v == "last") c.beta_errors = BetaErrors::last_batch;
    else if (v == "mean") c.beta_errors = BetaErrors::mean_over_batches;
    else bad(key, v, "'last' or 'mean'");
  } else if (key == "anneal_start") c.anneal.start = parse_double(key, v);
  else if (key == "anneal_end") c.anneal.end = parse_double(key, v);
  else if (key == "anneal_steps") c.anneal.decay_steps = parse_int(key, v);
  else if (key == "critic_lr") c.critic_lr = parse_double(key, v);
  else if (key == "policy_lr") c.policy_lr = parse_double(key, v);
  else if (key == "adam_beta1") c.adam_beta1 = parse_double(key, v);
  else if (key == "beta_lr") c.beta_lr = parse_double(key, v);
  else if (key == "beta_beta1") c.beta_beta1 = parse_double(key, v);
  else if (key == "alpha_lr") c.alpha_lr = parse_double(key, v);
  else if (key == "alpha_beta1") c.alpha_beta1 = parse_double(key, v);
  else if (key == "alpha_init") c.alpha_init = parse_double(key, v);
  else if (key == "target_entropy") {
    c.target_entropy = v == "auto" ? std::numeric_limits<double>::quiet_NaN()
                                   : parse_double(key, v);
  } else if (key == "eval_interval") c.eval_interval = parse_int(key, v);
  else if (key == "eval_episodes") c.eval_episodes = parse_small(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string serialize(const AgentConfig& c) {
  std::string out;
  for (const auto& [k, v] : to_settings(c)) out += k + " = " + v + "\n";
  return out;
}

AgentConfig deserialize(const std::string& text) {
  AgentConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + t);
    apply_setting(c, trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  return c;
}

}  // namespace gpl::agent
