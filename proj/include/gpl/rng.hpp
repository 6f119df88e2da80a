#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gpl {

/// Seeded random stream whose full state (engine and the normal sampler's
/// cached value) round-trips through a string.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }
  std::uint64_t next_seed() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

  std::string state() const {
    std::ostringstream os;
    os << engine_ << ' ' << normal_;
    return os.str();
  }
  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_ >> normal_;
    if (!is) throw std::runtime_error("Rng: malformed state string");
  }

  friend bool operator==(const Rng& a, const Rng& b) { return a.state() == b.state(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gpl
