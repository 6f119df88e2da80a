#pragma once

#include "gpl/nn/layers.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gpl::nn {

enum class Nonlinearity { relu };

enum class MlpVariant {
  plain,
  /// Input projection, one pre-norm residual block (layer norm, then two
  /// spectrally normalized layers with a ReLU between), ReLU, output layer.
  modern_residual,
};

struct MlpSpec {
  Index input_width = 0;
  std::vector<Index> hidden_widths;
  Index output_width = 0;
  Nonlinearity nonlinearity = Nonlinearity::relu;
  MlpVariant variant = MlpVariant::plain;

  void validate() const {
    if (input_width <= 0 || output_width <= 0) {
      throw std::invalid_argument("MlpSpec: input and output widths must be positive");
    }
    if (hidden_widths.empty()) throw std::invalid_argument("MlpSpec: needs a hidden layer");
    for (Index w : hidden_widths) {
      if (w <= 0) throw std::invalid_argument("MlpSpec: hidden widths must be positive");
    }
    if (variant == MlpVariant::modern_residual && hidden_widths.size() != 1) {
      throw std::invalid_argument(
          "MlpSpec: the modern residual variant has exactly one residual block, so takes "
          "exactly one hidden width");
    }
  }
};

/// `members` independently initialized MLPs sharing one parameter store and
/// evaluated as a single batched network. The output is B x (members * out),
/// member m owning columns [m * out, (m + 1) * out).
template <typename S>
class EnsembleMlp {
 public:
  EnsembleMlp() = default;

  EnsembleMlp(MlpSpec spec, Index members, const std::vector<std::uint64_t>& member_seeds)
      : spec_(std::move(spec)), members_(members) {
    spec_.validate();
    if (members <= 0 || static_cast<Index>(member_seeds.size()) != members) {
      throw std::invalid_argument("EnsembleMlp: need one seed per member");
    }
    build(member_seeds);
  }

  /// Seeds members with base_seed, base_seed + 1, ...
  EnsembleMlp(MlpSpec spec, Index members, std::uint64_t base_seed)
      : EnsembleMlp(std::move(spec), members, consecutive_seeds(base_seed, members)) {}

  const MlpSpec& spec() const { return spec_; }
  Index members() const { return members_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }
  std::vector<PowerIterationState<S>>& spectral_state() { return spectral_; }
  const std::vector<PowerIterationState<S>>& spectral_state() const { return spectral_; }

  /// Records the forward pass on `tape`. With track_params = false the
  /// weights are constants (gradients still flow to the input). With
  /// refine_spectral, spectrally normalized layers take one power-iteration step.
  Var<S> forward(Tape<S>& tape, const Var<S>& input, bool track_params = true,
                 bool refine_spectral = false) {
    if (input.cols() != spec_.input_width) {
      throw ShapeError("EnsembleMlp::forward: input width " + std::to_string(input.cols()) +
                       " does not match spec input width " +
                       std::to_string(spec_.input_width));
    }
    auto p = [&](std::size_t id) { return tape.parameter(params_, id, track_params); };
    if (spec_.variant == MlpVariant::plain) {
      Var<S> h = input;
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = ensemble_linear(h, p(layers_[l].weight), p(layers_[l].bias), members_, l == 0);
        if (l + 1 < layers_.size()) h = relu(h);
      }
      return h;
    }
    Var<S> h = ensemble_linear(input, p(layers_[0].weight), p(layers_[0].bias), members_, true);
    Var<S> r = layer_norm(h, p(norm_gain_), p(norm_bias_), members_);
    Var<S> w1 = spectral_normalize(p(layers_[1].weight), members_, spectral_[0], refine_spectral);
    r = relu(ensemble_linear(r, w1, p(layers_[1].bias), members_, false));
    Var<S> w2 = spectral_normalize(p(layers_[2].weight), members_, spectral_[1], refine_spectral);
    r = ensemble_linear(r, w2, p(layers_[2].bias), members_, false);
    h = relu(h + r);
    return ensemble_linear(h, p(layers_[3].weight), p(layers_[3].bias), members_, false);
  }

  /// Inference without recording gradients or refining spectral state.
  Matrix<S> forward(const Matrix<S>& input) {
    Tape<S> tape;
    return forward(tape, tape.constant(input), false, false).value();
  }

 private:
  struct Linear {
    std::size_t weight = 0;
    std::size_t bias = 0;
    Index in = 0;
    Index out = 0;
  };

  static std::vector<std::uint64_t> consecutive_seeds(std::uint64_t base, Index n) {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(std::max<Index>(n, 0)));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = base + i;
    return s;
  }

  void add_linear(const std::string& name, Index in, Index out) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = params_.add(name + ".weight", in, out * members_);
    l.bias = params_.add(name + ".bias", 1, out * members_);
    layers_.push_back(l);
  }

  void build(const std::vector<std::uint64_t>& seeds) {
    const Index h0 = spec_.hidden_widths.front();
    if (spec_.variant == MlpVariant::plain) {
      Index in = spec_.input_width;
      for (std::size_t i = 0; i < spec_.hidden_widths.size(); ++i) {
        add_linear("layer" + std::to_string(i), in, spec_.hidden_widths[i]);
        in = spec_.hidden_widths[i];
      }
      add_linear("output", in, spec_.output_width);
    } else {
      add_linear("input", spec_.input_width, h0);
      add_linear("block.fc1", h0, h0);
      add_linear("block.fc2", h0, h0);
      add_linear("output", h0, spec_.output_width);
      norm_gain_ = params_.add("block.norm.gain", 1, h0 * members_);
      norm_bias_ = params_.add("block.norm.bias", 1, h0 * members_);
      params_.value(norm_gain_).setOnes();
    }
    // Uniform fan-in initialization, each member drawing from its own stream.
    for (Index m = 0; m < members_; ++m) {
      std::mt19937_64 rng(seeds[static_cast<std::size_t>(m)]);
      for (const Linear& l : layers_) {
        const S bound = S(1) / std::sqrt(static_cast<S>(l.in));
        std::uniform_real_distribution<S> dist(-bound, bound);
        auto w = params_.value(l.weight).middleCols(m * l.out, l.out);
        for (Index i = 0; i < w.rows(); ++i) {
          for (Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
        }
        auto b = params_.value(l.bias).middleCols(m * l.out, l.out);
        for (Index j = 0; j < b.cols(); ++j) b(0, j) = dist(rng);
      }
    }
    if (spec_.variant == MlpVariant::modern_residual) {
      const std::uint64_t s = seeds.front() ^ 0x5bd1e995ULL;
      spectral_.emplace_back(h0, members_, s);
      spectral_.emplace_back(h0, members_, s + 1);
    }
  }

  MlpSpec spec_;
  Index members_ = 0;
  ParamStore<S> params_;
  std::vector<Linear> layers_;
  std::size_t norm_gain_ = 0;
  std::size_t norm_bias_ = 0;
  std::vector<PowerIterationState<S>> spectral_;
};

}  // namespace gpl::nn
