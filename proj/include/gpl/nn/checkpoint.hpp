#pragma once

#include "gpl/nn/adam.hpp"
#include "gpl/nn/mlp.hpp"
#include "gpl/nn/param_store.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gpl::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArrayEntry {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

/// Flat, versioned container of named float64 arrays and text blobs.
/// The on-disk layout is described in docs/checkpoint_format.md.
class Checkpoint {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  void put_array(const std::string& name, std::vector<std::uint64_t> shape,
                 std::vector<double> data);
  void put_matrix(const std::string& name, const Matrix<double>& m);
  void put_vector(const std::string& name, std::span<const double> v);
  void put_scalar(const std::string& name, double v);
  void put_text(const std::string& name, std::string text);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::vector<std::string> names() const;

  const ArrayEntry& array(const std::string& name) const;
  Matrix<double> matrix(const std::string& name) const;
  std::vector<double> vector(const std::string& name) const;
  double scalar(const std::string& name) const;
  const std::string& text(const std::string& name) const;

  /// Stores every parameter as "<prefix>/<param name>".
  void put_params(const std::string& prefix, const ParamStore<double>& store);
  /// Restores into an existing store; names and shapes must match exactly.
  void get_params(const std::string& prefix, ParamStore<double>& store) const;

  void put_adam(const std::string& prefix, const AdamState<double>& state);
  void get_adam(const std::string& prefix, AdamState<double>& state) const;

  void put_mlp(const std::string& prefix, const EnsembleMlp<double>& net);
  void get_mlp(const std::string& prefix, EnsembleMlp<double>& net) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  using Entry = std::variant<ArrayEntry, std::string>;
  std::map<std::string, Entry> entries_;
};

}  // namespace gpl::nn
