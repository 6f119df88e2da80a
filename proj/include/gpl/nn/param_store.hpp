#pragma once

#include "gpl/nn/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpl::nn {

/// Named parameter matrices backed by one contiguous value buffer and one
/// contiguous gradient buffer, so optimizers and polyak averaging can treat
/// the whole store as a flat vector.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
  };

  using Map = Eigen::Map<Matrix<Scalar>>;
  using ConstMap = Eigen::Map<const Matrix<Scalar>>;

  /// Appends a zero-initialized parameter and returns its id. Adding
  /// parameters invalidates maps handed out earlier.
  std::size_t add(std::string name, Index rows, Index cols) {
    if (rows <= 0 || cols <= 0) {
      throw ShapeError("parameter '" + name + "' must have positive shape, got " +
                       shape_str(rows, cols));
    }
    if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    Entry e{std::move(name), rows, cols, values_.size()};
    values_.resize(values_.size() + e.size(), Scalar(0));
    grads_.resize(values_.size(), Scalar(0));
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
  }

  std::size_t count() const { return entries_.size(); }
  std::size_t size() const { return values_.size(); }
  const Entry& entry(std::size_t id) const { return entries_.at(id); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return i;
    }
    return std::nullopt;
  }

  Map value(std::size_t id) {
    const Entry& e = entries_.at(id);
    return Map(values_.data() + e.offset, e.rows, e.cols);
  }
  ConstMap value(std::size_t id) const {
    const Entry& e = entries_.at(id);
    return ConstMap(values_.data() + e.offset, e.rows, e.cols);
  }
  Map grad(std::size_t id) {
    const Entry& e = entries_.at(id);
    return Map(grads_.data() + e.offset, e.rows, e.cols);
  }
  ConstMap grad(std::size_t id) const {
    const Entry& e = entries_.at(id);
    return ConstMap(grads_.data() + e.offset, e.rows, e.cols);
  }

  std::span<Scalar> values() { return values_; }
  std::span<const Scalar> values() const { return values_; }
  std::span<Scalar> grads() { return grads_; }
  std::span<const Scalar> grads() const { return grads_; }

  void zero_grad() { std::fill(grads_.begin(), grads_.end(), Scalar(0)); }

  /// True when both stores hold identically named and shaped parameters.
  bool same_layout(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& a = entries_[i];
      const Entry& b = other.entries_[i];
      if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::vector<Scalar> values_;
  std::vector<Scalar> grads_;
};

}  // namespace gpl::nn
