#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sonarssl/tensor.hpp"

namespace sonarssl {

// Learnable weights take gradients and optimizer updates; buffers (batch-norm
// running statistics) are carried along but never touched by the optimizer.
enum class ParamKind : std::uint8_t { weight = 0, buffer = 1 };

struct ParamEntry {
  std::string name;
  ParamKind kind;
  Tensor value;
};

// Named tensors in a stable creation order. The order defines the flattening
// used by momentum/EMA algebra, the optimizer state layout, and checkpoints.
class ParamSet {
 public:
  Tensor& add(const std::string& name, ParamKind kind, Tensor value);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  ParamKind kind_of(const std::string& name) const;

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  // Total scalar count over entries of the given kind.
  std::size_t scalar_count(ParamKind kind) const;

  // Concatenation of all entries of `kind` in creation order; unflatten is
  // the exact inverse and rejects length mismatches.
  std::vector<double> flatten(ParamKind kind) const;
  void unflatten(ParamKind kind, const std::vector<double>& flat);

  // Throws InputError unless both sets declare the same names, kinds, and
  // shapes in the same order.
  static void check_compatible(const ParamSet& a, const ParamSet& b, const char* what);

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Per-parameter gradient accumulator, keyed by parameter name. Accumulation
// adds, so a parameter reached through several paths (residual skips, shared
// heads) collects the sum of its path gradients.
class Grads {
 public:
  void accumulate(const std::string& name, const Tensor& grad);
  const Tensor* find(const std::string& name) const;
  void clear() { by_name_.clear(); }

 private:
  std::unordered_map<std::string, Tensor> by_name_;
};

}  // namespace sonarssl
