#include "sonarssl/params.hpp"

namespace sonarssl {

Tensor& ParamSet::add(const std::string& name, ParamKind kind, Tensor value) {
  if (has(name)) throw InputError("params: duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, kind, std::move(value)});
  return entries_.back().value;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("params: unknown parameter name: " + name);
  return entries_[it->second].value;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("params: unknown parameter name: " + name);
  return entries_[it->second].value;
}

ParamKind ParamSet::kind_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("params: unknown parameter name: " + name);
  return entries_[it->second].kind;
}

std::size_t ParamSet::scalar_count(ParamKind kind) const {
  std::size_t n = 0;
  for (const ParamEntry& e : entries_)
    if (e.kind == kind) n += e.value.numel();
  return n;
}

std::vector<double> ParamSet::flatten(ParamKind kind) const {
  std::vector<double> flat;
  flat.reserve(scalar_count(kind));
  for (const ParamEntry& e : entries_)
    if (e.kind == kind) flat.insert(flat.end(), e.value.data.begin(), e.value.data.end());
  return flat;
}

void ParamSet::unflatten(ParamKind kind, const std::vector<double>& flat) {
  if (flat.size() != scalar_count(kind))
    throw InputError("params: unflatten length mismatch");
  std::size_t pos = 0;
  for (ParamEntry& e : entries_) {
    if (e.kind != kind) continue;
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + e.value.numel()),
              e.value.data.begin());
    pos += e.value.numel();
  }
}

void ParamSet::check_compatible(const ParamSet& a, const ParamSet& b, const char* what) {
  if (a.entries().size() != b.entries().size())
    throw InputError(std::string(what) + ": parameter sets differ in entry count");
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    const ParamEntry& ea = a.entries()[i];
    const ParamEntry& eb = b.entries()[i];
    if (ea.name != eb.name || ea.kind != eb.kind || !ea.value.same_shape(eb.value))
      throw InputError(std::string(what) + ": parameter sets incompatible at entry " + ea.name);
  }
}

void Grads::accumulate(const std::string& name, const Tensor& grad) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    by_name_.emplace(name, grad);
    return;
  }
  require_same_shape(it->second, grad, "grads");
  for (std::size_t i = 0; i < grad.numel(); ++i) it->second[i] += grad[i];
}

const Tensor* Grads::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &it->second;
}

}  // namespace sonarssl
