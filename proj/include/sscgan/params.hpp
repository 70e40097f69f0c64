#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sscgan/tensor.hpp"

namespace sscgan::nn {

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool decay = true;  // false for biases and normalization parameters
};

// Ordered, named collection of learnable arrays with gradient slots.
// Iteration order is insertion order.
template <class T>
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  Param<T>& add(std::string name, Shape shape, bool decay) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    index_.emplace(name, entries_.size());
    Param<T> p;
    p.name = std::move(name);
    p.value = Tensor<T>(shape);
    p.grad = Tensor<T>(std::move(shape));
    p.decay = decay;
    entries_.push_back(std::move(p));
    return entries_.back();
  }

  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  Param<T>& at(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + std::string(name));
    return entries_[it->second];
  }
  const Param<T>& at(std::string_view name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  std::vector<Param<T>>& entries() { return entries_; }
  const std::vector<Param<T>>& entries() const { return entries_; }

  void zero_grad() {
    for (auto& p : entries_) p.grad.fill(T(0));
    grads_ready_ = false;
  }
  bool grads_ready() const { return grads_ready_; }
  void set_grads_ready(bool ready) { grads_ready_ = ready; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_) n += p.value.size();
    return n;
  }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out(seed_);
    for (const auto& p : entries_) {
      auto& q = out.add(p.name, p.value.shape(), p.decay);
      q.value = p.value.template cast<U>();
    }
    return out;
  }

  bool same_values(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name || !(entries_[i].value == other.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Param<T>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::uint64_t seed_ = 0;
  bool grads_ready_ = false;
};

// Hex SHA-256 over names, shapes and raw value bytes, in store order.
template <class T>
std::string digest(const ParamStore<T>& store);

}  // namespace sscgan::nn
