#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "sscgan/params.hpp"
#include "sscgan/tensor.hpp"

namespace sscgan::nn {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff record. Nodes live in a deque so references returned
// by value()/grad() stay valid while new nodes are recorded.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  // Leaf bound to a store entry; gradients are accumulated into the store's
  // grad slot by backward(). Reusing a parameter returns the same node.
  Var parameter(ParamStore<T>& store, std::string_view name) {
    Param<T>& p = store.at(name);
    auto key = std::make_pair(static_cast<const void*>(&store), std::string(name));
    if (auto it = bound_.find(key); it != bound_.end()) return it->second;
    nodes_.push_back(Node{p.value, {}, recording_, {}, &p});
    Var v{static_cast<int>(nodes_.size()) - 1};
    bound_.emplace(std::move(key), v);
    if (recording_) stores_.insert(&store);
    return v;
  }

  // Parameter used as a constant: no gradient flows into the store.
  Var frozen(const ParamStore<T>& store, std::string_view name) {
    auto key = std::make_pair(static_cast<const void*>(&store), std::string(name));
    if (auto it = bound_.find(key); it != bound_.end()) return it->second;
    Var v = constant(store.at(name).value);
    bound_.emplace(std::move(key), v);
    return v;
  }

  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Backward fn) {
    bool needs = false;
    if (recording_) {
      for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : Backward{}, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <class Range>
  Var record_many(Tensor<T> value, const Range& inputs, Backward fn) {
    bool needs = false;
    if (recording_) {
      for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : Backward{}, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  Tensor<T>& grad(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every recorded input.
  // Parameter gradients are added to the owning stores' grad slots.
  void backward(Var loss) {
    if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size())) {
      throw StateError("backward called without a recorded forward pass");
    }
    if (!recording_) throw StateError("backward called on a tape that does not record gradients");
    if (consumed_) throw StateError("backward already ran on this tape");
    if (value(loss).size() != 1) throw StateError("backward requires a scalar loss");
    consumed_ = true;
    for (ParamStore<T>* s : stores_) s->set_grads_ready(true);
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss)[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.param) {
        T* dst = n.param->grad.data();
        const T* src = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
      } else if (n.backward) {
        n.backward(*this, n.grad);
      }
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
    Param<T>* param = nullptr;
  };
  std::deque<Node> nodes_;
  std::map<std::pair<const void*, std::string>, Var> bound_;
  std::set<ParamStore<T>*> stores_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace sscgan::nn
