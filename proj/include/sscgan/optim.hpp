#pragma once

#include <cmath>
#include <vector>

#include "sscgan/params.hpp"

namespace sscgan::nn {

// p <- p - lr * (grad + weight_decay * p). Decay is skipped for entries
// flagged decay=false (biases, normalization parameters).
template <class T>
void sgd_step(ParamStore<T>& params, double lr, double weight_decay) {
  if (!params.grads_ready()) throw StateError("sgd_step called before gradients were populated");
  for (auto& p : params.entries()) {
    const double wd = p.decay ? weight_decay : 0.0;
    T* v = p.value.data();
    const T* g = p.grad.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = static_cast<T>(v[i] - lr * (g[i] + wd * v[i]));
    }
  }
}

// Heavy-ball variant: v <- momentum * v + (grad + weight_decay * p),
// p <- p - lr * v. `velocity` is allocated on first use.
template <class T>
void sgd_momentum_step(ParamStore<T>& params, std::vector<Tensor<T>>& velocity, double lr,
                       double weight_decay, double momentum) {
  if (!params.grads_ready()) throw StateError("sgd_step called before gradients were populated");
  auto& entries = params.entries();
  if (velocity.empty()) {
    for (const auto& p : entries) velocity.emplace_back(p.value.shape());
  }
  if (velocity.size() != entries.size()) throw StateError("momentum buffers do not match the parameter store");
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const double wd = entries[e].decay ? weight_decay : 0.0;
    T* p = entries[e].value.data();
    const T* g = entries[e].grad.data();
    T* v = velocity[e].data();
    for (std::size_t i = 0; i < entries[e].value.size(); ++i) {
      v[i] = static_cast<T>(momentum * v[i] + (g[i] + wd * p[i]));
      p[i] = static_cast<T>(p[i] - lr * v[i]);
    }
  }
}

template <class T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  long step = 0;  // number of updates applied

  static AdamState zeros_like(const ParamStore<T>& params) {
    AdamState s;
    for (const auto& p : params.entries()) {
      s.m.emplace_back(p.value.shape());
      s.v.emplace_back(p.value.shape());
    }
    return s;
  }
};

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update for time step t (1-based).
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const AdamHyper& h, long t) {
  if (t < 1) throw StateError("adam_step requires t >= 1");
  if (!params.grads_ready()) throw StateError("adam_step called before gradients were populated");
  auto& entries = params.entries();
  if (state.m.size() != entries.size()) throw StateError("Adam moments do not match the parameter store");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t e = 0; e < entries.size(); ++e) {
    T* p = entries[e].value.data();
    const T* g = entries[e].grad.data();
    T* m = state.m[e].data();
    T* v = state.v[e].data();
    for (std::size_t i = 0; i < entries[e].value.size(); ++i) {
      m[i] = static_cast<T>(h.beta1 * m[i] + (1.0 - h.beta1) * g[i]);
      v[i] = static_cast<T>(h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i]);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<T>(p[i] - h.lr * mhat / (std::sqrt(vhat) + h.eps));
    }
  }
  state.step = t;
}

}  // namespace sscgan::nn
