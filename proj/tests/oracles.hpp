#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sscgan/voxcore.hpp"

// Reference implementations written from the definitions, with no shared
// code paths with the library.
namespace sscgan::oracle {

struct SetIou {
  double precision = 1.0, recall = 1.0, iou = 1.0;
};

struct BruteMetrics {
  SetIou sc;
  std::vector<std::optional<double>> per_class;  // classes 1..C-1
  std::optional<double> average;
};

// Builds explicit voxel index sets per class and intersects them.
inline BruteMetrics metrics(const std::vector<int>& pred, const std::vector<int>& gt,
                            const std::vector<bool>& region, int classes) {
  auto set_of = [&](const std::vector<int>& labels, auto pick) {
    std::vector<std::size_t> s;
    for (std::size_t v = 0; v < labels.size(); ++v)
      if (region[v] && pick(labels[v])) s.push_back(v);
    return s;
  };
  auto intersect = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::size_t n = 0;
    for (std::size_t x : a)
      for (std::size_t y : b) n += x == y;
    return n;
  };
  BruteMetrics out;
  {
    const auto p = set_of(pred, [](int l) { return l != 0; });
    const auto g = set_of(gt, [](int l) { return l != 0; });
    const double inter = static_cast<double>(intersect(p, g));
    const double uni = static_cast<double>(p.size() + g.size()) - inter;
    out.sc.precision = p.empty() ? 1.0 : inter / static_cast<double>(p.size());
    out.sc.recall = g.empty() ? 1.0 : inter / static_cast<double>(g.size());
    out.sc.iou = uni == 0 ? 1.0 : inter / uni;
  }
  double sum = 0;
  int n = 0;
  for (int c = 1; c < classes; ++c) {
    const auto p = set_of(pred, [c](int l) { return l == c; });
    const auto g = set_of(gt, [c](int l) { return l == c; });
    const double inter = static_cast<double>(intersect(p, g));
    const double uni = static_cast<double>(p.size() + g.size()) - inter;
    if (uni == 0) {
      out.per_class.push_back(std::nullopt);
      continue;
    }
    out.per_class.push_back(inter / uni);
    sum += inter / uni;
    ++n;
  }
  if (n) out.average = sum / n;
  return out;
}

// -sum_v ln p[label(v)](v), indexing the probability directly by label.
inline double mce(const std::vector<float>& prob, const std::vector<int>& labels, int h, int w, int d,
                  double clamp = 1e-7) {
  double sum = 0;
  const std::size_t n = static_cast<std::size_t>(h) * w * d;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < d; ++k) {
        const std::size_t v = (static_cast<std::size_t>(i) * w + j) * d + k;
        double p = prob[labels[v] * n + v];
        if (p < clamp) p = clamp;
        sum += -std::log(p);
      }
  return sum;
}

inline double bce_mean(const std::vector<double>& pred, double target, double clamp = 1e-7) {
  double sum = 0;
  for (double p : pred) {
    const double q = p < clamp ? clamp : (p > 1 - clamp ? 1 - clamp : p);
    sum += -(target * std::log(q) + (1 - target) * std::log(1 - q));
  }
  return sum / static_cast<double>(pred.size());
}

}  // namespace sscgan::oracle
