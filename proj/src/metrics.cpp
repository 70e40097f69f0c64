#include "sscgan/metrics.hpp"

#include "sscgan/error.hpp"

namespace sscgan {

std::string to_string(EvalRegion region) {
  switch (region) {
    case EvalRegion::kOccluded:
      return "occluded";
    case EvalRegion::kObservedAndOccluded:
      return "observed_and_occluded";
    case EvalRegion::kAllInView:
      return "all_in_view";
  }
  return "unknown";
}

EvalRegion parse_region(const std::string& name) {
  if (name == "occluded") return EvalRegion::kOccluded;
  if (name == "observed_and_occluded") return EvalRegion::kObservedAndOccluded;
  if (name == "all_in_view") return EvalRegion::kAllInView;
  throw ConfigError("unknown evaluation region '" + name +
                    "' (expected occluded, observed_and_occluded or all_in_view)");
}

std::vector<std::uint8_t> region_mask(const LabelVolume& gt, EvalRegion region) {
  std::vector<std::uint8_t> mask(gt.size(), 1);
  if (region == EvalRegion::kAllInView) return mask;
  if (!gt.has_visibility()) throw ConfigError("ground truth has no visibility mask");
  const auto vis = gt.visibility();
  for (std::size_t v = 0; v < mask.size(); ++v) {
    mask[v] = region == EvalRegion::kOccluded ? vis[v] == Visibility::kOccluded
                                              : vis[v] != Visibility::kOutOfView;
  }
  return mask;
}

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_pair(const LabelVolume& pred, const LabelVolume& gt) {
  if (!pred.spec().same_shape(gt.spec())) throw ShapeError("prediction and ground truth differ in shape");
}

}  // namespace

ScMetrics sc_from_counts(const ClassCounts& c, std::int64_t region_size) {
  ScMetrics m;
  m.counts = c;
  m.region_size = region_size;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  return m;
}

SscMetrics ssc_from_counts(const std::vector<ClassCounts>& counts) {
  SscMetrics m;
  m.counts = counts;
  double sum = 0.0;
  int included = 0;
  for (const ClassCounts& c : counts) {
    const std::int64_t uni = c.tp + c.fp + c.fn;
    if (uni == 0) {
      m.per_class_iou.push_back(std::nullopt);
      continue;
    }
    const double iou = static_cast<double>(c.tp) / static_cast<double>(uni);
    m.per_class_iou.push_back(iou);
    sum += iou;
    ++included;
  }
  if (included > 0) m.average = sum / included;
  return m;
}

EvalAccumulator::EvalAccumulator(int num_classes, EvalRegion region)
    : region_(region), ssc_(static_cast<std::size_t>(num_classes - 1)) {}

void EvalAccumulator::add(const LabelVolume& pred, const LabelVolume& gt) {
  check_pair(pred, gt);
  pred.validate_labels();
  gt.validate_labels();
  if (static_cast<std::size_t>(gt.spec().num_classes - 1) != ssc_.size()) {
    throw ShapeError("class count differs from the accumulator");
  }
  const auto mask = region_mask(gt, region_);
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (!mask[v]) continue;
    ++region_size_;
    const bool po = p[v] != 0, go = g[v] != 0;
    if (po && go) ++sc_.tp;
    if (po && !go) ++sc_.fp;
    if (!po && go) ++sc_.fn;
    if (p[v] == g[v]) {
      if (g[v] != 0) ++ssc_[g[v] - 1].tp;
    } else {
      if (p[v] != 0) ++ssc_[p[v] - 1].fp;
      if (g[v] != 0) ++ssc_[g[v] - 1].fn;
    }
  }
}

EvalReport EvalAccumulator::report() const {
  return EvalReport{region_, sc_from_counts(sc_, region_size_), ssc_from_counts(ssc_)};
}

std::uint8_t majority_class(const std::vector<const LabelVolume*>& gts, EvalRegion region) {
  if (gts.empty()) throw ConfigError("majority class of an empty dataset");
  std::vector<std::int64_t> hist(static_cast<std::size_t>(gts.front()->spec().num_classes), 0);
  for (const LabelVolume* gt : gts) {
    if (gt->spec().num_classes != static_cast<int>(hist.size())) throw ShapeError("scenes differ in class count");
    const auto mask = region_mask(*gt, region);
    const auto labels = gt->labels();
    for (std::size_t v = 0; v < mask.size(); ++v) {
      if (mask[v] && labels[v] != 0 && labels[v] < hist.size()) ++hist[labels[v]];
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < hist.size(); ++c) {
    if (hist[c] > 0 && (best == 0 || hist[c] > hist[best])) best = c;
  }
  if (best == 0) throw ConfigError("no occupied ground-truth voxel in the evaluation region");
  return static_cast<std::uint8_t>(best);
}

LabelVolume constant_prediction(const LabelVolume& gt, EvalRegion region, std::uint8_t label) {
  const auto mask = region_mask(gt, region);
  std::vector<std::uint8_t> labels(mask.size(), 0);
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (mask[v]) labels[v] = label;
  }
  return LabelVolume(gt.spec(), std::move(labels));
}

EvalReport evaluate(const LabelVolume& pred, const LabelVolume& gt, EvalRegion region) {
  EvalAccumulator acc(gt.spec().num_classes, region);
  acc.add(pred, gt);
  return acc.report();
}

ScMetrics sc_metrics(const LabelVolume& pred, const LabelVolume& gt, EvalRegion region) {
  return evaluate(pred, gt, region).sc;
}

SscMetrics ssc_metrics(const LabelVolume& pred, const LabelVolume& gt, EvalRegion region) {
  return evaluate(pred, gt, region).ssc;
}

}  // namespace sscgan
