#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sscgan/voxcore.hpp"

namespace sscgan {

enum class EvalRegion {
  kOccluded,             // in-view voxels behind the observed surface
  kObservedAndOccluded,  // every in-view voxel
  kAllInView,            // the whole grid volume, visibility ignored
};

std::string to_string(EvalRegion region);
EvalRegion parse_region(const std::string& name);

// Region mask from the ground-truth visibility. Throws if it is absent and
// the region needs it.
std::vector<std::uint8_t> region_mask(const LabelVolume& gt, EvalRegion region);

struct ClassCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

// 0/0 is scored 1 for precision, recall and IoU (a perfectly empty region).
struct ScMetrics {
  double precision = 1.0;
  double recall = 1.0;
  double iou = 1.0;
  ClassCounts counts;
  std::int64_t region_size = 0;
};

// Classes absent from both prediction and ground truth inside the region
// are excluded from the average; if none remains the average is absent.
struct SscMetrics {
  std::vector<std::optional<double>> per_class_iou;  // classes 1..C-1
  std::vector<ClassCounts> counts;                   // classes 1..C-1
  std::optional<double> average;
};

struct EvalReport {
  EvalRegion region = EvalRegion::kOccluded;
  ScMetrics sc;
  SscMetrics ssc;
};

ScMetrics sc_from_counts(const ClassCounts& counts, std::int64_t region_size);
SscMetrics ssc_from_counts(const std::vector<ClassCounts>& counts);

ScMetrics sc_metrics(const LabelVolume& pred, const LabelVolume& gt, EvalRegion region);
SscMetrics ssc_metrics(const LabelVolume& pred, const LabelVolume& gt, EvalRegion region);
EvalReport evaluate(const LabelVolume& pred, const LabelVolume& gt, EvalRegion region);

// Most frequent non-empty ground-truth class inside the region, pooled over
// all scenes (lowest class on ties). Throws if no region voxel is occupied.
std::uint8_t majority_class(const std::vector<const LabelVolume*>& gts, EvalRegion region);

// Predicts `label` on every region voxel and empty elsewhere.
LabelVolume constant_prediction(const LabelVolume& gt, EvalRegion region, std::uint8_t label);

// Accumulates counts over many scenes (dataset-level metrics).
class EvalAccumulator {
 public:
  EvalAccumulator(int num_classes, EvalRegion region);
  void add(const LabelVolume& pred, const LabelVolume& gt);
  EvalReport report() const;

 private:
  EvalRegion region_;
  ClassCounts sc_;
  std::int64_t region_size_ = 0;
  std::vector<ClassCounts> ssc_;
};

}  // namespace sscgan
