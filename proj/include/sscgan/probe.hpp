#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sscgan/dataset.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan {

// Changes exactly floor(p * |OCCLUDED|) occluded voxels, chosen uniformly
// without replacement, to a label drawn uniformly from the other C-1
// classes. Other voxels are untouched.
LabelVolume inject_label_noise(const LabelVolume& gt, double p, std::uint64_t seed);

// Number of voxels inject_label_noise changes for `occluded` candidates.
std::size_t noise_count(double p, std::size_t occluded);

// Scores one volume (with its conditioning channel) and returns the
// discriminator's output elements.
using DiscEvaluator = std::function<std::vector<double>(const OneHotVolume& volume, const std::vector<float>& cond)>;

struct ProbeSubject {
  std::string label;    // identifies the checkpoint in outputs
  std::string variant;  // e.g. SSC-cGAN-GL
  DiscEvaluator evaluate;
};

ProbeSubject subject_from_checkpoint(const std::filesystem::path& checkpoint, std::string label = {});

struct CurveRow {
  std::string checkpoint;
  std::string variant;
  double p = 0.0;
  double mean_bce = 0.0;  // over all (seed, scene) samples
  double std_bce = 0.0;   // population standard deviation
  int samples = 0;
};

struct SeedRow {
  std::string checkpoint;
  std::uint64_t seed = 0;
  double p = 0.0;
  double mean_bce = 0.0;  // over scenes
};

struct SubjectSummary {
  std::string checkpoint;
  std::string variant;
  std::vector<std::optional<double>> spearman_per_seed;  // absent when a series is constant
  std::optional<double> spearman_pooled;                 // on the mean curve
};

struct CurveResult {
  std::vector<double> levels;
  std::vector<std::uint64_t> seeds;
  std::vector<CurveRow> rows;        // |levels| * |subjects|, subject-major
  std::vector<SeedRow> seed_rows;    // |levels| * |seeds| * |subjects|
  std::vector<SubjectSummary> summaries;
};

// For every subject, level and seed: corrupt each scene, one-hot encode it,
// score it as a claimed-real sample and record bce(d, 1). Corruptions depend
// only on (seed, scene seed, level index), so all subjects see the same
// volumes.
CurveResult noise_curve(const std::vector<ProbeSubject>& subjects, const Dataset& data,
                        const std::vector<double>& levels, const std::vector<std::uint64_t>& seeds,
                        double clamp = 1e-7);

// Spearman rank correlation; ties get average ranks. Absent when either
// series has zero variance.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

// curve.csv, curve_seeds.csv, summary.json and curve.svg.
void write_curve_outputs(const CurveResult& result, const std::filesystem::path& out_dir);

std::string curve_svg(const CurveResult& result);

inline constexpr const char* kCurveCsvHeader = "checkpoint,variant,p,mean_bce,std_bce,samples";

}  // namespace sscgan
