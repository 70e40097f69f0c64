#include "sscgan/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "sscgan/config.hpp"
#include "sscgan/error.hpp"
#include "sscgan/losses.hpp"
#include "sscgan/rng.hpp"
#include "sscgan/train.hpp"

namespace sscgan {
namespace fs = std::filesystem;

std::size_t noise_count(double p, std::size_t occluded) {
  // The epsilon absorbs representation error such as 0.3 * 100 = 29.999...
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(occluded) + 1e-9));
  return std::min(k, occluded);
}

LabelVolume inject_label_noise(const LabelVolume& gt, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("noise level must lie in [0, 1]");
  if (!gt.has_visibility()) throw ConfigError("label noise needs a visibility mask");
  gt.validate_labels();
  const int classes = gt.spec().num_classes;
  std::vector<std::size_t> occluded;
  const auto vis = gt.visibility();
  for (std::size_t v = 0; v < vis.size(); ++v) {
    if (vis[v] == Visibility::kOccluded) occluded.push_back(v);
  }
  const std::size_t k = noise_count(p, occluded.size());
  LabelVolume out = gt;
  Rng rng(seed);
  auto labels = out.labels();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(occluded.size() - i);
    std::swap(occluded[i], occluded[j]);
    const std::size_t v = occluded[i];
    const auto r = static_cast<std::uint8_t>(rng.uniform_index(static_cast<std::uint64_t>(classes - 1)));
    labels[v] = r < labels[v] ? r : static_cast<std::uint8_t>(r + 1);
  }
  return out;
}

ProbeSubject subject_from_checkpoint(const fs::path& checkpoint, std::string label) {
  auto st = std::make_shared<TrainState>(load_checkpoint(checkpoint));
  ProbeSubject s;
  s.label = label.empty() ? checkpoint.filename().string() : std::move(label);
  s.variant = st->config.variant_name();
  s.evaluate = [st](const OneHotVolume& volume, const std::vector<float>& cond) {
    const std::vector<float> d = nn::discriminator_predict(st->discriminator_spec, st->discriminator, volume, &cond);
    return std::vector<double>(d.begin(), d.end());
  };
  return s;
}

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman inputs differ in length");
  const std::size_t n = a.size();
  auto ranks = [n](const std::vector<double>& x) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

CurveResult noise_curve(const std::vector<ProbeSubject>& subjects, const Dataset& data,
                        const std::vector<double>& levels, const std::vector<std::uint64_t>& seeds, double clamp) {
  if (subjects.empty()) throw ConfigError("noise curve needs at least one checkpoint");
  if (levels.empty() || seeds.empty()) throw ConfigError("noise curve needs levels and seeds");
  if (data.items.empty()) throw ConfigError("dataset is empty");
  for (const auto& item : data.items) {
    if (!item.labels.has_visibility()) {
      throw ConfigError("scene " + std::to_string(item.seed) + " has no visibility mask");
    }
  }
  for (double p : levels) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("noise level must lie in [0, 1]");
  }

  CurveResult result;
  result.levels = levels;
  result.seeds = seeds;
  // bce[subject][level][seed][scene]
  std::vector<std::vector<std::vector<std::vector<double>>>> bce_values(
      subjects.size(), std::vector<std::vector<std::vector<double>>>(
                           levels.size(), std::vector<std::vector<double>>(seeds.size())));
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      for (const auto& item : data.items) {
        const std::uint64_t noise_seed = mix_seed(mix_seed(seeds[s], item.seed), l);
        const OneHotVolume v = one_hot_encode(inject_label_noise(item.labels, levels[l], noise_seed));
        for (std::size_t k = 0; k < subjects.size(); ++k) {
          const std::vector<double> d = subjects[k].evaluate(v, item.cond);
          bce_values[k][l][s].push_back(bce(std::span<const double>(d), 1.0, clamp));
        }
      }
    }
  }

  for (std::size_t k = 0; k < subjects.size(); ++k) {
    SubjectSummary summary{subjects[k].label, subjects[k].variant, {}, std::nullopt};
    std::vector<double> mean_curve;
    std::vector<std::vector<double>> seed_curves(seeds.size());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      std::vector<double> all;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& v = bce_values[k][l][s];
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        result.seed_rows.push_back(SeedRow{subjects[k].label, seeds[s], levels[l], m});
        seed_curves[s].push_back(m);
        all.insert(all.end(), v.begin(), v.end());
      }
      const double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
      double var = 0.0;
      for (double x : all) var += (x - mean) * (x - mean);
      var /= static_cast<double>(all.size());
      result.rows.push_back(CurveRow{subjects[k].label, subjects[k].variant, levels[l], mean, std::sqrt(var),
                                     static_cast<int>(all.size())});
      mean_curve.push_back(mean);
    }
    for (const auto& c : seed_curves) summary.spearman_per_seed.push_back(spearman(levels, c));
    summary.spearman_pooled = spearman(levels, mean_curve);
    result.summaries.push_back(std::move(summary));
  }
  return result;
}

// --- outputs ------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

std::string curve_svg(const CurveResult& result) {
  constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 200, kTop = 40, kBottom = 60;
  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double x0 = *std::min_element(result.levels.begin(), result.levels.end());
  double x1 = *std::max_element(result.levels.begin(), result.levels.end());
  if (x1 <= x0) x1 = x0 + 1.0;
  double y1 = 0.0;
  for (const auto& r : result.rows) y1 = std::max(y1, r.mean_bce + r.std_bce);
  y1 = y1 > 0.0 ? y1 * 1.1 : 1.0;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + ph - y / y1 * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft << "\" y=\"22\" font-size=\"14\">Discriminator loss under occluded-label noise</text>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  for (double p : result.levels) {
    o << "<line x1=\"" << sx(p) << "\" y1=\"" << kTop + ph << "\" x2=\"" << sx(p) << "\" y2=\"" << kTop + ph + 5
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << sx(p) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << short_fmt(p)
      << "</text>\n";
  }
  for (int t = 0; t <= 5; ++t) {
    const double y = y1 * t / 5.0;
    o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << sy(y) << "\" x2=\"" << kLeft << "\" y2=\"" << sy(y)
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << short_fmt(y)
      << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 20
    << "\" text-anchor=\"middle\">fraction of occluded voxels relabeled (p)</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">bce(d, 1): mean over scenes and seeds, band = 1 std</text>\n";

  for (std::size_t k = 0; k < result.summaries.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    std::vector<const CurveRow*> rows;
    for (const auto& r : result.rows) {
      if (r.checkpoint == result.summaries[k].checkpoint) rows.push_back(&r);
    }
    std::ostringstream band, line;
    for (const auto* r : rows) band << sx(r->p) << "," << sy(r->mean_bce + r->std_bce) << " ";
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
      band << sx((*it)->p) << "," << sy(std::max(0.0, (*it)->mean_bce - (*it)->std_bce)) << " ";
    }
    for (const auto* r : rows) line << sx(r->p) << "," << sy(r->mean_bce) << " ";
    o << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    o << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (const auto* r : rows) {
      o << "<circle cx=\"" << sx(r->p) << "\" cy=\"" << sy(r->mean_bce) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 36.0 * static_cast<double>(k);
    const double lx = kLeft + pw + 15;
    o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << lx + 26 << "\" y=\"" << ly + 4 << "\">" << xml_escape(result.summaries[k].variant)
      << "</text>\n";
    o << "<text x=\"" << lx + 26 << "\" y=\"" << ly + 18 << "\" font-size=\"10\" fill=\"#555\">"
      << xml_escape(result.summaries[k].checkpoint) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_curve_outputs(const CurveResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::string csv = std::string(kCurveCsvHeader) + "\n";
  for (const auto& r : result.rows) {
    csv += r.checkpoint + "," + r.variant + "," + fmt(r.p) + "," + fmt(r.mean_bce) + "," + fmt(r.std_bce) + "," +
           std::to_string(r.samples) + "\n";
  }
  write_text(out_dir / "curve.csv", csv);

  std::string seeds_csv = "checkpoint,seed,p,mean_bce\n";
  for (const auto& r : result.seed_rows) {
    seeds_csv += r.checkpoint + "," + std::to_string(r.seed) + "," + fmt(r.p) + "," + fmt(r.mean_bce) + "\n";
  }
  write_text(out_dir / "curve_seeds.csv", seeds_csv);

  Json subjects = Json::array();
  for (const auto& s : result.summaries) {
    Json per_seed = Json::array();
    for (const auto& v : s.spearman_per_seed) per_seed.push_back(optional_json(v));
    subjects.push_back(Json{{"checkpoint", s.checkpoint},
                            {"variant", s.variant},
                            {"spearman_per_seed", per_seed},
                            {"spearman_pooled", optional_json(s.spearman_pooled)}});
  }
  write_json_file(out_dir / "summary.json",
                  Json{{"levels", result.levels}, {"seeds", result.seeds}, {"checkpoints", subjects}});
  write_text(out_dir / "curve.svg", curve_svg(result));
}

}  // namespace sscgan
