#include "sscgan/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sscgan/config.hpp"
#include "sscgan/dataset.hpp"
#include "sscgan/error.hpp"
#include "sscgan/hash.hpp"
#include "sscgan/metrics.hpp"
#include "sscgan/probe.hpp"
#include "sscgan/train.hpp"

namespace sscgan {
namespace fs = std::filesystem;

namespace {

// --- run directories ----------------------------------------------------------

void prepare_out_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!overwrite) throw IoError(dir.string() + " already exists; pass --overwrite to replace it");
      if (!fs::exists(dir / "run.json")) {
        throw IoError(dir.string() + " is not empty and holds no run.json; refusing to delete it");
      }
      if (fs::exists(dir / ".lock")) throw IoError(dir.string() + " is locked by another process");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw IoError(dir.string() + " is locked by another process (remove " + path_.string() + " if it is stale)");
    }
    std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

void add_input(Json& inputs, const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  inputs[path.string()] = git_blob_sha1(bytes);
}

void add_manifest_inputs(Json& inputs, const fs::path& manifest) {
  add_input(inputs, manifest);
  const Manifest m = read_manifest(manifest);
  const fs::path base = manifest.parent_path();
  for (const auto& e : m.scenes) {
    add_input(inputs, base / e.labels);
    add_input(inputs, base / e.depth);
    add_input(inputs, base / e.camera);
  }
}

void write_run_json(const fs::path& path, const std::string& command, const std::vector<std::string>& args,
                    Json config, Json inputs, bool deterministic) {
  write_json_file(path, Json{{"tool", kToolName},
                             {"version", kToolVersion},
                             {"command", command},
                             {"argv", args},
                             {"deterministic", deterministic},
                             {"config", std::move(config)},
                             {"inputs", std::move(inputs)}});
}

// Accepts either a bare config or a run.json, whose resolved config is used.
Json load_config_json(const fs::path& path) {
  Json j = read_json_file(path);
  if (j.is_object() && j.contains("tool") && j["tool"] == kToolName && j.contains("config")) return j["config"];
  return j;
}

bool env_deterministic() {
  const char* v = std::getenv("SSC_DETERMINISTIC");
  return v && std::string(v) == "1";
}

bool parse_bool_flag(const std::string& name, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw UsageError(name + " expects true or false");
}

// --- inspect ------------------------------------------------------------------

const char* class_name(int c) {
  switch (c) {
    case 0: return "empty";
    case 1: return "floor";
    case 2: return "wall";
    case 3: return "ceiling";
    default: return "furniture";
  }
}

void inspect_sscv(const fs::path& path, std::ostream& out) {
  const auto bytes = read_file_bytes(path);
  const SscvHeader h = decode_sscv_header(bytes);
  out << path.filename().string() << ": " << h.height << "x" << h.width << "x" << h.depth;
  if (h.dtype == SscvDtype::kU8Labels) {
    const LabelVolume v = decode_sscv_labels(bytes);
    out << " labels, C=" << h.channels << "\n";
    std::vector<std::size_t> hist(h.channels, 0);
    std::size_t invalid = 0;
    for (auto l : v.labels()) {
      if (l < h.channels) {
        ++hist[l];
      } else {
        ++invalid;
      }
    }
    out << "class histogram:\n";
    for (std::uint32_t c = 0; c < h.channels; ++c) {
      out << "  " << c << " (" << class_name(static_cast<int>(c)) << "): " << hist[c] << "\n";
    }
    if (invalid) out << "  out of range: " << invalid << "\n";
    if (v.has_visibility()) {
      std::size_t counts[3] = {0, 0, 0};
      for (auto s : v.visibility()) ++counts[static_cast<int>(s)];
      out << "visibility: observed " << counts[0] << ", occluded " << counts[1] << ", out_of_view " << counts[2]
          << "\n";
    } else {
      out << "visibility: absent\n";
    }
  } else {
    const auto values = decode_sscv_f32(bytes);
    out << " float32, channels=" << h.channels << "\n";
    if (!values.empty()) {
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      double sum = 0.0;
      for (float f : values) sum += f;
      out << "min " << *lo << ", max " << *hi << ", mean " << sum / static_cast<double>(values.size()) << "\n";
    }
  }
}

void inspect_checkpoint(const fs::path& path, std::ostream& out) {
  const TrainState st = load_checkpoint(path);
  const GridSpec& g = st.generator_spec.grid;
  out << path.filename().string() << ": " << st.config.variant_name() << ", step " << st.step << "\n";
  out << "grid " << g.height << "x" << g.width << "x" << g.depth << ", C=" << g.num_classes << "\n";
  out << "generator: " << st.generator.parameter_count() << " parameters, sha256 " << nn::digest(st.generator)
      << "\n";
  out << "discriminator: " << st.discriminator.parameter_count() << " parameters, sha256 "
      << nn::digest(st.discriminator) << "\n";
}

// --- eval ---------------------------------------------------------------------

Json counts_json(const ClassCounts& c) { return Json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; }

Json report_json(const EvalReport& r) {
  Json per_class = Json::array();
  for (std::size_t i = 0; i < r.ssc.per_class_iou.size(); ++i) {
    Json c = counts_json(r.ssc.counts[i]);
    c["class"] = i + 1;
    c["iou"] = r.ssc.per_class_iou[i] ? Json(*r.ssc.per_class_iou[i]) : Json(nullptr);
    per_class.push_back(std::move(c));
  }
  return Json{{"region", to_string(r.region)},
              {"sc",
               Json{{"precision", r.sc.precision},
                    {"recall", r.sc.recall},
                    {"iou", r.sc.iou},
                    {"counts", counts_json(r.sc.counts)},
                    {"region_size", r.sc.region_size}}},
              {"ssc",
               Json{{"per_class", per_class},
                    {"average", r.ssc.average ? Json(*r.ssc.average) : Json(nullptr)},
                    {"average_defined", r.ssc.average.has_value()}}}};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- commands -----------------------------------------------------------------

struct Common {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
};

struct GenDataArgs {
  std::string config, out;
  std::optional<int> count;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;
};

int cmd_gen_data(const GenDataArgs& a, const Common& c) {
  GenDataConfig cfg;
  Json inputs = Json::object();
  if (!a.config.empty()) {
    cfg = gen_data_config_from_json(load_config_json(a.config), "gen-data");
    add_input(inputs, a.config);
  }
  if (a.count) cfg.count = *a.count;
  if (a.seed) cfg.scene.seed = *a.seed;
  cfg.validate();
  prepare_out_dir(a.out, a.overwrite);
  DirLock lock(a.out);
  write_run_json(fs::path(a.out) / "run.json", "gen-data", c.args, to_json(cfg), inputs, true);
  const Manifest m = write_dataset(cfg.scene, cfg.scene.seed, cfg.count, a.out, cfg.write_tsdf, cfg.tsdf);
  c.out << "wrote " << m.scenes.size() << " scenes to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, data, out, resume, conditional, adv_loss;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool overwrite = false;
  bool deterministic = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const Common& c) {
  TrainConfig cfg;
  Json inputs = Json::object();
  if (!a.config.empty()) {
    cfg = train_config_from_json(load_config_json(a.config), "train");
    add_input(inputs, a.config);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.steps = *a.steps;
  if (!a.conditional.empty()) cfg.conditional = parse_bool_flag("--conditional", a.conditional);
  if (!a.adv_loss.empty()) cfg.adv_loss = a.adv_loss == "global" ? AdvLoss::kGlobal : AdvLoss::kLocal;
  if (a.deterministic || env_deterministic()) cfg.deterministic = true;
  cfg.validate();

  const Dataset data = load_dataset(a.data, cfg.tsdf);
  add_manifest_inputs(inputs, a.data);
  std::optional<fs::path> resume;
  if (!a.resume.empty()) {
    resume = fs::path(a.resume);
    add_input(inputs, *resume);
    fs::create_directories(a.out);
  } else {
    prepare_out_dir(a.out, a.overwrite);
  }
  DirLock lock(a.out);
  write_run_json(fs::path(a.out) / "run.json", "train", c.args, to_json(cfg), inputs, cfg.deterministic);
  c.out << "training " << cfg.variant_name() << " on " << data.items.size() << " scenes for " << cfg.steps
        << " steps\n";
  const int every = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : std::max(1, cfg.steps);
  const TrainResult r = train(cfg, data, a.out, resume, [&](const StepStats& s) {
    if (!a.quiet && (s.step % every == 0 || s.step == cfg.steps)) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "step %d  mce/voxel %.5f  disc %.5f  d_real %.3f  d_fake %.3f\n", s.step,
                    s.mce_per_voxel, s.disc_loss, s.d_real_mean, s.d_fake_mean);
      c.out << buf << std::flush;
    }
  });
  if (!r.checkpoints.empty()) c.out << "final checkpoint " << r.checkpoints.back().string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, out, region = "occluded";
  bool overwrite = false;
};

int cmd_eval(const EvalArgs& a, const Common& c) {
  const EvalRegion region = parse_region(a.region);
  const fs::path out(a.out);
  const fs::path csv = out.parent_path() / (out.stem().string() + "_scenes.csv");
  const fs::path run = out.parent_path() / (out.stem().string() + ".run.json");
  if (!a.overwrite) {
    for (const auto& p : {out, csv, run}) {
      if (fs::exists(p)) throw IoError(p.string() + " already exists; pass --overwrite to replace it");
    }
  }
  TrainState st = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data, st.config.tsdf);
  if (!data.grid.same_shape(st.generator_spec.grid)) throw ConfigError("dataset grid differs from the checkpoint grid");
  Json inputs = Json::object();
  add_input(inputs, a.checkpoint);
  add_manifest_inputs(inputs, a.data);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());

  EvalAccumulator acc(data.grid.num_classes, region);
  std::string rows = "seed,sc_precision,sc_recall,sc_iou,ssc_avg,region_size\n";
  for (const auto& item : data.items) {
    const ProbabilityVolume prob = nn::generator_predict(st.generator_spec, st.generator, item.tsdf);
    const LabelVolume pred = argmax_decode(prob, item.labels.visibility());
    const EvalReport r = evaluate(pred, item.labels, region);
    acc.add(pred, item.labels);
    rows += std::to_string(item.seed) + "," + fmt(r.sc.precision) + "," + fmt(r.sc.recall) + "," + fmt(r.sc.iou) +
            "," + (r.ssc.average ? fmt(*r.ssc.average) : std::string()) + "," + std::to_string(r.sc.region_size) +
            "\n";
  }
  const EvalReport total = acc.report();
  std::vector<const LabelVolume*> gts;
  for (const auto& item : data.items) gts.push_back(&item.labels);
  const std::uint8_t majority = majority_class(gts, region);
  EvalAccumulator base(data.grid.num_classes, region);
  for (const auto& item : data.items) base.add(constant_prediction(item.labels, region, majority), item.labels);
  const EvalReport baseline = base.report();
  Json report = report_json(total);
  report["majority_baseline"] = Json{{"class", majority},
                                     {"sc_iou", baseline.sc.iou},
                                     {"ssc_average", baseline.ssc.average ? Json(*baseline.ssc.average) : Json()}};
  report["checkpoint"] = a.checkpoint;
  report["variant"] = st.config.variant_name();
  report["scenes"] = data.items.size();
  write_json_file(out, report);
  {
    std::ofstream f(csv, std::ios::trunc);
    if (!f) throw IoError("cannot write " + csv.string());
    f << rows;
  }
  write_run_json(run, "eval", c.args, Json{{"region", to_string(region)}}, inputs, st.config.deterministic);
  char buf[256];
  std::snprintf(buf, sizeof buf, "SC precision %.4f recall %.4f IoU %.4f, SSC avg ", total.sc.precision,
                total.sc.recall, total.sc.iou);
  c.out << buf << (total.ssc.average ? fmt(*total.ssc.average) : std::string("undefined")) << " (" << a.region
        << ")\n";
  return 0;
}

struct ProbeArgs {
  std::vector<std::string> checkpoints, labels;
  std::string data, out;
  std::vector<double> levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool overwrite = false;
};

int cmd_probe(const ProbeArgs& a, const Common& c) {
  if (!a.labels.empty() && a.labels.size() != a.checkpoints.size()) {
    throw UsageError("--labels needs one label per checkpoint");
  }
  std::vector<ProbeSubject> subjects;
  std::optional<TsdfOptions> tsdf;
  Json inputs = Json::object();
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    const fs::path p(a.checkpoints[i]);
    const TrainState st = load_checkpoint(p);
    if (tsdf && (tsdf->truncation_voxels != st.config.tsdf.truncation_voxels || tsdf->flipped != st.config.tsdf.flipped)) {
      throw ConfigError("checkpoints were trained with different TSDF options");
    }
    tsdf = st.config.tsdf;
    const std::string label =
        a.labels.empty() ? (p.parent_path().filename() / p.filename()).string() : a.labels[i];
    subjects.push_back(subject_from_checkpoint(p, label));
    add_input(inputs, p);
  }
  const Dataset data = load_dataset(a.data, *tsdf);
  add_manifest_inputs(inputs, a.data);
  prepare_out_dir(a.out, a.overwrite);
  DirLock lock(a.out);
  write_run_json(fs::path(a.out) / "run.json", "probe", c.args, Json{{"levels", a.levels}, {"seeds", a.seeds}},
                 inputs, true);
  const CurveResult r = noise_curve(subjects, data, a.levels, a.seeds);
  write_curve_outputs(r, a.out);
  for (const auto& s : r.summaries) {
    c.out << s.checkpoint << " (" << s.variant << ") spearman per seed:";
    for (const auto& v : s.spearman_per_seed) c.out << " " << (v ? fmt(*v) : std::string("undefined"));
    c.out << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic scene completion with adversarial training", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  gen_cmd->add_option("--config", gen.config, "Dataset config JSON")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of scenes");
  gen_cmd->add_option("--seed", gen.seed, "First scene seed");
  gen_cmd->add_flag("--overwrite", gen.overwrite, "Replace an existing run directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a generator and discriminator");
  train_cmd->add_option("--config", tr.config, "Training config JSON (or a run.json)")->check(CLI::ExistingFile);
  train_cmd->add_option("--data", tr.data, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Run directory")->required();
  train_cmd->add_option("--seed", tr.seed, "Training seed");
  train_cmd->add_option("--steps", tr.steps, "Generator updates");
  train_cmd->add_option("--conditional", tr.conditional, "Condition the discriminator on the input")
      ->check(CLI::IsMember({"true", "false"}));
  train_cmd->add_option("--adv-loss", tr.adv_loss, "Adversarial loss")->check(CLI::IsMember({"global", "local"}));
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_flag("--deterministic", tr.deterministic, "Force deterministic mode");
  train_cmd->add_flag("--overwrite", tr.overwrite, "Replace an existing run directory");
  train_cmd->add_flag("--quiet", tr.quiet, "Only print the final checkpoint");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint's generator");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--region", ev.region, "Evaluation region")
      ->check(CLI::IsMember({"occluded", "observed_and_occluded", "all_in_view"}));
  eval_cmd->add_option("--out", ev.out, "Report JSON path")->required();
  eval_cmd->add_flag("--overwrite", ev.overwrite, "Replace existing outputs");

  ProbeArgs pr;
  auto* probe_cmd = app.add_subcommand("probe", "Discriminator loss under occluded-label noise");
  probe_cmd->add_option("--checkpoints", pr.checkpoints, "Checkpoint files")->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--labels", pr.labels, "Names for the checkpoints in the outputs");
  probe_cmd->add_option("--data", pr.data, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--levels", pr.levels, "Noise fractions")->delimiter(',')->capture_default_str();
  probe_cmd->add_option("--seeds", pr.seeds, "Noise seeds")->delimiter(',')->capture_default_str();
  probe_cmd->add_option("--out", pr.out, "Output directory")->required();
  probe_cmd->add_flag("--overwrite", pr.overwrite, "Replace an existing run directory");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Describe an .sscv volume or .ssck checkpoint");
  inspect_cmd->add_option("path", inspect_path, "File to inspect")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 1;
  }

  const Common common{args, out, err};
  try {
    if (*gen_cmd) return cmd_gen_data(gen, common);
    if (*train_cmd) return cmd_train(tr, common);
    if (*eval_cmd) return cmd_eval(ev, common);
    if (*probe_cmd) return cmd_probe(pr, common);
    if (*inspect_cmd) {
      const fs::path p(inspect_path);
      if (p.extension() == ".sscv") {
        inspect_sscv(p, out);
      } else if (p.extension() == ".ssck") {
        inspect_checkpoint(p, out);
      } else {
        throw UsageError("inspect understands .sscv and .ssck files");
      }
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace sscgan
