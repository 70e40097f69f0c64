// Acceptance gate: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is 0 only when every criterion passes.
//
// Usage: acceptance [work_dir]

#include <Eigen/Geometry>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "sscgan/cli.hpp"
#include "sscgan/config.hpp"
#include "sscgan/hash.hpp"
#include "sscgan/losses.hpp"
#include "sscgan/metrics.hpp"
#include "sscgan/nets.hpp"
#include "sscgan/probe.hpp"
#include "sscgan/train.hpp"
#include "sscgan/tsdf.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace sscgan;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-12); }

// --- 1: loss oracles ----------------------------------------------------------

// Generator objective and discriminator loss written out in one pass from raw
// arrays: lambda-weighted minimax term and one-sided smoothing.
struct Monolithic {
  double gen = 0, disc = 0;
};

Monolithic monolithic_losses(const std::vector<float>& prob, const std::vector<int>& labels, std::size_t voxels,
                             const std::vector<double>& d_real, const std::vector<double>& d_fake, double lambda,
                             double eps) {
  const double clamp = 1e-7;
  auto cl = [&](double p) { return std::min(std::max(p, clamp), 1 - clamp); };
  Monolithic m;
  for (std::size_t v = 0; v < voxels; ++v) m.gen -= std::log(std::max<double>(prob[labels[v] * voxels + v], clamp));
  double fake_log = 0, real_term = 0;
  for (double d : d_fake) fake_log += std::log(1 - cl(d));
  for (double d : d_real) real_term += (1 - eps) * std::log(cl(d)) + eps * std::log(1 - cl(d));
  const double n = static_cast<double>(d_fake.size());
  m.gen += lambda * fake_log / n;
  m.disc = -real_term / n - fake_log / n;
  return m;
}

Outcome criterion_loss_oracles() {
  Rng rng(101);
  double worst = 0;
  int volumes = 0;
  for (int trial = 0; trial < 100; ++trial, ++volumes) {
    const GridSpec g = test::random_grid(rng, 4, 2, 5);
    const LabelVolume labels = test::random_labels(rng, g, false);
    const ProbabilityVolume prob = test::random_probabilities(rng, g);
    const OneHotVolume target = one_hot_encode(labels);
    const std::vector<int> li(labels.labels().begin(), labels.labels().end());
    const double want_mce = oracle::mce(prob.values, li, g.height, g.width, g.depth);
    worst = std::max(worst, rel_err(mce(prob, target).sum, want_mce));

    // Same quantity through the differentiable path in double precision.
    nn::Tape<double> t(false);
    const nn::Shape shape{1, g.num_classes, g.height, g.width, g.depth};
    nn::Tensor<double> pt(shape), tt(shape);
    for (std::size_t i = 0; i < prob.values.size(); ++i) {
      pt[i] = prob.values[i];
      tt[i] = target.values[i];
    }
    worst = std::max(worst, rel_err(t.value(nn::mce_sum(t, t.constant(pt), tt, 1e-7))[0], want_mce));

    const bool local = trial % 2 == 1;
    const std::size_t n = local ? g.voxel_count() * g.num_classes : 1;
    DiscOutput real{local ? DiscVariant::kLocal : DiscVariant::kGlobal, {}};
    DiscOutput fake{real.variant, {}};
    for (std::size_t i = 0; i < n; ++i) {
      real.values.push_back(rng.uniform(0.01, 0.99));
      fake.values.push_back(rng.uniform(0.01, 0.99));
    }
    const double target_z = std::vector<double>{0.0, 0.9, 1.0}[rng.uniform_index(3)];
    worst = std::max(worst, rel_err(bce(real.values, target_z), oracle::bce_mean(real.values, target_z)));

    LossConfig cfg;
    cfg.lambda = 1.0;
    cfg.smoothing = 0.1;
    const Monolithic m = monolithic_losses(prob.values, li, g.voxel_count(), real.values, fake.values, 1.0, 0.1);
    worst = std::max(worst, rel_err(gen_loss(prob, target, fake, cfg), m.gen));
    worst = std::max(worst, rel_err(disc_loss(real, fake, cfg), m.disc));
  }
  return {worst <= 1e-6, fmt("%d volumes, max relative error %.2e (limit 1e-6)", volumes, worst)};
}

// --- 2: gradients ------------------------------------------------------------

Outcome criterion_gradients() {
  GridSpec g;
  g.height = g.width = g.depth = 12;
  g.num_classes = 3;
  nn::NetSpec gen = nn::NetSpec::generator(g);
  gen.widths = {4, 8};
  Rng rng(202);
  nn::Tensor<double> x({2, 1, 12, 12, 12});
  test::fill_uniform(x, rng, -1, 1);
  nn::Tensor<double> y({2, 3, 12, 12, 12});
  for (int n = 0; n < 2; ++n)
    for (int v = 0; v < 1728; ++v) y[(n * 3 + rng.uniform_index(3)) * 1728 + v] = 1.0;
  LossConfig cfg;
  cfg.lambda = 1.0;

  std::size_t checked = 0, params = 0;
  double worst = 0;
  std::string where;
  for (nn::NetKind kind : {nn::NetKind::kDiscGlobal, nn::NetKind::kDiscLocal}) {
    nn::NetSpec disc = nn::NetSpec::discriminator(kind, g, true);
    disc.widths = {4, 8, 6, 4};
    disc.fc_widths = {8, 6};
    disc.norm = nn::Normalization::kNone;
    auto gp = nn::init_params<double>(gen, 1);
    auto dp = nn::init_params<double>(disc, 2);
    params += gp.parameter_count() + dp.parameter_count();

    // Generator objective with the discriminator as a fixed function.
    auto gen_loss_fn = [&](nn::Tape<double>& t) {
      nn::Var xv = t.constant(x);
      nn::Var p = nn::generator_forward(t, gen, gp, xv);
      nn::Var m = nn::scale(t, nn::mce_sum(t, p, y, 1e-7), 1.0 / (2 * 1728.0));
      nn::Var d = nn::discriminator_forward(t, disc, dp, p, xv, false);
      return nn::add(t, m, nn::gen_adversarial_term(t, d, cfg));
    };
    // Discriminator loss on a real batch and the generator's current output.
    nn::Tensor<double> fake;
    {
      nn::Tape<double> t(false);
      fake = t.value(nn::generator_forward(t, gen, gp, t.constant(x)));
    }
    auto disc_loss_fn = [&](nn::Tape<double>& t) {
      nn::Var xv = t.constant(x);
      nn::Var dr = nn::discriminator_forward(t, disc, dp, t.constant(y), xv);
      nn::Var df = nn::discriminator_forward(t, disc, dp, t.constant(fake), xv);
      return nn::disc_loss(t, dr, df, cfg);
    };
    for (auto r : {test::grad_check({&gp}, gen_loss_fn, 40, 7), test::grad_check({&dp}, disc_loss_fn, 40, 8)}) {
      checked += r.checked;
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        where = r.worst;
      }
    }
  }
  const bool pass = checked >= 50 && worst <= 1e-3;
  return {pass, fmt("%zu sampled parameters of %zu, max relative error %.2e (limit 1e-3), worst %s", checked, params,
                    worst, where.c_str())};
}

// --- 3: shapes -----------------------------------------------------------------

Outcome criterion_shapes() {
  GridSpec g;
  g.height = 60;
  g.width = 36;
  g.depth = 60;
  g.num_classes = 6;
  std::vector<std::string> problems;
  const nn::NetSpec global = nn::NetSpec::discriminator(nn::NetKind::kDiscGlobal, g, true);
  auto params = nn::init_params<float>(global, 3);
  nn::Tape<float> t(false);
  nn::Shape feat;
  nn::Var out = nn::disc_global_forward(t, global, params, t.constant(nn::Tensor<float>({1, 6, 60, 36, 60}, 0.2f)),
                                        t.constant(nn::Tensor<float>({1, 1, 60, 36, 60}, 0.5f)), true, &feat);
  const std::size_t flat = nn::shape_size(feat) / static_cast<std::size_t>(feat[0]);
  if (feat != nn::Shape{1, 16, 5, 3, 5} || flat != 1200) problems.push_back("feature block " + nn::shape_str(feat));
  if (params.at("fc0.w").value.shape() != nn::Shape{256, 1200}) problems.push_back("fc0");
  if (params.at("fc1.w").value.shape() != nn::Shape{128, 256}) problems.push_back("fc1");
  if (params.at("out.w").value.shape() != nn::Shape{1, 128}) problems.push_back("out");
  if (t.value(out).shape() != nn::Shape{1, 1}) problems.push_back("global output " + nn::shape_str(t.value(out).shape()));

  const nn::NetSpec local = nn::NetSpec::discriminator(nn::NetKind::kDiscLocal, g, true);
  auto lp = nn::init_params<float>(local, 4);
  nn::Var lo = nn::disc_local_forward(t, local, lp, t.constant(nn::Tensor<float>({1, 6, 60, 36, 60}, 0.2f)),
                                      t.constant(nn::Tensor<float>({1, 1, 60, 36, 60}, 0.5f)));
  const nn::Shape local_shape = t.value(lo).shape();
  if (local_shape != nn::Shape{1, 6, 60, 36, 60}) problems.push_back("local output " + nn::shape_str(local_shape));

  std::string detail = "pre-flatten " + nn::shape_str(feat) + " = " + std::to_string(flat) +
                       ", FC 1200-256-128-1, local output " + nn::shape_str(local_shape);
  for (const auto& p : problems) detail += "; mismatch: " + p;
  return {problems.empty(), detail};
}

// --- 4: invariants -------------------------------------------------------------

Outcome criterion_invariants() {
  Rng rng(404);
  const int per_family = 1000;
  int cases = 0;
  std::vector<std::string> failures;
  auto fail = [&](const std::string& family, int i) {
    if (failures.size() < 5) failures.push_back(family + " case " + std::to_string(i));
  };

  for (int i = 0; i < per_family; ++i, ++cases) {
    const int n = 1 + static_cast<int>(rng.uniform_index(3)), c = 2 + static_cast<int>(rng.uniform_index(7));
    const int s = 1 + static_cast<int>(rng.uniform_index(4));
    nn::Tensor<float> logits({n, c, s, s, s});
    for (auto& v : logits.values()) v = static_cast<float>(rng.uniform(-20, 20));
    nn::Tape<float> t(false);
    const auto& p = t.value(nn::softmax_channels(t, t.constant(logits)));
    const int sp = s * s * s;
    for (int b = 0; b < n; ++b)
      for (int v = 0; v < sp; ++v) {
        double sum = 0;
        for (int k = 0; k < c; ++k) sum += p[(b * c + k) * sp + v];
        if (std::abs(sum - 1.0) > 1e-5) fail("softmax", i);
      }
  }

  for (int i = 0; i < per_family; ++i, ++cases) {
    GridSpec g = test::random_grid(rng, 8, 2, 6);
    g.input_scale = 1 + static_cast<int>(rng.uniform_index(2));
    DepthImage d;
    d.camera.intrinsics.width = 4 + static_cast<int>(rng.uniform_index(17));
    d.camera.intrinsics.height = 4 + static_cast<int>(rng.uniform_index(17));
    d.camera.intrinsics.fx = rng.uniform(5, 40);
    d.camera.intrinsics.fy = rng.uniform(5, 40);
    d.camera.intrinsics.cx = rng.uniform(0, d.camera.intrinsics.width);
    d.camera.intrinsics.cy = rng.uniform(0, d.camera.intrinsics.height);
    d.camera.position = Eigen::Vector3d(rng.uniform(-1, 2), rng.uniform(-1, 2), rng.uniform(-1, 2));
    Eigen::Quaterniond q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    d.camera.rotation = q.normalized().toRotationMatrix();
    for (int k = 0; k < d.width() * d.height(); ++k) {
      d.depths.push_back(rng.uniform01() < 0.2 ? 0.0f : static_cast<float>(rng.uniform(0.01, 4)));
    }
    const TsdfOptions opt{rng.uniform(0.5, 5), rng.uniform01() < 0.5};
    const TsdfVolume v = depth_to_tsdf(d, g, opt);
    for (float x : v.values)
      if (!(x >= -1.0f && x <= 1.0f)) fail("tsdf", i);
  }

  for (int i = 0; i < per_family; ++i, ++cases) {
    const GridSpec g = test::random_grid(rng, 6, 2, 12);
    const LabelVolume l = test::random_labels(rng, g);
    const OneHotVolume oh = one_hot_encode(l);
    ProbabilityVolume p;
    p.spec = oh.spec;
    p.values = oh.values;
    if (!(argmax_decode(p, l.visibility()) == l)) fail("one-hot", i);
  }

  for (int i = 0; i < per_family; ++i, ++cases) {
    const GridSpec g = test::random_grid(rng, 4, 2, 6);
    const LabelVolume gt = test::random_labels(rng, g);
    const LabelVolume pred = test::random_labels(rng, g, false);
    const auto region = static_cast<EvalRegion>(rng.uniform_index(3));
    const auto mask = region_mask(gt, region);
    const auto want = oracle::metrics({pred.labels().begin(), pred.labels().end()},
                                      {gt.labels().begin(), gt.labels().end()}, {mask.begin(), mask.end()},
                                      g.num_classes);
    const auto got = evaluate(pred, gt, region);
    if (got.sc.precision != want.sc.precision || got.sc.recall != want.sc.recall || got.sc.iou != want.sc.iou ||
        got.ssc.per_class_iou != want.per_class || got.ssc.average != want.average) {
      fail("metrics", i);
    }
  }

  for (int i = 0; i < per_family; ++i, ++cases) {
    const GridSpec g = test::random_grid(rng, 6, 2, 8);
    const LabelVolume gt = test::random_labels(rng, g);
    const double p = rng.uniform01() < 0.1 ? std::vector<double>{0, 0.1, 0.3, 0.5, 1}[rng.uniform_index(5)]
                                           : rng.uniform01();
    const LabelVolume noisy = inject_label_noise(gt, p, rng.uniform_index(1u << 30));
    std::size_t occluded = 0, changed = 0, outside = 0;
    for (std::size_t v = 0; v < gt.size(); ++v) {
      const bool occ = gt.visibility()[v] == Visibility::kOccluded;
      occluded += occ;
      changed += noisy.labels()[v] != gt.labels()[v];
      outside += !occ && noisy.labels()[v] != gt.labels()[v];
    }
    if (changed != noise_count(p, occluded) || outside != 0) fail("noise", i);
  }

  std::string detail = fmt("%d randomized cases (softmax, TSDF range, one-hot round trip, metric brute force, "
                           "noise counts), %zu failures",
                           cases, failures.size());
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty() && cases >= 1000, detail};
}

// --- 5-7: training, conditioning, probe --------------------------------------

TrainConfig desk_config(bool conditional) {
  TrainConfig c;
  c.conditional = conditional;
  c.adv_loss = AdvLoss::kGlobal;
  c.steps = 500;
  c.batch_size = 4;
  c.checkpoint_every = 100;
  return c;
}

struct Trained {
  TrainResult result;
  fs::path final_checkpoint;
  double seconds = 0;
};

Trained train_variant(const Dataset& data, bool conditional, const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  Trained t;
  const TrainConfig c = desk_config(conditional);
  progress("training " + c.variant_name() + " for " + std::to_string(c.steps) + " steps");
  t.result = train(c, data, dir, std::nullopt, [&](const StepStats& s) {
    if (s.step % 100 == 0) progress(fmt("step %d mce/voxel %.4f disc %.4f", s.step, s.mce_per_voxel, s.disc_loss));
  });
  t.final_checkpoint = t.result.checkpoints.back();
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

Outcome criterion_overfit(const Dataset& data, const Trained& cgan) {
  TrainState st = load_checkpoint(cgan.final_checkpoint);
  std::vector<const LabelVolume*> gts;
  EvalAccumulator model(data.grid.num_classes, EvalRegion::kOccluded);
  for (const auto& item : data.items) {
    const ProbabilityVolume prob = nn::generator_predict(st.generator_spec, st.generator, item.tsdf);
    model.add(argmax_decode(prob, item.labels.visibility()), item.labels);
    gts.push_back(&item.labels);
  }
  const std::uint8_t majority = majority_class(gts, EvalRegion::kOccluded);
  EvalAccumulator base(data.grid.num_classes, EvalRegion::kOccluded);
  for (const auto& item : data.items) {
    base.add(constant_prediction(item.labels, EvalRegion::kOccluded, majority), item.labels);
  }
  const double ssc = model.report().ssc.average.value_or(0.0);
  const double baseline = base.report().ssc.average.value_or(0.0);
  const auto& stats = cgan.result.stats;
  const double first = stats.front().mce_per_voxel, last = stats.back().mce_per_voxel;
  const double drop = 1.0 - last / first;
  const bool pass = ssc >= 0.5 && ssc >= 3.0 * baseline && drop >= 0.70 && stats.size() == 500;
  return {pass, fmt("%zu steps in %.0f s; occluded SSC avg IoU %.3f (>= 0.5), majority baseline %.3f (class %d, "
                    "ratio %.1fx >= 3); mce/voxel %.4f -> %.4f (drop %.1f%% >= 70%%)",
                    stats.size(), cgan.seconds, ssc, baseline, majority, baseline > 0 ? ssc / baseline : INFINITY,
                    first, last, 100 * drop)};
}

Outcome criterion_conditioning(const Dataset& data, const Trained& cgan, const Trained& gan) {
  std::vector<const ClassVolume*> vols;
  std::vector<const std::vector<float>*> conds, rolled;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    vols.push_back(&data.items[i].onehot);
    conds.push_back(&data.items[i].cond);
    rolled.push_back(&data.items[(i + 1) % data.items.size()].cond);
  }
  const auto v = nn::stack_class_volumes<float>(vols);
  const auto c = nn::stack_channels<float>(conds, data.grid);
  const auto cr = nn::stack_channels<float>(rolled, data.grid);

  TrainState cs = load_checkpoint(cgan.final_checkpoint);
  nn::Tape<float> t(false);
  const auto a = t.value(nn::discriminator_forward(t, cs.discriminator_spec, cs.discriminator, t.constant(v),
                                                   t.constant(c), false));
  const auto b = t.value(nn::discriminator_forward(t, cs.discriminator_spec, cs.discriminator, t.constant(v),
                                                   t.constant(cr), false));
  double delta = 0;
  for (std::size_t i = 0; i < a.size(); ++i) delta += std::abs(static_cast<double>(a[i]) - b[i]);
  delta /= static_cast<double>(a.size());

  TrainState us = load_checkpoint(gan.final_checkpoint);
  const auto ua = t.value(nn::discriminator_forward(t, us.discriminator_spec, us.discriminator, t.constant(v),
                                                    t.constant(c), false));
  const auto ub = t.value(nn::discriminator_forward(t, us.discriminator_spec, us.discriminator, t.constant(v),
                                                    t.constant(cr), false));
  const auto un = t.value(nn::discriminator_forward(t, us.discriminator_spec, us.discriminator, t.constant(v),
                                                    std::nullopt, false));
  const bool invariant = ua == ub && ua == un;
  return {delta > 1e-4 && invariant,
          fmt("cGAN mean |delta| under cond permutation %.3e (> 1e-4) over %zu outputs; unconditional outputs "
              "bitwise invariant: %s",
              delta, a.size(), invariant ? "yes" : "no")};
}

std::string opt_str(const std::optional<double>& v) { return v ? fmt("%.3f", *v) : std::string("n/a"); }

Outcome criterion_probe(const Dataset& data, const Trained& cgan, const Trained& gan, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const CurveResult r = noise_curve({subject_from_checkpoint(gan.final_checkpoint, "SSC-GAN-GL"),
                                     subject_from_checkpoint(cgan.final_checkpoint, "SSC-cGAN-GL")},
                                    data, levels, seeds);
  write_curve_outputs(r, out);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const SubjectSummary& g = r.summaries[0];
  const SubjectSummary& c = r.summaries[1];
  int good = 0;
  std::string per_seed;
  for (const auto& s : c.spearman_per_seed) {
    good += s && *s >= 0.8;
    per_seed += (per_seed.empty() ? "" : ", ") + opt_str(s);
  }
  std::string gan_seeds;
  for (const auto& s : g.spearman_per_seed) gan_seeds += (gan_seeds.empty() ? "" : ", ") + opt_str(s);
  const bool chart = fs::exists(out / "curve.svg") && fs::file_size(out / "curve.svg") > 0;
  return {good >= 2 && chart,
          fmt("cGAN Spearman per seed [%s], %d/3 >= 0.8; GAN per seed [%s]; chart %s; probe %.0f s", per_seed.c_str(),
              good, gan_seeds.c_str(), chart ? (out / "curve.svg").c_str() : "missing", seconds)};
}

// --- 8: determinism ------------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sscgan");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) progress("sscgan " + args[1] + " failed: " + err.str());
  return code;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool run_pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  write_json_file(dir / "gen.json", Json{{"count", 8}});
  write_json_file(dir / "train.json", Json{{"steps", 20}, {"checkpoint_every", 5}});
  const std::string d = dir.string();
  return cli({"gen-data", "--config", d + "/gen.json", "--out", d + "/data"}) == 0 &&
         cli({"train", "--config", d + "/train.json", "--data", d + "/data/manifest.json", "--out", d + "/cgan",
              "--deterministic", "--quiet"}) == 0 &&
         cli({"train", "--config", d + "/train.json", "--data", d + "/data/manifest.json", "--out", d + "/gan",
              "--conditional", "false", "--deterministic", "--quiet"}) == 0 &&
         cli({"probe", "--checkpoints", d + "/gan/ckpt_000020.ssck", d + "/cgan/ckpt_000020.ssck", "--data",
              d + "/data/manifest.json", "--out", d + "/probe"}) == 0;
}

std::vector<std::pair<std::string, std::string>> checkpoint_hashes(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const char* run : {"cgan", "gan"}) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / run))
      if (e.path().extension() == ".ssck") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.emplace_back(std::string(run) + "/" + f.filename().string(), sha256_file(f));
  }
  return out;
}

Outcome criterion_determinism(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path a = work / "pipeline_a", b = work / "pipeline_b";
  if (!run_pipeline(a) || !run_pipeline(b)) return {false, "pipeline run failed"};
  const auto ha = checkpoint_hashes(a), hb = checkpoint_hashes(b);
  const std::string ca = read_bytes(a / "probe" / "curve.csv"), cb = read_bytes(b / "probe" / "curve.csv");
  const bool same_ckpt = !ha.empty() && ha == hb;
  const bool same_curve = !ca.empty() && ca == cb;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {same_ckpt && same_curve,
          fmt("two CLI pipelines (gen-data, train cGAN-GL and GAN-GL 20 steps, probe): %zu checkpoint hashes %s, "
              "curve.csv %s (sha256 %.12s); %.0f s",
              ha.size(), same_ckpt ? "identical" : "DIFFER", same_curve ? "identical" : "DIFFERS",
              sha256_hex({reinterpret_cast<const std::uint8_t*>(ca.data()), ca.size()}).c_str(), seconds)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
  fs::remove_all(work);
  fs::create_directories(work);

  int failed = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail
              << fmt(" (%.1f s)", s) << std::endl;
  };

  report(1, "loss oracle equivalence", criterion_loss_oracles);
  report(2, "gradient correctness", criterion_gradients);
  report(3, "shape fidelity", criterion_shapes);
  report(4, "invariant suites", criterion_invariants);

  const Dataset data = synthesize_dataset(SceneConfig{}, 0, 8, TsdfOptions{});
  std::optional<Trained> cgan, gan;
  std::string train_error;
  try {
    cgan = train_variant(data, true, work / "cgan");
    gan = train_variant(data, false, work / "gan");
  } catch (const std::exception& e) {
    train_error = e.what();
  }
  auto needs = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!cgan || !gan) return {false, "training failed: " + train_error};
      return fn();
    };
  };
  report(5, "overfit smoke test", needs([&] { return criterion_overfit(data, *cgan); }));
  report(6, "conditioning discrimination", needs([&] { return criterion_conditioning(data, *cgan, *gan); }));
  report(7, "noise probe trend", needs([&] { return criterion_probe(data, *cgan, *gan, work / "probe"); }));
  report(8, "determinism", [&] { return criterion_determinism(work); });
  return failed == 0 ? 0 : 1;
}
