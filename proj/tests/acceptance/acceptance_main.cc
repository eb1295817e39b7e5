// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oiparts/cli.h"
#include "oiparts/eval.h"
#include "oiparts/fusion.h"
#include "oiparts/pipeline.h"
#include "oiparts/refine.h"
#include "oiparts/selection.h"
#include "oiparts/synth.h"
#include "oiparts/transfer.h"
#include "oracles.h"

namespace oiparts {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), format, a, b);
  return buf;
}

Outcome TopKOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> dims(2, 12);
  std::uniform_int_distribution<int> count(5, 40);
  int mismatches = 0;
  int checked = 0;
  for (int set = 0; set < 50; ++set) {
    const int d = dims(rng);
    const ClassPixelSet px = testing::RandomPixelSet(rng, d, count(rng), count(rng));
    const std::vector<double> scores = ChannelScores(px, SelectionMetric::kVariance);
    std::uniform_int_distribution<int> kd(1, std::min(d, 6));
    const int k = kd(rng);
    ++checked;
    if (SelectTopK(scores, k, RankDirection::kLowest) !=
        testing::BruteForceBestSubset(px, k)) {
      ++mismatches;
    }
  }
  const double secs = Seconds(start);
  return {mismatches == 0 && secs < 10.0,
          std::to_string(checked - mismatches) + "/" + std::to_string(checked) +
              " exact, " + Fmt("%.2f s", secs)};
}

Outcome SweepOracle() {
  int matches = 0;
  int total = 0;
  std::vector<int> grid(12);
  std::iota(grid.begin(), grid.end(), 1);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sets = testing::SynthPixelSets(seed, 12, 3, 4, 24);
    // One part per fixture keeps the exhaustive search affordable while
    // still visiting every part across the seeds.
    const ClassPixelSet& px = sets[seed % sets.size()];
    const SweepResult r = SweepK(px, grid, SelectionMetric::kVariance);
    const testing::OracleSweep o = testing::BruteForceSweep(px, grid);
    ++total;
    if (r.chosen_k == o.k && r.channels == o.channels) ++matches;
  }
  return {matches == total,
          std::to_string(matches) + "/" + std::to_string(total) + " exact"};
}

Outcome TransferNormalization() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> side(3, 12);
  std::uniform_int_distribution<int> dims(1, 24);
  std::uniform_real_distribution<double> log_beta(-2.5, 0.5);
  double worst_sum = 0.0;
  bool in_range = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int h = side(rng), w = side(rng);
    const FeatureMap sd = testing::RandomFeatureMap(rng, h, w, dims(rng), FeatureSource::kSd);
    const FeatureMap dino =
        testing::RandomFeatureMap(rng, h, w, dims(rng), FeatureSource::kDino);
    const FusedFeature ref = Fuse(sd, dino);
    const FusedFeature query =
        Fuse(testing::RandomFeatureMap(rng, h, w, sd.channels, FeatureSource::kSd),
             testing::RandomFeatureMap(rng, h, w, dino.channels, FeatureSource::kDino));
    const double beta = std::pow(10.0, log_beta(rng));
    const WeightMatrix wm = SimilarityWeights(query.map, ref.map, beta);
    for (std::size_t i = 0; i < wm.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < wm.cols; ++j) {
        if (wm.row(i)[j] < 0.0) in_range = false;
        s += wm.row(i)[j];
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    LabelMap lm;
    lm.height = h;
    lm.width = w;
    const int c = 2 + trial % 4;
    for (int i = 0; i < h * w; ++i) lm.labels.push_back(static_cast<std::uint8_t>(i % c));
    for (int i = 0; i < c; ++i) lm.part_names.push_back("p" + std::to_string(i));
    const PartMaskSet masks = MaskSetFromLabels(lm);
    const SelectionRecord sel = SelectForExample(ref, masks, SelectionConfig{});
    TransferConfig cfg;
    cfg.beta = beta;
    cfg.use_selection = trial % 2 == 0;
    const ScoreField f = Segment(query, ref, masks, sel, cfg);
    for (const Plane& p : f.planes) {
      for (float v : p.data) {
        if (!(v >= 0.0f && v <= 1.0f)) in_range = false;
      }
    }
  }
  return {worst_sum <= 1e-6 && in_range,
          Fmt("max |row sum - 1| = %.2e", worst_sum) +
              (in_range ? ", scores in [0,1]" : ", score out of range")};
}

Outcome NearestNeighborLimit() {
  SynthSpec spec;
  spec.seed = 2024;
  spec.height = spec.width = 60;
  spec.sd = {24, 0};
  spec.dino = {40, 0};
  spec.noise_sigma = 0.0;
  spec.upscale = 1;
  const SynthFixture fx = GenerateFixture(spec);
  const auto start = Clock::now();
  PipelineConfig cfg;
  cfg.transfer.beta = 0.01;
  cfg.use_fbs = false;
  const SegmentationResult r =
      RunSegmentation(fx.reference_sd, fx.reference_dino,
                      MaskSetFromLabels(fx.reference_labels), fx.query_sd,
                      fx.query_dino, fx.query_image, nullptr, cfg);
  const double secs = Seconds(start);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < r.labels.labels.size(); ++i) {
    wrong += r.labels.labels[i] != fx.query_labels.labels[i];
  }
  return {wrong == 0 && secs < 5.0,
          std::to_string(wrong) + " mismatched pixels at 60x60x64, " +
              Fmt("%.2f s", secs)};
}

double DistractorMiou(std::uint64_t seed, bool use_selection) {
  SynthSpec spec;
  spec.seed = seed;
  spec.sd = {24, 6};
  spec.dino = {40, 10};
  spec.noise_sigma = 0.05;
  spec.upscale = 1;
  const SynthFixture fx = GenerateFixture(spec);
  PipelineConfig cfg;
  cfg.use_fbs = false;
  cfg.transfer.use_selection = use_selection;
  const SegmentationResult r =
      RunSegmentation(fx.reference_sd, fx.reference_dino,
                      MaskSetFromLabels(fx.reference_labels), fx.query_sd,
                      fx.query_dino, fx.query_image, nullptr, cfg);
  ConfusionMatrix cm(spec.num_parts);
  Accumulate(cm, fx.query_labels, r.labels);
  return *ComputeIouReport(cm, fx.part_names).miou;
}

Outcome SelectionHelps() {
  double with = 0.0, without = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    with += DistractorMiou(seed, true);
    without += DistractorMiou(seed, false);
  }
  with /= 5.0;
  without /= 5.0;
  return {with >= without,
          Fmt("mean mIoU %.4f with selection vs %.4f without", with, without)};
}

Outcome FbsOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(99);
  double worst = 0.0;
  int pairs = 0;
  for (int size : {8, 16}) {
    for (int trial = 0; trial < 10; ++trial) {
      SolverConfig cfg;
      cfg.sigma_spatial = 2.0 + trial % 4;
      cfg.sigma_luma = cfg.sigma_chroma = 24.0 + 8.0 * (trial % 3);
      cfg.lambda = trial % 2 == 0 ? 128.0 : 4.0;
      cfg.cg_max_iters = 500;
      cfg.cg_tol = 1e-10;
      const ImageRGB img = testing::RandomImage(rng, size, size);
      const Plane t = testing::RandomPlane(rng, size, size, 0.0f, 1.0f);
      const Plane c = testing::RandomPlane(rng, size, size, 0.1f, 1.0f);
      const Plane x = Solve(BilateralGrid::Build(img, cfg), t, c, cfg);
      const Plane ref = testing::DenseFbsSolve(img, t, c, cfg);
      for (std::size_t i = 0; i < x.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(x.data[i]) - ref.data[i]));
      }
      ++pairs;
    }
  }
  const double secs = Seconds(start);
  return {worst <= 1e-4 && secs < 5.0,
          std::to_string(pairs) + " pairs, " +
              Fmt("max-abs %.2e, %.2f s", worst, secs)};
}

Outcome FbsLimits() {
  std::mt19937_64 rng(5);
  bool identity = true;
  double worst_const = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 6 + trial, w = 9 + 2 * trial;
    const ImageRGB img = testing::RandomImage(rng, h, w);
    SolverConfig zero;
    zero.lambda = 0.0;
    const Plane t = testing::RandomPlane(rng, h, w, 0.0f, 1.0f);
    Plane c = testing::RandomPlane(rng, h, w, 0.0f, 2.0f);
    for (std::size_t i = 0; i < c.size(); i += 3) c.data[i] = 0.0f;
    const Plane x = Solve(BilateralGrid::Build(img, zero), t, c, zero);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (c.data[i] > 0.0f && x.data[i] != t.data[i]) identity = false;
    }
    SolverConfig cfg;
    cfg.sigma_spatial = 2.0 + trial;
    cfg.lambda = std::pow(10.0, trial % 5);
    const float v = static_cast<float>(trial) / 9.0f;
    const Plane k =
        Solve(BilateralGrid::Build(img, cfg), Plane(h, w, v), Plane(h, w, 1.0f), cfg);
    for (float o : k.data) worst_const = std::max(worst_const, std::abs(double(o) - v));
  }
  return {identity && worst_const <= 1e-6,
          std::string(identity ? "lambda=0 exact" : "lambda=0 differs") +
              Fmt(", constant drift %.1e", worst_const)};
}

Outcome EvaluationOracle() {
  bool ok = true;
  auto labels = [](std::vector<std::uint8_t> v, int h, int w, int c) {
    LabelMap lm;
    lm.height = h;
    lm.width = w;
    lm.labels = std::move(v);
    for (int i = 0; i < c; ++i) lm.part_names.push_back("p" + std::to_string(i));
    return lm;
  };
  {
    ConfusionMatrix cm(2);
    Accumulate(cm, labels({1, 1, 0, 0}, 1, 4, 2), labels({0, 1, 1, 0}, 1, 4, 2));
    const IouReport r = ComputeIouReport(cm, {"BG", "part"});
    ok &= *r.parts[1].iou == 1.0 / 3.0 && *r.miou == 1.0 / 3.0;
  }
  {
    ConfusionMatrix cm(3);
    const std::uint64_t m[3][3] = {{50, 5, 0}, {10, 20, 10}, {0, 0, 5}};
    for (int g = 0; g < 3; ++g) {
      for (int p = 0; p < 3; ++p) cm.at(g, p) = m[g][p];
    }
    const IouReport r = ComputeIouReport(cm, {"a", "b", "c"});
    ok &= *r.parts[0].iou == 50.0 / 65.0;
    ok &= *r.parts[1].iou == 20.0 / 45.0;
    ok &= *r.parts[2].iou == 5.0 / 15.0;
    ok &= *r.miou == (50.0 / 65.0 + 20.0 / 45.0 + 5.0 / 15.0) / 3.0;
  }
  {
    ConfusionMatrix cm(3);
    const LabelMap gt = labels({0, 1, 1, 0}, 2, 2, 3);
    Accumulate(cm, gt, gt);
    const IouReport r = ComputeIouReport(cm, {"a", "b", "c"});
    ok &= *r.parts[0].iou == 1.0 && *r.parts[1].iou == 1.0;
    ok &= !r.parts[2].iou.has_value() && *r.miou == 1.0;
  }
  return {ok, "1/3 overlap, 3x3 hand matrix, excluded part"};
}

int RunTool(const std::vector<std::string>& args) {
  std::string cmd = OIPARTS_BINARY;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

Outcome CliDeterminism() {
  testing::TempDir dir("accept_det");
  const std::string fx = (dir / "fx").string();
  if (RunTool({"synth", "--seed", "31", "--height", "24", "--width", "24",
               "--upscale", "3", "--noise", "0.1", "--sd-distractors", "6",
               "--dino-distractors", "10", "--out-dir", fx}) != 0) {
    return {false, "synth failed"};
  }
  const std::vector<std::string> files{"labels.npy", "scores.npy", "overlay.ppm",
                                       "selection.json"};
  std::vector<std::vector<std::uint8_t>> first;
  int runs = 0;
  int differing = 0;
  for (const char* threads : {"1", "4", "8", "8"}) {
    const std::string out = (dir / ("run" + std::to_string(runs))).string();
    const int code = RunTool(
        {"segment", "--ref-sd", fx + "/ref_sd.npy", "--ref-dino", fx + "/ref_dino.npy",
         "--ref-labels", fx + "/ref_labels.npy", "--names", fx + "/names.json",
         "--query-sd", fx + "/query_sd.npy", "--query-dino", fx + "/query_dino.npy",
         "--query-image", fx + "/query.ppm", "--out-dir", out, "--threads", threads});
    if (code != 0) return {false, "segment exited " + std::to_string(code)};
    for (std::size_t f = 0; f < files.size(); ++f) {
      const auto bytes = testing::ReadBytes(fs::path(out) / files[f]);
      if (runs == 0) {
        first.push_back(bytes);
      } else if (bytes != first[f]) {
        ++differing;
      }
    }
    ++runs;
  }
  return {differing == 0, "threads 1/4/8 plus a repeat run, " +
                              std::to_string(differing) + " differing outputs"};
}

Outcome RoundTrips() {
  testing::TempDir dir("accept_rt");
  std::mt19937_64 rng(8);
  bool ok = true;
  const FeatureMap t = testing::RandomFeatureMap(rng, 60, 60, 768, FeatureSource::kSd);
  WriteTensor(t, dir / "t1.npy");
  WriteTensor(ReadTensor(dir / "t1.npy", FeatureSource::kSd), dir / "t2.npy");
  ok &= testing::ReadBytes(dir / "t1.npy") == testing::ReadBytes(dir / "t2.npy");

  WritePlaneStack({testing::RandomPlane(rng, 9, 7, 0, 1), testing::RandomPlane(rng, 9, 7, 0, 1)},
                  dir / "s1.npy");
  WritePlaneStack(ReadPlaneStack(dir / "s1.npy"), dir / "s2.npy");
  ok &= testing::ReadBytes(dir / "s1.npy") == testing::ReadBytes(dir / "s2.npy");

  WriteImage(testing::RandomImage(rng, 33, 17), dir / "i1.ppm");
  WriteImage(ReadImage(dir / "i1.ppm"), dir / "i2.ppm");
  ok &= testing::ReadBytes(dir / "i1.ppm") == testing::ReadBytes(dir / "i2.ppm");

  SynthSpec spec;
  spec.height = spec.width = 20;
  spec.upscale = 1;
  const SynthFixture fx = GenerateFixture(spec);
  WriteSelection(ComputeSelection(fx.reference_sd, fx.reference_dino,
                                  MaskSetFromLabels(fx.reference_labels), SelectionConfig{}),
                 dir / "j1.json");
  WriteSelection(ReadSelection(dir / "j1.json"), dir / "j2.json");
  ok &= testing::ReadBytes(dir / "j1.json") == testing::ReadBytes(dir / "j2.json");
  return {ok, "tensor 60x60x768, plane stack, PPM, selection JSON"};
}

}  // namespace
}  // namespace oiparts

int main() {
  using oiparts::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"channel-selection oracle", oiparts::TopKOracle},
      {"k-sweep oracle", oiparts::SweepOracle},
      {"transfer normalization", oiparts::TransferNormalization},
      {"nearest-neighbor limit", oiparts::NearestNeighborLimit},
      {"selection helps under distractors", oiparts::SelectionHelps},
      {"fbs dense oracle", oiparts::FbsOracle},
      {"fbs limits", oiparts::FbsLimits},
      {"evaluation oracle", oiparts::EvaluationOracle},
      {"segment determinism", oiparts::CliDeterminism},
      {"file round-trip", oiparts::RoundTrips},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-36s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str());
    failures += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
