#include "oiparts/cli.h"

#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oiparts/errors.h"
#include "oiparts/eval.h"
#include "oiparts/parallel.h"
#include "oiparts/pipeline.h"
#include "oiparts/synth.h"

namespace oiparts {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct ReferenceArgs {
  std::string sd;
  std::string dino;
  std::string labels;
  std::string names;
};

struct SelectionArgs {
  std::string metric = "variance";
  std::vector<int> k_grid;
};

void AddReferenceOptions(CLI::App* cmd, ReferenceArgs& args) {
  cmd->add_option("--ref-sd", args.sd, "Reference SD features (H',W',D) NPY")
      ->required();
  cmd->add_option("--ref-dino", args.dino,
                  "Reference DINO features (H',W',D) NPY")
      ->required();
  cmd->add_option("--ref-labels", args.labels,
                  "Reference label map, uint8 (H,W) NPY")
      ->required();
  cmd->add_option("--names", args.names, "Part names JSON array")->required();
}

void AddSelectionOptions(CLI::App* cmd, SelectionArgs& args) {
  cmd->add_option("--metric", args.metric,
                  "Channel score: variance, cosine, kl, js")
      ->capture_default_str();
  cmd->add_option("--k-grid", args.k_grid,
                  "Comma-separated K values (default: powers of two + D)")
      ->delimiter(',');
}

void AddSolverOptions(CLI::App* cmd, SolverConfig& solver) {
  cmd->add_option("--sigma-spatial", solver.sigma_spatial)->capture_default_str();
  cmd->add_option("--sigma-luma", solver.sigma_luma)->capture_default_str();
  cmd->add_option("--sigma-chroma", solver.sigma_chroma)->capture_default_str();
  cmd->add_option("--lambda", solver.lambda)->capture_default_str();
  cmd->add_option("--cg-max-iters", solver.cg_max_iters)->capture_default_str();
  cmd->add_option("--cg-tol", solver.cg_tol)->capture_default_str();
  cmd->add_option("--bistoch-iters", solver.bistoch_iters)->capture_default_str();
}

SelectionConfig ToSelectionConfig(const SelectionArgs& args, int threads) {
  SelectionConfig config;
  config.metric = ParseSelectionMetric(args.metric);
  config.k_grid = args.k_grid;
  config.threads = threads;
  return config;
}

Json SolverJson(const SolverConfig& s) {
  Json j;
  j["sigma_spatial"] = s.sigma_spatial;
  j["sigma_luma"] = s.sigma_luma;
  j["sigma_chroma"] = s.sigma_chroma;
  j["lambda"] = s.lambda;
  j["cg_max_iters"] = s.cg_max_iters;
  j["cg_tol"] = s.cg_tol;
  j["bistoch_iters"] = s.bistoch_iters;
  return j;
}

Json SelectionConfigJson(const SelectionConfig& s) {
  Json j;
  j["metric"] = SelectionMetricName(s.metric);
  j["k_grid"] = s.k_grid.empty() ? Json("default") : Json(s.k_grid);
  return j;
}

Json TimingsJson(const std::vector<StageTiming>& timings) {
  Json j = Json::object();
  for (const StageTiming& t : timings) j[t.stage] = t.milliseconds;
  return j;
}

Json ManifestBase(const std::string& command, int threads) {
  Json j;
  j["tool"] = "oiparts";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["threads"] = threads;
  return j;
}

void WriteJson(const fs::path& path, const Json& doc) {
  WriteTextFile(path, doc.dump(2) + "\n");
}

void EnsureDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + dir.string() +
                  "': " + ec.message());
  }
}

fs::path SiblingManifest(const fs::path& output) {
  return output.parent_path() / (output.stem().string() + ".manifest.json");
}

void PrintWarnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const std::string& w : warnings) err << "warning: " << w << "\n";
}

// --- select -------------------------------------------------------------

struct SelectCommand {
  ReferenceArgs reference;
  SelectionArgs selection;
  std::string out;
  int threads = 0;

  int Run(std::ostream& out_stream, std::ostream& err) const {
    (void)out_stream;
    const SelectionConfig config = ToSelectionConfig(selection, threads);
    const FeatureMap sd = ReadTensor(reference.sd, FeatureSource::kSd);
    const FeatureMap dino = ReadTensor(reference.dino, FeatureSource::kDino);
    const PartMaskSet masks = LoadMaskSet(reference.labels, reference.names);

    std::vector<std::string> warnings;
    const auto start = std::chrono::steady_clock::now();
    const SelectionRecord record =
        ComputeSelection(sd, dino, masks, config, &warnings);
    const double elapsed = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    PrintWarnings(warnings, err);

    const fs::path out_path(out);
    if (out_path.has_parent_path()) EnsureDirectory(out_path.parent_path());
    WriteSelection(record, out_path);

    Json manifest = ManifestBase("select", threads);
    manifest["config"] = SelectionConfigJson(config);
    manifest["inputs"] = {{"ref_sd", reference.sd},
                          {"ref_dino", reference.dino},
                          {"ref_labels", reference.labels},
                          {"names", reference.names}};
    manifest["outputs"] = {{"selection", out}};
    manifest["warnings"] = warnings;
    manifest["timings_ms"] = {{"select", elapsed}};
    WriteJson(SiblingManifest(out_path), manifest);
    return kExitOk;
  }
};

// --- segment ------------------------------------------------------------

struct SegmentCommand {
  ReferenceArgs reference;
  SelectionArgs selection;
  std::string query_sd;
  std::string query_dino;
  std::string query_image;
  std::string out_dir;
  std::string selection_in;
  std::string selection_out;
  double beta = 0.1;
  bool no_selection = false;
  bool no_fbs = false;
  bool strict = false;
  SolverConfig solver;
  int threads = 0;

  int Run(std::ostream& out_stream, std::ostream& err) const {
    (void)out_stream;
    PipelineConfig config;
    config.selection = ToSelectionConfig(selection, threads);
    config.transfer.beta = beta;
    config.transfer.use_selection = !no_selection;
    config.solver = solver;
    config.use_fbs = !no_fbs;
    config.SetThreads(threads);
    config.solver.Validate();

    const FeatureMap ref_sd = ReadTensor(reference.sd, FeatureSource::kSd);
    const FeatureMap ref_dino = ReadTensor(reference.dino, FeatureSource::kDino);
    const PartMaskSet masks = LoadMaskSet(reference.labels, reference.names);
    const FeatureMap q_sd = ReadTensor(query_sd, FeatureSource::kSd);
    const FeatureMap q_dino = ReadTensor(query_dino, FeatureSource::kDino);
    const ImageRGB image = ReadImage(query_image);

    SelectionRecord preset;
    const bool have_preset = !selection_in.empty() && !no_selection;
    if (have_preset) preset = ReadSelection(selection_in);

    const SegmentationResult result =
        RunSegmentation(ref_sd, ref_dino, masks, q_sd, q_dino, image,
                        have_preset ? &preset : nullptr, config);
    PrintWarnings(result.warnings, err);

    const fs::path dir(out_dir);
    EnsureDirectory(dir);
    WriteLabels(result.labels, dir / "labels.npy");
    WritePlaneStack(result.scores.planes, dir / "scores.npy");
    WriteImage(RenderOverlay(image, result.labels), dir / "overlay.ppm");
    Json outputs = {{"labels", "labels.npy"},
                    {"scores", "scores.npy"},
                    {"overlay", "overlay.ppm"}};
    if (!no_selection) {
      WriteSelection(result.selection, dir / "selection.json");
      outputs["selection"] = "selection.json";
      if (!selection_out.empty()) {
        WriteSelection(result.selection, selection_out);
        outputs["selection_copy"] = selection_out;
      }
    }

    Json manifest = ManifestBase("segment", threads);
    Json cfg;
    cfg["beta"] = beta;
    cfg["use_selection"] = !no_selection;
    cfg["use_fbs"] = !no_fbs;
    cfg["strict"] = strict;
    cfg["selection"] = SelectionConfigJson(config.selection);
    cfg["solver"] = SolverJson(config.solver);
    cfg["output_size"] = {image.height, image.width};
    manifest["config"] = cfg;
    manifest["inputs"] = {{"ref_sd", reference.sd},
                          {"ref_dino", reference.dino},
                          {"ref_labels", reference.labels},
                          {"names", reference.names},
                          {"query_sd", query_sd},
                          {"query_dino", query_dino},
                          {"query_image", query_image},
                          {"selection_in", have_preset ? Json(selection_in)
                                                       : Json(nullptr)}};
    manifest["outputs"] = outputs;
    Json solves = Json::array();
    for (const SolveReport& r : result.solve_reports) {
      solves.push_back({{"iterations", r.iterations},
                        {"relative_residual", r.relative_residual},
                        {"converged", r.converged}});
    }
    manifest["solver_reports"] = solves;
    manifest["converged"] = result.converged;
    manifest["warnings"] = result.warnings;
    manifest["timings_ms"] = TimingsJson(result.timings);
    WriteJson(dir / "manifest.json", manifest);

    if (strict && !result.converged) {
      err << "error: bilateral solver did not converge (--strict)\n";
      return kExitNotConverged;
    }
    return kExitOk;
  }
};

// --- refine -------------------------------------------------------------

struct RefineCommand {
  std::string scores;
  std::string guide;
  std::string confidence;
  std::string out;
  bool strict = false;
  SolverConfig solver;
  int threads = 0;

  int Run(std::ostream& out_stream, std::ostream& err) const {
    (void)out_stream;
    const Plane target = ReadPlane(scores);
    const ImageRGB image = ReadImage(guide);
    if (image.height != target.height || image.width != target.width) {
      throw ShapeError("guide '" + guide + "' is " +
                       std::to_string(image.height) + "x" +
                       std::to_string(image.width) + " but scores are " +
                       std::to_string(target.height) + "x" +
                       std::to_string(target.width));
    }
    const Plane conf = confidence.empty()
                           ? Plane(target.height, target.width, 1.0f)
                           : ReadPlane(confidence);
    const auto start = std::chrono::steady_clock::now();
    const BilateralGrid grid = BilateralGrid::Build(image, solver);
    SolveReport report;
    const Plane refined = Solve(grid, target, conf, solver, &report);
    const double elapsed = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    const fs::path out_path(out);
    if (out_path.has_parent_path()) EnsureDirectory(out_path.parent_path());
    WritePlane(refined, out_path);

    Json manifest = ManifestBase("refine", threads);
    manifest["config"] = SolverJson(solver);
    manifest["inputs"] = {{"scores", scores},
                          {"guide", guide},
                          {"confidence", confidence.empty()
                                             ? Json(nullptr)
                                             : Json(confidence)}};
    manifest["outputs"] = {{"refined", out}};
    manifest["solver_report"] = {{"iterations", report.iterations},
                                 {"relative_residual", report.relative_residual},
                                 {"converged", report.converged}};
    manifest["timings_ms"] = {{"refine", elapsed}};
    WriteJson(SiblingManifest(out_path), manifest);

    if (!report.converged) {
      err << "warning: bilateral solver stopped at relative residual "
          << report.relative_residual << "\n";
      if (strict) return kExitNotConverged;
    }
    return kExitOk;
  }
};

// --- eval ---------------------------------------------------------------

std::map<std::string, fs::path> NpyByStem(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("'" + dir.string() + "' is not a directory");
  }
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".npy") {
      out[entry.path().stem().string()] = entry.path();
    }
  }
  return out;
}

struct EvalCommand {
  std::string pred_dir;
  std::string gt_dir;
  std::string names;
  std::string out_dir;

  int Run(std::ostream& out_stream, std::ostream& err) const {
    const std::vector<std::string> part_names = ReadPartNames(names);
    const auto preds = NpyByStem(pred_dir);
    const auto gts = NpyByStem(gt_dir);
    std::vector<std::string> unmatched;
    for (const auto& [stem, path] : preds) {
      if (!gts.count(stem)) unmatched.push_back("pred:" + stem);
    }
    for (const auto& [stem, path] : gts) {
      if (!preds.count(stem)) unmatched.push_back("gt:" + stem);
    }
    if (!unmatched.empty()) {
      std::string list;
      for (const std::string& s : unmatched) list += " " + s;
      err << "error: unmatched stems:" << list << "\n";
      return kExitValidation;
    }
    if (preds.empty()) {
      throw ValidationError("no .npy label maps found in '" + pred_dir + "'");
    }

    const int c = static_cast<int>(part_names.size());
    ConfusionMatrix total(c);
    Json per_image = Json::object();
    std::string per_image_csv = "image,part,iou\n";
    for (const auto& [stem, pred_path] : preds) {
      const LabelMap pred = ReadLabels(pred_path, part_names);
      const LabelMap gt = ReadLabels(gts.at(stem), part_names);
      ConfusionMatrix cm(c);
      Accumulate(cm, gt, pred);
      total += cm;
      const IouReport report = ComputeIouReport(cm, part_names);
      per_image[stem] = Json::parse(report.ToJson());
      for (const PartIou& p : report.parts) {
        per_image_csv += stem + "," + p.name + "," +
                         (p.iou ? std::to_string(*p.iou) : "NA") + "\n";
      }
      per_image_csv += stem + ",mIoU," +
                       (report.miou ? std::to_string(*report.miou) : "NA") +
                       "\n";
    }
    const IouReport aggregate = ComputeIouReport(total, part_names);

    const fs::path dir(out_dir);
    EnsureDirectory(dir);
    WriteTextFile(dir / "report.txt", aggregate.ToText());
    WriteTextFile(dir / "report.csv", aggregate.ToCsv());
    WriteTextFile(dir / "report.json", aggregate.ToJson());
    WriteTextFile(dir / "per_image.csv", per_image_csv);
    WriteJson(dir / "per_image.json", per_image);
    out_stream << aggregate.ToText();
    return kExitOk;
  }
};

// --- synth --------------------------------------------------------------

struct SynthCommand {
  SynthSpec spec;
  std::string layout = "voronoi";
  std::string out_dir;

  int Run(std::ostream& out_stream, std::ostream&) const {
    SynthSpec s = spec;
    s.layout = ParseSynthLayout(layout);
    const SynthFixture fixture = GenerateFixture(s);
    WriteFixture(fixture, out_dir);
    out_stream << "wrote fixture to " << out_dir << "\n";
    return kExitOk;
  }
};

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"One-shot part segmentation from pre-extracted features"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  int threads = DefaultThreadCount();
  app.add_option("--threads", threads,
                 "Worker threads (default: OIPARTS_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  SelectCommand select;
  CLI::App* select_cmd =
      app.add_subcommand("select", "Compute the per-part channel selection");
  AddReferenceOptions(select_cmd, select.reference);
  AddSelectionOptions(select_cmd, select.selection);
  select_cmd->add_option("--out", select.out, "Selection record JSON path")
      ->required();
  select_cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);

  SegmentCommand segment;
  CLI::App* segment_cmd =
      app.add_subcommand("segment", "Segment a query image into parts");
  AddReferenceOptions(segment_cmd, segment.reference);
  AddSelectionOptions(segment_cmd, segment.selection);
  segment_cmd->add_option("--query-sd", segment.query_sd)->required();
  segment_cmd->add_option("--query-dino", segment.query_dino)->required();
  segment_cmd->add_option("--query-image", segment.query_image,
                          "Query image (PPM/PGM); sets the output size")
      ->required();
  segment_cmd->add_option("--out-dir", segment.out_dir)->required();
  segment_cmd->add_option("--beta", segment.beta, "Softmax temperature")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  segment_cmd->add_flag("--no-selection", segment.no_selection,
                        "Match on all fused channels");
  segment_cmd->add_flag("--no-fbs", segment.no_fbs,
                        "Skip bilateral-solver refinement");
  segment_cmd->add_option("--selection-in", segment.selection_in,
                          "Reuse a stored selection record");
  segment_cmd->add_option("--selection-out", segment.selection_out,
                          "Also write the selection record here");
  segment_cmd->add_flag("--strict", segment.strict,
                        "Exit 3 if the solver does not converge");
  AddSolverOptions(segment_cmd, segment.solver);
  segment_cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);

  RefineCommand refine;
  CLI::App* refine_cmd =
      app.add_subcommand("refine", "Edge-aware refinement of one score plane");
  refine_cmd->add_option("--scores", refine.scores, "Rank-2 float32 NPY")
      ->required();
  refine_cmd->add_option("--guide", refine.guide, "Guide image (PPM/PGM)")
      ->required();
  refine_cmd->add_option("--confidence", refine.confidence,
                         "Rank-2 float32 NPY (default: all ones)");
  refine_cmd->add_option("--out", refine.out)->required();
  refine_cmd->add_flag("--strict", refine.strict);
  AddSolverOptions(refine_cmd, refine.solver);
  refine_cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);

  EvalCommand eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Per-part IoU and mIoU over label maps");
  eval_cmd->add_option("--pred-dir", eval.pred_dir)->required();
  eval_cmd->add_option("--gt-dir", eval.gt_dir)->required();
  eval_cmd->add_option("--names", eval.names)->required();
  eval_cmd->add_option("--out-dir", eval.out_dir)->required();

  SynthCommand synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Write a seeded synthetic fixture");
  synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();
  synth_cmd->add_option("--height", synth.spec.height)->capture_default_str();
  synth_cmd->add_option("--width", synth.spec.width)->capture_default_str();
  synth_cmd->add_option("--sd-channels", synth.spec.sd.channels)
      ->capture_default_str();
  synth_cmd->add_option("--dino-channels", synth.spec.dino.channels)
      ->capture_default_str();
  synth_cmd->add_option("--sd-distractors", synth.spec.sd.distractors)
      ->capture_default_str();
  synth_cmd->add_option("--dino-distractors", synth.spec.dino.distractors)
      ->capture_default_str();
  synth_cmd->add_option("--parts", synth.spec.num_parts)->capture_default_str();
  synth_cmd->add_option("--layout", synth.layout,
                        "stripes, rectangles or voronoi")
      ->capture_default_str();
  synth_cmd->add_option("--separation", synth.spec.prototype_separation,
                        "Minimum prototype angle in degrees")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise_sigma)->capture_default_str();
  synth_cmd->add_option("--distractor-scale", synth.spec.distractor_scale)
      ->capture_default_str();
  synth_cmd->add_option("--upscale", synth.spec.upscale)->capture_default_str();
  synth_cmd->add_option("--out-dir", synth.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  select.threads = segment.threads = refine.threads = threads;
  try {
    if (*select_cmd) return select.Run(out, err);
    if (*segment_cmd) return segment.Run(out, err);
    if (*refine_cmd) return refine.Run(out, err);
    if (*eval_cmd) return eval.Run(out, err);
    if (*synth_cmd) return synth.Run(out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace oiparts
