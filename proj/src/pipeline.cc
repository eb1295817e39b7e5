#include "oiparts/pipeline.h"

#include <chrono>

#include "oiparts/errors.h"
#include "oiparts/synth.h"

namespace oiparts {
namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>* sink) : sink_(sink) {}

  void Mark(std::string stage) {
    const auto now = std::chrono::steady_clock::now();
    sink_->push_back(
        {std::move(stage),
         std::chrono::duration<double, std::milli>(now - last_).count()});
    last_ = now;
  }

 private:
  std::vector<StageTiming>* sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

void PipelineConfig::SetThreads(int threads) {
  selection.threads = threads;
  transfer.threads = threads;
  solver.threads = threads;
}

SelectionRecord ComputeSelection(const FeatureMap& reference_sd,
                                 const FeatureMap& reference_dino,
                                 const PartMaskSet& reference_masks,
                                 const SelectionConfig& config,
                                 std::vector<std::string>* warnings) {
  const FusedFeature fused = Fuse(reference_sd, reference_dino);
  const PartMaskSet masks = DownsampleMask(
      reference_masks, fused.map.height, fused.map.width, warnings);
  return SelectForExample(fused, masks, config, warnings);
}

SegmentationResult RunSegmentation(const FeatureMap& reference_sd,
                                   const FeatureMap& reference_dino,
                                   const PartMaskSet& reference_masks,
                                   const FeatureMap& query_sd,
                                   const FeatureMap& query_dino,
                                   const ImageRGB& query_image,
                                   const SelectionRecord* preset_selection,
                                   const PipelineConfig& config) {
  SegmentationResult result;
  StageClock clock(&result.timings);

  const FusedFeature reference = Fuse(reference_sd, reference_dino);
  const FusedFeature query = Fuse(query_sd, query_dino);
  const PartMaskSet masks =
      DownsampleMask(reference_masks, reference.map.height,
                     reference.map.width, &result.warnings);
  clock.Mark("fuse");

  if (preset_selection != nullptr) {
    result.selection = *preset_selection;
  } else if (config.transfer.use_selection) {
    result.selection =
        SelectForExample(reference, masks, config.selection, &result.warnings);
  } else {
    result.selection.metric = config.selection.metric;
  }
  clock.Mark("select");

  result.coarse = Segment(query, reference, masks, result.selection,
                          config.transfer);
  clock.Mark("transfer");

  TransferConfig finalize = config.transfer;
  finalize.upsample_height = query_image.height;
  finalize.upsample_width = query_image.width;
  FinalizedPrediction upsampled = Finalize(result.coarse, finalize);
  clock.Mark("upsample");

  if (config.use_fbs) {
    RefinedPrediction refined =
        RefineScores(upsampled.upsampled, query_image, config.solver);
    result.scores = std::move(refined.scores);
    result.labels = std::move(refined.labels);
    result.solve_reports = std::move(refined.reports);
    result.converged = refined.converged;
    if (!result.converged) {
      result.warnings.push_back(
          "bilateral solver stopped before reaching cg_tol");
    }
    clock.Mark("refine");
  } else {
    result.scores = std::move(upsampled.upsampled);
    result.labels = std::move(upsampled.labels);
  }
  return result;
}

ImageRGB RenderOverlay(const ImageRGB& image, const LabelMap& labels) {
  if (image.height != labels.height || image.width != labels.width) {
    throw ShapeError("overlay image and label map sizes differ");
  }
  ImageRGB out = image;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const auto color = PaletteColor(labels.labels[i]);
    for (int ch = 0; ch < 3; ++ch) {
      out.data[3 * i + ch] = static_cast<std::uint8_t>(
          (static_cast<int>(image.data[3 * i + ch]) + color[ch]) / 2);
    }
  }
  return out;
}

}  // namespace oiparts
