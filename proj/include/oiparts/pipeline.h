#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oiparts/fusion.h"
#include "oiparts/refine.h"
#include "oiparts/selection.h"
#include "oiparts/tensor_io.h"
#include "oiparts/transfer.h"

namespace oiparts {

struct PipelineConfig {
  SelectionConfig selection;
  TransferConfig transfer;
  SolverConfig solver;
  bool use_fbs = true;

  // Propagates one thread count to every stage.
  void SetThreads(int threads);
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

// Fuses the reference features, brings the full-resolution masks to feature
// resolution, and runs per-part per-source channel selection.
SelectionRecord ComputeSelection(const FeatureMap& reference_sd,
                                 const FeatureMap& reference_dino,
                                 const PartMaskSet& reference_masks,
                                 const SelectionConfig& config,
                                 std::vector<std::string>* warnings = nullptr);

struct SegmentationResult {
  SelectionRecord selection;
  ScoreField coarse;        // feature resolution
  ScoreField scores;        // output resolution, refined when FBS ran
  LabelMap labels;          // output resolution
  std::vector<SolveReport> solve_reports;
  bool converged = true;
  std::vector<std::string> warnings;
  std::vector<StageTiming> timings;
};

// fuse -> (given or computed) selection -> transfer -> upsample -> optional
// FBS -> argmax. The output size is the query image size; FBS uses the query
// image as its guide.
SegmentationResult RunSegmentation(const FeatureMap& reference_sd,
                                   const FeatureMap& reference_dino,
                                   const PartMaskSet& reference_masks,
                                   const FeatureMap& query_sd,
                                   const FeatureMap& query_dino,
                                   const ImageRGB& query_image,
                                   const SelectionRecord* preset_selection,
                                   const PipelineConfig& config);

// 50% blend of the fixed palette over the image.
ImageRGB RenderOverlay(const ImageRGB& image, const LabelMap& labels);

}  // namespace oiparts
