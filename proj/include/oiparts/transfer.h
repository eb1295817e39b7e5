#pragma once

#include <span>
#include <string>
#include <vector>

#include "oiparts/fusion.h"
#include "oiparts/tensor_io.h"

namespace oiparts {

struct TransferConfig {
  double beta = 0.1;  // softmax temperature, must be > 0
  bool use_selection = true;
  // Output size of Finalize; 0 keeps the feature resolution.
  int upsample_height = 0;
  int upsample_width = 0;
  int threads = 1;
};

// Per-part soft predictions, every value in [0, 1].
struct ScoreField {
  int height = 0;
  int width = 0;
  std::vector<Plane> planes;
  std::vector<std::string> part_names;

  int num_parts() const { return static_cast<int>(planes.size()); }
};

// Row-major rows x cols matrix of softmax weights.
struct WeightMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  const double* row(std::size_t i) const { return values.data() + i * cols; }
};

// a[i][j] = softmax_j(cos(query_i, reference_j) / beta). Every row sums to 1.
// Zero vectors have cosine 0 with everything.
WeightMatrix SimilarityWeights(const FeatureMap& query,
                               const FeatureMap& reference, double beta);

// out[i] = sum_j a[i][j] * mask[j], clamped to [0, 1].
std::vector<float> TransferClass(const WeightMatrix& weights,
                                 std::span<const float> mask);

// Label transfer for every part. With use_selection each part matches on its
// own selected channels (per-source lists re-concatenated in layout order);
// otherwise all fused channels are used and `selection` is ignored. Weights
// are computed in fixed blocks of query rows, never as a full matrix.
ScoreField Segment(const FusedFeature& query, const FusedFeature& reference,
                   const PartMaskSet& reference_masks,
                   const SelectionRecord& selection,
                   const TransferConfig& config);

// Bilinear resize with half-pixel centers: output pixel i samples input
// coordinate (i + 0.5) * in / out - 0.5, clamped to the edges.
Plane UpsampleBilinear(const Plane& plane, int height, int width);

// Per-pixel argmax over planes, ties toward the lower part index.
LabelMap ArgmaxLabels(const ScoreField& scores);

struct FinalizedPrediction {
  LabelMap labels;
  ScoreField upsampled;
};

FinalizedPrediction Finalize(const ScoreField& scores,
                             const TransferConfig& config);

}  // namespace oiparts
