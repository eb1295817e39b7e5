#pragma once

#include <span>
#include <string>
#include <vector>

#include "oiparts/fusion.h"
#include "oiparts/tensor_io.h"

namespace oiparts {

// Feature vectors of one part (in_class) and of every other pixel
// (out_class), stored row-major with `dims` values per row.
struct ClassPixelSet {
  int part = 0;
  std::string part_name;
  int dims = 0;
  std::vector<float> in_class;
  std::vector<float> out_class;

  std::size_t in_count() const { return dims ? in_class.size() / dims : 0; }
  std::size_t out_count() const { return dims ? out_class.size() / dims : 0; }
  const float* in_row(std::size_t i) const { return in_class.data() + i * dims; }
  const float* out_row(std::size_t i) const {
    return out_class.data() + i * dims;
  }
};

// Splits the pixels of `features` by label == part.
ClassPixelSet BuildClassPixelSet(const FeatureMap& features,
                                 std::span<const int> labels, int part,
                                 std::string part_name = {});

enum class RankDirection { kLowest, kHighest };

// Variance and cosine scores are dispersions (keep the lowest); KL and JS
// are in/out separabilities (keep the highest).
RankDirection PreferredDirection(SelectionMetric metric);

// Per-channel score under `metric`.
//   variance: PopVar(in) + PopVar(out); the intra-class objective restricted
//             to one channel. An empty out-class set contributes 0.
//   kl, js:   divergence between 32-bin histograms of in- vs out-class
//             values over the channel's joint range, 1e-9 added per bin.
//   cosine:   mean over in-class values of 1 - cos(value, in-class mean),
//             taken on the 1-D channel.
std::vector<double> ChannelScores(const ClassPixelSet& pixels,
                                  SelectionMetric metric);

// The k best channels by `direction`, returned in ascending index order.
// Ties go to the lower channel index.
std::vector<int> SelectTopK(std::span<const double> scores, int k,
                            RankDirection direction);

// Full ranking (best first) with the same tie rule as SelectTopK.
std::vector<int> RankChannels(std::span<const double> scores,
                              RankDirection direction);

// Re-clusters the example into in/out using the class centers computed on
// `channels` and returns the IoU of the clustered mask against the
// in-class membership. Cosine similarity picks the nearer center (exact tie
// goes in-class); a zero center switches to Euclidean distance and sets
// *used_euclidean.
double ClusterIoU(const ClassPixelSet& pixels, std::span<const int> channels,
                  bool* used_euclidean = nullptr);

struct SweepResult {
  std::vector<int> k_values;
  std::vector<double> accuracies;
  int chosen_k = 0;
  std::vector<int> channels;
  double accuracy = 0.0;
};

// Evaluates ClusterIoU for the top-k channels at each k in k_grid and keeps
// the best, ties toward the smaller k.
SweepResult SweepK(const ClassPixelSet& pixels, std::span<const int> k_grid,
                   SelectionMetric metric,
                   std::vector<std::string>* warnings = nullptr);

// Powers of two below dims, then dims itself.
std::vector<int> DefaultKGrid(int dims);

struct SelectionConfig {
  SelectionMetric metric = SelectionMetric::kVariance;
  // Empty selects DefaultKGrid per source. Otherwise values above a source's
  // channel count are dropped for that source.
  std::vector<int> k_grid;
  int threads = 1;
};

// Runs the K-sweep for every part and every source span independently.
// `masks` must already be at the feature resolution.
SelectionRecord SelectForExample(const FusedFeature& reference,
                                 const PartMaskSet& masks,
                                 const SelectionConfig& config,
                                 std::vector<std::string>* warnings = nullptr);

}  // namespace oiparts
