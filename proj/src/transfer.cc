#include "oiparts/transfer.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "oiparts/errors.h"
#include "oiparts/parallel.h"

namespace oiparts {
namespace {

// Query rows per similarity block. Fixed so that every row is computed by
// the same kernel call no matter how many threads run.
constexpr std::size_t kBlockRows = 64;

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Gathers `channels` of every pixel into a matrix of unit rows.
RowMatrix UnitRows(const FeatureMap& features, std::span<const int> channels) {
  RowMatrix out(static_cast<Eigen::Index>(features.num_pixels()),
                static_cast<Eigen::Index>(channels.size()));
  for (std::size_t p = 0; p < features.num_pixels(); ++p) {
    const float* src = features.pixel(p);
    double sq = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const double v = src[channels[k]];
      sq += v * v;
    }
    const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) =
          static_cast<float>(src[channels[k]] * inv);
    }
  }
  return out;
}

// Softmax of cosines / beta into `weights` (size = cosines.size()).
void SoftmaxRow(const float* cosines, std::size_t n, double beta,
                double* weights) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, cosines[j] / beta);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    weights[j] = std::exp(cosines[j] / beta - peak);
    total += weights[j];
  }
  for (std::size_t j = 0; j < n; ++j) weights[j] /= total;
}

float Blend(const double* weights, std::span<const float> mask) {
  double acc = 0.0;
  for (std::size_t j = 0; j < mask.size(); ++j) acc += weights[j] * mask[j];
  return static_cast<float>(std::clamp(acc, 0.0, 1.0));
}

std::vector<int> AllChannels(int n) {
  std::vector<int> channels(n);
  for (int j = 0; j < n; ++j) channels[j] = j;
  return channels;
}

// Channels of the fused layout used for one part.
std::vector<int> PartChannels(const FusedFeature& fused,
                              const PartSelection& part) {
  std::vector<int> channels;
  for (const ChannelSpan& span : fused.layout) {
    const SourceSelection* match = nullptr;
    for (const SourceSelection& s : part.per_source) {
      if (s.source == span.source) match = &s;
    }
    if (match == nullptr) continue;
    for (int c : match->channels) {
      if (c < 0 || c >= span.length) {
        throw ValidationError(
            "selection for part '" + part.name + "' references " +
            std::string(FeatureSourceName(span.source)) + " channel " +
            std::to_string(c) + " but the span has " +
            std::to_string(span.length) + " channels");
      }
      channels.push_back(span.offset + c);
    }
  }
  for (const SourceSelection& s : part.per_source) {
    bool known = false;
    for (const ChannelSpan& span : fused.layout) known |= span.source == s.source;
    if (!known) {
      throw ValidationError("selection for part '" + part.name +
                            "' names source '" +
                            std::string(FeatureSourceName(s.source)) +
                            "' missing from the fused layout");
    }
  }
  if (channels.empty()) {
    throw ValidationError("selection for part '" + part.name +
                          "' selects no channels");
  }
  return channels;
}

}  // namespace

WeightMatrix SimilarityWeights(const FeatureMap& query,
                               const FeatureMap& reference, double beta) {
  if (query.channels != reference.channels) {
    throw ShapeError("query has " + std::to_string(query.channels) +
                     " channels, reference has " +
                     std::to_string(reference.channels));
  }
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  const std::vector<int> channels = AllChannels(query.channels);
  const RowMatrix q = UnitRows(query, channels);
  const RowMatrix r = UnitRows(reference, channels);
  WeightMatrix out;
  out.rows = query.num_pixels();
  out.cols = reference.num_pixels();
  out.values.resize(out.rows * out.cols);
  const RowMatrix cosines = q * r.transpose();
  for (std::size_t i = 0; i < out.rows; ++i) {
    SoftmaxRow(cosines.row(static_cast<Eigen::Index>(i)).data(), out.cols, beta,
               out.values.data() + i * out.cols);
  }
  return out;
}

std::vector<float> TransferClass(const WeightMatrix& weights,
                                 std::span<const float> mask) {
  if (mask.size() != weights.cols) {
    throw ShapeError("mask has " + std::to_string(mask.size()) +
                     " values but weights have " +
                     std::to_string(weights.cols) + " columns");
  }
  std::vector<float> out(weights.rows);
  for (std::size_t i = 0; i < weights.rows; ++i) {
    out[i] = Blend(weights.row(i), mask);
  }
  return out;
}

ScoreField Segment(const FusedFeature& query, const FusedFeature& reference,
                   const PartMaskSet& reference_masks,
                   const SelectionRecord& selection,
                   const TransferConfig& config) {
  if (!(config.beta > 0.0)) throw ValidationError("beta must be positive");
  if (query.map.channels != reference.map.channels ||
      query.layout.size() != reference.layout.size()) {
    throw ShapeError("query and reference fused layouts differ");
  }
  for (std::size_t s = 0; s < query.layout.size(); ++s) {
    if (query.layout[s].source != reference.layout[s].source ||
        query.layout[s].length != reference.layout[s].length) {
      throw ShapeError("query and reference fused layouts differ");
    }
  }
  if (reference_masks.height != reference.map.height ||
      reference_masks.width != reference.map.width) {
    throw ShapeError("reference masks are not at feature resolution");
  }
  const int num_parts = reference_masks.num_parts();
  const std::size_t n_ref = reference.map.num_pixels();
  const std::size_t n_query = query.map.num_pixels();

  // One channel group per part, or a single shared group without selection.
  std::vector<std::vector<int>> groups;
  if (config.use_selection) {
    if (static_cast<int>(selection.parts.size()) != num_parts) {
      throw ValidationError("selection record has " +
                            std::to_string(selection.parts.size()) +
                            " parts but the reference mask has " +
                            std::to_string(num_parts));
    }
    for (int c = 0; c < num_parts; ++c) {
      groups.push_back(PartChannels(reference, selection.parts[c]));
    }
  } else {
    groups.push_back(AllChannels(reference.map.channels));
  }

  ScoreField field;
  field.height = query.map.height;
  field.width = query.map.width;
  field.part_names = reference_masks.part_names;
  field.planes.assign(num_parts, Plane(field.height, field.width));

  const std::size_t num_blocks = (n_query + kBlockRows - 1) / kBlockRows;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const RowMatrix q = UnitRows(query.map, groups[g]);
    const RowMatrix r = UnitRows(reference.map, groups[g]);
    std::vector<int> parts;
    if (config.use_selection) {
      parts.push_back(static_cast<int>(g));
    } else {
      for (int c = 0; c < num_parts; ++c) parts.push_back(c);
    }
    ParallelFor(num_blocks, config.threads, [&](std::size_t b) {
      const std::size_t begin = b * kBlockRows;
      const std::size_t rows = std::min(kBlockRows, n_query - begin);
      const RowMatrix cosines =
          q.middleRows(static_cast<Eigen::Index>(begin),
                       static_cast<Eigen::Index>(rows)) *
          r.transpose();
      std::vector<double> weights(n_ref);
      for (std::size_t i = 0; i < rows; ++i) {
        SoftmaxRow(cosines.row(static_cast<Eigen::Index>(i)).data(), n_ref,
                   config.beta, weights.data());
        for (int c : parts) {
          field.planes[c].data[begin + i] =
              Blend(weights.data(), reference_masks.masks[c].data);
        }
      }
    });
  }
  return field;
}

Plane UpsampleBilinear(const Plane& plane, int height, int width) {
  Plane out(height, width);
  const double sy = static_cast<double>(plane.height) / height;
  const double sx = static_cast<double>(plane.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(plane.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, plane.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(plane.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, plane.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * plane.at(y0, x0) + wx * plane.at(y0, x1);
      const double bottom =
          (1.0 - wx) * plane.at(y1, x0) + wx * plane.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

LabelMap ArgmaxLabels(const ScoreField& scores) {
  if (scores.num_parts() > 256) {
    throw ValidationError("label maps hold at most 256 parts");
  }
  LabelMap labels;
  labels.height = scores.height;
  labels.width = scores.width;
  labels.part_names = scores.part_names;
  const std::size_t n = static_cast<std::size_t>(scores.height) * scores.width;
  labels.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    float best = scores.planes.empty() ? 0.0f : scores.planes[0].data[i];
    for (int c = 1; c < scores.num_parts(); ++c) {
      if (scores.planes[c].data[i] > best) {
        best = scores.planes[c].data[i];
        labels.labels[i] = static_cast<std::uint8_t>(c);
      }
    }
  }
  return labels;
}

FinalizedPrediction Finalize(const ScoreField& scores,
                             const TransferConfig& config) {
  const int h = config.upsample_height > 0 ? config.upsample_height
                                           : scores.height;
  const int w = config.upsample_width > 0 ? config.upsample_width
                                          : scores.width;
  if (h < scores.height || w < scores.width) {
    throw ValidationError("upsample target is smaller than the score field");
  }
  FinalizedPrediction out;
  out.upsampled.height = h;
  out.upsampled.width = w;
  out.upsampled.part_names = scores.part_names;
  out.upsampled.planes.resize(scores.num_parts());
  ParallelFor(scores.planes.size(), config.threads, [&](std::size_t c) {
    out.upsampled.planes[c] = UpsampleBilinear(scores.planes[c], h, w);
  });
  out.labels = ArgmaxLabels(out.upsampled);
  return out;
}

}  // namespace oiparts
