#include "oiparts/selection.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numeric>

#include "oiparts/errors.h"
#include "oiparts/parallel.h"

namespace oiparts {
namespace {

constexpr int kHistogramBins = 32;
constexpr double kHistogramEpsilon = 1e-9;

// Population variance of one channel over `count` rows; 0 for an empty set.
double ChannelVariance(const float* rows, std::size_t count, int dims, int j) {
  if (count == 0) return 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < count; ++i) mean += rows[i * dims + j];
  mean /= static_cast<double>(count);
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = rows[i * dims + j] - mean;
    acc += d * d;
  }
  return acc / static_cast<double>(count);
}

using Histogram = std::array<double, kHistogramBins>;

Histogram ChannelHistogram(const float* rows, std::size_t count, int dims,
                           int j, double lo, double hi) {
  Histogram h{};
  const double width = hi - lo;
  for (std::size_t i = 0; i < count; ++i) {
    int bin = 0;
    if (width > 0.0) {
      bin = static_cast<int>((rows[i * dims + j] - lo) / width * kHistogramBins);
      bin = std::clamp(bin, 0, kHistogramBins - 1);
    }
    h[bin] += 1.0;
  }
  double total = 0.0;
  for (double& v : h) {
    v = v / static_cast<double>(std::max<std::size_t>(count, 1)) +
        kHistogramEpsilon;
    total += v;
  }
  for (double& v : h) v /= total;
  return h;
}

double KlDivergence(const Histogram& p, const Histogram& q) {
  double acc = 0.0;
  for (int b = 0; b < kHistogramBins; ++b) acc += p[b] * std::log(p[b] / q[b]);
  return acc;
}

double JsDivergence(const Histogram& p, const Histogram& q) {
  Histogram m{};
  for (int b = 0; b < kHistogramBins; ++b) m[b] = 0.5 * (p[b] + q[b]);
  return 0.5 * KlDivergence(p, m) + 0.5 * KlDivergence(q, m);
}

double DivergenceScore(const ClassPixelSet& px, int j, SelectionMetric metric) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < px.in_count(); ++i) {
    lo = std::min<double>(lo, px.in_row(i)[j]);
    hi = std::max<double>(hi, px.in_row(i)[j]);
  }
  for (std::size_t i = 0; i < px.out_count(); ++i) {
    lo = std::min<double>(lo, px.out_row(i)[j]);
    hi = std::max<double>(hi, px.out_row(i)[j]);
  }
  if (!(hi > lo) || px.out_count() == 0) return 0.0;
  const Histogram p =
      ChannelHistogram(px.in_class.data(), px.in_count(), px.dims, j, lo, hi);
  const Histogram q =
      ChannelHistogram(px.out_class.data(), px.out_count(), px.dims, j, lo, hi);
  return metric == SelectionMetric::kKl ? KlDivergence(p, q)
                                        : JsDivergence(p, q);
}

double CosineDispersion(const ClassPixelSet& px, int j) {
  const std::size_t n = px.in_count();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += px.in_row(i)[j];
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px.in_row(i)[j];
    const double denom = std::abs(v) * std::abs(mean);
    const double cosine = denom > 0.0 ? v * mean / denom : 0.0;
    acc += 1.0 - cosine;
  }
  return acc / static_cast<double>(n);
}

std::vector<double> Centroid(const std::vector<float>& rows, std::size_t count,
                             int dims, std::span<const int> channels) {
  std::vector<double> center(channels.size(), 0.0);
  if (count == 0) return center;
  for (std::size_t i = 0; i < count; ++i) {
    const float* row = rows.data() + i * dims;
    for (std::size_t k = 0; k < channels.size(); ++k) center[k] += row[channels[k]];
  }
  for (double& v : center) v /= static_cast<double>(count);
  return center;
}

double Norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

ClassPixelSet BuildClassPixelSet(const FeatureMap& features,
                                 std::span<const int> labels, int part,
                                 std::string part_name) {
  if (labels.size() != features.num_pixels()) {
    throw ShapeError("label count does not match feature pixel count");
  }
  ClassPixelSet px;
  px.part = part;
  px.part_name = part_name.empty() ? std::to_string(part) : std::move(part_name);
  px.dims = features.channels;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    auto& dst = labels[p] == part ? px.in_class : px.out_class;
    dst.insert(dst.end(), features.pixel(p), features.pixel(p) + px.dims);
  }
  return px;
}

RankDirection PreferredDirection(SelectionMetric metric) {
  return metric == SelectionMetric::kKl || metric == SelectionMetric::kJs
             ? RankDirection::kHighest
             : RankDirection::kLowest;
}

std::vector<double> ChannelScores(const ClassPixelSet& pixels,
                                  SelectionMetric metric) {
  if (pixels.in_count() == 0) {
    throw ValidationError("part '" + pixels.part_name +
                          "' has no in-class pixels");
  }
  std::vector<double> scores(pixels.dims, 0.0);
  for (int j = 0; j < pixels.dims; ++j) {
    switch (metric) {
      case SelectionMetric::kVariance:
        scores[j] = ChannelVariance(pixels.in_class.data(), pixels.in_count(),
                                    pixels.dims, j) +
                    ChannelVariance(pixels.out_class.data(), pixels.out_count(),
                                    pixels.dims, j);
        break;
      case SelectionMetric::kKl:
      case SelectionMetric::kJs:
        scores[j] = DivergenceScore(pixels, j, metric);
        break;
      case SelectionMetric::kCosine:
        scores[j] = CosineDispersion(pixels, j);
        break;
    }
  }
  return scores;
}

std::vector<int> RankChannels(std::span<const double> scores,
                              RankDirection direction) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return direction == RankDirection::kLowest ? scores[a] < scores[b]
                                               : scores[a] > scores[b];
  });
  return order;
}

std::vector<int> SelectTopK(std::span<const double> scores, int k,
                            RankDirection direction) {
  if (k < 1 || k > static_cast<int>(scores.size())) {
    throw ValidationError("k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(scores.size()) + "]");
  }
  std::vector<int> order = RankChannels(scores, direction);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

double ClusterIoU(const ClassPixelSet& pixels, std::span<const int> channels,
                  bool* used_euclidean) {
  const std::size_t n_in = pixels.in_count();
  const std::size_t n_out = pixels.out_count();
  if (used_euclidean != nullptr) *used_euclidean = false;
  if (n_out == 0) return 1.0;  // every pixel is in-class and assigned so

  const std::vector<double> c_in =
      Centroid(pixels.in_class, n_in, pixels.dims, channels);
  const std::vector<double> c_out =
      Centroid(pixels.out_class, n_out, pixels.dims, channels);
  const double norm_in = Norm(c_in);
  const double norm_out = Norm(c_out);
  const bool euclidean = norm_in == 0.0 || norm_out == 0.0;
  if (used_euclidean != nullptr) *used_euclidean = euclidean;

  auto assigned_in = [&](const float* row) {
    if (euclidean) {
      double d_in = 0.0;
      double d_out = 0.0;
      for (std::size_t k = 0; k < channels.size(); ++k) {
        const double v = row[channels[k]];
        d_in += (v - c_in[k]) * (v - c_in[k]);
        d_out += (v - c_out[k]) * (v - c_out[k]);
      }
      return d_in <= d_out;
    }
    double dot_in = 0.0;
    double dot_out = 0.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const double v = row[channels[k]];
      dot_in += v * c_in[k];
      dot_out += v * c_out[k];
      sq += v * v;
    }
    if (sq == 0.0) return true;  // both cosines are 0
    const double norm = std::sqrt(sq);
    return dot_in / (norm * norm_in) >= dot_out / (norm * norm_out);
  };

  std::size_t true_pos = 0;
  for (std::size_t i = 0; i < n_in; ++i) {
    if (assigned_in(pixels.in_row(i))) ++true_pos;
  }
  std::size_t false_pos = 0;
  for (std::size_t i = 0; i < n_out; ++i) {
    if (assigned_in(pixels.out_row(i))) ++false_pos;
  }
  return static_cast<double>(true_pos) / static_cast<double>(n_in + false_pos);
}

SweepResult SweepK(const ClassPixelSet& pixels, std::span<const int> k_grid,
                   SelectionMetric metric, std::vector<std::string>* warnings) {
  if (k_grid.empty()) {
    throw ValidationError("k grid is empty for part '" + pixels.part_name + "'");
  }
  std::vector<int> grid(k_grid.begin(), k_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1 || grid.back() > pixels.dims) {
    throw ValidationError("k grid entries must lie in [1, " +
                          std::to_string(pixels.dims) + "]");
  }

  const std::vector<double> scores = ChannelScores(pixels, metric);
  const std::vector<int> ranking =
      RankChannels(scores, PreferredDirection(metric));

  SweepResult result;
  result.accuracy = -1.0;
  for (int k : grid) {
    std::vector<int> channels(ranking.begin(), ranking.begin() + k);
    std::sort(channels.begin(), channels.end());
    bool euclidean = false;
    const double iou = ClusterIoU(pixels, channels, &euclidean);
    if (euclidean && warnings != nullptr) {
      warnings->push_back("part '" + pixels.part_name + "', k=" +
                          std::to_string(k) +
                          ": zero class center, assigned by Euclidean distance");
    }
    result.k_values.push_back(k);
    result.accuracies.push_back(iou);
    if (iou > result.accuracy) {
      result.accuracy = iou;
      result.chosen_k = k;
      result.channels = std::move(channels);
    }
  }
  return result;
}

std::vector<int> DefaultKGrid(int dims) {
  std::vector<int> grid;
  for (int k = 1; k < dims; k *= 2) grid.push_back(k);
  grid.push_back(dims);
  return grid;
}

SelectionRecord SelectForExample(const FusedFeature& reference,
                                 const PartMaskSet& masks,
                                 const SelectionConfig& config,
                                 std::vector<std::string>* warnings) {
  const FeatureMap& map = reference.map;
  if (masks.height != map.height || masks.width != map.width) {
    throw ShapeError("masks are " + std::to_string(masks.height) + "x" +
                     std::to_string(masks.width) + " but features are " +
                     std::to_string(map.height) + "x" +
                     std::to_string(map.width) +
                     "; downsample the masks to feature resolution first");
  }
  const std::vector<int> labels = masks.ArgmaxLabels();
  const int num_parts = masks.num_parts();
  for (int c = 0; c < num_parts; ++c) {
    if (std::find(labels.begin(), labels.end(), c) == labels.end()) {
      throw ValidationError("part '" + masks.part_names[c] +
                            "' has no pixels at feature resolution " +
                            std::to_string(map.height) + "x" +
                            std::to_string(map.width));
    }
  }

  std::vector<std::vector<int>> grids;
  for (const ChannelSpan& span : reference.layout) {
    std::vector<int> grid;
    if (config.k_grid.empty()) {
      grid = DefaultKGrid(span.length);
    } else {
      for (int k : config.k_grid) {
        if (k >= 1 && k <= span.length) grid.push_back(k);
      }
    }
    if (grid.empty()) {
      throw ValidationError("no k grid value fits the " +
                            std::string(FeatureSourceName(span.source)) +
                            " span of " + std::to_string(span.length) +
                            " channels");
    }
    grids.push_back(std::move(grid));
  }

  std::vector<FeatureMap> spans;
  for (const ChannelSpan& span : reference.layout) {
    spans.push_back(ExtractSpan(reference, span.source));
  }

  const std::size_t num_sources = reference.layout.size();
  SelectionRecord record;
  record.metric = config.metric;
  record.parts.resize(num_parts);
  for (int c = 0; c < num_parts; ++c) {
    record.parts[c].name = masks.part_names[c];
    record.parts[c].per_source.resize(num_sources);
  }
  std::vector<std::vector<std::string>> job_warnings(num_parts * num_sources);

  ParallelFor(num_parts * num_sources, config.threads, [&](std::size_t job) {
    const int c = static_cast<int>(job / num_sources);
    const std::size_t s = job % num_sources;
    const ClassPixelSet px =
        BuildClassPixelSet(spans[s], labels, c, masks.part_names[c]);
    const SweepResult sweep =
        SweepK(px, grids[s], config.metric, &job_warnings[job]);
    SourceSelection& out = record.parts[c].per_source[s];
    out.source = reference.layout[s].source;
    out.k = sweep.chosen_k;
    out.channels = sweep.channels;
    out.sweep_accuracy = sweep.accuracy;
  });

  if (warnings != nullptr) {
    for (auto& w : job_warnings) {
      warnings->insert(warnings->end(), w.begin(), w.end());
    }
  }
  return record;
}

}  // namespace oiparts
