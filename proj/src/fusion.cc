#include "oiparts/fusion.h"

#include <cmath>
#include <string>

#include "oiparts/errors.h"

namespace oiparts {

const ChannelSpan& FusedFeature::span(FeatureSource source) const {
  for (const ChannelSpan& s : layout) {
    if (s.source == source) return s;
  }
  throw ValidationError("fused feature has no '" +
                        std::string(FeatureSourceName(source)) + "' span");
}

FeatureMap L2Normalize(const FeatureMap& features) {
  FeatureMap out = features;
  const int d = features.channels;
  for (std::size_t p = 0; p < features.num_pixels(); ++p) {
    float* v = out.pixel(p);
    double sq = 0.0;
    for (int j = 0; j < d; ++j) sq += static_cast<double>(v[j]) * v[j];
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (int j = 0; j < d; ++j) v[j] = static_cast<float>(v[j] * inv);
  }
  return out;
}

FusedFeature Fuse(const FeatureMap& sd, const FeatureMap& dino) {
  if (sd.source == dino.source) {
    throw ValidationError("both fusion inputs carry source '" +
                          std::string(FeatureSourceName(sd.source)) + "'");
  }
  if (sd.source != FeatureSource::kSd || dino.source != FeatureSource::kDino) {
    throw ValidationError("fusion expects (sd, dino) inputs in that order");
  }
  if (sd.height != dino.height || sd.width != dino.width) {
    throw ShapeError("sd features are " + std::to_string(sd.height) + "x" +
                     std::to_string(sd.width) + " but dino features are " +
                     std::to_string(dino.height) + "x" +
                     std::to_string(dino.width));
  }
  const FeatureMap a = L2Normalize(sd);
  const FeatureMap b = L2Normalize(dino);

  FusedFeature fused;
  fused.layout = {{FeatureSource::kSd, 0, sd.channels},
                  {FeatureSource::kDino, sd.channels, dino.channels}};
  FeatureMap& map = fused.map;
  map.height = sd.height;
  map.width = sd.width;
  map.channels = sd.channels + dino.channels;
  map.source = FeatureSource::kFused;
  map.data.resize(map.num_pixels() * map.channels);
  for (std::size_t p = 0; p < map.num_pixels(); ++p) {
    float* dst = map.pixel(p);
    std::copy_n(a.pixel(p), sd.channels, dst);
    std::copy_n(b.pixel(p), dino.channels, dst + sd.channels);
  }
  return fused;
}

FeatureMap ExtractSpan(const FusedFeature& fused, FeatureSource source) {
  const ChannelSpan& s = fused.span(source);
  FeatureMap out;
  out.height = fused.map.height;
  out.width = fused.map.width;
  out.channels = s.length;
  out.source = source;
  out.data.resize(out.num_pixels() * s.length);
  for (std::size_t p = 0; p < out.num_pixels(); ++p) {
    std::copy_n(fused.map.pixel(p) + s.offset, s.length, out.pixel(p));
  }
  return out;
}

}  // namespace oiparts
