#pragma once

#include <vector>

#include "oiparts/tensor_io.h"

namespace oiparts {

struct ChannelSpan {
  FeatureSource source = FeatureSource::kSd;
  int offset = 0;
  int length = 0;
};

// Concatenation of per-source, per-pixel L2-normalized features. The layout
// spans partition [0, map.channels) in order.
struct FusedFeature {
  FeatureMap map;
  std::vector<ChannelSpan> layout;

  // Span for `source`; throws ValidationError if the source is absent.
  const ChannelSpan& span(FeatureSource source) const;
};

// Divides each pixel's channel vector by its L2 norm. Zero vectors pass
// through unchanged.
FeatureMap L2Normalize(const FeatureMap& features);

// sd span first, dino span second.
FusedFeature Fuse(const FeatureMap& sd, const FeatureMap& dino);

// Copies the channels of one span into a standalone map tagged with the
// span's source.
FeatureMap ExtractSpan(const FusedFeature& fused, FeatureSource source);

}  // namespace oiparts
