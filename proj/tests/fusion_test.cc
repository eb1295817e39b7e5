#include "oiparts/fusion.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oiparts/errors.h"
#include "oracles.h"

namespace oiparts {
namespace {

FeatureMap Pixel(std::vector<float> values, FeatureSource source) {
  FeatureMap f;
  f.height = f.width = 1;
  f.channels = static_cast<int>(values.size());
  f.source = source;
  f.data = std::move(values);
  return f;
}

double SpanNorm(const FeatureMap& f, std::size_t pixel, int offset, int len) {
  double s = 0.0;
  for (int c = 0; c < len; ++c) {
    const double v = f.pixel(pixel)[offset + c];
    s += v * v;
  }
  return std::sqrt(s);
}

TEST(L2NormalizeTest, HandValues) {
  const FeatureMap out = L2Normalize(Pixel({3, 4}, FeatureSource::kSd));
  EXPECT_FLOAT_EQ(out.data[0], 0.6f);
  EXPECT_FLOAT_EQ(out.data[1], 0.8f);
  const FeatureMap zero = L2Normalize(Pixel({0, 0}, FeatureSource::kSd));
  EXPECT_EQ(zero.data, (std::vector<float>{0, 0}));
}

TEST(L2NormalizeTest, IdempotentOnUnitVectors) {
  std::mt19937_64 rng(1);
  const FeatureMap once = L2Normalize(
      testing::RandomFeatureMap(rng, 4, 4, 9, FeatureSource::kDino));
  const FeatureMap twice = L2Normalize(once);
  for (std::size_t i = 0; i < once.data.size(); ++i) {
    EXPECT_NEAR(once.data[i], twice.data[i], 1e-7);
  }
}

TEST(FuseTest, Concatenation) {
  const FusedFeature f = Fuse(Pixel({1, 0}, FeatureSource::kSd),
                              Pixel({0, 1, 0}, FeatureSource::kDino));
  EXPECT_EQ(f.map.data, (std::vector<float>{1, 0, 0, 1, 0}));
  EXPECT_EQ(f.map.source, FeatureSource::kFused);
}

TEST(FuseTest, LayoutForBackboneWidths) {
  FeatureMap sd, dino;
  sd.height = dino.height = 2;
  sd.width = dino.width = 3;
  sd.channels = 768;
  dino.channels = 1024;
  sd.source = FeatureSource::kSd;
  dino.source = FeatureSource::kDino;
  sd.data.assign(2 * 3 * 768, 1.0f);
  dino.data.assign(2 * 3 * 1024, 2.0f);
  const FusedFeature f = Fuse(sd, dino);
  EXPECT_EQ(f.map.channels, 1792);
  ASSERT_EQ(f.layout.size(), 2u);
  EXPECT_EQ(f.layout[0].source, FeatureSource::kSd);
  EXPECT_EQ(f.layout[0].offset, 0);
  EXPECT_EQ(f.layout[0].length, 768);
  EXPECT_EQ(f.layout[1].source, FeatureSource::kDino);
  EXPECT_EQ(f.layout[1].offset, 768);
  EXPECT_EQ(f.layout[1].length, 1024);
  EXPECT_EQ(f.span(FeatureSource::kDino).offset, 768);
  EXPECT_THROW(f.span(FeatureSource::kFused), ValidationError);
}

TEST(FuseTest, Errors) {
  std::mt19937_64 rng(2);
  const FeatureMap sd =
      testing::RandomFeatureMap(rng, 3, 3, 4, FeatureSource::kSd);
  const FeatureMap dino =
      testing::RandomFeatureMap(rng, 3, 4, 5, FeatureSource::kDino);
  EXPECT_THROW(Fuse(sd, dino), ShapeError);
  EXPECT_THROW(Fuse(sd, sd), ValidationError);
  FeatureMap dino_ok =
      testing::RandomFeatureMap(rng, 3, 3, 5, FeatureSource::kDino);
  EXPECT_THROW(Fuse(dino_ok, sd), ValidationError);
}

// Every span has unit norm per pixel (or stays zero), and re-normalizing an
// extracted span changes nothing.
TEST(FuseProperty, SpanNormsAndExtraction) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 9);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = dim(rng), w = dim(rng);
    FeatureMap sd =
        testing::RandomFeatureMap(rng, h, w, dim(rng), FeatureSource::kSd);
    const FeatureMap dino =
        testing::RandomFeatureMap(rng, h, w, dim(rng), FeatureSource::kDino);
    for (int c = 0; c < sd.channels; ++c) sd.pixel(0)[c] = 0.0f;
    const FusedFeature f = Fuse(sd, dino);
    EXPECT_EQ(f.map.channels, sd.channels + dino.channels);
    for (std::size_t p = 0; p < f.map.num_pixels(); ++p) {
      for (const ChannelSpan& s : f.layout) {
        const double n = SpanNorm(f.map, p, s.offset, s.length);
        if (p == 0 && s.source == FeatureSource::kSd) {
          EXPECT_EQ(n, 0.0);
        } else {
          EXPECT_NEAR(n, 1.0, 1e-5);
        }
      }
    }
    for (FeatureSource src : {FeatureSource::kSd, FeatureSource::kDino}) {
      const FeatureMap part = ExtractSpan(f, src);
      EXPECT_EQ(part.source, src);
      const FeatureMap again = L2Normalize(part);
      for (std::size_t i = 0; i < part.data.size(); ++i) {
        EXPECT_NEAR(part.data[i], again.data[i], 1e-6);
      }
    }
    const FusedFeature g = Fuse(sd, dino);
    EXPECT_EQ(f.map.data, g.map.data);
  }
}

}  // namespace
}  // namespace oiparts
