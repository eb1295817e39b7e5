#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "oiparts/tensor_io.h"

namespace oiparts {

enum class SynthLayout { kStripes, kRectangles, kVoronoi };

std::string_view SynthLayoutName(SynthLayout layout);
SynthLayout ParseSynthLayout(std::string_view name);

struct SynthSourceDims {
  int channels = 32;
  int distractors = 0;  // pure-noise channels, must be < channels
};

struct SynthSpec {
  std::uint64_t seed = 0;
  int height = 60;  // feature resolution
  int width = 60;
  SynthSourceDims sd{24, 0};
  SynthSourceDims dino{40, 0};
  int num_parts = 4;  // background included
  SynthLayout layout = SynthLayout::kVoronoi;
  double prototype_separation = 90.0;  // min pairwise angle, degrees, (0, 90]
  double noise_sigma = 0.05;
  // Distractor standard deviation in units of the mean prototype coordinate.
  double distractor_scale = 1.0;
  int upscale = 8;  // full resolution = feature resolution * upscale

  void Validate() const;
};

// Channel roles of one source: which positions carry class signal.
struct SynthChannelRoles {
  std::vector<int> informative;
  std::vector<int> distractor;
};

struct SynthFixture {
  SynthSpec spec;
  std::vector<std::string> part_names;
  FeatureMap reference_sd, reference_dino;
  FeatureMap query_sd, query_dino;
  LabelMap reference_labels, query_labels;            // feature resolution
  LabelMap reference_labels_full, query_labels_full;  // full resolution
  ImageRGB reference_image, query_image;              // full resolution
  SynthChannelRoles sd_roles, dino_roles;
};

// Identifier of the random generator and stream splitting, echoed into
// fixture manifests.
inline constexpr std::string_view kSynthGenerator =
    "mt19937_64; stream seed = splitmix64(seed + 0x9e3779b97f4a7c15 * "
    "(stream + 1)); uniform = (u64 >> 11) * 2^-53; normal = Box-Muller cos "
    "branch";

// Pure function of the spec. Each part gets a prototype direction on the
// informative channels of every source (disjoint coordinate blocks, plus a
// shared coordinate when the separation is below 90 degrees). Pixels carry
// their part's prototype plus Gaussian noise; distractor channels are i.i.d.
// noise in both images. The query layout is a seeded cyclic shift of the
// reference layout.
SynthFixture GenerateFixture(const SynthSpec& spec);

std::string SynthManifestJson(const SynthFixture& fixture);

// Writes every fixture member in the tensor-io formats plus manifest.json.
void WriteFixture(const SynthFixture& fixture,
                  const std::filesystem::path& directory);

// Upscales a label map by an integer factor (nearest neighbor).
LabelMap UpscaleLabels(const LabelMap& labels, int factor);

// Palette color for a part index (10 entries, cycled).
std::array<std::uint8_t, 3> PaletteColor(int part);

}  // namespace oiparts
