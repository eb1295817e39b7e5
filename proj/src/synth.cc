#include "oiparts/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "oiparts/errors.h"

namespace oiparts {
namespace {

enum Stream : std::uint64_t {
  kLayoutStream = 0,
  kQueryShiftStream = 1,
  kSdRolesStream = 2,
  kSdReferenceStream = 3,
  kSdQueryStream = 4,
  kDinoRolesStream = 5,
  kDinoReferenceStream = 6,
  kDinoQueryStream = 7,
};

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : engine_(SplitMix64(seed + 0x9e3779b97f4a7c15ull * (stream + 1))) {}

  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Integer in [0, n).
  int Below(int n) {
    return static_cast<int>(Uniform() * n);
  }

  double Normal() {
    const double u1 = 1.0 - Uniform();  // (0, 1]
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates with Below(); std::shuffle is not portable across
  // standard library implementations.
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[Below(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<int> MakeLayout(const SynthSpec& spec, Rng& rng) {
  const int h = spec.height;
  const int w = spec.width;
  const int c = spec.num_parts;
  std::vector<int> labels(static_cast<std::size_t>(h) * w, 0);
  switch (spec.layout) {
    case SynthLayout::kStripes:
      for (int y = 0; y < h; ++y) {
        std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(y) * w, w,
                    y * c / h);
      }
      break;
    case SynthLayout::kRectangles: {
      const int columns = c - 1;
      const int col_width = w / columns;
      for (int k = 0; k < columns; ++k) {
        const int margin_x = rng.Below(std::max(1, col_width / 4));
        const int top = h / 8 + rng.Below(std::max(1, h / 8));
        const int bottom = h - h / 8 - rng.Below(std::max(1, h / 8));
        const int x0 = k * col_width + margin_x;
        const int x1 = (k + 1) * col_width - margin_x;
        for (int y = top; y < bottom; ++y) {
          for (int x = x0; x < x1; ++x) {
            labels[static_cast<std::size_t>(y) * w + x] = k + 1;
          }
        }
      }
      break;
    }
    case SynthLayout::kVoronoi: {
      std::vector<int> cells(static_cast<std::size_t>(h) * w);
      for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
      rng.Shuffle(cells);
      std::vector<std::pair<int, int>> seeds;
      for (int k = 0; k < c; ++k) seeds.emplace_back(cells[k] / w, cells[k] % w);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          int best = 0;
          long best_d = -1;
          for (int k = 0; k < c; ++k) {
            const long dy = y - seeds[k].first;
            const long dx = x - seeds[k].second;
            const long d = dy * dy + dx * dx;
            if (best_d < 0 || d < best_d) {
              best_d = d;
              best = k;
            }
          }
          labels[static_cast<std::size_t>(y) * w + x] = best;
        }
      }
      break;
    }
  }
  return labels;
}

std::vector<int> ShiftLayout(const std::vector<int>& labels, int h, int w,
                             int dy, int dx) {
  std::vector<int> out(labels.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sy = ((y - dy) % h + h) % h;
      const int sx = ((x - dx) % w + w) % w;
      out[static_cast<std::size_t>(y) * w + x] =
          labels[static_cast<std::size_t>(sy) * w + sx];
    }
  }
  return out;
}

struct SourceModel {
  SynthChannelRoles roles;
  std::vector<std::vector<float>> prototypes;  // per part, length D
  double distractor_sigma = 0.0;
};

SourceModel MakeSourceModel(const SynthSpec& spec, const SynthSourceDims& dims,
                            Rng& rng) {
  SourceModel model;
  std::vector<int> positions(dims.channels);
  for (int j = 0; j < dims.channels; ++j) positions[j] = j;
  rng.Shuffle(positions);
  const int informative = dims.channels - dims.distractors;
  model.roles.informative.assign(positions.begin(),
                                 positions.begin() + informative);
  model.roles.distractor.assign(positions.begin() + informative,
                                positions.end());

  const double cos_sep = std::cos(spec.prototype_separation *
                                  std::numbers::pi / 180.0);
  const bool shared = cos_sep > 1e-12;
  const double shared_value = shared ? std::sqrt(cos_sep) : 0.0;
  const double block_norm = std::sqrt(1.0 - (shared ? cos_sep : 0.0));
  const int block_channels = informative - (shared ? 1 : 0);
  const int c = spec.num_parts;

  model.prototypes.assign(c, std::vector<float>(dims.channels, 0.0f));
  double coordinate_sum = 0.0;
  int offset = shared ? 1 : 0;
  for (int k = 0; k < c; ++k) {
    const int size = block_channels / c + (k < block_channels % c ? 1 : 0);
    const double value = block_norm / std::sqrt(static_cast<double>(size));
    for (int j = 0; j < size; ++j) {
      model.prototypes[k][model.roles.informative[offset + j]] =
          static_cast<float>(value);
    }
    if (shared) {
      model.prototypes[k][model.roles.informative[0]] =
          static_cast<float>(shared_value);
    }
    coordinate_sum += value;
    offset += size;
  }
  model.distractor_sigma = spec.distractor_scale * coordinate_sum / c;
  return model;
}

FeatureMap SampleFeatures(const SynthSpec& spec, const SynthSourceDims& dims,
                          const SourceModel& model,
                          const std::vector<int>& labels, FeatureSource source,
                          Rng& rng) {
  FeatureMap map;
  map.height = spec.height;
  map.width = spec.width;
  map.channels = dims.channels;
  map.source = source;
  map.data.resize(map.num_pixels() * map.channels);
  std::vector<bool> is_distractor(dims.channels, false);
  for (int j : model.roles.distractor) is_distractor[j] = true;
  for (std::size_t p = 0; p < map.num_pixels(); ++p) {
    const std::vector<float>& proto = model.prototypes[labels[p]];
    float* dst = map.pixel(p);
    for (int j = 0; j < dims.channels; ++j) {
      double v = is_distractor[j] ? model.distractor_sigma * rng.Normal()
                                  : static_cast<double>(proto[j]);
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.Normal();
      dst[j] = static_cast<float>(v);
    }
  }
  return map;
}

LabelMap ToLabelMap(const std::vector<int>& labels, int h, int w,
                    const std::vector<std::string>& names) {
  LabelMap map;
  map.height = h;
  map.width = w;
  map.part_names = names;
  map.labels.assign(labels.begin(), labels.end());
  return map;
}

ImageRGB RenderGuide(const LabelMap& labels) {
  ImageRGB image;
  image.height = labels.height;
  image.width = labels.width;
  image.data.resize(3 * labels.labels.size());
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const auto color = PaletteColor(labels.labels[i]);
    std::copy(color.begin(), color.end(), image.data.begin() + 3 * i);
  }
  return image;
}

}  // namespace

std::string_view SynthLayoutName(SynthLayout layout) {
  switch (layout) {
    case SynthLayout::kStripes:
      return "stripes";
    case SynthLayout::kRectangles:
      return "rectangles";
    case SynthLayout::kVoronoi:
      return "voronoi";
  }
  return "voronoi";
}

SynthLayout ParseSynthLayout(std::string_view name) {
  if (name == "stripes") return SynthLayout::kStripes;
  if (name == "rectangles") return SynthLayout::kRectangles;
  if (name == "voronoi") return SynthLayout::kVoronoi;
  throw ValidationError("unknown layout '" + std::string(name) + "'");
}

std::array<std::uint8_t, 3> PaletteColor(int part) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 10> kPalette = {{
      {0, 0, 0},
      {230, 25, 75},
      {60, 180, 75},
      {255, 225, 25},
      {0, 130, 200},
      {245, 130, 48},
      {145, 30, 180},
      {70, 240, 240},
      {240, 50, 230},
      {250, 190, 190},
  }};
  return kPalette[static_cast<std::size_t>(part) % kPalette.size()];
}

void SynthSpec::Validate() const {
  if (num_parts < 2) throw ValidationError("synth needs at least 2 parts");
  if (num_parts > 255) throw ValidationError("synth supports at most 255 parts");
  if (height < 1 || width < 1 || upscale < 1) {
    throw ValidationError("synth dimensions must be positive");
  }
  for (const auto& [name, dims] :
       {std::pair{"sd", sd}, std::pair{"dino", dino}}) {
    if (dims.channels < 1 || dims.distractors < 0 ||
        dims.distractors >= dims.channels) {
      throw ValidationError(std::string(name) +
                            ": distractors must be in [0, channels)");
    }
  }
  if (!(prototype_separation > 0.0) || prototype_separation > 90.0) {
    throw ValidationError(
        "prototype separation must lie in (0, 90] degrees; wider angles are "
        "infeasible for the block construction");
  }
  const bool shared = std::cos(prototype_separation * std::numbers::pi /
                               180.0) > 1e-12;
  for (const auto& [name, dims] :
       {std::pair{"sd", sd}, std::pair{"dino", dino}}) {
    const int available = dims.channels - dims.distractors - (shared ? 1 : 0);
    if (available < num_parts) {
      throw ValidationError(
          std::string(name) + ": " + std::to_string(num_parts) +
          " parts need at least " + std::to_string(num_parts) +
          " informative channels at the requested separation, have " +
          std::to_string(std::max(available, 0)));
    }
  }
  if (noise_sigma < 0.0 || distractor_scale < 0.0) {
    throw ValidationError("noise scales must be non-negative");
  }
  if (layout == SynthLayout::kStripes && height < num_parts) {
    throw ValidationError("stripes layout needs height >= num_parts");
  }
  if (layout == SynthLayout::kRectangles && width / (num_parts - 1) < 2) {
    throw ValidationError("rectangles layout needs width >= 2 * (parts - 1)");
  }
  if (layout == SynthLayout::kVoronoi &&
      static_cast<long>(height) * width < num_parts) {
    throw ValidationError("voronoi layout needs at least one pixel per part");
  }
}

SynthFixture GenerateFixture(const SynthSpec& spec) {
  spec.Validate();
  SynthFixture fx;
  fx.spec = spec;
  fx.part_names.push_back("BG");
  for (int k = 1; k < spec.num_parts; ++k) {
    fx.part_names.push_back("part_" + std::to_string(k));
  }

  Rng layout_rng(spec.seed, kLayoutStream);
  const std::vector<int> reference = MakeLayout(spec, layout_rng);
  Rng shift_rng(spec.seed, kQueryShiftStream);
  const int dy = spec.height > 1 ? 1 + shift_rng.Below(spec.height - 1) : 0;
  const int dx = spec.layout == SynthLayout::kStripes || spec.width == 1
                     ? 0
                     : 1 + shift_rng.Below(spec.width - 1);
  const std::vector<int> query =
      ShiftLayout(reference, spec.height, spec.width, dy, dx);
  for (int k = 0; k < spec.num_parts; ++k) {
    if (std::find(reference.begin(), reference.end(), k) == reference.end()) {
      throw ValidationError("layout leaves part " + std::to_string(k) +
                            " empty; use a larger grid");
    }
  }

  Rng sd_roles(spec.seed, kSdRolesStream);
  const SourceModel sd_model = MakeSourceModel(spec, spec.sd, sd_roles);
  Rng dino_roles(spec.seed, kDinoRolesStream);
  const SourceModel dino_model = MakeSourceModel(spec, spec.dino, dino_roles);
  fx.sd_roles = sd_model.roles;
  fx.dino_roles = dino_model.roles;

  Rng sd_ref(spec.seed, kSdReferenceStream);
  Rng sd_query(spec.seed, kSdQueryStream);
  Rng dino_ref(spec.seed, kDinoReferenceStream);
  Rng dino_query(spec.seed, kDinoQueryStream);
  fx.reference_sd = SampleFeatures(spec, spec.sd, sd_model, reference,
                                   FeatureSource::kSd, sd_ref);
  fx.query_sd = SampleFeatures(spec, spec.sd, sd_model, query,
                               FeatureSource::kSd, sd_query);
  fx.reference_dino = SampleFeatures(spec, spec.dino, dino_model, reference,
                                     FeatureSource::kDino, dino_ref);
  fx.query_dino = SampleFeatures(spec, spec.dino, dino_model, query,
                                 FeatureSource::kDino, dino_query);

  fx.reference_labels =
      ToLabelMap(reference, spec.height, spec.width, fx.part_names);
  fx.query_labels = ToLabelMap(query, spec.height, spec.width, fx.part_names);
  fx.reference_labels_full = UpscaleLabels(fx.reference_labels, spec.upscale);
  fx.query_labels_full = UpscaleLabels(fx.query_labels, spec.upscale);
  fx.reference_image = RenderGuide(fx.reference_labels_full);
  fx.query_image = RenderGuide(fx.query_labels_full);
  return fx;
}

LabelMap UpscaleLabels(const LabelMap& labels, int factor) {
  LabelMap out;
  out.height = labels.height * factor;
  out.width = labels.width * factor;
  out.part_names = labels.part_names;
  out.labels.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.labels[static_cast<std::size_t>(y) * out.width + x] =
          labels.labels[static_cast<std::size_t>(y / factor) * labels.width +
                        x / factor];
    }
  }
  return out;
}

std::string SynthManifestJson(const SynthFixture& fixture) {
  const SynthSpec& s = fixture.spec;
  nlohmann::ordered_json doc;
  doc["generator"] = kSynthGenerator;
  nlohmann::ordered_json spec;
  spec["seed"] = s.seed;
  spec["height"] = s.height;
  spec["width"] = s.width;
  spec["sd"] = {{"channels", s.sd.channels}, {"distractors", s.sd.distractors}};
  spec["dino"] = {{"channels", s.dino.channels},
                  {"distractors", s.dino.distractors}};
  spec["num_parts"] = s.num_parts;
  spec["layout"] = SynthLayoutName(s.layout);
  spec["prototype_separation"] = s.prototype_separation;
  spec["noise_sigma"] = s.noise_sigma;
  spec["distractor_scale"] = s.distractor_scale;
  spec["upscale"] = s.upscale;
  doc["spec"] = spec;
  doc["part_names"] = fixture.part_names;
  doc["sd_distractor_channels"] = fixture.sd_roles.distractor;
  doc["dino_distractor_channels"] = fixture.dino_roles.distractor;
  doc["files"] = {{"reference_sd", "ref_sd.npy"},
                  {"reference_dino", "ref_dino.npy"},
                  {"query_sd", "query_sd.npy"},
                  {"query_dino", "query_dino.npy"},
                  {"reference_labels", "ref_labels.npy"},
                  {"query_labels", "query_labels.npy"},
                  {"reference_labels_feature", "ref_labels_feat.npy"},
                  {"query_labels_feature", "query_labels_feat.npy"},
                  {"reference_image", "ref.ppm"},
                  {"query_image", "query.ppm"},
                  {"part_names", "names.json"}};
  return doc.dump(2) + "\n";
}

void WriteFixture(const SynthFixture& fixture,
                  const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) {
    throw IoError("cannot create '" + directory.string() + "': " + ec.message());
  }
  WriteTensor(fixture.reference_sd, directory / "ref_sd.npy");
  WriteTensor(fixture.reference_dino, directory / "ref_dino.npy");
  WriteTensor(fixture.query_sd, directory / "query_sd.npy");
  WriteTensor(fixture.query_dino, directory / "query_dino.npy");
  WriteLabels(fixture.reference_labels_full, directory / "ref_labels.npy");
  WriteLabels(fixture.query_labels_full, directory / "query_labels.npy");
  WriteLabels(fixture.reference_labels, directory / "ref_labels_feat.npy");
  WriteLabels(fixture.query_labels, directory / "query_labels_feat.npy");
  WriteImage(fixture.reference_image, directory / "ref.ppm");
  WriteImage(fixture.query_image, directory / "query.ppm");
  WritePartNames(fixture.part_names, directory / "names.json");
  WriteTextFile(directory / "manifest.json", SynthManifestJson(fixture));
}

}  // namespace oiparts
