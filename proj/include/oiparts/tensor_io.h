#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace oiparts {

enum class FeatureSource { kDino, kSd, kFused };

std::string_view FeatureSourceName(FeatureSource source);
FeatureSource ParseFeatureSource(std::string_view name);

// H'xW'xD real-valued feature tensor, row-major (H', W', D).
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  FeatureSource source = FeatureSource::kFused;
  std::vector<float> data;

  std::size_t num_pixels() const {
    return static_cast<std::size_t>(height) * width;
  }
  const float* pixel(std::size_t index) const {
    return data.data() + index * channels;
  }
  float* pixel(std::size_t index) { return data.data() + index * channels; }
};

// Single real-valued H x W plane (masks, score planes, confidences).
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Plane() = default;
  Plane(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return data.size(); }
  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major

  const std::uint8_t* pixel(std::size_t index) const {
    return data.data() + 3 * index;
  }
};

// C part planes. At full resolution the planes are one-hot; after
// DownsampleMask they are soft but still sum to 1 per pixel.
struct PartMaskSet {
  int height = 0;
  int width = 0;
  std::vector<Plane> masks;
  std::vector<std::string> part_names;

  int num_parts() const { return static_cast<int>(masks.size()); }
  // Per-pixel argmax over planes, ties toward the lower part index.
  std::vector<int> ArgmaxLabels() const;
};

// Integer label map (class indices).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;
  std::vector<std::string> part_names;

  int num_parts() const { return static_cast<int>(part_names.size()); }
};

enum class SelectionMetric { kVariance, kCosine, kKl, kJs };

std::string_view SelectionMetricName(SelectionMetric metric);
SelectionMetric ParseSelectionMetric(std::string_view name);

struct SourceSelection {
  FeatureSource source = FeatureSource::kSd;
  int k = 0;
  std::vector<int> channels;  // strictly increasing, within [0, D_source)
  double sweep_accuracy = 0.0;
};

struct PartSelection {
  std::string name;
  std::vector<SourceSelection> per_source;
};

struct SelectionRecord {
  SelectionMetric metric = SelectionMetric::kVariance;
  std::vector<PartSelection> parts;
};

// --- NPY (v1.0) ---------------------------------------------------------

enum class NpyDtype { kFloat32, kUint8 };

// Raw decoded array: shape plus little-endian payload bytes.
struct NpyArray {
  NpyDtype dtype = NpyDtype::kFloat32;
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> payload;

  std::size_t num_elements() const;
};

NpyArray ReadNpy(const std::filesystem::path& path);
void WriteNpy(const NpyArray& array, const std::filesystem::path& path);
// Header bytes (magic through padding newline) for the given array.
std::string NpyHeader(NpyDtype dtype, const std::vector<std::size_t>& shape);

// Rank-3 float32 (H', W', D). Rejects NaN/Inf with the first flat index.
FeatureMap ReadTensor(const std::filesystem::path& path, FeatureSource source);
void WriteTensor(const FeatureMap& tensor, const std::filesystem::path& path);

// Rank-2 float32 planes.
Plane ReadPlane(const std::filesystem::path& path);
void WritePlane(const Plane& plane, const std::filesystem::path& path);

// Rank-3 float32 (C, H, W) stack of planes.
std::vector<Plane> ReadPlaneStack(const std::filesystem::path& path);
void WritePlaneStack(const std::vector<Plane>& planes,
                     const std::filesystem::path& path);

// Rank-2 uint8 label maps. ReadLabels does not check indices against C.
LabelMap ReadLabels(const std::filesystem::path& path,
                    std::vector<std::string> part_names);
void WriteLabels(const LabelMap& labels, const std::filesystem::path& path);

// --- Images -------------------------------------------------------------

// Binary PPM (P6) or PGM (P5, replicated to RGB), maxval 255.
ImageRGB ReadImage(const std::filesystem::path& path);
void WriteImage(const ImageRGB& image, const std::filesystem::path& path);

// --- Masks --------------------------------------------------------------

std::vector<std::string> ReadPartNames(const std::filesystem::path& path);
void WritePartNames(const std::vector<std::string>& names,
                    const std::filesystem::path& path);

// Expands a label map into one-hot planes. Class 0 is background.
PartMaskSet MaskSetFromLabels(const LabelMap& labels);
PartMaskSet LoadMaskSet(const std::filesystem::path& label_path,
                        const std::filesystem::path& names_path);

// Area-averages every plane onto a target_height x target_width grid with
// fractional coverage weights. Parts whose maximum soft value drops below
// 0.5 produce a warning (thin-part erosion).
PartMaskSet DownsampleMask(const PartMaskSet& masks, int target_height,
                           int target_width,
                           std::vector<std::string>* warnings = nullptr);

// --- Selection records --------------------------------------------------

std::string SelectionToJson(const SelectionRecord& record);
SelectionRecord SelectionFromJson(const std::string& text);
SelectionRecord ReadSelection(const std::filesystem::path& path);
void WriteSelection(const SelectionRecord& record,
                    const std::filesystem::path& path);

// Writes text to a file, throwing IoError on failure.
void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace oiparts
