#include "oiparts/tensor_io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oiparts/errors.h"

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read and written as little-endian");

namespace oiparts {
namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";
constexpr std::size_t kNpyMagicSize = 6;
constexpr std::size_t kNpyPreambleSize = 10;  // magic + version + u16 length
constexpr std::size_t kNpyAlignment = 64;

std::size_t DtypeSize(NpyDtype dtype) {
  return dtype == NpyDtype::kFloat32 ? 4 : 1;
}

std::string DescrFor(NpyDtype dtype) {
  return dtype == NpyDtype::kFloat32 ? "<f4" : "|u1";
}

std::vector<std::uint8_t> ReadBinaryFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBinaryFile(const std::filesystem::path& path, const std::string& head,
                     const std::uint8_t* body, std::size_t body_size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(body),
            static_cast<std::streamsize>(body_size));
  out.flush();
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

// Minimal parser for the Python-literal header dict numpy writes.
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::string context)
      : text_(text), context_(std::move(context)) {}

  std::string Value(std::string_view key) const {
    const std::string quoted = "'" + std::string(key) + "'";
    const auto pos = text_.find(quoted);
    if (pos == std::string_view::npos) {
      Fail("missing key " + quoted);
    }
    auto colon = text_.find(':', pos + quoted.size());
    if (colon == std::string_view::npos) Fail("malformed entry " + quoted);
    std::size_t start = colon + 1;
    while (start < text_.size() && text_[start] == ' ') ++start;
    if (start >= text_.size()) Fail("malformed entry " + quoted);
    std::size_t end = start;
    if (text_[start] == '\'') {
      end = text_.find('\'', start + 1);
      if (end == std::string_view::npos) Fail("unterminated string");
      return std::string(text_.substr(start + 1, end - start - 1));
    }
    if (text_[start] == '(') {
      end = text_.find(')', start);
      if (end == std::string_view::npos) Fail("unterminated shape tuple");
      return std::string(text_.substr(start, end - start + 1));
    }
    while (end < text_.size() && text_[end] != ',' && text_[end] != '}') ++end;
    return std::string(text_.substr(start, end - start));
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw FormatError(context_ + ": NPY header " + what);
  }

 private:
  std::string_view text_;
  std::string context_;
};

std::vector<std::size_t> ParseShapeTuple(const std::string& tuple,
                                         const HeaderParser& parser) {
  std::vector<std::size_t> shape;
  std::string inner = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
    if (item.empty()) continue;
    if (!std::all_of(item.begin(), item.end(),
                     [](char c) { return c >= '0' && c <= '9'; })) {
      parser.Fail("invalid shape entry '" + item + "'");
    }
    shape.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return shape;
}

std::string ShapeString(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  return out + ")";
}

std::vector<float> DecodeFloats(const NpyArray& array) {
  std::vector<float> values(array.num_elements());
  std::memcpy(values.data(), array.payload.data(), array.payload.size());
  return values;
}

void CheckFinite(const std::vector<float>& values,
                 const std::filesystem::path& path) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("'" + path.string() +
                            "': non-finite value at flat index " +
                            std::to_string(i));
    }
  }
}

NpyArray FloatArray(std::vector<std::size_t> shape,
                    const std::vector<float>& values) {
  NpyArray array;
  array.dtype = NpyDtype::kFloat32;
  array.shape = std::move(shape);
  array.payload.resize(values.size() * sizeof(float));
  std::memcpy(array.payload.data(), values.data(), array.payload.size());
  return array;
}

NpyArray ReadFloatArray(const std::filesystem::path& path, std::size_t rank) {
  NpyArray array = ReadNpy(path);
  if (array.dtype != NpyDtype::kFloat32) {
    throw ShapeError("'" + path.string() + "': expected float32 data");
  }
  if (array.shape.size() != rank) {
    throw ShapeError("'" + path.string() + "': expected rank " +
                     std::to_string(rank) + ", got rank " +
                     std::to_string(array.shape.size()));
  }
  return array;
}

std::string ReadPnmToken(const std::vector<std::uint8_t>& bytes,
                         std::size_t& pos, const std::filesystem::path& path) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  if (token.empty()) {
    throw FormatError("'" + path.string() + "': truncated image header");
  }
  return token;
}

int ParsePnmInt(const std::string& token, const std::filesystem::path& path) {
  if (token.empty() || token.size() > 9 ||
      !std::all_of(token.begin(), token.end(),
                   [](char c) { return c >= '0' && c <= '9'; })) {
    throw FormatError("'" + path.string() + "': bad image header field '" +
                      token + "'");
  }
  return std::stoi(token);
}

}  // namespace

std::string_view FeatureSourceName(FeatureSource source) {
  switch (source) {
    case FeatureSource::kDino:
      return "dino";
    case FeatureSource::kSd:
      return "sd";
    case FeatureSource::kFused:
      return "fused";
  }
  return "fused";
}

FeatureSource ParseFeatureSource(std::string_view name) {
  if (name == "dino") return FeatureSource::kDino;
  if (name == "sd") return FeatureSource::kSd;
  if (name == "fused") return FeatureSource::kFused;
  throw ValidationError("unknown feature source '" + std::string(name) + "'");
}

std::string_view SelectionMetricName(SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::kVariance:
      return "variance";
    case SelectionMetric::kCosine:
      return "cosine";
    case SelectionMetric::kKl:
      return "kl";
    case SelectionMetric::kJs:
      return "js";
  }
  return "variance";
}

SelectionMetric ParseSelectionMetric(std::string_view name) {
  if (name == "variance") return SelectionMetric::kVariance;
  if (name == "cosine") return SelectionMetric::kCosine;
  if (name == "kl") return SelectionMetric::kKl;
  if (name == "js") return SelectionMetric::kJs;
  throw ValidationError("unknown selection metric '" + std::string(name) + "'");
}

std::vector<int> PartMaskSet::ArgmaxLabels() const {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    float best = masks.empty() ? 0.0f : masks[0].data[i];
    for (int c = 1; c < num_parts(); ++c) {
      if (masks[c].data[i] > best) {
        best = masks[c].data[i];
        labels[i] = c;
      }
    }
  }
  return labels;
}

std::size_t NpyArray::num_elements() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string NpyHeader(NpyDtype dtype, const std::vector<std::size_t>& shape) {
  std::string dict = "{'descr': '" + DescrFor(dtype) +
                     "', 'fortran_order': False, 'shape': " +
                     ShapeString(shape) + ", }";
  std::size_t total = kNpyPreambleSize + dict.size() + 1;
  const std::size_t padded = (total + kNpyAlignment - 1) / kNpyAlignment *
                             kNpyAlignment;
  dict.append(padded - total, ' ');
  dict.push_back('\n');
  const auto header_len = static_cast<std::uint16_t>(dict.size());
  std::string out(kNpyMagic, kNpyMagicSize);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header_len & 0xff));
  out.push_back(static_cast<char>(header_len >> 8));
  return out + dict;
}

NpyArray ReadNpy(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = ReadBinaryFile(path);
  const std::string context = "'" + path.string() + "'";
  if (bytes.size() < kNpyPreambleSize ||
      std::memcmp(bytes.data(), kNpyMagic, kNpyMagicSize) != 0) {
    throw FormatError(context + ": missing NPY magic");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw FormatError(context + ": unsupported NPY version " +
                      std::to_string(bytes[6]) + "." +
                      std::to_string(bytes[7]));
  }
  const std::size_t header_len = bytes[8] | (std::size_t{bytes[9]} << 8);
  if (kNpyPreambleSize + header_len > bytes.size()) {
    throw FormatError(context + ": truncated NPY header");
  }
  const std::string_view header(
      reinterpret_cast<const char*>(bytes.data()) + kNpyPreambleSize,
      header_len);
  HeaderParser parser(header, context);

  NpyArray array;
  const std::string descr = parser.Value("descr");
  if (descr == "<f4") {
    array.dtype = NpyDtype::kFloat32;
  } else if (descr == "|u1" || descr == "<u1" || descr == "u1") {
    array.dtype = NpyDtype::kUint8;
  } else {
    throw ShapeError(context + ": unsupported dtype '" + descr + "'");
  }
  const std::string fortran = parser.Value("fortran_order");
  if (fortran != "False") {
    throw FormatError(context + ": Fortran-order arrays are not supported");
  }
  array.shape = ParseShapeTuple(parser.Value("shape"), parser);

  const std::size_t offset = kNpyPreambleSize + header_len;
  const std::size_t expected = array.num_elements() * DtypeSize(array.dtype);
  if (bytes.size() - offset != expected) {
    throw FormatError(context + ": payload holds " +
                      std::to_string(bytes.size() - offset) +
                      " bytes, header implies " + std::to_string(expected));
  }
  array.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                       bytes.end());
  return array;
}

void WriteNpy(const NpyArray& array, const std::filesystem::path& path) {
  if (array.payload.size() != array.num_elements() * DtypeSize(array.dtype)) {
    throw ShapeError("payload size does not match shape for '" +
                     path.string() + "'");
  }
  WriteBinaryFile(path, NpyHeader(array.dtype, array.shape),
                  array.payload.data(), array.payload.size());
}

FeatureMap ReadTensor(const std::filesystem::path& path, FeatureSource source) {
  const NpyArray array = ReadFloatArray(path, 3);
  FeatureMap map;
  map.height = static_cast<int>(array.shape[0]);
  map.width = static_cast<int>(array.shape[1]);
  map.channels = static_cast<int>(array.shape[2]);
  map.source = source;
  map.data = DecodeFloats(array);
  CheckFinite(map.data, path);
  return map;
}

void WriteTensor(const FeatureMap& tensor, const std::filesystem::path& path) {
  if (tensor.data.size() != tensor.num_pixels() * tensor.channels) {
    throw ShapeError("feature map data length does not match its shape");
  }
  WriteNpy(FloatArray({static_cast<std::size_t>(tensor.height),
                       static_cast<std::size_t>(tensor.width),
                       static_cast<std::size_t>(tensor.channels)},
                      tensor.data),
           path);
}

Plane ReadPlane(const std::filesystem::path& path) {
  const NpyArray array = ReadFloatArray(path, 2);
  Plane plane;
  plane.height = static_cast<int>(array.shape[0]);
  plane.width = static_cast<int>(array.shape[1]);
  plane.data = DecodeFloats(array);
  CheckFinite(plane.data, path);
  return plane;
}

void WritePlane(const Plane& plane, const std::filesystem::path& path) {
  if (plane.data.size() != static_cast<std::size_t>(plane.height) * plane.width) {
    throw ShapeError("plane data length does not match its shape");
  }
  WriteNpy(FloatArray({static_cast<std::size_t>(plane.height),
                       static_cast<std::size_t>(plane.width)},
                      plane.data),
           path);
}

std::vector<Plane> ReadPlaneStack(const std::filesystem::path& path) {
  const NpyArray array = ReadFloatArray(path, 3);
  const std::vector<float> values = DecodeFloats(array);
  CheckFinite(values, path);
  const int h = static_cast<int>(array.shape[1]);
  const int w = static_cast<int>(array.shape[2]);
  const std::size_t plane_size = static_cast<std::size_t>(h) * w;
  std::vector<Plane> planes;
  for (std::size_t c = 0; c < array.shape[0]; ++c) {
    Plane plane(h, w);
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(c * plane_size),
                plane_size, plane.data.begin());
    planes.push_back(std::move(plane));
  }
  return planes;
}

void WritePlaneStack(const std::vector<Plane>& planes,
                     const std::filesystem::path& path) {
  const int h = planes.empty() ? 0 : planes[0].height;
  const int w = planes.empty() ? 0 : planes[0].width;
  std::vector<float> values;
  values.reserve(planes.size() * static_cast<std::size_t>(h) * w);
  for (const Plane& plane : planes) {
    if (plane.height != h || plane.width != w) {
      throw ShapeError("plane stack members differ in size");
    }
    values.insert(values.end(), plane.data.begin(), plane.data.end());
  }
  WriteNpy(FloatArray({planes.size(), static_cast<std::size_t>(h),
                       static_cast<std::size_t>(w)},
                      values),
           path);
}

LabelMap ReadLabels(const std::filesystem::path& path,
                    std::vector<std::string> part_names) {
  NpyArray array = ReadNpy(path);
  if (array.dtype != NpyDtype::kUint8) {
    throw ShapeError("'" + path.string() + "': expected uint8 labels");
  }
  if (array.shape.size() != 2) {
    throw ShapeError("'" + path.string() + "': expected rank-2 labels");
  }
  LabelMap labels;
  labels.height = static_cast<int>(array.shape[0]);
  labels.width = static_cast<int>(array.shape[1]);
  labels.labels = std::move(array.payload);
  labels.part_names = std::move(part_names);
  return labels;
}

void WriteLabels(const LabelMap& labels, const std::filesystem::path& path) {
  NpyArray array;
  array.dtype = NpyDtype::kUint8;
  array.shape = {static_cast<std::size_t>(labels.height),
                 static_cast<std::size_t>(labels.width)};
  array.payload = labels.labels;
  WriteNpy(array, path);
}

ImageRGB ReadImage(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = ReadBinaryFile(path);
  std::size_t pos = 0;
  const std::string magic = ReadPnmToken(bytes, pos, path);
  if (magic != "P6" && magic != "P5") {
    throw FormatError("'" + path.string() + "': unsupported image magic '" +
                      magic + "'");
  }
  ImageRGB image;
  image.width = ParsePnmInt(ReadPnmToken(bytes, pos, path), path);
  image.height = ParsePnmInt(ReadPnmToken(bytes, pos, path), path);
  const int maxval = ParsePnmInt(ReadPnmToken(bytes, pos, path), path);
  if (maxval != 255) {
    throw FormatError("'" + path.string() + "': maxval must be 255");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("'" + path.string() + "': truncated image header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  const std::size_t channels = magic == "P6" ? 3 : 1;
  if (bytes.size() - pos != n * channels) {
    throw FormatError("'" + path.string() + "': raster holds " +
                      std::to_string(bytes.size() - pos) + " bytes, expected " +
                      std::to_string(n * channels));
  }
  if (channels == 3) {
    image.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.end());
  } else {
    image.data.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill_n(image.data.begin() + static_cast<std::ptrdiff_t>(3 * i), 3,
                  bytes[pos + i]);
    }
  }
  return image;
}

void WriteImage(const ImageRGB& image, const std::filesystem::path& path) {
  if (image.data.size() != 3 * static_cast<std::size_t>(image.width) *
                               image.height) {
    throw ShapeError("image data length does not match its shape");
  }
  const std::string head = "P6\n" + std::to_string(image.width) + " " +
                           std::to_string(image.height) + "\n255\n";
  WriteBinaryFile(path, head, image.data.data(), image.data.size());
}

std::vector<std::string> ReadPartNames(const std::filesystem::path& path) {
  const std::string text = ReadTextFile(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  if (!doc.is_array()) {
    throw FormatError("'" + path.string() + "': expected a JSON array");
  }
  std::vector<std::string> names;
  for (const auto& item : doc) {
    if (!item.is_string()) {
      throw FormatError("'" + path.string() + "': part names must be strings");
    }
    names.push_back(item.get<std::string>());
  }
  return names;
}

void WritePartNames(const std::vector<std::string>& names,
                    const std::filesystem::path& path) {
  WriteTextFile(path, nlohmann::json(names).dump() + "\n");
}

PartMaskSet MaskSetFromLabels(const LabelMap& labels) {
  const int num_parts = labels.num_parts();
  if (num_parts == 0) {
    throw ValidationError("part name list is empty");
  }
  std::set<std::string> seen;
  for (const std::string& name : labels.part_names) {
    if (name.empty()) throw ValidationError("part names must be non-empty");
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate part name '" + name + "'");
    }
  }
  PartMaskSet set;
  set.height = labels.height;
  set.width = labels.width;
  set.part_names = labels.part_names;
  set.masks.assign(num_parts, Plane(labels.height, labels.width, 0.0f));
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int label = labels.labels[i];
    if (label >= num_parts) {
      throw ValidationError("label " + std::to_string(label) +
                            " at flat index " + std::to_string(i) +
                            " is out of range for " +
                            std::to_string(num_parts) + " parts");
    }
    set.masks[label].data[i] = 1.0f;
  }
  return set;
}

PartMaskSet LoadMaskSet(const std::filesystem::path& label_path,
                        const std::filesystem::path& names_path) {
  return MaskSetFromLabels(ReadLabels(label_path, ReadPartNames(names_path)));
}

namespace {

// Coverage of output cell `o` (of `out` cells) over input cells, as
// (input index, covered length) pairs. Cell o spans [o*in/out, (o+1)*in/out).
std::vector<std::vector<std::pair<int, double>>> CoverageWeights(int in,
                                                                 int out) {
  std::vector<std::vector<std::pair<int, double>>> weights(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < in && i < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, double(i));
      if (overlap > 0.0) weights[o].emplace_back(i, overlap);
    }
  }
  return weights;
}

}  // namespace

PartMaskSet DownsampleMask(const PartMaskSet& masks, int target_height,
                           int target_width,
                           std::vector<std::string>* warnings) {
  if (target_height <= 0 || target_width <= 0) {
    throw ValidationError("downsample target dimensions must be positive");
  }
  if (target_height > masks.height || target_width > masks.width) {
    throw ValidationError("downsample target " + std::to_string(target_height) +
                          "x" + std::to_string(target_width) +
                          " exceeds mask size " + std::to_string(masks.height) +
                          "x" + std::to_string(masks.width));
  }
  const auto rows = CoverageWeights(masks.height, target_height);
  const auto cols = CoverageWeights(masks.width, target_width);
  const double cell_area = (static_cast<double>(masks.height) / target_height) *
                           (static_cast<double>(masks.width) / target_width);

  PartMaskSet out;
  out.height = target_height;
  out.width = target_width;
  out.part_names = masks.part_names;
  for (int c = 0; c < masks.num_parts(); ++c) {
    const Plane& src = masks.masks[c];
    Plane dst(target_height, target_width);
    float peak = 0.0f;
    for (int oy = 0; oy < target_height; ++oy) {
      for (int ox = 0; ox < target_width; ++ox) {
        double acc = 0.0;
        for (const auto& [iy, wy] : rows[oy]) {
          double row_acc = 0.0;
          for (const auto& [ix, wx] : cols[ox]) {
            row_acc += wx * src.at(iy, ix);
          }
          acc += wy * row_acc;
        }
        const float value = static_cast<float>(acc / cell_area);
        dst.at(oy, ox) = value;
        peak = std::max(peak, value);
      }
    }
    if (peak < 0.5f && warnings != nullptr) {
      warnings->push_back("part '" + masks.part_names[c] +
                          "' peaks at " + std::to_string(peak) +
                          " after downsampling (thin part eroded)");
    }
    out.masks.push_back(std::move(dst));
  }
  return out;
}

std::string SelectionToJson(const SelectionRecord& record) {
  nlohmann::ordered_json doc;
  doc["metric"] = SelectionMetricName(record.metric);
  doc["parts"] = nlohmann::ordered_json::array();
  for (const PartSelection& part : record.parts) {
    nlohmann::ordered_json p;
    p["name"] = part.name;
    p["per_source"] = nlohmann::ordered_json::array();
    for (const SourceSelection& s : part.per_source) {
      nlohmann::ordered_json entry;
      entry["source"] = FeatureSourceName(s.source);
      entry["k"] = s.k;
      entry["channels"] = s.channels;
      entry["sweep_accuracy"] = s.sweep_accuracy;
      p["per_source"].push_back(std::move(entry));
    }
    doc["parts"].push_back(std::move(p));
  }
  return doc.dump(2) + "\n";
}

SelectionRecord SelectionFromJson(const std::string& text) {
  SelectionRecord record;
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    record.metric =
        ParseSelectionMetric(doc.at("metric").get<std::string>());
    for (const auto& p : doc.at("parts")) {
      PartSelection part;
      part.name = p.at("name").get<std::string>();
      for (const auto& s : p.at("per_source")) {
        SourceSelection sel;
        sel.source = ParseFeatureSource(s.at("source").get<std::string>());
        sel.k = s.at("k").get<int>();
        sel.channels = s.at("channels").get<std::vector<int>>();
        sel.sweep_accuracy = s.at("sweep_accuracy").get<double>();
        part.per_source.push_back(std::move(sel));
      }
      record.parts.push_back(std::move(part));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("selection record: ") + e.what());
  }
  for (const PartSelection& part : record.parts) {
    for (const SourceSelection& s : part.per_source) {
      if (static_cast<int>(s.channels.size()) != s.k) {
        throw ValidationError("selection for part '" + part.name +
                              "' lists " + std::to_string(s.channels.size()) +
                              " channels but k=" + std::to_string(s.k));
      }
      for (std::size_t i = 0; i < s.channels.size(); ++i) {
        if (s.channels[i] < 0 || (i > 0 && s.channels[i] <= s.channels[i - 1])) {
          throw ValidationError("selection for part '" + part.name +
                                "' has channels that are not strictly "
                                "increasing non-negative indices");
        }
      }
    }
  }
  return record;
}

SelectionRecord ReadSelection(const std::filesystem::path& path) {
  return SelectionFromJson(ReadTextFile(path));
}

void WriteSelection(const SelectionRecord& record,
                    const std::filesystem::path& path) {
  WriteTextFile(path, SelectionToJson(record));
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oiparts
