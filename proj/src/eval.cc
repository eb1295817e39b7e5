#include "oiparts/eval.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "oiparts/errors.h"

namespace oiparts {
namespace {

std::string FormatIou(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_parts)
    : num_parts_(num_parts),
      counts_(static_cast<std::size_t>(num_parts) * num_parts, 0) {}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (std::uint64_t c : counts_) sum += c;
  return sum;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_parts_ != num_parts_) {
    throw ShapeError("cannot merge confusion matrices of different sizes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void Accumulate(ConfusionMatrix& matrix, const LabelMap& gt,
                const LabelMap& pred) {
  if (gt.height != pred.height || gt.width != pred.width) {
    throw ShapeError("ground truth is " + std::to_string(gt.height) + "x" +
                     std::to_string(gt.width) + " but prediction is " +
                     std::to_string(pred.height) + "x" +
                     std::to_string(pred.width));
  }
  if (gt.num_parts() != matrix.num_parts() ||
      pred.num_parts() != matrix.num_parts()) {
    throw ShapeError("label maps and confusion matrix disagree on part count");
  }
  const int c = matrix.num_parts();
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (g >= c || p >= c) {
      throw ValidationError("label out of range at flat index " +
                            std::to_string(i));
    }
    ++matrix.at(g, p);
  }
}

IouReport ComputeIouReport(const ConfusionMatrix& matrix,
                           const std::vector<std::string>& names) {
  const int c = matrix.num_parts();
  if (static_cast<int>(names.size()) != c) {
    throw ShapeError("expected " + std::to_string(c) + " part names, got " +
                     std::to_string(names.size()));
  }
  IouReport report;
  double sum = 0.0;
  int included = 0;
  for (int k = 0; k < c; ++k) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int j = 0; j < c; ++j) {
      row += matrix.at(k, j);
      col += matrix.at(j, k);
    }
    const std::uint64_t inter = matrix.at(k, k);
    const std::uint64_t uni = row + col - inter;
    PartIou part{names[k], std::nullopt};
    if (uni > 0) {
      part.iou = static_cast<double>(inter) / static_cast<double>(uni);
      sum += *part.iou;
      ++included;
    }
    report.parts.push_back(std::move(part));
  }
  if (included > 0) report.miou = sum / included;
  return report;
}

std::string IouReport::ToText() const {
  std::size_t width = 4;
  for (const PartIou& p : parts) width = std::max(width, p.name.size());
  std::ostringstream out;
  auto line = [&](const std::string& name, const std::string& value) {
    out << name << std::string(width - name.size() + 2, ' ') << value << "\n";
  };
  line("part", "iou");
  for (const PartIou& p : parts) {
    line(p.name, p.iou ? FormatIou(*p.iou) : "n/a (absent, excluded)");
  }
  line("mIoU", miou ? FormatIou(*miou) : "n/a");
  return out.str();
}

std::string IouReport::ToCsv() const {
  std::ostringstream out;
  out << "part,iou\n";
  for (const PartIou& p : parts) {
    out << p.name << "," << (p.iou ? FormatIou(*p.iou) : "NA") << "\n";
  }
  out << "mIoU," << (miou ? FormatIou(*miou) : "NA") << "\n";
  return out.str();
}

std::string IouReport::ToJson() const {
  nlohmann::ordered_json doc;
  doc["parts"] = nlohmann::ordered_json::array();
  for (const PartIou& p : parts) {
    nlohmann::ordered_json entry;
    entry["name"] = p.name;
    entry["iou"] = p.iou ? nlohmann::ordered_json(*p.iou) : nullptr;
    entry["excluded"] = !p.iou.has_value();
    doc["parts"].push_back(std::move(entry));
  }
  doc["miou"] = miou ? nlohmann::ordered_json(*miou) : nullptr;
  return doc.dump(2) + "\n";
}

}  // namespace oiparts
