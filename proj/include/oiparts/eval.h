#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oiparts/tensor_io.h"

namespace oiparts {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_parts = 0);

  int num_parts() const { return num_parts_; }
  std::uint64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_parts_ + pred];
  }
  std::uint64_t& at(int gt, int pred) {
    return counts_[static_cast<std::size_t>(gt) * num_parts_ + pred];
  }
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  int num_parts_ = 0;
  std::vector<std::uint64_t> counts_;
};

// Adds one count per pixel at (gt, pred).
void Accumulate(ConfusionMatrix& matrix, const LabelMap& gt,
                const LabelMap& pred);

struct PartIou {
  std::string name;
  std::optional<double> iou;  // empty when the part has a zero union
};

struct IouReport {
  std::vector<PartIou> parts;
  std::optional<double> miou;  // mean over parts with a defined IoU

  std::string ToText() const;
  std::string ToCsv() const;
  std::string ToJson() const;
};

// IoU_c = cm[c][c] / (row_c + col_c - cm[c][c]).
IouReport ComputeIouReport(const ConfusionMatrix& matrix,
                           const std::vector<std::string>& names);

}  // namespace oiparts
