#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pseco {

/// Axis-aligned box in continuous corner form. Area is (x2 - x1) * (y2 - y1).
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  bool operator==(const BBox&) const = default;
};

bool is_valid(const BBox& b);

// Throws InvalidInput unless the box is finite with strictly positive extent.
void validate(const BBox& b);

double iou(const BBox& a, const BBox& b);

/// Dense row-major |A| x |B| table of pairwise IoUs.
class IouMatrix {
 public:
  IouMatrix() = default;
  IouMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

IouMatrix iou_matrix(std::span<const BBox> a, std::span<const BBox> b);

/// Greedy NMS. Returns kept indices in descending score order; equal scores
/// keep the lower original index first. A box is suppressed when its IoU with
/// an already kept box is >= iou_threshold.
std::vector<std::size_t> nms(std::span<const BBox> boxes, std::span<const double> scores,
                             double iou_threshold = 0.5);

/// Mirrors x -> image_width - x when hflip is set (in the input frame), then
/// multiplies every coordinate by scale.
BBox transform_box(const BBox& b, double scale, bool hflip = false, double image_width = 0.0);

}  // namespace pseco
