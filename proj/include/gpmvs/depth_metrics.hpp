#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "gpmvs/tensor_io.hpp"

namespace gpmvs {

/// H x W depths in meters with a validity mask. Valid pixels must hold finite,
/// positive depth.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> depth;
  std::vector<bool> valid;

  DepthMap() = default;
  DepthMap(int h, int w, double fill = 0.0);

  /// Mask is built from finite positive entries, intersected with `mask`
  /// (nonzero = valid) when given.
  static DepthMap from_tensor(const Tensor& depth, const std::optional<Tensor>& mask = std::nullopt);
  std::size_t size() const { return depth.size(); }
};

struct MetricsReport {
  double l1 = 0.0;
  double l1_rel = 0.0;
  double l1_inv = 0.0;
  double sc_inv = 0.0;
  std::size_t n_valid = 0;
  // Pixels valid in ground truth where the prediction is non-positive or not finite.
  std::size_t n_pred_rejected = 0;
};

/// L1, L1-rel, L1-inv and sc-inv over pixels valid in both maps.
/// Throws NoValidPixels if that set is empty.
MetricsReport evaluate(const DepthMap& pred, const DepthMap& gt);

}  // namespace gpmvs
