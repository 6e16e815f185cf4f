#include "gpmvs/depth_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gpmvs/error.hpp"

namespace gpmvs {

DepthMap::DepthMap(int h, int w, double fill)
    : height(h), width(w), depth(static_cast<std::size_t>(h) * w, fill),
      valid(static_cast<std::size_t>(h) * w, std::isfinite(fill) && fill > 0.0) {}

DepthMap DepthMap::from_tensor(const Tensor& t, const std::optional<Tensor>& mask) {
  if (t.rank() != 2) throw Error(ErrorCode::DimensionMismatch, "depth maps must be rank 2 (H,W)");
  if (mask && mask->dims != t.dims) throw Error(ErrorCode::DimensionMismatch, "mask shape differs from depth map");
  DepthMap m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const double d = t.data[i];
    m.depth[i] = d;
    m.valid[i] = std::isfinite(d) && d > 0.0 && (!mask || mask->data[i] != 0.0f);
  }
  return m;
}

MetricsReport evaluate(const DepthMap& pred, const DepthMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width || pred.size() != gt.size())
    throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth differ in shape");

  MetricsReport r;
  // Log residuals are accumulated relative to the first one; the variance is
  // shift invariant and this keeps it exact when every residual is equal.
  double sum_abs = 0.0, sum_rel = 0.0, sum_inv = 0.0, sum_w = 0.0, sum_w2 = 0.0;
  double z0 = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid[i]) continue;
    const double d = pred.depth[i];
    if (!pred.valid[i] || !(d > 0.0) || !std::isfinite(d)) {
      ++r.n_pred_rejected;
      continue;
    }
    const double g = gt.depth[i];
    const double diff = std::abs(d - g);
    sum_abs += diff;
    sum_rel += diff / g;
    sum_inv += std::abs(1.0 / d - 1.0 / g);
    const double z = std::log(d) - std::log(g);
    if (r.n_valid == 0) z0 = z;
    const double w = z - z0;
    sum_w += w;
    sum_w2 += w * w;
    ++r.n_valid;
  }
  if (r.n_valid == 0) throw Error(ErrorCode::NoValidPixels, "no pixel is valid in both depth maps");

  const auto n = static_cast<double>(r.n_valid);
  r.l1 = sum_abs / n;
  r.l1_rel = sum_rel / n;
  r.l1_inv = sum_inv / n;
  r.sc_inv = std::sqrt(std::max(0.0, sum_w2 / n - (sum_w * sum_w) / (n * n)));
  return r;
}

}  // namespace gpmvs
