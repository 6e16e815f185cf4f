#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gpmvs/pose.hpp"
#include "gpmvs/tensor_io.hpp"

namespace gpmvs {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
  Mat3 K() const;
  Mat3 K_inverse() const;
};

/// C x H x W intensities in [0, 1], row-major.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, float fill = 0.0f);

  /// Checks C in {1, 3} and finiteness, then clamps values into [0, 1].
  static ImageTensor from_tensor(const Tensor& t);
  Tensor to_tensor() const;

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Per-pixel matching cost over a stack of depth planes, D x H x W.
struct CostVolume {
  std::vector<float> cost;
  std::vector<double> planes;
  int height = 0;
  int width = 0;

  int depth_count() const { return static_cast<int>(planes.size()); }
  float at(int d, int y, int x) const {
    return cost[(static_cast<std::size_t>(d) * height + y) * width + x];
  }
  float& at(int d, int y, int x) {
    return cost[(static_cast<std::size_t>(d) * height + y) * width + x];
  }
  Tensor to_tensor() const;
};

/// D planes uniform in inverse depth; index 0 is d_min (nearest), D-1 is d_max.
std::vector<double> depth_planes(double d_min, double d_max, int count);

/// K (R + t (0, 0, 1/d)) K^-1: maps homogeneous reference pixels on the
/// fronto-parallel plane at depth d to neighbour pixels.
Mat3 homography(const Intrinsics& K, const RelativePose& rel, double depth);

/// Bilinear sample location for a reference pixel, or false if the projective
/// coordinate is non-positive or the 2x2 footprint leaves the image.
bool warp_sample_in_bounds(const Mat3& H, double x, double y, int width, int height);

/// Each output pixel u samples `neighbor` at H u (pixel centers on integer
/// coordinates). Out-of-bounds and behind-camera samples read as 0.
ImageTensor warp_image(const ImageTensor& neighbor, const Mat3& H);

struct NeighborView {
  const ImageTensor* image;
  RelativePose rel;  // reference camera -> neighbour camera
};

/// Sum over channels of |warped neighbour - reference| at each plane, averaged
/// over all neighbours.
CostVolume cost_volume(const ImageTensor& ref, std::span<const NeighborView> neighbors,
                       const Intrinsics& K, std::span<const double> planes);

}  // namespace gpmvs
