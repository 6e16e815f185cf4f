#include "gpmvs/plane_sweep.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gpmvs/error.hpp"

namespace gpmvs {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw Error(ErrorCode::InvalidArgument, "principal point must be finite");
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
}

Mat3 Intrinsics::K() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Intrinsics::K_inverse() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

ImageTensor::ImageTensor(int channels, int height, int width, float fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels != 1 && channels != 3)
    throw Error(ErrorCode::InvalidArgument, "images must have 1 or 3 channels");
  if (height < 1 || width < 1) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

ImageTensor ImageTensor::from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw Error(ErrorCode::DimensionMismatch, "image tensors must be rank 3 (C,H,W)");
  ImageTensor img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const float v = t.data[i];
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "image has non-finite intensities");
    img.data_[i] = std::clamp(v, 0.0f, 1.0f);
  }
  return img;
}

Tensor ImageTensor::to_tensor() const {
  return Tensor{{static_cast<std::uint32_t>(channels_), static_cast<std::uint32_t>(height_),
                 static_cast<std::uint32_t>(width_)},
                data_};
}

Tensor CostVolume::to_tensor() const {
  return Tensor{{static_cast<std::uint32_t>(planes.size()), static_cast<std::uint32_t>(height),
                 static_cast<std::uint32_t>(width)},
                cost};
}

std::vector<double> depth_planes(double d_min, double d_max, int count) {
  if (!(d_min > 0.0) || !(d_max > d_min) || !std::isfinite(d_max) || count < 2) {
    std::ostringstream os;
    os << "invalid plane range [" << d_min << ", " << d_max << "] with " << count << " planes";
    throw Error(ErrorCode::InvalidRange, os.str());
  }
  std::vector<double> planes(static_cast<std::size_t>(count));
  const double inv_near = 1.0 / d_min;
  const double inv_far = 1.0 / d_max;
  planes.front() = d_min;
  planes.back() = d_max;
  for (int k = 1; k + 1 < count; ++k) {
    const double f = static_cast<double>(k) / (count - 1);
    planes[k] = 1.0 / (inv_near + f * (inv_far - inv_near));
  }
  return planes;
}

Mat3 homography(const Intrinsics& K, const RelativePose& rel, double depth) {
  if (!(depth > 0.0)) throw Error(ErrorCode::InvalidArgument, "plane depth must be positive");
  Mat3 M = rel.R;
  M.col(2) += rel.t / depth;
  return K.K() * M * K.K_inverse();
}

namespace {

struct Bilinear {
  int x0, y0, x1, y1;
  double ax, ay;
};

// Footprint of the sample at (u, v); false when it leaves the image.
bool locate(double u, double v, int width, int height, Bilinear& b) {
  if (!(u >= 0.0) || !(v >= 0.0) || u > width - 1 || v > height - 1) return false;
  b.x0 = std::min(static_cast<int>(u), std::max(width - 2, 0));
  b.y0 = std::min(static_cast<int>(v), std::max(height - 2, 0));
  b.x1 = std::min(b.x0 + 1, width - 1);
  b.y1 = std::min(b.y0 + 1, height - 1);
  b.ax = u - b.x0;
  b.ay = v - b.y0;
  return true;
}

bool project(const Mat3& H, double x, double y, double& u, double& v) {
  const double w = H(2, 0) * x + H(2, 1) * y + H(2, 2);
  if (!(w > 0.0)) return false;
  u = (H(0, 0) * x + H(0, 1) * y + H(0, 2)) / w;
  v = (H(1, 0) * x + H(1, 1) * y + H(1, 2)) / w;
  return std::isfinite(u) && std::isfinite(v);
}

double sample(const ImageTensor& img, int c, const Bilinear& b) {
  const double top = (1.0 - b.ax) * img.at(c, b.y0, b.x0) + b.ax * img.at(c, b.y0, b.x1);
  const double bottom = (1.0 - b.ax) * img.at(c, b.y1, b.x0) + b.ax * img.at(c, b.y1, b.x1);
  return (1.0 - b.ay) * top + b.ay * bottom;
}

}  // namespace

bool warp_sample_in_bounds(const Mat3& H, double x, double y, int width, int height) {
  double u = 0.0, v = 0.0;
  Bilinear b{};
  return project(H, x, y, u, v) && locate(u, v, width, height, b);
}

ImageTensor warp_image(const ImageTensor& neighbor, const Mat3& H) {
  ImageTensor out(neighbor.channels(), neighbor.height(), neighbor.width());
  for (int y = 0; y < neighbor.height(); ++y) {
    for (int x = 0; x < neighbor.width(); ++x) {
      double u = 0.0, v = 0.0;
      Bilinear b{};
      if (!project(H, x, y, u, v) || !locate(u, v, neighbor.width(), neighbor.height(), b)) continue;
      for (int c = 0; c < neighbor.channels(); ++c) out.at(c, y, x) = static_cast<float>(sample(neighbor, c, b));
    }
  }
  return out;
}

CostVolume cost_volume(const ImageTensor& ref, std::span<const NeighborView> neighbors,
                       const Intrinsics& K, std::span<const double> planes) {
  K.validate();
  if (neighbors.empty()) throw Error(ErrorCode::InvalidArgument, "cost volume needs at least one neighbour");
  if (ref.width() != K.width || ref.height() != K.height)
    throw Error(ErrorCode::DimensionMismatch, "reference image size differs from the intrinsics");
  for (const NeighborView& n : neighbors) {
    if (n.image == nullptr || n.image->width() != ref.width() || n.image->height() != ref.height() ||
        n.image->channels() != ref.channels())
      throw Error(ErrorCode::DimensionMismatch, "neighbour image shape differs from the reference");
  }
  if (planes.empty()) throw Error(ErrorCode::InvalidRange, "cost volume needs at least one plane");

  const int W = ref.width();
  const int Hh = ref.height();
  const int C = ref.channels();
  const double inv_count = 1.0 / static_cast<double>(neighbors.size());

  CostVolume vol;
  vol.planes.assign(planes.begin(), planes.end());
  vol.width = W;
  vol.height = Hh;
  vol.cost.assign(planes.size() * static_cast<std::size_t>(W) * Hh, 0.0f);

  std::vector<Mat3> hs(neighbors.size());
  for (std::size_t d = 0; d < planes.size(); ++d) {
    for (std::size_t n = 0; n < neighbors.size(); ++n) hs[n] = homography(K, neighbors[n].rel, planes[d]);
    for (int y = 0; y < Hh; ++y) {
      for (int x = 0; x < W; ++x) {
        double total = 0.0;
        for (std::size_t n = 0; n < neighbors.size(); ++n) {
          double u = 0.0, v = 0.0;
          Bilinear b{};
          const bool valid = project(hs[n], x, y, u, v) && locate(u, v, W, Hh, b);
          for (int c = 0; c < C; ++c) {
            const double warped = valid ? sample(*neighbors[n].image, c, b) : 0.0;
            total += std::abs(warped - static_cast<double>(ref.at(c, y, x)));
          }
        }
        vol.at(static_cast<int>(d), y, x) = static_cast<float>(total * inv_count);
      }
    }
  }
  return vol;
}

}  // namespace gpmvs
