#include "gpmvs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "gpmvs/error.hpp"

namespace gpmvs {

void LatentDims::validate() const {
  if (channels < 1 || height < 1 || width < 1)
    throw Error(ErrorCode::InvalidArgument, "latent dims must be positive");
}

void PipelineConfig::validate() const {
  kernel.validate();
  latent_dims.validate();
  depth_planes(planes.d_min, planes.d_max, planes.count);
  if (!(selection.angle_min_deg >= 0.0) || !(selection.trans_min >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "selection thresholds must be nonnegative");
  if (batch_cap < 1) throw Error(ErrorCode::InvalidArgument, "batch cap must be positive");
  if (mode == FusionMode::Online && !no_gp && kernel.family != KernelFamily::Matern32)
    throw Error(ErrorCode::UnsupportedKernel, "online fusion requires the matern32 kernel");
}

std::optional<std::size_t> select_neighbor(std::span<const Pose> history, const Pose& current,
                                           const SelectionThresholds& thresholds) {
  const double angle_min = thresholds.angle_min_deg * std::numbers::pi / 180.0;
  for (std::size_t k = history.size(); k-- > 0;) {
    const Pose& p = history[k];
    if (rotation_angle(p.R, current.R) > angle_min || (p.t - current.t).norm() > thresholds.trans_min)
      return k;
  }
  return std::nullopt;
}

namespace {

struct Span1 {
  int begin, end;
};

Span1 pool_range(int k, int source, int target) {
  const auto b = static_cast<int>((static_cast<long long>(k) * source) / target);
  const auto e = static_cast<int>(((static_cast<long long>(k) + 1) * source + target - 1) / target);
  return {b, std::max(e, b + 1)};
}

// Adaptive average pooling of a D x H x W volume given by `value(d, y, x)`.
template <typename F>
Eigen::VectorXd adaptive_pool(int D, int H, int W, const LatentDims& dims, F value) {
  dims.validate();
  Eigen::VectorXd out(dims.size());
  Eigen::Index idx = 0;
  for (int c = 0; c < dims.channels; ++c) {
    const Span1 rd = pool_range(c, D, dims.channels);
    for (int i = 0; i < dims.height; ++i) {
      const Span1 ry = pool_range(i, H, dims.height);
      for (int j = 0; j < dims.width; ++j) {
        const Span1 rx = pool_range(j, W, dims.width);
        double sum = 0.0;
        for (int d = rd.begin; d < rd.end; ++d)
          for (int y = ry.begin; y < ry.end; ++y)
            for (int x = rx.begin; x < rx.end; ++x) sum += value(d, y, x);
        const double cells = static_cast<double>(rd.end - rd.begin) * (ry.end - ry.begin) * (rx.end - rx.begin);
        out(idx++) = sum / cells;
      }
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd toy_encoder(const CostVolume& volume, const ImageTensor& ref, const LatentDims& dims) {
  if (volume.height != ref.height() || volume.width != ref.width() || volume.planes.empty() ||
      volume.cost.size() != volume.planes.size() * static_cast<std::size_t>(volume.height) * volume.width)
    throw Error(ErrorCode::DimensionMismatch, "cost volume and reference image shapes disagree");
  return adaptive_pool(volume.depth_count(), volume.height, volume.width, dims,
                       [&](int d, int y, int x) { return static_cast<double>(volume.at(d, y, x)); });
}

Eigen::VectorXd reference_only_encoding(const ImageTensor& ref, const LatentDims& dims) {
  const double inv_c = 1.0 / ref.channels();
  return adaptive_pool(1, ref.height(), ref.width(), dims, [&](int, int y, int x) {
    double s = 0.0;
    for (int c = 0; c < ref.channels(); ++c) s += ref.at(c, y, x);
    return s * inv_c;
  });
}

Eigen::MatrixXd toy_decoder(const Eigen::Ref<const Eigen::VectorXd>& latent, const LatentDims& dims,
                            int height, int width, std::span<const double> planes) {
  dims.validate();
  if (latent.size() != dims.size()) {
    std::ostringstream os;
    os << "latent of size " << latent.size() << " cannot be reshaped to " << dims.channels << "x"
       << dims.height << "x" << dims.width;
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (height < 1 || width < 1) throw Error(ErrorCode::InvalidArgument, "output size must be positive");
  if (planes.empty()) throw Error(ErrorCode::InvalidRange, "decoder needs the plane range");
  const auto [near_it, far_it] = std::minmax_element(planes.begin(), planes.end());
  const double lo = 1.0 / *far_it;
  const double hi = 1.0 / *near_it;
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  const Eigen::Index cell = static_cast<Eigen::Index>(dims.height) * dims.width;
  Eigen::MatrixXd mean_map = Eigen::MatrixXd::Zero(dims.height, dims.width);
  for (int c = 0; c < dims.channels; ++c)
    for (int i = 0; i < dims.height; ++i)
      for (int j = 0; j < dims.width; ++j) mean_map(i, j) += latent(c * cell + i * dims.width + j);
  mean_map /= dims.channels;

  Eigen::MatrixXd disp(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>((static_cast<long long>(y) * dims.height) / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>((static_cast<long long>(x) * dims.width) / width);
      disp(y, x) = std::clamp(mid + half * mean_map(sy, sx), lo, hi);
    }
  }
  return disp;
}

DepthMap disparity_to_depth(const Eigen::MatrixXd& disparity) {
  DepthMap m(static_cast<int>(disparity.rows()), static_cast<int>(disparity.cols()));
  for (Eigen::Index y = 0; y < disparity.rows(); ++y) {
    for (Eigen::Index x = 0; x < disparity.cols(); ++x) {
      const auto i = static_cast<std::size_t>(y * disparity.cols() + x);
      const double d = disparity(y, x);
      m.depth[i] = d > 0.0 ? 1.0 / d : 0.0;
      m.valid[i] = d > 0.0 && std::isfinite(d);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "collinear") return TrajectoryKind::Collinear;
  if (name == "arc") return TrajectoryKind::Arc;
  if (name == "random") return TrajectoryKind::Random;
  throw Error(ErrorCode::InvalidArgument, "unknown trajectory kind '" + std::string(name) + "'");
}

std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Collinear: return "collinear";
    case TrajectoryKind::Arc: return "arc";
    case TrajectoryKind::Random: return "random";
  }
  return "unknown";
}

namespace {

Mat3 look_rotation(double yaw, double pitch, double roll) {
  return axis_angle(Vec3::UnitY(), yaw) * axis_angle(Vec3::UnitX(), pitch) * axis_angle(Vec3::UnitZ(), roll);
}

}  // namespace

std::vector<Pose> simulate_trajectory(const TrajectoryOptions& opts) {
  if (opts.frames < 1) throw Error(ErrorCode::InvalidArgument, "trajectory needs at least one frame");
  std::mt19937_64 rng(opts.seed);
  std::vector<Pose> poses;
  poses.reserve(opts.frames);

  switch (opts.kind) {
    case TrajectoryKind::Collinear: {
      if (!(opts.spacing >= 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be nonnegative");
      const bool random_steps = opts.spacing_max > opts.spacing;
      std::uniform_real_distribution<double> step(opts.spacing, random_steps ? opts.spacing_max : opts.spacing);
      double x = 0.0;
      for (std::size_t i = 0; i < opts.frames; ++i) {
        if (i > 0) x += random_steps ? step(rng) : opts.spacing;
        poses.push_back(Pose{Mat3::Identity(), Vec3(x, 0.0, 0.0)});
      }
      break;
    }
    case TrajectoryKind::Arc: {
      const Vec3 center(0.0, 0.0, opts.scene_depth);
      const double radius = opts.scene_depth;
      const double half = opts.arc_half_angle_deg * std::numbers::pi / 180.0;
      for (std::size_t i = 0; i < opts.frames; ++i) {
        const double f = opts.frames == 1 ? 0.5 : static_cast<double>(i) / (opts.frames - 1);
        const double theta = -half + 2.0 * half * f;
        Mat3 R;
        R.col(0) = Vec3(std::cos(theta), 0.0, std::sin(theta));
        R.col(1) = Vec3::UnitY();
        R.col(2) = Vec3(-std::sin(theta), 0.0, std::cos(theta));
        poses.push_back(Pose{R, center - radius * R.col(2)});
      }
      break;
    }
    case TrajectoryKind::Random: {
      std::normal_distribution<double> step_t(0.0, 0.05);
      std::normal_distribution<double> step_r(0.0, 2.0 * std::numbers::pi / 180.0);
      const double max_angle = 20.0 * std::numbers::pi / 180.0;
      Vec3 t = Vec3::Zero();
      double yaw = 0.0, pitch = 0.0, roll = 0.0;
      for (std::size_t i = 0; i < opts.frames; ++i) {
        if (i > 0) {
          t += Vec3(step_t(rng), step_t(rng), step_t(rng));
          t = t.cwiseMax(Vec3(-1.0, -1.0, -0.5)).cwiseMin(Vec3(1.0, 1.0, 0.5));
          yaw = std::clamp(yaw + step_r(rng), -max_angle, max_angle);
          pitch = std::clamp(pitch + step_r(rng), -max_angle, max_angle);
          roll = std::clamp(roll + step_r(rng), -max_angle, max_angle);
        }
        poses.push_back(Pose{look_rotation(yaw, pitch, roll), t});
      }
      break;
    }
  }
  return poses;
}

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double lattice(std::int64_t i, std::int64_t j, std::uint64_t salt) {
  const std::uint64_t h = mix(salt ^ mix(static_cast<std::uint64_t>(i) ^ mix(static_cast<std::uint64_t>(j))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(double x, double y, std::uint64_t salt) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto i = static_cast<std::int64_t>(fx);
  const auto j = static_cast<std::int64_t>(fy);
  const double u = fade(x - fx);
  const double v = fade(y - fy);
  const double a = lattice(i, j, salt) * (1 - u) + lattice(i + 1, j, salt) * u;
  const double b = lattice(i, j + 1, salt) * (1 - u) + lattice(i + 1, j + 1, salt) * u;
  return a * (1 - v) + b * v;
}

}  // namespace

Eigen::Vector3d PlaneScene::albedo(double x, double y) const {
  Eigen::Vector3d rgb;
  const double sx = x / texture_scale;
  const double sy = y / texture_scale;
  for (int c = 0; c < 3; ++c) {
    const std::uint64_t salt = mix(seed * 7 + static_cast<std::uint64_t>(c));
    rgb(c) = 0.7 * value_noise(sx, sy, salt) + 0.3 * value_noise(2.31 * sx + 17.0, 2.31 * sy - 5.0, ~salt);
  }
  return rgb;
}

RenderedView render_plane(const PlaneScene& scene, const Pose& pose, const Intrinsics& K) {
  K.validate();
  RenderedView view{ImageTensor(3, K.height, K.width), DepthMap(K.height, K.width)};
  const Mat3 Kinv = K.K_inverse();
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Vec3 ray_cam = Kinv * Vec3(x, y, 1.0);  // unit camera z
      const Vec3 ray_world = pose.R * ray_cam;
      if (std::abs(ray_world.z()) < 1e-12) continue;
      const double s = (scene.plane_z - pose.t.z()) / ray_world.z();
      if (!(s > 0.0)) continue;
      const Vec3 hit = pose.t + s * ray_world;
      const Eigen::Vector3d rgb = scene.albedo(hit.x(), hit.y());
      for (int c = 0; c < 3; ++c) view.image.at(c, y, x) = static_cast<float>(rgb(c));
      const auto i = static_cast<std::size_t>(y) * K.width + x;
      view.depth.depth[i] = s;
      view.depth.valid[i] = true;
    }
  }
  return view;
}

// ---------------------------------------------------------------------------

FrameEncoder::FrameEncoder(const PipelineConfig& cfg, std::optional<Intrinsics> K)
    : cfg_(cfg), K_(std::move(K)),
      planes_(depth_planes(cfg.planes.d_min, cfg.planes.d_max, cfg.planes.count)) {
  if (K_) K_->validate();
}

FrameEncoder::Encoded FrameEncoder::encode(const FrameInput& frame) {
  if (!is_rotation(frame.pose.R) || !frame.pose.t.allFinite())
    throw Error(ErrorCode::InvalidPose, "frame " + std::to_string(next_index_) + " has an invalid pose");
  const std::size_t index = next_index_++;
  Encoded out;

  if (frame.latent) {
    if (frame.latent->size() != cfg_.latent_dims.size())
      throw Error(ErrorCode::DimensionMismatch, "frame latent does not match the configured latent dims");
    out.latent = *frame.latent;
    return out;
  }
  if (!frame.image) throw Error(ErrorCode::InvalidArgument, "frame needs an image or a precomputed latent");
  if (!K_) throw Error(ErrorCode::InvalidArgument, "image frames need camera intrinsics");
  const ImageTensor& ref = *frame.image;

  std::vector<Pose> past;
  past.reserve(history_.size());
  for (const Past& p : history_) past.push_back(p.pose);
  const auto pick = select_neighbor(past, frame.pose, cfg_.selection);

  if (pick) {
    const Past& nbr = history_[*pick];
    const NeighborView view{&nbr.image, relative_pose(frame.pose, nbr.pose)};
    const CostVolume vol = cost_volume(ref, std::span(&view, 1), *K_, planes_);
    out.latent = toy_encoder(vol, ref, cfg_.latent_dims);
    out.neighbor = nbr.index;
  } else {
    out.latent = reference_only_encoding(ref, cfg_.latent_dims);
  }

  history_.push_back(Past{index, frame.pose, ref});
  while (history_.size() > cfg_.history_window) history_.pop_front();
  return out;
}

namespace {

std::optional<std::pair<int, int>> decode_size(const std::optional<Intrinsics>& K,
                                               const std::optional<std::pair<int, int>>& requested) {
  if (requested) return requested;
  if (K) return std::pair{K->height, K->width};
  return std::nullopt;
}

void finish_record(FrameRecord& rec, const FrameInput& frame, const LatentDims& dims,
                   const std::optional<std::pair<int, int>>& size, std::span<const double> planes) {
  if (!size) return;
  rec.disparity = toy_decoder(rec.fused_latent, dims, size->first, size->second, planes);
  if (frame.ground_truth) rec.metrics = evaluate(disparity_to_depth(*rec.disparity), *frame.ground_truth);
}

}  // namespace

OnlineRunner::OnlineRunner(const PipelineConfig& cfg, std::optional<Intrinsics> K,
                           std::optional<std::pair<int, int>> output_size)
    : cfg_(cfg), encoder_(cfg, K), output_size_(decode_size(K, output_size)),
      planes_(depth_planes(cfg.planes.d_min, cfg.planes.d_max, cfg.planes.count)) {
  cfg_.validate();
}

FrameRecord OnlineRunner::push(const FrameInput& frame) {
  FrameEncoder::Encoded enc = encoder_.encode(frame);
  FrameRecord rec;
  rec.pose = frame.pose;
  rec.neighbor = enc.neighbor;
  if (cfg_.no_gp) {
    rec.fused_latent = enc.latent;
  } else {
    if (!state_) state_ = init_state(cfg_.kernel, enc.latent.size());
    rec.fused_latent = step(*state_, frame.pose, enc.latent);
  }
  rec.latent = std::move(enc.latent);
  finish_record(rec, frame, cfg_.latent_dims, output_size_, planes_);
  return rec;
}

namespace {

std::optional<MetricsReport> pooled_metrics(std::span<const FrameRecord> records,
                                            std::span<const FrameInput> frames) {
  DepthMap pred, gt;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].disparity || !frames[i].ground_truth) continue;
    const DepthMap p = disparity_to_depth(*records[i].disparity);
    const DepthMap& g = *frames[i].ground_truth;
    pred.depth.insert(pred.depth.end(), p.depth.begin(), p.depth.end());
    pred.valid.insert(pred.valid.end(), p.valid.begin(), p.valid.end());
    gt.depth.insert(gt.depth.end(), g.depth.begin(), g.depth.end());
    gt.valid.insert(gt.valid.end(), g.valid.begin(), g.valid.end());
  }
  if (gt.depth.empty()) return std::nullopt;
  pred.height = gt.height = 1;
  pred.width = gt.width = static_cast<int>(gt.depth.size());
  return evaluate(pred, gt);
}

}  // namespace

SequenceResult run_sequence(const PipelineConfig& cfg, std::span<const FrameInput> frames,
                            std::optional<Intrinsics> K, std::optional<std::pair<int, int>> output_size) {
  cfg.validate();
  SequenceResult result;
  if (frames.empty()) return result;

  if (cfg.mode == FusionMode::Online) {
    OnlineRunner runner(cfg, K, output_size);
    for (const FrameInput& f : frames) result.frames.push_back(runner.push(f));
  } else {
    if (frames.size() > cfg.batch_cap && !cfg.no_gp) {
      std::ostringstream os;
      os << frames.size() << " frames exceed the batch cap of " << cfg.batch_cap
         << "; use online mode for long sequences";
      throw Error(ErrorCode::BatchTooLarge, os.str());
    }
    FrameEncoder encoder(cfg, K);
    const Eigen::Index m = cfg.latent_dims.size();
    LatentMatrix Y(static_cast<Eigen::Index>(frames.size()), m);
    std::vector<Pose> poses;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      FrameEncoder::Encoded enc = encoder.encode(frames[i]);
      FrameRecord rec;
      rec.pose = frames[i].pose;
      rec.neighbor = enc.neighbor;
      Y.row(static_cast<Eigen::Index>(i)) = enc.latent.transpose();
      rec.latent = std::move(enc.latent);
      poses.push_back(frames[i].pose);
      result.frames.push_back(std::move(rec));
    }
    if (cfg.no_gp) {
      for (auto& rec : result.frames) rec.fused_latent = rec.latent;
    } else {
      BatchOptions opts;
      opts.max_frames = cfg.batch_cap;
      const BatchPosterior post = batch_posterior(gram_matrix(poses, cfg.kernel), Y, cfg.kernel.sigma_sq, opts);
      for (std::size_t i = 0; i < frames.size(); ++i)
        result.frames[i].fused_latent = post.mean.row(static_cast<Eigen::Index>(i)).transpose();
    }
    const auto size = decode_size(K, output_size);
    const auto planes = depth_planes(cfg.planes.d_min, cfg.planes.d_max, cfg.planes.count);
    for (std::size_t i = 0; i < frames.size(); ++i)
      finish_record(result.frames[i], frames[i], cfg.latent_dims, size, planes);
  }
  result.overall = pooled_metrics(result.frames, frames);
  return result;
}

}  // namespace gpmvs
