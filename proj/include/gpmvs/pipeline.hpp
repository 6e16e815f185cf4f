#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gpmvs/batch_gp.hpp"
#include "gpmvs/depth_metrics.hpp"
#include "gpmvs/kernels.hpp"
#include "gpmvs/online_gp.hpp"
#include "gpmvs/plane_sweep.hpp"
#include "gpmvs/pose.hpp"

namespace gpmvs {

// ---------------------------------------------------------------------------
// Configuration

enum class FusionMode { Batch, Online };

struct PlaneRange {
  double d_min = 0.5;
  double d_max = 50.0;
  int count = 64;
};

struct SelectionThresholds {
  double angle_min_deg = 15.0;
  double trans_min = 0.1;  // meters
};

/// Shape of the encoder bottleneck; the latent vector is its row-major flattening.
struct LatentDims {
  int channels = 512;
  int height = 8;
  int width = 10;

  Eigen::Index size() const { return static_cast<Eigen::Index>(channels) * height * width; }
  void validate() const;
};

struct PipelineConfig {
  KernelSpec kernel = KernelSpec::trained();
  FusionMode mode = FusionMode::Online;
  PlaneRange planes;
  SelectionThresholds selection;
  LatentDims latent_dims;
  std::size_t batch_cap = kDefaultBatchCap;
  // Past frames kept as neighbour candidates. Bounds online memory.
  std::size_t history_window = 32;
  // Pass encoder outputs straight to the decoder.
  bool no_gp = false;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Stages

/// Most recent pose in `history` whose rotation angle to `current` exceeds
/// angle_min_deg or whose camera center is farther than trans_min.
std::optional<std::size_t> select_neighbor(std::span<const Pose> history, const Pose& current,
                                           const SelectionThresholds& thresholds);

/// Block-mean pooling of the cost volume down to (channels, h, w), flattened
/// row-major. Cells follow adaptive-average-pooling boundaries
/// [floor(k S / T), ceil((k + 1) S / T)) so any target size is accepted.
Eigen::VectorXd toy_encoder(const CostVolume& volume, const ImageTensor& ref, const LatentDims& dims);

/// Encoding for frames without a usable neighbour: the channel-mean intensity
/// of the reference image pooled the same way.
Eigen::VectorXd reference_only_encoding(const ImageTensor& ref, const LatentDims& dims);

/// Nearest-neighbour upsampling of the channel-mean latent map to (height,
/// width), mapped by disp = mid + half * v and clamped to [1/d_max, 1/d_min].
/// A zero latent decodes to the midpoint of the inverse-depth range.
Eigen::MatrixXd toy_decoder(const Eigen::Ref<const Eigen::VectorXd>& latent, const LatentDims& dims,
                            int height, int width, std::span<const double> planes);

DepthMap disparity_to_depth(const Eigen::MatrixXd& disparity);

// ---------------------------------------------------------------------------
// Synthetic data

enum class TrajectoryKind { Collinear, Arc, Random };

TrajectoryKind parse_trajectory_kind(std::string_view name);
std::string_view to_string(TrajectoryKind kind);

struct TrajectoryOptions {
  TrajectoryKind kind = TrajectoryKind::Collinear;
  std::size_t frames = 10;
  std::uint64_t seed = 0;
  // Collinear: step along +x. A positive spacing_max draws each step uniformly
  // from [spacing, spacing_max].
  double spacing = 0.15;
  double spacing_max = 0.0;
  // Arc: cameras on a circle around `scene_depth` ahead of the origin.
  double arc_half_angle_deg = 30.0;
  double scene_depth = 3.0;
};

/// Collinear: pure translation, so pose distance is additive along the track.
/// Arc: inward-looking cameras equidistant from the scene center.
/// Random: bounded random walk in translation and orientation.
std::vector<Pose> simulate_trajectory(const TrajectoryOptions& opts);

/// Procedurally textured plane z = plane_z (world frame).
struct PlaneScene {
  double plane_z = 3.0;
  double texture_scale = 0.05;  // world size of one texture cell, meters
  std::uint64_t seed = 0;

  /// RGB albedo in [0, 1] at world point (x, y) on the plane.
  Eigen::Vector3d albedo(double x, double y) const;
};

struct RenderedView {
  ImageTensor image;
  DepthMap depth;
};

/// Ray-casts every pixel against the plane; misses are black and invalid.
RenderedView render_plane(const PlaneScene& scene, const Pose& pose, const Intrinsics& K);

// ---------------------------------------------------------------------------
// Sequence processing

struct FrameInput {
  Pose pose;
  std::optional<ImageTensor> image;
  std::optional<Eigen::VectorXd> latent;  // bypasses plane sweep and encoder
  std::optional<DepthMap> ground_truth;
};

struct FrameRecord {
  Pose pose;
  Eigen::VectorXd latent;
  Eigen::VectorXd fused_latent;
  std::optional<std::size_t> neighbor;
  std::optional<Eigen::MatrixXd> disparity;
  std::optional<MetricsReport> metrics;
};

struct SequenceResult {
  std::vector<FrameRecord> frames;
  std::optional<MetricsReport> overall;  // pooled over every frame with ground truth
};

/// Neighbour selection, cost volume and toy encoder over a bounded history.
class FrameEncoder {
 public:
  FrameEncoder(const PipelineConfig& cfg, std::optional<Intrinsics> K);

  struct Encoded {
    Eigen::VectorXd latent;
    std::optional<std::size_t> neighbor;  // global frame index
  };

  Encoded encode(const FrameInput& frame);
  std::size_t retained_frames() const { return history_.size(); }

 private:
  struct Past {
    std::size_t index;
    Pose pose;
    ImageTensor image;
  };

  PipelineConfig cfg_;
  std::optional<Intrinsics> K_;
  std::vector<double> planes_;
  std::deque<Past> history_;
  std::size_t next_index_ = 0;
};

/// Online pipeline: holds only the filter state and the encoder history.
class OnlineRunner {
 public:
  OnlineRunner(const PipelineConfig& cfg, std::optional<Intrinsics> K,
               std::optional<std::pair<int, int>> output_size = std::nullopt);

  FrameRecord push(const FrameInput& frame);

  std::size_t retained_frames() const { return encoder_.retained_frames(); }
  const std::optional<OnlineState>& state() const { return state_; }

 private:
  PipelineConfig cfg_;
  FrameEncoder encoder_;
  std::optional<std::pair<int, int>> output_size_;
  std::vector<double> planes_;
  std::optional<OnlineState> state_;
};

/// Runs every frame through encoding, fusion (batch or online), decoding and,
/// where ground truth exists, evaluation. Disparity is decoded at
/// `output_size` (H, W), or the intrinsics' image size when omitted.
SequenceResult run_sequence(const PipelineConfig& cfg, std::span<const FrameInput> frames,
                            std::optional<Intrinsics> K = std::nullopt,
                            std::optional<std::pair<int, int>> output_size = std::nullopt);

}  // namespace gpmvs
