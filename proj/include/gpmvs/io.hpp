#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpmvs/depth_metrics.hpp"
#include "gpmvs/pipeline.hpp"
#include "gpmvs/plane_sweep.hpp"
#include "gpmvs/pose.hpp"

namespace gpmvs {

/// One JSON object per line: {"R": [9 values, row-major], "t": [3 values]}.
/// Blank lines are skipped; every rotation is validated.
std::vector<Pose> read_poses_jsonl(std::istream& in);
std::vector<Pose> read_poses_jsonl(const std::filesystem::path& path);
void write_poses_jsonl(std::ostream& out, const std::vector<Pose>& poses);
void write_poses_jsonl(const std::filesystem::path& path, const std::vector<Pose>& poses);

nlohmann::json to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Intrinsics& K);
Intrinsics intrinsics_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const KernelSpec& spec);

/// Fields absent from `j` keep the values already in `cfg`.
void apply_config_json(const nlohmann::json& j, PipelineConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Rank-2 latent tensor <-> N x M matrix.
Eigen::MatrixXd matrix_from_tensor(const Tensor& t);
Tensor tensor_from_matrix(const Eigen::MatrixXd& m);

}  // namespace gpmvs
