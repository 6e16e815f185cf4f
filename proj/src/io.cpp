#include "gpmvs/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "gpmvs/error.hpp"

namespace gpmvs {

using nlohmann::json;

json to_json(const Pose& pose) {
  json R = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R.push_back(pose.R(r, c));
  return json{{"R", R}, {"t", {pose.t.x(), pose.t.y(), pose.t.z()}}};
}

Pose pose_from_json(const json& j) {
  if (!j.is_object() || !j.contains("R") || !j.contains("t"))
    throw Error(ErrorCode::Format, "pose objects need \"R\" and \"t\" fields");
  const json& R = j.at("R");
  const json& t = j.at("t");
  if (!R.is_array() || R.size() != 9 || !t.is_array() || t.size() != 3)
    throw Error(ErrorCode::Format, "pose \"R\" must have 9 entries and \"t\" 3");
  Mat3 rot;
  Vec3 trans;
  try {
    for (int i = 0; i < 9; ++i) rot(i / 3, i % 3) = R.at(i).get<double>();
    for (int i = 0; i < 3; ++i) trans(i) = t.at(i).get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("pose entries must be numbers: ") + e.what());
  }
  return Pose::checked(rot, trans);
}

std::vector<Pose> read_poses_jsonl(std::istream& in) {
  std::vector<Pose> poses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Format, "poses line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      poses.push_back(pose_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), "poses line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return poses;
}

std::vector<Pose> read_poses_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_poses_jsonl(in);
}

void write_poses_jsonl(std::ostream& out, const std::vector<Pose>& poses) {
  for (const Pose& p : poses) out << to_json(p).dump() << '\n';
}

void write_poses_jsonl(const std::filesystem::path& path, const std::vector<Pose>& poses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_poses_jsonl(out, poses);
}

json to_json(const Intrinsics& K) {
  return json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

Intrinsics intrinsics_from_json(const json& j) {
  Intrinsics K;
  try {
    K.fx = j.at("fx").get<double>();
    K.fy = j.at("fy").get<double>();
    K.cx = j.at("cx").get<double>();
    K.cy = j.at("cy").get<double>();
    K.width = j.at("width").get<int>();
    K.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("intrinsics: ") + e.what());
  }
  K.validate();
  return K;
}

json to_json(const MetricsReport& r) {
  return json{{"l1", r.l1},         {"l1_rel", r.l1_rel},   {"l1_inv", r.l1_inv},
              {"sc_inv", r.sc_inv}, {"n_valid", r.n_valid}, {"n_pred_rejected", r.n_pred_rejected}};
}

json to_json(const KernelSpec& spec) {
  return json{{"family", std::string(to_string(spec.family))},
              {"gamma2", spec.gamma_sq},
              {"ell", spec.ell},
              {"sigma2", spec.sigma_sq}};
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

void apply_config_json(const json& j, PipelineConfig& cfg) {
  if (!j.is_object()) throw Error(ErrorCode::Format, "config must be a JSON object");
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    if (k.contains("family")) cfg.kernel.family = parse_kernel_family(k.at("family").get<std::string>());
    read_field(k, "gamma2", cfg.kernel.gamma_sq);
    read_field(k, "ell", cfg.kernel.ell);
    read_field(k, "sigma2", cfg.kernel.sigma_sq);
  }
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "batch") cfg.mode = FusionMode::Batch;
    else if (mode == "online") cfg.mode = FusionMode::Online;
    else throw Error(ErrorCode::Format, "config mode must be 'batch' or 'online'");
  }
  if (j.contains("planes")) {
    const json& p = j.at("planes");
    read_field(p, "d_min", cfg.planes.d_min);
    read_field(p, "d_max", cfg.planes.d_max);
    read_field(p, "count", cfg.planes.count);
  }
  if (j.contains("selection")) {
    const json& s = j.at("selection");
    read_field(s, "angle_min_deg", cfg.selection.angle_min_deg);
    read_field(s, "trans_min", cfg.selection.trans_min);
  }
  if (j.contains("latent_dims")) {
    const json& d = j.at("latent_dims");
    if (!d.is_array() || d.size() != 3) throw Error(ErrorCode::Format, "latent_dims must be [channels, h, w]");
    cfg.latent_dims = LatentDims{d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
  }
  read_field(j, "batch_cap", cfg.batch_cap);
  read_field(j, "history_window", cfg.history_window);
  read_field(j, "no_gp", cfg.no_gp);
}

json to_json(const PipelineConfig& cfg) {
  return json{{"kernel", to_json(cfg.kernel)},
              {"mode", cfg.mode == FusionMode::Batch ? "batch" : "online"},
              {"planes", {{"d_min", cfg.planes.d_min}, {"d_max", cfg.planes.d_max}, {"count", cfg.planes.count}}},
              {"selection",
               {{"angle_min_deg", cfg.selection.angle_min_deg}, {"trans_min", cfg.selection.trans_min}}},
              {"latent_dims", {cfg.latent_dims.channels, cfg.latent_dims.height, cfg.latent_dims.width}},
              {"batch_cap", cfg.batch_cap},
              {"history_window", cfg.history_window},
              {"no_gp", cfg.no_gp}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Eigen::MatrixXd matrix_from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw Error(ErrorCode::DimensionMismatch, "latent tensors must be rank 2 (N,M)");
  Eigen::MatrixXd m(t.dims[0], t.dims[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[static_cast<std::size_t>(r * m.cols() + c)];
  return m;
}

Tensor tensor_from_matrix(const Eigen::MatrixXd& m) {
  Tensor t{{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
  t.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.data[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
  return t;
}

}  // namespace gpmvs
