#include "gpmvs/online_gp.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "gpmvs/error.hpp"

namespace gpmvs {
namespace {

void symmetrize(Eigen::Matrix2d& S) {
  const double off = 0.5 * (S(0, 1) + S(1, 0));
  S(0, 1) = S(1, 0) = off;
}

}  // namespace

Eigen::Matrix2d steady_state_covariance(const KernelSpec& spec) {
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  S(0, 0) = spec.gamma_sq;
  S(1, 1) = 3.0 * spec.gamma_sq / (spec.ell * spec.ell);
  return S;
}

Eigen::Matrix2d matern32_generator(double ell) {
  Eigen::Matrix2d F;
  F << 0.0, 1.0, -3.0 / (ell * ell), -2.0 * std::sqrt(3.0) / ell;
  return F;
}

OnlineState init_state(const KernelSpec& spec, Eigen::Index dims) {
  spec.validate();
  if (spec.family != KernelFamily::Matern32)
    throw Error(ErrorCode::UnsupportedKernel,
                "online fusion requires the matern32 kernel, got " + std::string(to_string(spec.family)));
  if (dims < 1) throw Error(ErrorCode::InvalidArgument, "latent dimension must be positive");
  OnlineState s;
  s.mu = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, dims);
  s.Sigma = steady_state_covariance(spec);
  s.spec = spec;
  return s;
}

Transition transition(double delta, const KernelSpec& spec) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "pose increment must be nonnegative");
  const double lambda = -std::sqrt(3.0) / spec.ell;
  const double decay = std::exp(lambda * delta);
  Transition tr;
  tr.Phi << 1.0 - lambda * delta, delta, -lambda * lambda * delta, 1.0 + lambda * delta;
  tr.Phi *= decay;
  const Eigen::Matrix2d S0 = steady_state_covariance(spec);
  tr.Q = S0 - tr.Phi * S0 * tr.Phi.transpose();
  symmetrize(tr.Q);
  return tr;
}

void predict(OnlineState& state, double delta) {
  if (delta == 0.0) return;
  const Transition tr = transition(delta, state.spec);
  state.mu = tr.Phi * state.mu;
  // Phi Sigma Phi^T + Q rewritten around Sigma0; leaves the steady state fixed exactly.
  const Eigen::Matrix2d S0 = steady_state_covariance(state.spec);
  state.Sigma = S0 + tr.Phi * (state.Sigma - S0) * tr.Phi.transpose();
  symmetrize(state.Sigma);
}

void update(OnlineState& state, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != state.mu.cols()) {
    std::ostringstream os;
    os << "observation has " << y.size() << " entries, state has " << state.mu.cols();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  const double innovation_var = state.Sigma(0, 0) + state.spec.sigma_sq;
  if (!(innovation_var > 0.0))
    throw Error(ErrorCode::FactorizationFailure, "innovation variance is not positive");
  const Eigen::Vector2d gain = state.Sigma.col(0) / innovation_var;
  const Eigen::RowVectorXd residual = y.transpose() - state.mu.row(0);
  state.mu.noalias() += gain * residual;
  state.Sigma -= gain * state.Sigma.row(0);
  symmetrize(state.Sigma);
}

Eigen::VectorXd extract_latent(const OnlineState& state) { return state.mu.row(0).transpose(); }

Eigen::VectorXd step(OnlineState& state, const Pose& pose, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (!is_rotation(pose.R) || !pose.t.allFinite())
    throw Error(ErrorCode::InvalidPose, "online step received an invalid pose");
  if (state.last_pose) predict(state, pose_distance(*state.last_pose, pose));
  update(state, y);
  state.last_pose = pose;
  ++state.frame_count;
  return extract_latent(state);
}

namespace {

void put(std::vector<char>& buf, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
  double next() {
    if (pos_ + 8 > data_.size()) throw Error(ErrorCode::Format, "state snapshot is truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_state(const OnlineState& state, const std::filesystem::path& path) {
  std::vector<char> buf;
  buf.reserve(8 * (9 + 2 * state.mu.cols() + 12));
  put(buf, state.spec.gamma_sq);
  put(buf, state.spec.ell);
  put(buf, state.spec.sigma_sq);
  put(buf, static_cast<double>(state.mu.cols()));
  put(buf, static_cast<double>(state.frame_count));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) put(buf, state.Sigma(r, c));
  for (int r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < state.mu.cols(); ++c) put(buf, state.mu(r, c));
  if (state.frame_count > 0 && state.last_pose) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put(buf, state.last_pose->R(r, c));
    for (int r = 0; r < 3; ++r) put(buf, state.last_pose->t(r));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

OnlineState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  Reader rd(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  KernelSpec spec;
  spec.gamma_sq = rd.next();
  spec.ell = rd.next();
  spec.sigma_sq = rd.next();
  const double dims = rd.next();
  const double frames = rd.next();
  if (!(dims >= 1.0) || dims != std::floor(dims) || !(frames >= 0.0) || frames != std::floor(frames))
    throw Error(ErrorCode::Format, "state snapshot has an invalid header");
  OnlineState s = init_state(spec, static_cast<Eigen::Index>(dims));
  s.frame_count = static_cast<std::int64_t>(frames);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) s.Sigma(r, c) = rd.next();
  for (int r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < s.mu.cols(); ++c) s.mu(r, c) = rd.next();
  if (s.frame_count > 0) {
    Mat3 R;
    Vec3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) R(r, c) = rd.next();
    for (int r = 0; r < 3; ++r) t(r) = rd.next();
    s.last_pose = Pose::checked(R, t);
  }
  if (!rd.done()) throw Error(ErrorCode::Format, "state snapshot has trailing bytes");
  return s;
}

}  // namespace gpmvs
