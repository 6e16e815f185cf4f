#include "gpmvs/batch_gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

#include "gpmvs/error.hpp"

namespace gpmvs {
namespace {

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double shift = 0.0;   // total diagonal shift: sigma_sq + jitter
  double jitter = 0.0;
};

void check_inputs(const GramMatrix& gram, const LatentMatrix& Y, double sigma_sq,
                  const BatchOptions& opts) {
  const Eigen::Index n = gram.C.rows();
  if (n == 0 || gram.C.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "gram matrix must be square and non-empty");
  if (Y.rows() != n || Y.cols() == 0) {
    std::ostringstream os;
    os << "latent matrix is " << Y.rows() << "x" << Y.cols() << ", expected " << n << " rows";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (static_cast<std::size_t>(n) > opts.max_frames) {
    std::ostringstream os;
    os << n << " frames exceed the batch cap of " << opts.max_frames
       << "; use online fusion for long sequences";
    throw Error(ErrorCode::BatchTooLarge, os.str());
  }
  if (!(sigma_sq >= 0.0) || !std::isfinite(sigma_sq))
    throw Error(ErrorCode::InvalidArgument, "sigma_sq must be nonnegative and finite");
  if (!Y.allFinite()) throw Error(ErrorCode::InvalidArgument, "latent matrix has non-finite entries");
}

Factorization factorize(const Eigen::MatrixXd& C, double sigma_sq, const BatchOptions& opts) {
  const Eigen::Index n = C.rows();
  const double scale = C.diagonal().maxCoeff();
  Factorization f;
  double jitter = 0.0;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    if (attempt > 0) jitter = opts.initial_jitter * scale * std::pow(10.0, attempt - 1);
    const double shift = sigma_sq + jitter;
    Eigen::MatrixXd A = C;
    A.diagonal().array() += shift;
    f.llt.compute(A);
    if (f.llt.info() == Eigen::Success && f.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      f.shift = shift;
      f.jitter = jitter;
      return f;
    }
  }
  std::ostringstream os;
  os << "C + sigma^2 I (" << n << "x" << n << ") is not positive definite after "
     << opts.max_retries << " jitter retries";
  throw Error(ErrorCode::FactorizationFailure, os.str());
}

}  // namespace

BatchPosterior batch_posterior(const GramMatrix& gram, const LatentMatrix& Y, double sigma_sq,
                               const BatchOptions& opts) {
  check_inputs(gram, Y, sigma_sq, opts);
  const Factorization f = factorize(gram.C, sigma_sq, opts);
  const double s = f.shift;
  const Eigen::Index n = gram.C.rows();

  // With A = C + s I: C A^-1 = I - s A^-1, so the mean is Y - s A^-1 Y and
  // diag(C - C A^-1 C) = s - s^2 diag(A^-1). Both are exact at s = 0.
  BatchPosterior post;
  post.jitter = f.jitter;
  post.mean = Y;
  if (s > 0.0) post.mean.noalias() -= s * f.llt.solve(Y);

  const Eigen::MatrixXd Linv =
      f.llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd ainv_diag = Linv.colwise().squaredNorm().transpose();
  post.var = (s - s * s * ainv_diag.array()).cwiseMax(0.0).matrix();
  return post;
}

double log_marginal_likelihood(const GramMatrix& gram, const LatentMatrix& Y, double sigma_sq,
                               const BatchOptions& opts) {
  check_inputs(gram, Y, sigma_sq, opts);
  const Factorization f = factorize(gram.C, sigma_sq, opts);
  const auto n = static_cast<double>(gram.C.rows());
  const auto m = static_cast<double>(Y.cols());
  const Eigen::MatrixXd W = f.llt.matrixL().solve(Y);
  const double quad = W.squaredNorm();
  const double logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * quad - 0.5 * m * logdet - 0.5 * m * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace gpmvs
