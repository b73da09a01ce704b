#ifndef SPVI_DISTS_HPP
#define SPVI_DISTS_HPP

// Probability primitives shared by the likelihoods, priors and the
// variational family. Scalar routines are templated on the floating type;
// vector routines accept any Eigen expression.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "spvi/errors.hpp"
#include "spvi/rng.hpp"

namespace spvi {

/// Standardized location-scale error distribution.
enum class LocationScaleKind { SEV, Normal, Logistic };

LocationScaleKind parse_location_scale(const std::string& name);
std::string to_string(LocationScaleKind kind);

struct InvGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

template <typename Scalar>
struct BasicCholeskyFactor {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::Index dim = 0;
  Matrix lower;
  Scalar log_det = 0;  // log-determinant of the factored covariance
  Scalar jitter = 0;   // diagonal jitter that was needed, 0 if none
};
using CholeskyFactor = BasicCholeskyFactor<double>;

namespace detail {

template <typename Scalar>
void require_finite(Scalar z, const char* fn) {
  if (!std::isfinite(z)) throw std::domain_error(std::string(fn) + ": non-finite argument");
}

template <typename Scalar>
Scalar log_norm_const() {
  return Scalar(-0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

// log(1 - Phi(z)) for the standard normal, stable in the upper tail.
template <typename Scalar>
Scalar normal_log_sf(Scalar z) {
  if (z < Scalar(30)) return std::log(Scalar(0.5) * std::erfc(z / std::numbers::sqrt2_v<Scalar>));
  const Scalar z2 = z * z;
  const Scalar series = Scalar(1) - Scalar(1) / z2 + Scalar(3) / (z2 * z2) - Scalar(15) / (z2 * z2 * z2);
  return -Scalar(0.5) * z2 - std::log(z) + log_norm_const<Scalar>() + std::log(series);
}

}  // namespace detail

/// log phi(z) of the standardized density.
template <typename Scalar>
Scalar ls_log_pdf(LocationScaleKind kind, Scalar z) {
  detail::require_finite(z, "ls_log_pdf");
  switch (kind) {
    case LocationScaleKind::SEV:
      return z - std::exp(z);
    case LocationScaleKind::Normal:
      return detail::log_norm_const<Scalar>() - Scalar(0.5) * z * z;
    case LocationScaleKind::Logistic:
      // log e^z / (1+e^z)^2 = -|z| - 2 log1p(e^{-|z|})
      return -std::abs(z) - Scalar(2) * std::log1p(std::exp(-std::abs(z)));
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar ls_cdf(LocationScaleKind kind, Scalar z) {
  detail::require_finite(z, "ls_cdf");
  switch (kind) {
    case LocationScaleKind::SEV:
      return -std::expm1(-std::exp(z));
    case LocationScaleKind::Normal:
      return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
    case LocationScaleKind::Logistic:
      return Scalar(1) / (Scalar(1) + std::exp(-z));
  }
  return Scalar(0);
}

/// log(1 - Phi(z)); SEV uses the closed form -exp(z).
template <typename Scalar>
Scalar ls_log_survival(LocationScaleKind kind, Scalar z) {
  detail::require_finite(z, "ls_log_survival");
  switch (kind) {
    case LocationScaleKind::SEV:
      return -std::exp(z);
    case LocationScaleKind::Normal:
      return detail::normal_log_sf(z);
    case LocationScaleKind::Logistic:
      return z > 0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
  }
  return Scalar(0);
}

/// d/dz log phi(z).
template <typename Scalar>
Scalar ls_dlog_pdf(LocationScaleKind kind, Scalar z) {
  switch (kind) {
    case LocationScaleKind::SEV:
      return Scalar(1) - std::exp(z);
    case LocationScaleKind::Normal:
      return -z;
    case LocationScaleKind::Logistic:
      return Scalar(1) - Scalar(2) / (Scalar(1) + std::exp(-z));
  }
  return Scalar(0);
}

/// d/dz log(1 - Phi(z)), i.e. minus the hazard of the standardized error.
template <typename Scalar>
Scalar ls_dlog_survival(LocationScaleKind kind, Scalar z) {
  switch (kind) {
    case LocationScaleKind::SEV:
      return -std::exp(z);
    case LocationScaleKind::Normal:
      return -std::exp(ls_log_pdf(kind, z) - detail::normal_log_sf(z));
    case LocationScaleKind::Logistic:
      return -Scalar(1) / (Scalar(1) + std::exp(-z));
  }
  return Scalar(0);
}

/// Draw from the standardized distribution.
double ls_sample(LocationScaleKind kind, Rng& rng);

/// Digamma function for x > 0.
double digamma(double x);

inline double invgamma_log_pdf(const InvGammaParams& p, double x) {
  if (!(x > 0)) throw std::domain_error("invgamma_log_pdf: x must be positive");
  return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1) * std::log(x) - p.scale / x;
}

/// d/dx of invgamma_log_pdf.
inline double invgamma_dlog_pdf(const InvGammaParams& p, double x) {
  return -(p.shape + 1) / x + p.scale / (x * x);
}

/// x = scale / Gamma(shape, 1).
double invgamma_sample(const InvGammaParams& p, Rng& rng);

/// Differential entropy of IG(shape, scale).
inline double invgamma_entropy(const InvGammaParams& p) {
  return p.shape + std::log(p.scale) + std::lgamma(p.shape) - (1 + p.shape) * digamma(p.shape);
}

/// Cholesky of a symmetric matrix. On failure adds jitter 1e-10*mean(diag)
/// to the diagonal, growing 10x per retry, for at most five retries.
template <typename Derived>
BasicCholeskyFactor<typename Derived::Scalar> cholesky_with_jitter(const Eigen::MatrixBase<Derived>& cov,
                                                                  double nu_hint = 0.0) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (cov.rows() != cov.cols()) throw std::invalid_argument("cholesky_with_jitter: matrix not square");
  BasicCholeskyFactor<Scalar> out;
  out.dim = cov.rows();
  Matrix work = cov;
  const Scalar base = cov.rows() > 0 ? Scalar(1e-10) * cov.diagonal().mean() : Scalar(0);
  Scalar jitter = 0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    if (attempt > 0) {
      jitter = attempt == 1 ? base : jitter * Scalar(10);
      work = cov;
      work.diagonal().array() += jitter;
    }
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() != Eigen::Success) continue;
    out.lower = llt.matrixL();
    if (cov.rows() == 0 || out.lower.diagonal().minCoeff() > 0) {
      out.log_det = Scalar(2) * out.lower.diagonal().array().log().sum();
      out.jitter = jitter;
      return out;
    }
  }
  throw NotPositiveDefinite("covariance not positive definite after jitter retries (nu=" +
                                std::to_string(nu_hint) + ", jitter=" + std::to_string(double(jitter)) + ")",
                            nu_hint, double(jitter));
}

/// MVN(0, LL^T) log density via a triangular solve.
template <typename Derived>
typename Derived::Scalar mvn_log_pdf_chol(const Eigen::MatrixBase<Derived>& x,
                                          const BasicCholeskyFactor<typename Derived::Scalar>& chol) {
  using Scalar = typename Derived::Scalar;
  if (x.size() != chol.dim) throw std::invalid_argument("mvn_log_pdf_chol: dimension mismatch");
  if (chol.dim == 0) return Scalar(0);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> white = chol.lower.template triangularView<Eigen::Lower>().solve(x.derived().eval());
  return Scalar(chol.dim) * detail::log_norm_const<Scalar>() - Scalar(0.5) * chol.log_det -
         Scalar(0.5) * white.squaredNorm();
}

template <typename DX, typename DM, typename DS>
typename DX::Scalar diag_normal_log_pdf(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DM>& mean,
                                        const Eigen::MatrixBase<DS>& log_sd) {
  using Scalar = typename DX::Scalar;
  if (x.size() != mean.size() || x.size() != log_sd.size())
    throw std::invalid_argument("diag_normal_log_pdf: length mismatch");
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> z = (x - mean).array() * (-log_sd).array().exp();
  return Scalar(x.size()) * detail::log_norm_const<Scalar>() - log_sd.sum() - Scalar(0.5) * z.square().sum();
}

}  // namespace spvi

#endif  // SPVI_DISTS_HPP
