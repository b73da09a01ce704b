#ifndef SPVI_VARIATIONAL_FAMILY_HPP
#define SPVI_VARIATIONAL_FAMILY_HPP

// Mean-field variational family: independent Gaussians on beta, gamma and the
// log-scale scalars, inverse-gamma factors on s2_gamma and nu.
//
// Flat ordering of eta:
//   mu_beta(p), log_sd_beta(p), mu_gamma(m), log_sd_gamma(m),
//   (mean, log_sd) for each scalar in ParamLayout order,
//   (log c, log d) for s2_gamma, (log c, log d) for nu   [only when m > 0]

#include <Eigen/Core>

#include <json.hpp>

#include <optional>
#include <vector>

#include "spvi/rng.hpp"
#include "spvi/survival_models.hpp"

namespace spvi {

struct VariationalParams {
  ParamLayout shape;
  Eigen::VectorXd mu_beta, log_sd_beta;
  Eigen::VectorXd mu_gamma, log_sd_gamma;
  Eigen::VectorXd mu_scalar, log_sd_scalar;
  Eigen::Vector2d ig_s2 = Eigen::Vector2d::Zero();  // (log c, log d)
  Eigen::Vector2d ig_nu = Eigen::Vector2d::Zero();

  /// Gaussian means / log-sds in ParamLayout coordinate order.
  Eigen::VectorXd gauss_mean() const;
  Eigen::VectorXd gauss_log_sd() const;
  void set_gauss(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_sd);

  InvGammaParams q_s2() const { return {std::exp(ig_s2(0)), std::exp(ig_s2(1))}; }
  InvGammaParams q_nu() const { return {std::exp(ig_nu(0)), std::exp(ig_nu(1))}; }

  int flat_size() const { return 2 * shape.gauss_dim() + (shape.spatial() ? 4 : 0); }
};

/// Optional overrides for the default starting point.
struct VariationalInit {
  double mean = 0.0;
  double log_sd = std::log(0.1);
  InvGammaParams ig{2.0, 1.0};
  std::optional<Eigen::VectorXd> mu_beta;
  std::optional<Eigen::VectorXd> mu_gamma;
  std::optional<Eigen::VectorXd> mu_scalar;
};

VariationalParams init_variational(const ParamLayout& shape, const VariationalInit& init = {});

/// log q(theta | eta).
double q_log_pdf(const VariationalParams& eta, const ModelParams& theta);

/// A draw together with the randomness that produced it.
struct QDraw {
  ModelParams theta;
  Eigen::VectorXd eps;  // standard-normal draws behind the Gaussian coordinates
};

QDraw q_sample(const VariationalParams& eta, Rng& rng);

Eigen::VectorXd flatten(const VariationalParams& eta);
VariationalParams unflatten(const Eigen::VectorXd& flat, const ParamLayout& shape);

/// Names of the flat coordinates, e.g. "mu_beta[0]", "log_c_nu".
std::vector<std::string> flat_names(const ParamLayout& shape);

/// d log q(theta | eta) / d eta, flat ordering.
Eigen::VectorXd q_score(const VariationalParams& eta, const ModelParams& theta);

/// Entropy of q; closed form for every block.
double q_entropy(const VariationalParams& eta);

nlohmann::json to_json(const VariationalParams& eta);
VariationalParams variational_from_json(const nlohmann::json& j);

}  // namespace spvi

#endif  // SPVI_VARIATIONAL_FAMILY_HPP
