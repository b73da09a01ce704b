#include "spvi/variational_family.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace spvi {

Eigen::VectorXd VariationalParams::gauss_mean() const {
  Eigen::VectorXd out(shape.gauss_dim());
  const int s = shape.num_scalars();
  const int mu_off = shape.explicit_mu ? 1 : 0;
  if (mu_off) out(0) = mu_scalar(0);
  out.segment(mu_off, shape.p) = mu_beta;
  out.segment(mu_off + shape.p, shape.m) = mu_gamma;
  out.tail(s - mu_off) = mu_scalar.tail(s - mu_off);
  return out;
}

Eigen::VectorXd VariationalParams::gauss_log_sd() const {
  Eigen::VectorXd out(shape.gauss_dim());
  const int s = shape.num_scalars();
  const int mu_off = shape.explicit_mu ? 1 : 0;
  if (mu_off) out(0) = log_sd_scalar(0);
  out.segment(mu_off, shape.p) = log_sd_beta;
  out.segment(mu_off + shape.p, shape.m) = log_sd_gamma;
  out.tail(s - mu_off) = log_sd_scalar.tail(s - mu_off);
  return out;
}

void VariationalParams::set_gauss(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_sd) {
  const int s = shape.num_scalars();
  const int mu_off = shape.explicit_mu ? 1 : 0;
  mu_scalar.resize(s);
  log_sd_scalar.resize(s);
  if (mu_off) {
    mu_scalar(0) = mean(0);
    log_sd_scalar(0) = log_sd(0);
  }
  mu_beta = mean.segment(mu_off, shape.p);
  log_sd_beta = log_sd.segment(mu_off, shape.p);
  mu_gamma = mean.segment(mu_off + shape.p, shape.m);
  log_sd_gamma = log_sd.segment(mu_off + shape.p, shape.m);
  mu_scalar.tail(s - mu_off) = mean.tail(s - mu_off);
  log_sd_scalar.tail(s - mu_off) = log_sd.tail(s - mu_off);
}

VariationalParams init_variational(const ParamLayout& shape, const VariationalInit& init) {
  VariationalParams eta;
  eta.shape = shape;
  const int s = shape.num_scalars();
  eta.mu_beta = Eigen::VectorXd::Constant(shape.p, init.mean);
  eta.log_sd_beta = Eigen::VectorXd::Constant(shape.p, init.log_sd);
  eta.mu_gamma = Eigen::VectorXd::Constant(shape.m, init.mean);
  eta.log_sd_gamma = Eigen::VectorXd::Constant(shape.m, init.log_sd);
  eta.mu_scalar = Eigen::VectorXd::Constant(s, init.mean);
  eta.log_sd_scalar = Eigen::VectorXd::Constant(s, init.log_sd);
  if (init.mu_beta) {
    if (init.mu_beta->size() != shape.p) throw std::invalid_argument("init_variational: mu_beta length");
    eta.mu_beta = *init.mu_beta;
  }
  if (init.mu_gamma) {
    if (init.mu_gamma->size() != shape.m) throw std::invalid_argument("init_variational: mu_gamma length");
    eta.mu_gamma = *init.mu_gamma;
  }
  if (init.mu_scalar) {
    if (init.mu_scalar->size() != s) throw std::invalid_argument("init_variational: mu_scalar length");
    eta.mu_scalar = *init.mu_scalar;
  }
  const Eigen::Vector2d ig(std::log(init.ig.shape), std::log(init.ig.scale));
  eta.ig_s2 = ig;
  eta.ig_nu = ig;
  return eta;
}

double q_log_pdf(const VariationalParams& eta, const ModelParams& theta) {
  const ParamLayout& shape = eta.shape;
  double lp = diag_normal_log_pdf(shape.gauss_coords(theta), eta.gauss_mean(), eta.gauss_log_sd());
  if (shape.spatial()) {
    if (!(theta.kp.s2_gamma > 0) || !(theta.kp.nu > 0))
      throw std::domain_error("q_log_pdf: s2_gamma and nu must be positive");
    lp += invgamma_log_pdf(eta.q_s2(), theta.kp.s2_gamma) + invgamma_log_pdf(eta.q_nu(), theta.kp.nu);
  }
  return lp;
}

QDraw q_sample(const VariationalParams& eta, Rng& rng) {
  const ParamLayout& shape = eta.shape;
  std::normal_distribution<double> norm(0.0, 1.0);
  QDraw d;
  d.eps.resize(shape.gauss_dim());
  for (Eigen::Index k = 0; k < d.eps.size(); ++k) d.eps(k) = norm(rng);
  d.theta = shape.zero_params();
  shape.set_gauss_coords(d.theta, eta.gauss_mean() + (eta.gauss_log_sd().array().exp() * d.eps.array()).matrix());
  if (shape.spatial()) {
    d.theta.kp.s2_gamma = invgamma_sample(eta.q_s2(), rng);
    d.theta.kp.nu = invgamma_sample(eta.q_nu(), rng);
  }
  return d;
}

Eigen::VectorXd flatten(const VariationalParams& eta) {
  const ParamLayout& shape = eta.shape;
  Eigen::VectorXd flat(eta.flat_size());
  int k = 0;
  flat.segment(k, shape.p) = eta.mu_beta;
  k += shape.p;
  flat.segment(k, shape.p) = eta.log_sd_beta;
  k += shape.p;
  flat.segment(k, shape.m) = eta.mu_gamma;
  k += shape.m;
  flat.segment(k, shape.m) = eta.log_sd_gamma;
  k += shape.m;
  for (int s = 0; s < shape.num_scalars(); ++s) {
    flat(k++) = eta.mu_scalar(s);
    flat(k++) = eta.log_sd_scalar(s);
  }
  if (shape.spatial()) {
    flat.segment(k, 2) = eta.ig_s2;
    flat.segment(k + 2, 2) = eta.ig_nu;
  }
  return flat;
}

VariationalParams unflatten(const Eigen::VectorXd& flat, const ParamLayout& shape) {
  VariationalParams eta;
  eta.shape = shape;
  if (flat.size() != eta.flat_size()) throw std::invalid_argument("unflatten: length mismatch");
  int k = 0;
  eta.mu_beta = flat.segment(k, shape.p);
  k += shape.p;
  eta.log_sd_beta = flat.segment(k, shape.p);
  k += shape.p;
  eta.mu_gamma = flat.segment(k, shape.m);
  k += shape.m;
  eta.log_sd_gamma = flat.segment(k, shape.m);
  k += shape.m;
  const int s = shape.num_scalars();
  eta.mu_scalar.resize(s);
  eta.log_sd_scalar.resize(s);
  for (int i = 0; i < s; ++i) {
    eta.mu_scalar(i) = flat(k++);
    eta.log_sd_scalar(i) = flat(k++);
  }
  if (shape.spatial()) {
    eta.ig_s2 = flat.segment(k, 2);
    eta.ig_nu = flat.segment(k + 2, 2);
  }
  return eta;
}

std::vector<std::string> flat_names(const ParamLayout& shape) {
  std::vector<std::string> names;
  for (int j = 0; j < shape.p; ++j) names.push_back("mu_beta[" + std::to_string(j) + "]");
  for (int j = 0; j < shape.p; ++j) names.push_back("log_sd_beta[" + std::to_string(j) + "]");
  for (int i = 0; i < shape.m; ++i) names.push_back("mu_gamma[" + std::to_string(i) + "]");
  for (int i = 0; i < shape.m; ++i) names.push_back("log_sd_gamma[" + std::to_string(i) + "]");
  const auto all = shape.unconstrained_names();
  const int s = shape.num_scalars();
  const int mu_off = shape.explicit_mu ? 1 : 0;
  for (int i = 0; i < s; ++i) {
    const std::string& base = i < mu_off ? all[0] : all[static_cast<std::size_t>(shape.p + shape.m + i)];
    names.push_back("mean_" + base);
    names.push_back("log_sd_" + base);
  }
  if (shape.spatial()) {
    names.emplace_back("log_c_s2_gamma");
    names.emplace_back("log_d_s2_gamma");
    names.emplace_back("log_c_nu");
    names.emplace_back("log_d_nu");
  }
  return names;
}

namespace {

// d/d(log c, log d) of log IG(x; c, d).
Eigen::Vector2d ig_score(const InvGammaParams& q, double x) {
  return {q.shape * (std::log(q.scale) - digamma(q.shape) - std::log(x)), q.shape - q.scale / x};
}

}  // namespace

Eigen::VectorXd q_score(const VariationalParams& eta, const ModelParams& theta) {
  const ParamLayout& shape = eta.shape;
  const Eigen::VectorXd mean = eta.gauss_mean();
  const Eigen::VectorXd log_sd = eta.gauss_log_sd();
  const Eigen::VectorXd x = shape.gauss_coords(theta);
  const Eigen::ArrayXd inv_var = (-2.0 * log_sd.array()).exp();
  const Eigen::ArrayXd d_mean = (x - mean).array() * inv_var;
  const Eigen::ArrayXd d_log_sd = (x - mean).array().square() * inv_var - 1.0;

  // Scatter layout-ordered Gaussian scores into the flat ordering.
  VariationalParams tmp;
  tmp.shape = shape;
  tmp.set_gauss(d_mean.matrix(), d_log_sd.matrix());
  if (shape.spatial()) {
    tmp.ig_s2 = ig_score(eta.q_s2(), theta.kp.s2_gamma);
    tmp.ig_nu = ig_score(eta.q_nu(), theta.kp.nu);
  }
  return flatten(tmp);
}

double q_entropy(const VariationalParams& eta) {
  const Eigen::VectorXd log_sd = eta.gauss_log_sd();
  double h = log_sd.sum() + 0.5 * static_cast<double>(log_sd.size()) * (1.0 + std::log(2.0 * std::numbers::pi));
  if (eta.shape.spatial()) h += invgamma_entropy(eta.q_s2()) + invgamma_entropy(eta.q_nu());
  return h;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const VariationalParams& eta) {
  nlohmann::json j;
  j["model"] = to_string(eta.shape.model);
  j["p"] = eta.shape.p;
  j["m"] = eta.shape.m;
  j["explicit_mu"] = eta.shape.explicit_mu;
  j["flat_order"] = flat_names(eta.shape);
  j["flat"] = vec_json(flatten(eta));
  return j;
}

VariationalParams variational_from_json(const nlohmann::json& j) {
  ParamLayout shape;
  shape.model = parse_model(j.at("model").get<std::string>());
  shape.p = j.at("p").get<int>();
  shape.m = j.at("m").get<int>();
  shape.explicit_mu = j.value("explicit_mu", false);
  return unflatten(json_vec(j.at("flat")), shape);
}

}  // namespace spvi
