#include "spvi/survival_models.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

#include "spvi/errors.hpp"

namespace spvi {

ModelKind parse_model(const std::string& name) {
  if (name == "aft" || name == "AFT" || name == "cem") return ModelKind::SpatialAFT;
  if (name == "ph" || name == "PH") return ModelKind::SpatialPH;
  if (name == "generic") return ModelKind::Generic;
  throw std::invalid_argument("unknown model: " + name);
}

std::string to_string(ModelKind model) {
  switch (model) {
    case ModelKind::SpatialAFT:
      return "aft";
    case ModelKind::SpatialPH:
      return "ph";
    case ModelKind::Generic:
      return "generic";
  }
  return "aft";
}

void Dataset::validate(Eigen::Index num_locations) const {
  for (std::size_t k = 0; k < units.size(); ++k) {
    const Unit& u = units[k];
    const std::string who = "unit '" + u.unit_id + "'";
    if (!(u.time > 0) || !std::isfinite(u.time)) throw DataError(who + ": time must be positive");
    if (u.event != 0 && u.event != 1) throw DataError(who + ": event must be 0 or 1");
    if (u.location < 0 || u.location >= num_locations) throw DataError(who + ": location index out of range");
    if (u.path.empty()) throw DataError(who + ": empty covariate path");
    double t = 0.0;
    for (const Segment& s : u.path) {
      if (s.t_start != t) throw DataError(who + ": covariate segments are not contiguous from 0");
      if (!(s.t_end > s.t_start)) throw DataError(who + ": empty covariate segment");
      if (s.x.size() != p) throw DataError(who + ": covariate length mismatch");
      t = s.t_end;
    }
    if (t != u.time) throw DataError(who + ": covariate path does not end at the event time");
  }
}

Unit make_unit(std::string id, int location, double time, int event, Eigen::VectorXd x) {
  Unit u;
  u.unit_id = std::move(id);
  u.location = location;
  u.time = time;
  u.event = event;
  u.path.push_back(Segment{0.0, time, std::move(x)});
  return u;
}

void ModelGradient::reset(int p, int m) {
  mu = sigma_l = a_l = b_l = s2_gamma = nu = 0.0;
  beta = Eigen::VectorXd::Zero(p);
  gamma = Eigen::VectorXd::Zero(m);
}

// --- ParamLayout -----------------------------------------------------------

std::vector<std::string> ParamLayout::unconstrained_names() const {
  std::vector<std::string> names;
  if (explicit_mu) names.emplace_back("mu");
  for (int j = 0; j < p; ++j) names.push_back("beta[" + std::to_string(j) + "]");
  for (int i = 0; i < m; ++i) names.push_back("gamma[" + std::to_string(i) + "]");
  if (model == ModelKind::SpatialAFT) {
    names.emplace_back("sigma_l");
  } else if (model == ModelKind::SpatialPH) {
    names.emplace_back("a_l");
    names.emplace_back("b_l");
  }
  if (spatial()) {
    names.emplace_back("log_s2_gamma");
    names.emplace_back("log_nu");
  }
  return names;
}

std::vector<std::string> ParamLayout::constrained_names() const {
  auto names = unconstrained_names();
  for (auto& n : names) {
    if (n == "sigma_l") n = "sigma";
    else if (n == "a_l") n = "a";
    else if (n == "b_l") n = "b";
    else if (n == "log_s2_gamma") n = "s2_gamma";
    else if (n == "log_nu") n = "nu";
  }
  return names;
}

ModelParams ParamLayout::zero_params() const {
  ModelParams theta;
  theta.model = model;
  theta.beta = Eigen::VectorXd::Zero(p);
  theta.gamma = Eigen::VectorXd::Zero(m);
  return theta;
}

Eigen::VectorXd ParamLayout::gauss_coords(const ModelParams& theta) const {
  Eigen::VectorXd g(gauss_dim());
  int k = 0;
  if (explicit_mu) g(k++) = theta.mu;
  g.segment(k, p) = theta.beta;
  k += p;
  g.segment(k, m) = theta.gamma;
  k += m;
  if (model == ModelKind::SpatialAFT) {
    g(k++) = theta.sigma_l;
  } else if (model == ModelKind::SpatialPH) {
    g(k++) = theta.a_l;
    g(k++) = theta.b_l;
  }
  return g;
}

void ParamLayout::set_gauss_coords(ModelParams& theta, const Eigen::VectorXd& g) const {
  if (g.size() != gauss_dim()) throw std::invalid_argument("set_gauss_coords: length mismatch");
  int k = 0;
  theta.model = model;
  if (explicit_mu) theta.mu = g(k++);
  theta.beta = g.segment(k, p);
  k += p;
  theta.gamma = g.segment(k, m);
  k += m;
  if (model == ModelKind::SpatialAFT) {
    theta.sigma_l = g(k++);
  } else if (model == ModelKind::SpatialPH) {
    theta.a_l = g(k++);
    theta.b_l = g(k++);
  }
}

Eigen::VectorXd ParamLayout::gauss_gradient(const ModelGradient& grad) const {
  Eigen::VectorXd g(gauss_dim());
  int k = 0;
  if (explicit_mu) g(k++) = grad.mu;
  g.segment(k, p) = grad.beta;
  k += p;
  g.segment(k, m) = grad.gamma;
  k += m;
  if (model == ModelKind::SpatialAFT) {
    g(k++) = grad.sigma_l;
  } else if (model == ModelKind::SpatialPH) {
    g(k++) = grad.a_l;
    g(k++) = grad.b_l;
  }
  return g;
}

Eigen::VectorXd ParamLayout::to_unconstrained(const ModelParams& theta) const {
  Eigen::VectorXd v(dim());
  v.head(gauss_dim()) = gauss_coords(theta);
  if (spatial()) {
    v(gauss_dim()) = std::log(theta.kp.s2_gamma);
    v(gauss_dim() + 1) = std::log(theta.kp.nu);
  }
  return v;
}

ModelParams ParamLayout::from_unconstrained(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw std::invalid_argument("from_unconstrained: length mismatch");
  ModelParams theta = zero_params();
  set_gauss_coords(theta, v.head(gauss_dim()));
  if (spatial()) {
    theta.kp.s2_gamma = std::exp(v(gauss_dim()));
    theta.kp.nu = std::exp(v(gauss_dim() + 1));
  }
  return theta;
}

Eigen::VectorXd ParamLayout::constrained_values(const ModelParams& theta) const {
  Eigen::VectorXd v = to_unconstrained(theta);
  int k = (explicit_mu ? 1 : 0) + p + m;
  if (model == ModelKind::SpatialAFT) {
    v(k) = std::exp(v(k));
  } else if (model == ModelKind::SpatialPH) {
    v(k) = std::exp(v(k));
    v(k + 1) = std::exp(v(k + 1));
  }
  if (spatial()) {
    v(gauss_dim()) = theta.kp.s2_gamma;
    v(gauss_dim() + 1) = theta.kp.nu;
  }
  return v;
}

ModelParams ParamLayout::from_constrained(const Eigen::VectorXd& values) const {
  if (values.size() != dim()) throw std::invalid_argument("from_constrained: length mismatch");
  Eigen::VectorXd v = values;
  int k = (explicit_mu ? 1 : 0) + p + m;
  if (model == ModelKind::SpatialAFT) {
    v(k) = std::log(v(k));
  } else if (model == ModelKind::SpatialPH) {
    v(k) = std::log(v(k));
    v(k + 1) = std::log(v(k + 1));
  }
  if (spatial()) {
    v(gauss_dim()) = std::log(v(gauss_dim()));
    v(gauss_dim() + 1) = std::log(v(gauss_dim() + 1));
  }
  return from_unconstrained(v);
}

// --- likelihoods -------------------------------------------------------------

double aft_log_lik(const Dataset& d, const ModelParams& theta, LocationScaleKind kind, ModelGradient* grad) {
  if (theta.model != ModelKind::SpatialAFT) throw std::invalid_argument("aft_log_lik: parameters are not AFT");
  if (theta.beta.size() != d.p) throw std::invalid_argument("aft_log_lik: beta length mismatch");
  const double sigma = std::exp(theta.sigma_l);
  const bool have_gamma = theta.gamma.size() > 0;
  Eigen::VectorXd xbar(d.p);
  std::vector<double> log_w;
  double total = 0.0;
  for (const Unit& u : d.units) {
    const double g = have_gamma ? theta.gamma(u.location) : 0.0;
    // log u(t) = log sum_s exp(-x_s'beta) * dt_s, with exposure-weighted mean covariate.
    double log_u;
    if (u.path.size() == 1) {
      const Segment& s = u.path.front();
      log_u = std::log(s.t_end - s.t_start) - s.x.dot(theta.beta);
      if (grad) xbar = s.x;
    } else {
      log_w.resize(u.path.size());
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < u.path.size(); ++k) {
        const Segment& s = u.path[k];
        log_w[k] = std::log(s.t_end - s.t_start) - s.x.dot(theta.beta);
        top = std::max(top, log_w[k]);
      }
      double acc = 0.0;
      for (double lw : log_w) acc += std::exp(lw - top);
      log_u = top + std::log(acc);
      if (grad) {
        xbar.setZero();
        for (std::size_t k = 0; k < u.path.size(); ++k) xbar += std::exp(log_w[k] - log_u) * u.path[k].x;
      }
    }
    const double z = (log_u - theta.mu - g) / sigma;
    if (u.event) {
      const Eigen::VectorXd& xl = u.x_at_end();
      total += ls_log_pdf(kind, z) - theta.sigma_l - xl.dot(theta.beta) - log_u;
      if (grad) {
        const double psi = ls_dlog_pdf(kind, z);
        grad->beta += -psi / sigma * xbar - xl + xbar;
        grad->mu += -psi / sigma;
        if (have_gamma) grad->gamma(u.location) += -psi / sigma;
        grad->sigma_l += -psi * z - 1.0;
      }
    } else {
      total += ls_log_survival(kind, z);
      if (grad) {
        const double kappa = ls_dlog_survival(kind, z);
        grad->beta += -kappa / sigma * xbar;
        grad->mu += -kappa / sigma;
        if (have_gamma) grad->gamma(u.location) += -kappa / sigma;
        grad->sigma_l += -kappa * z;
      }
    }
  }
  return total;
}

namespace {

// t^{b+1} and t^{b+1} log t with the t = 0 limits.
inline double pow1(double t, double bp1) { return t > 0 ? std::pow(t, bp1) : 0.0; }
inline double pow1_log(double t, double bp1) { return t > 0 ? std::pow(t, bp1) * std::log(t) : 0.0; }

}  // namespace

double ph_cum_hazard_at(const Unit& unit, const ModelParams& theta, double t) {
  const double a = std::exp(theta.a_l);
  const double bp1 = std::exp(theta.b_l) + 1.0;
  const double g = theta.gamma.size() > 0 ? theta.gamma(unit.location) : 0.0;
  double h = 0.0;
  for (const Segment& s : unit.path) {
    if (s.t_start >= t) break;
    const double end = std::min(s.t_end, t);
    h += std::exp(g + s.x.dot(theta.beta)) * a / bp1 * (pow1(end, bp1) - pow1(s.t_start, bp1));
  }
  return h;
}

double ph_cum_hazard(const Unit& unit, const ModelParams& theta) { return ph_cum_hazard_at(unit, theta, unit.time); }

double ph_log_lik(const Dataset& d, const ModelParams& theta, ModelGradient* grad) {
  if (theta.model != ModelKind::SpatialPH) throw std::invalid_argument("ph_log_lik: parameters are not PH");
  if (theta.beta.size() != d.p) throw std::invalid_argument("ph_log_lik: beta length mismatch");
  const double a = std::exp(theta.a_l);
  const double b = std::exp(theta.b_l);
  const double bp1 = b + 1.0;
  const bool have_gamma = theta.gamma.size() > 0;
  double total = 0.0;
  for (const Unit& u : d.units) {
    const double g = have_gamma ? theta.gamma(u.location) : 0.0;
    double cum = 0.0;
    double dcum_db = 0.0;
    for (const Segment& s : u.path) {
      const double scale = std::exp(g + s.x.dot(theta.beta)) * a;
      const double diff = pow1(s.t_end, bp1) - pow1(s.t_start, bp1);
      const double hs = scale * diff / bp1;
      cum += hs;
      if (grad) {
        grad->beta -= hs * s.x;
        dcum_db += scale * ((pow1_log(s.t_end, bp1) - pow1_log(s.t_start, bp1)) / bp1 - diff / (bp1 * bp1));
      }
    }
    double ll = -cum;
    if (u.event) {
      const Eigen::VectorXd& xl = u.x_at_end();
      ll += g + theta.a_l + b * std::log(u.time) + xl.dot(theta.beta);
      if (grad) grad->beta += xl;
    }
    total += ll;
    if (grad) {
      const double dg = (u.event ? 1.0 : 0.0) - cum;
      grad->a_l += dg;
      if (have_gamma) grad->gamma(u.location) += dg;
      grad->b_l += b * ((u.event ? std::log(u.time) : 0.0) - dcum_db);
    }
  }
  return total;
}

double log_prior_and_re(const ModelParams& theta, const SpatialLayout& layout, const PriorConfig& priors,
                        ModelGradient* grad) {
  const Eigen::Index m = layout.size();
  if (theta.gamma.size() == 0) return 0.0;
  if (theta.gamma.size() != m) throw std::invalid_argument("log_prior_and_re: gamma length mismatch");
  const double s2 = theta.kp.s2_gamma;
  const double nu = theta.kp.nu;
  if (!(s2 > 0) || !(nu > 0)) throw std::domain_error("log_prior_and_re: s2_gamma and nu must be positive");

  const CholeskyFactor chol = assemble_covariance(layout, theta.kp);
  double lp = mvn_log_pdf_chol(theta.gamma, chol);
  lp += invgamma_log_pdf(priors.s2, s2) + invgamma_log_pdf(priors.nu, nu);

  if (grad) {
    // Sigma^{-1} from the factor; alpha = Sigma^{-1} gamma.
    const auto L = chol.lower.triangularView<Eigen::Lower>();
    Eigen::MatrixXd inv = L.solve(Eigen::MatrixXd::Identity(m, m));
    inv = L.transpose().solve(inv);
    const Eigen::VectorXd alpha = inv * theta.gamma;
    grad->gamma -= alpha;
    const double quad = theta.gamma.dot(alpha);
    grad->s2_gamma += -0.5 * static_cast<double>(m) / s2 + 0.5 * quad / s2 + invgamma_dlog_pdf(priors.s2, s2);
    // dSigma/dnu = Sigma .* D / nu^2
    const Eigen::MatrixXd sigma = s2 * correlation_matrix(layout, nu);
    const Eigen::MatrixXd dsig = (sigma.array() * layout.dist.array()).matrix() / (nu * nu);
    const double trace_term = (inv.array() * dsig.array()).sum();
    grad->nu += -0.5 * trace_term + 0.5 * alpha.dot(dsig * alpha) + invgamma_dlog_pdf(priors.nu, nu);
  }
  return lp;
}

double model_log_lik(const Dataset& d, const ModelParams& theta, LocationScaleKind kind) {
  if (theta.model == ModelKind::Generic) throw std::invalid_argument("model_log_lik: generic parameters have no likelihood");
  return theta.model == ModelKind::SpatialAFT ? aft_log_lik(d, theta, kind) : ph_log_lik(d, theta);
}

double log_joint(const Dataset& d, const ModelParams& theta, const SpatialLayout& layout, const PriorConfig& priors,
                 LocationScaleKind kind, ModelGradient* grad) {
  if (grad) grad->reset(static_cast<int>(theta.beta.size()), static_cast<int>(theta.gamma.size()));
  if (theta.model == ModelKind::Generic) throw std::invalid_argument("log_joint: generic parameters have no likelihood");
  const double ll = theta.model == ModelKind::SpatialAFT ? aft_log_lik(d, theta, kind, grad)
                                                        : ph_log_lik(d, theta, grad);
  return ll + log_prior_and_re(theta, layout, priors, grad);
}

// --- SpatialSurvivalModel ------------------------------------------------------

SpatialSurvivalModel::SpatialSurvivalModel(Dataset data, SpatialLayout layout, PriorConfig priors, ModelKind model,
                                           LocationScaleKind kind, bool explicit_mu)
    : data_(std::move(data)), layout_(std::move(layout)), priors_(priors), kind_(kind) {
  data_.validate(layout_.size());
  params_.model = model;
  params_.p = data_.p;
  params_.m = static_cast<int>(layout_.size());
  params_.explicit_mu = explicit_mu && model == ModelKind::SpatialAFT;
}

double SpatialSurvivalModel::log_joint(const ModelParams& theta, ModelGradient* grad) const {
  return spvi::log_joint(data_, theta, layout_, priors_, kind_, grad);
}

double SpatialSurvivalModel::log_density(const Eigen::VectorXd& v, Eigen::VectorXd* grad) const {
  const ModelParams theta = params_.from_unconstrained(v);
  ModelGradient g;
  double lp = spvi::log_joint(data_, theta, layout_, priors_, kind_, grad ? &g : nullptr);
  if (params_.spatial()) lp += v(params_.gauss_dim()) + v(params_.gauss_dim() + 1);
  if (grad) {
    grad->resize(params_.dim());
    grad->head(params_.gauss_dim()) = params_.gauss_gradient(g);
    if (params_.spatial()) {
      (*grad)(params_.gauss_dim()) = theta.kp.s2_gamma * g.s2_gamma + 1.0;
      (*grad)(params_.gauss_dim() + 1) = theta.kp.nu * g.nu + 1.0;
    }
  }
  return lp;
}

}  // namespace spvi
