#include "spvi/vi_engine.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "spvi/parallel.hpp"
#include "spvi/rng.hpp"

namespace spvi {

namespace {

constexpr std::uint64_t kPosteriorStream = std::numeric_limits<std::uint64_t>::max();

double logsumexp(const Eigen::VectorXd& x) {
  const double mx = x.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((x.array() - mx).exp().sum());
}

void require_finite_weights(const Eigen::VectorXd& ell) {
  for (Eigen::Index k = 0; k < ell.size(); ++k)
    if (!std::isfinite(ell(k)))
      throw EstimatorError("non-finite log weight at draw " + std::to_string(k), static_cast<std::size_t>(k));
}

// Scatters per-block gradients into the flat eta ordering.
Eigen::VectorXd scatter(const ParamLayout& shape, const Eigen::VectorXd& d_mean, const Eigen::VectorXd& d_log_sd,
                        const Eigen::Vector2d& d_s2, const Eigen::Vector2d& d_nu) {
  VariationalParams tmp;
  tmp.shape = shape;
  tmp.set_gauss(d_mean, d_log_sd);
  tmp.ig_s2 = d_s2;
  tmp.ig_nu = d_nu;
  return flatten(tmp);
}

}  // namespace

GradientMode parse_gradient_mode(const std::string& name) {
  if (name == "score" || name == "score_function") return GradientMode::ScoreFunction;
  if (name == "hybrid" || name == "reparam_hybrid") return GradientMode::ReparamHybrid;
  throw std::invalid_argument("unknown gradient mode: " + name);
}

std::string to_string(GradientMode mode) {
  return mode == GradientMode::ScoreFunction ? "score_function" : "reparam_hybrid";
}

void VIConfig::validate() const {
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
  if (h < 2) throw std::invalid_argument("h must be at least 2");
  if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(adam_beta1 > 0 && adam_beta1 < 1)) throw std::invalid_argument("adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0 && adam_beta2 < 1)) throw std::invalid_argument("adam_beta2 must lie in (0, 1)");
  if (!(adam_eps > 0)) throw std::invalid_argument("adam_eps must be positive");
  if (smoothing_window < 1) throw std::invalid_argument("smoothing_window must be positive");
  if (posterior_draws < 100) throw std::invalid_argument("posterior_draws must be at least 100");
  if (!(ci_level > 0 && ci_level < 1)) throw std::invalid_argument("ci_level must lie in (0, 1)");
}

VITarget make_target(const SpatialSurvivalModel& model) {
  return {model.params(), [&model](const ModelParams& theta, ModelGradient* grad) {
            return model.log_joint(theta, grad);
          }};
}

DrawBatch draw_batch(const VariationalParams& eta, const VITarget& target, int h, std::uint64_t seed,
                     std::uint64_t iter, unsigned threads, bool with_gradient) {
  if (h < 1) throw std::invalid_argument("draw_batch: h must be positive");
  const auto n = static_cast<std::size_t>(h);
  DrawBatch b;
  b.draws.resize(n);
  b.log_p.resize(h);
  b.log_q.resize(h);
  if (with_gradient) {
    b.grad_g.resize(n);
    b.grad_full.resize(n);
  }
  parallel_for(n, threads, [&](std::size_t k) {
    Rng rng = substream(seed, iter, k);
    b.draws[k] = q_sample(eta, rng);
    const ModelParams& theta = b.draws[k].theta;
    const auto i = static_cast<Eigen::Index>(k);
    b.log_p(i) = target.log_joint(theta, with_gradient ? &b.grad_full[k] : nullptr);
    b.log_q(i) = q_log_pdf(eta, theta);
    if (with_gradient) b.grad_g[k] = eta.shape.gauss_gradient(b.grad_full[k]);
  });
  b.ell = b.log_p - b.log_q;
  return b;
}

double vr_bound_from_log_weights(const Eigen::VectorXd& ell, double alpha) {
  if (ell.size() == 0) throw std::invalid_argument("vr_bound_from_log_weights: no draws");
  require_finite_weights(ell);
  if (alpha == 1.0) return ell.mean();
  const double h = static_cast<double>(ell.size());
  return (logsumexp((1.0 - alpha) * ell) - std::log(h)) / (1.0 - alpha);
}

Eigen::VectorXd normalized_weights(const Eigen::VectorXd& ell, double alpha) {
  const Eigen::Index h = ell.size();
  if (alpha == 1.0) return Eigen::VectorXd::Constant(h, 1.0 / static_cast<double>(h));
  const Eigen::VectorXd z = (1.0 - alpha) * ell;
  const double lse = logsumexp(z);
  return (z.array() - lse).exp().matrix();
}

double estimate_vr_bound(const VariationalParams& eta, const VITarget& target, const VIConfig& cfg,
                         std::uint64_t iter) {
  if (cfg.alpha == 1.0) throw std::invalid_argument("estimate_vr_bound: alpha must differ from 1");
  const DrawBatch b = draw_batch(eta, target, cfg.h, cfg.seed, iter, cfg.threads, false);
  return vr_bound_from_log_weights(b.ell, cfg.alpha);
}

double estimate_elbo(const VariationalParams& eta, const VITarget& target, const VIConfig& cfg,
                     std::uint64_t iter) {
  const DrawBatch b = draw_batch(eta, target, cfg.h, cfg.seed, iter, cfg.threads, false);
  return vr_bound_from_log_weights(b.ell, 1.0);
}

GradientEstimate gradient_from_batch(const VariationalParams& eta, const DrawBatch& batch, const VIConfig& cfg) {
  const ParamLayout& shape = eta.shape;
  const double alpha = cfg.alpha;
  const Eigen::Index h = batch.ell.size();
  const double hd = static_cast<double>(h);

  GradientEstimate out;
  out.bound = vr_bound_from_log_weights(batch.ell, alpha);
  const Eigen::VectorXd w = normalized_weights(batch.ell, alpha);
  out.ess = 1.0 / w.squaredNorm();
  out.degenerate = h > 1 && w.maxCoeff() >= 0.999;

  // Coefficients multiplying the per-draw score in score-function terms.
  Eigen::VectorXd coef(h);
  if (alpha == 1.0) {
    const double centre = cfg.score_baseline ? batch.ell.mean() : 1.0;
    coef = (batch.ell.array() - centre).matrix() / hd;
  } else {
    const double b = cfg.score_baseline ? 1.0 / hd : 0.0;
    coef = (alpha / (1.0 - alpha)) * (w.array() - b).matrix();
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(eta.flat_size());
  if (cfg.gradient_mode == GradientMode::ScoreFunction) {
    for (Eigen::Index k = 0; k < h; ++k) grad += coef(k) * q_score(eta, batch.draws[static_cast<std::size_t>(k)].theta);
    out.grad = grad;
    return out;
  }

  if (batch.grad_g.size() != static_cast<std::size_t>(h))
    throw std::invalid_argument("gradient_from_batch: hybrid mode needs log-joint gradients");
  const Eigen::ArrayXd sd = eta.gauss_log_sd().array().exp();
  Eigen::VectorXd d_mean = Eigen::VectorXd::Zero(shape.gauss_dim());
  Eigen::VectorXd d_log_sd = Eigen::VectorXd::Zero(shape.gauss_dim());
  Eigen::Vector2d d_s2 = Eigen::Vector2d::Zero();
  Eigen::Vector2d d_nu = Eigen::Vector2d::Zero();
  const int ig_off = 2 * shape.gauss_dim();
  for (Eigen::Index k = 0; k < h; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::VectorXd& g = batch.grad_g[ks];
    d_mean += w(k) * g;
    d_log_sd += w(k) * (g.array() * sd * batch.draws[ks].eps.array() + 1.0).matrix();
    if (shape.spatial()) {
      const Eigen::VectorXd s = q_score(eta, batch.draws[ks].theta);
      d_s2 += coef(k) * s.segment<2>(ig_off);
      d_nu += coef(k) * s.segment<2>(ig_off + 2);
    }
  }
  out.grad = scatter(shape, d_mean, d_log_sd, d_s2, d_nu);
  return out;
}

GradientEstimate estimate_gradient(const VariationalParams& eta, const VITarget& target, const VIConfig& cfg,
                                   std::uint64_t iter) {
  const bool need_grad = cfg.gradient_mode == GradientMode::ReparamHybrid;
  const DrawBatch b = draw_batch(eta, target, cfg.h, cfg.seed, iter, cfg.threads, need_grad);
  return gradient_from_batch(eta, b, cfg);
}

void adam_step(AdamState& state, Eigen::VectorXd& x, const Eigen::VectorXd& grad, const VIConfig& cfg) {
  if (state.m.size() != x.size()) {
    state.m = Eigen::VectorXd::Zero(x.size());
    state.v = Eigen::VectorXd::Zero(x.size());
    state.t = 0;
  }
  state.t += 1;
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad;
  state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, state.t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, state.t);
  x.array() += cfg.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.adam_eps);
}

StoppingRule::StoppingRule(double tau, bool smooth, int window) : tau_(tau), smooth_(smooth), window_(window) {}

bool StoppingRule::push(double bound) {
  raw_.push_back(bound);
  if (!smooth_) {
    series_.push_back(bound);
  } else {
    if (static_cast<int>(raw_.size()) < window_) return false;
    double s = 0.0;
    for (auto it = raw_.end() - window_; it != raw_.end(); ++it) s += *it;
    series_.push_back(s / window_);
  }
  const std::size_t r = series_.size();
  if (r < 3) return false;
  const double l0 = series_[r - 1], l1 = series_[r - 2], l2 = series_[r - 3];
  return std::abs(l0 - l1) / std::abs(l0) < tau_ && std::abs(l1 - l2) / std::abs(l1) < tau_;
}

PosteriorDraws summarize_posterior(const VariationalParams& eta, int L, std::uint64_t seed, double ci_level,
                                   unsigned threads) {
  if (L < 100) throw std::invalid_argument("summarize_posterior: need at least 100 draws");
  const ParamLayout& shape = eta.shape;
  PosteriorDraws out;
  out.names = shape.constrained_names();
  out.draws.resize(L, shape.dim());
  parallel_for(static_cast<std::size_t>(L), threads, [&](std::size_t k) {
    Rng rng = substream(seed, kPosteriorStream, k);
    out.draws.row(static_cast<Eigen::Index>(k)) = shape.constrained_values(q_sample(eta, rng).theta).transpose();
  });
  out.summary = summarize_draws(out.draws, out.names, ci_level);
  Eigen::VectorXd means(shape.dim());
  for (Eigen::Index j = 0; j < means.size(); ++j) means(j) = out.summary.params[static_cast<std::size_t>(j)].mean;
  out.theta_hat = shape.from_constrained(means);
  return out;
}

FitResult fit(const VITarget& target, const VIConfig& cfg, const std::optional<VariationalParams>& init) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  VariationalParams eta = init ? *init : init_variational(target.shape);
  if (eta.flat_size() != init_variational(target.shape).flat_size())
    throw std::invalid_argument("fit: initial variational parameters do not match the target");
  Eigen::VectorXd x = flatten(eta);
  AdamState adam;
  StoppingRule rule(cfg.tau, cfg.smooth_stopping, cfg.smoothing_window);

  FitResult res;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const GradientEstimate est = estimate_gradient(eta, target, cfg, static_cast<std::uint64_t>(it));
    TraceRecord rec;
    rec.iter = it;
    rec.bound = est.bound;
    rec.grad_norm = est.grad.norm();
    rec.degenerate = est.degenerate;
    rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
    res.trace.push_back(rec);
    res.iterations = it;
    if (rule.push(est.bound)) {
      res.converged = true;
      break;
    }
    if (!est.grad.allFinite()) throw EstimatorError("non-finite gradient at iteration " + std::to_string(it), 0);
    adam_step(adam, x, est.grad, cfg);
    eta = unflatten(x, target.shape);
  }
  res.eta_star = eta;
  PosteriorDraws post = summarize_posterior(eta, cfg.posterior_draws, cfg.seed, cfg.ci_level, cfg.threads);
  res.draws = std::move(post.draws);
  res.draw_names = std::move(post.names);
  res.summary = std::move(post.summary);
  res.theta_hat = std::move(post.theta_hat);
  res.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return res;
}

FitResult fit(const SpatialSurvivalModel& model, const VIConfig& cfg, const std::optional<VariationalParams>& init) {
  const auto start = std::chrono::steady_clock::now();
  FitResult res = fit(make_target(model), cfg, init);
  res.nll = -model_log_lik(model.data(), res.theta_hat, model.kind());
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << "iter,bound,grad_norm\n" << std::setprecision(17);
  for (const auto& r : trace) os << r.iter << ',' << r.bound << ',' << r.grad_norm << '\n';
}

}  // namespace spvi
