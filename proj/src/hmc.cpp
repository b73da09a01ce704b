#include "spvi/hmc.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "spvi/rng.hpp"

namespace spvi {

void HMCConfig::validate() const {
  if (warmup_iters < 0) throw std::invalid_argument("warmup_iters must be non-negative");
  if (sample_iters < 1) throw std::invalid_argument("sample_iters must be positive");
  if (leapfrog_steps < 1) throw std::invalid_argument("leapfrog_steps must be positive");
  if (!(target_accept > 0 && target_accept < 1)) throw std::invalid_argument("target_accept must lie in (0, 1)");
  if (initial_step_size < 0) throw std::invalid_argument("initial_step_size must be non-negative");
}

LeapfrogState leapfrog(const Eigen::VectorXd& theta, const Eigen::VectorXd& momentum, double step_size,
                       int n_steps, const GradFn& grad_fn, const Eigen::VectorXd& inv_mass) {
  const Eigen::VectorXd minv = inv_mass.size() ? inv_mass : Eigen::VectorXd::Ones(theta.size());
  LeapfrogState s;
  s.theta = theta;
  s.momentum = momentum;
  s.grad.resize(theta.size());
  // Leaving the density's domain (overflowed scales, a covariance that
  // cannot be factorized) counts as a divergence.
  auto eval = [&] {
    try {
      s.log_p = grad_fn(s.theta, &s.grad);
    } catch (const NotPositiveDefinite&) {
      s.log_p = -std::numeric_limits<double>::infinity();
    } catch (const std::domain_error&) {
      s.log_p = -std::numeric_limits<double>::infinity();
    }
  };
  eval();
  for (int i = 0; i < n_steps; ++i) {
    if (!std::isfinite(s.log_p) || !s.grad.allFinite()) {
      s.divergent = true;
      return s;
    }
    s.momentum += 0.5 * step_size * s.grad;
    s.theta += step_size * minv.cwiseProduct(s.momentum);
    eval();
    s.momentum += 0.5 * step_size * s.grad;
  }
  if (!std::isfinite(s.log_p) || !s.grad.allFinite() || !s.momentum.allFinite()) s.divergent = true;
  return s;
}

namespace {

double kinetic(const Eigen::VectorXd& r, const Eigen::VectorXd& minv) { return 0.5 * r.cwiseAbs2().dot(minv); }

Eigen::VectorXd draw_momentum(Eigen::Index dim, const Eigen::VectorXd& minv, Rng& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd r(dim);
  for (Eigen::Index i = 0; i < dim; ++i) r(i) = norm(rng) / std::sqrt(minv(i));
  return r;
}

// Doubles or halves the step until the one-step acceptance crosses 1/2.
double find_reasonable_step(const Eigen::VectorXd& theta, const GradFn& grad_fn, const Eigen::VectorXd& minv,
                            Rng& rng) {
  double eps = 1.0;
  Eigen::VectorXd grad(theta.size());
  const double lp0 = grad_fn(theta, &grad);
  const Eigen::VectorXd r = draw_momentum(theta.size(), minv, rng);
  const double h0 = lp0 - kinetic(r, minv);
  auto log_ratio = [&](double e) {
    const LeapfrogState s = leapfrog(theta, r, e, 1, grad_fn, minv);
    if (s.divergent) return -std::numeric_limits<double>::infinity();
    return s.log_p - kinetic(s.momentum, minv) - h0;
  };
  double lr = log_ratio(eps);
  const double dir = lr > std::log(0.5) ? 1.0 : -1.0;
  for (int i = 0; i < 60; ++i) {
    if (dir > 0 ? !(lr > std::log(0.5)) : lr > std::log(0.5)) break;
    eps *= std::pow(2.0, dir);
    lr = log_ratio(eps);
  }
  return eps;
}

struct DualAveraging {
  double mu = 0.0, h_bar = 0.0, log_eps_bar = 0.0;
  int m = 0;
  double target = 0.8;
  static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    h_bar = 0.0;
    log_eps_bar = 0.0;
    m = 0;
  }
  double update(double accept) {
    ++m;
    const double md = m;
    h_bar = (1.0 - 1.0 / (md + t0)) * h_bar + (target - accept) / (md + t0);
    const double log_eps = mu - std::sqrt(md) / gamma * h_bar;
    const double w = std::pow(md, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
  double final_step() const { return std::exp(log_eps_bar); }
};

}  // namespace

ChainResult run_chain(const GradFn& grad_fn, const Eigen::VectorXd& init, const HMCConfig& cfg) {
  cfg.validate();
  const Eigen::Index dim = init.size();
  Rng rng = substream(cfg.seed, 0, 0x484d43ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int l_lo = std::max(1, static_cast<int>(std::lround(0.8 * cfg.leapfrog_steps)));
  const int l_hi = std::max(l_lo, static_cast<int>(std::lround(1.2 * cfg.leapfrog_steps)));
  std::uniform_int_distribution<int> steps_dist(l_lo, l_hi);

  Eigen::VectorXd minv = Eigen::VectorXd::Ones(dim);
  Eigen::VectorXd theta = init;
  Eigen::VectorXd grad(dim);
  double lp = grad_fn(theta, &grad);
  if (!std::isfinite(lp)) throw std::invalid_argument("run_chain: log density not finite at the initial point");

  double eps = cfg.initial_step_size > 0 ? cfg.initial_step_size : find_reasonable_step(theta, grad_fn, minv, rng);
  DualAveraging da;
  da.target = cfg.target_accept;
  da.restart(eps);

  // Mass-matrix window: warmup iterations [15%, 75%).
  const int win_lo = static_cast<int>(0.15 * cfg.warmup_iters);
  const int win_hi = static_cast<int>(0.75 * cfg.warmup_iters);
  Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(dim), w_m2 = Eigen::VectorXd::Zero(dim);
  int w_n = 0;

  ChainResult res;
  res.draws.resize(cfg.sample_iters, dim);
  res.log_p.resize(cfg.sample_iters);
  double accept_sum = 0.0;
  const int total = cfg.warmup_iters + cfg.sample_iters;
  for (int it = 0; it < total; ++it) {
    const bool warmup = it < cfg.warmup_iters;
    const Eigen::VectorXd r0 = draw_momentum(dim, minv, rng);
    const double h0 = lp - kinetic(r0, minv);
    const LeapfrogState s = leapfrog(theta, r0, eps, steps_dist(rng), grad_fn, minv);
    double accept = 0.0;
    bool divergent = s.divergent;
    if (!divergent) {
      const double dh = s.log_p - kinetic(s.momentum, minv) - h0;
      if (!std::isfinite(dh) || dh < -1000.0) divergent = true;
      else accept = dh >= 0 ? 1.0 : std::exp(dh);
    }
    if (!divergent && unif(rng) < accept) {
      theta = s.theta;
      lp = s.log_p;
    }
    if (warmup) {
      eps = da.update(accept);
      if (cfg.adapt_mass && it >= win_lo && it < win_hi) {
        ++w_n;
        const Eigen::VectorXd delta = theta - w_mean;
        w_mean += delta / w_n;
        w_m2 += delta.cwiseProduct(theta - w_mean);
        if (it == win_hi - 1 && w_n > 2) {
          const double n = w_n;
          const Eigen::VectorXd var = w_m2 / (n - 1.0);
          minv = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
          eps = find_reasonable_step(theta, grad_fn, minv, rng);
          da.restart(eps);
        }
      }
      if (it == cfg.warmup_iters - 1) eps = da.final_step();
    } else {
      const int k = it - cfg.warmup_iters;
      res.draws.row(k) = theta.transpose();
      res.log_p(k) = lp;
      accept_sum += accept;
      if (divergent) ++res.divergent;
    }
  }
  res.step_size = eps;
  res.inv_mass = minv;
  res.accept_rate = accept_sum / cfg.sample_iters;
  res.healthy = res.divergent <= 0.1 * cfg.sample_iters;
  return res;
}

ChainResult run_chain(const SpatialSurvivalModel& model, const HMCConfig& cfg,
                      const std::optional<Eigen::VectorXd>& init) {
  const GradFn fn = [&model](const Eigen::VectorXd& v, Eigen::VectorXd* g) { return model.log_density(v, g); };
  const Eigen::VectorXd start = init ? *init : Eigen::VectorXd::Zero(model.params().dim());
  if (start.size() != model.params().dim()) throw std::invalid_argument("run_chain: initial point has wrong length");
  return run_chain(fn, start, cfg);
}

double ess(const Eigen::VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = chain.mean();
  const Eigen::VectorXd x = chain.array() - mean;
  const double c0 = x.squaredNorm() / n;
  if (!(c0 > 0)) return static_cast<double>(n);
  auto rho = [&](Eigen::Index lag) { return x.head(n - lag).dot(x.tail(n - lag)) / n / c0; };
  // Sum of autocorrelation pairs, truncated at the first non-positive pair
  // and forced monotone.
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  return static_cast<double>(n) / std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
}

std::optional<double> split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> halves;
  for (const auto& c : chains) {
    const Eigen::Index half = c.size() / 2;
    if (half < 2) throw std::invalid_argument("split_rhat: chains too short");
    halves.emplace_back(c.head(half));
    halves.emplace_back(c.tail(half));
  }
  const Eigen::Index n = halves.front().size();
  for (const auto& h : halves)
    if (h.size() != n) throw std::invalid_argument("split_rhat: chains differ in length");
  const double nd = static_cast<double>(n);
  const double m = static_cast<double>(halves.size());
  Eigen::VectorXd means(halves.size());
  double w = 0.0;
  for (std::size_t j = 0; j < halves.size(); ++j) {
    means(static_cast<Eigen::Index>(j)) = halves[j].mean();
    w += (halves[j].array() - halves[j].mean()).square().sum() / (nd - 1.0);
  }
  w /= m;
  if (!(w > 0)) return std::nullopt;
  const double b = nd * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double var_plus = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(var_plus / w);
}

ChainSummary chain_summary(const ChainResult& chain, const ParamLayout& shape, double ci_level, bool center_gamma) {
  if (chain.draws.cols() != shape.dim()) throw std::invalid_argument("chain_summary: dimension mismatch");
  ChainSummary out;
  out.names = shape.constrained_names();
  const Eigen::Index n = chain.draws.rows();
  out.draws.resize(n, shape.dim());
  for (Eigen::Index i = 0; i < n; ++i)
    out.draws.row(i) = shape.constrained_values(shape.from_unconstrained(chain.draws.row(i).transpose())).transpose();

  Eigen::VectorXd means = out.draws.colwise().mean().transpose();
  out.theta_hat = shape.from_constrained(means);

  Eigen::MatrixXd reported = out.draws;
  const int g0 = (shape.explicit_mu ? 1 : 0) + shape.p;
  if (center_gamma && shape.m > 0) {
    const Eigen::VectorXd row_mean = reported.middleCols(g0, shape.m).rowwise().mean();
    reported.middleCols(g0, shape.m).colwise() -= row_mean;
  }
  out.summary = summarize_draws(reported, out.names, ci_level);
  for (Eigen::Index j = 0; j < reported.cols(); ++j) {
    const Eigen::VectorXd col = reported.col(j);
    auto& p = out.summary.params[static_cast<std::size_t>(j)];
    p.ess = ess(col);
    if (col.size() >= 4) p.rhat = split_rhat({col});
  }
  return out;
}

}  // namespace spvi
