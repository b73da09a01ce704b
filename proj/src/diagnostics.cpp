#include "spvi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace spvi {

ResidualSet cox_snell_aft(const Dataset& d, const ModelParams& theta_hat, LocationScaleKind kind) {
  if (theta_hat.model != ModelKind::SpatialAFT) throw std::invalid_argument("cox_snell_aft: not an AFT parameter set");
  ResidualSet rs;
  rs.model = ModelKind::SpatialAFT;
  rs.theta_hat = theta_hat;
  const double sigma = std::exp(theta_hat.sigma_l);
  for (const Unit& u : d.units) {
    double exposure = 0.0;
    for (const Segment& s : u.path) exposure += std::exp(-s.x.dot(theta_hat.beta)) * (s.t_end - s.t_start);
    const double gamma = theta_hat.gamma.size() ? theta_hat.gamma(u.location) : 0.0;
    const double z = (std::log(exposure) - theta_hat.mu - gamma) / sigma;
    rs.residuals.push_back({-ls_log_survival(kind, z), u.event});
  }
  return rs;
}

ResidualSet cox_snell_ph(const Dataset& d, const ModelParams& theta_hat) {
  if (theta_hat.model != ModelKind::SpatialPH) throw std::invalid_argument("cox_snell_ph: not a PH parameter set");
  ResidualSet rs;
  rs.model = ModelKind::SpatialPH;
  rs.theta_hat = theta_hat;
  for (const Unit& u : d.units) rs.residuals.push_back({ph_cum_hazard(u, theta_hat), u.event});
  return rs;
}

std::vector<KMStep> km_survival(const std::vector<double>& values, const std::vector<int>& events) {
  if (values.empty()) throw std::invalid_argument("km_survival: empty input");
  if (values.size() != events.size()) throw std::invalid_argument("km_survival: length mismatch");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<KMStep> steps;
  int at_risk = static_cast<int>(values.size());
  double surv = 1.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = values[order[i]];
    int deaths = 0, removed = 0;
    while (i < order.size() && values[order[i]] == t) {
      deaths += events[order[i]] ? 1 : 0;
      ++removed;
      ++i;
    }
    if (deaths > 0) {
      surv *= 1.0 - static_cast<double>(deaths) / at_risk;
      steps.push_back({t, surv, at_risk, deaths});
    }
    at_risk -= removed;
  }
  return steps;
}

double km_at(const std::vector<KMStep>& steps, double t) {
  double s = 1.0;
  for (const auto& st : steps) {
    if (st.time > t) break;
    s = st.survival;
  }
  return s;
}

ProbabilityPlotData weibull_plot_points(const ResidualSet& rs) {
  std::vector<double> v;
  std::vector<int> e;
  int n_events = 0;
  for (const auto& r : rs.residuals) {
    if (!(r.value > 0) || !std::isfinite(r.value)) throw std::invalid_argument("weibull_plot_points: residuals must be positive");
    v.push_back(r.value);
    e.push_back(r.event);
    n_events += r.event ? 1 : 0;
  }
  if (n_events < 2) throw std::invalid_argument("weibull_plot_points: need at least two events");
  const auto steps = km_survival(v, e);
  ProbabilityPlotData out;
  double prev = 1.0;
  for (const auto& st : steps) {
    const double s_mid = 0.5 * (prev + st.survival);
    out.points.push_back({std::log(st.time), std::log(-std::log(s_mid))});
    prev = st.survival;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (e[i]) continue;
    const double s = km_at(steps, v[i]);
    if (s > 0 && s < 1) out.censored.push_back({std::log(v[i]), std::log(-std::log(s))});
  }
  return out;
}

std::pair<double, double> fit_line(const std::vector<PlotPoint>& pts) {
  if (pts.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0, sxx = 0;
  for (const auto& p : pts) {
    sxy += (p.x - mx) * (p.y - my);
    sxx += (p.x - mx) * (p.x - mx);
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit_line: x values are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double nll(const Dataset& d, const ModelParams& theta_hat, LocationScaleKind kind) {
  return -model_log_lik(d, theta_hat, kind);
}

double nll_with_random_effects(const Dataset& d, const ModelParams& theta_hat, const SpatialLayout& layout,
                               LocationScaleKind kind) {
  double out = nll(d, theta_hat, kind);
  if (theta_hat.gamma.size() > 0) {
    const CholeskyFactor chol = assemble_covariance(layout, theta_hat.kp);
    out -= mvn_log_pdf_chol(theta_hat.gamma, chol);
  }
  return out;
}

std::vector<std::pair<double, double>> correlation_curve(const KernelParams& kp, int n_points, double max_distance) {
  if (n_points < 2) throw std::invalid_argument("correlation_curve: need at least two points");
  if (!(max_distance > 0)) throw std::invalid_argument("correlation_curve: max_distance must be positive");
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < n_points; ++i) {
    const double dist = max_distance * i / (n_points - 1);
    out.emplace_back(dist, exp_correlation(dist, kp.nu));
  }
  return out;
}

std::vector<RandomEffectRow> random_effect_table(const SpatialLayout& layout, const Eigen::VectorXd& gamma_mean,
                                                 const Eigen::VectorXd& gamma_sd) {
  if (gamma_mean.size() != layout.size() || gamma_sd.size() != layout.size())
    throw std::invalid_argument("random_effect_table: length mismatch");
  std::vector<RandomEffectRow> rows;
  for (Eigen::Index i = 0; i < layout.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    rows.push_back({k < layout.location_ids.size() ? layout.location_ids[k] : std::to_string(i), layout.coords(i, 0),
                    layout.coords(i, 1), gamma_mean(i), gamma_sd(i)});
  }
  return rows;
}

void write_plot_csv(std::ostream& os, const ProbabilityPlotData& data) {
  os << "x,y,event\n" << std::setprecision(17);
  for (const auto& p : data.points) os << p.x << ',' << p.y << ",1\n";
  for (const auto& p : data.censored) os << p.x << ',' << p.y << ",0\n";
}

void write_correlation_csv(std::ostream& os, const std::vector<std::pair<double, double>>& curve) {
  os << "distance,correlation\n" << std::setprecision(17);
  for (const auto& [d, r] : curve) os << d << ',' << r << '\n';
}

void write_random_effect_csv(std::ostream& os, const std::vector<RandomEffectRow>& rows) {
  os << "location_id,coord1,coord2,gamma_mean,gamma_sd\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.location_id << ',' << r.coord1 << ',' << r.coord2 << ',' << r.gamma_mean << ',' << r.gamma_sd << '\n';
}

}  // namespace spvi
