#ifndef SPVI_DIAGNOSTICS_HPP
#define SPVI_DIAGNOSTICS_HPP

// Cox-Snell residuals, Kaplan-Meier plotting positions, NLL and spatial
// correlation report data.

#include <Eigen/Core>

#include <iosfwd>
#include <utility>
#include <vector>

#include "spvi/survival_models.hpp"

namespace spvi {

struct Residual {
  double value = 0.0;
  int event = 0;
};

struct ResidualSet {
  std::vector<Residual> residuals;
  ModelKind model = ModelKind::SpatialAFT;
  ModelParams theta_hat;
};

/// -log S(z) with z the standardized log exposure; exp(z) for SEV errors.
ResidualSet cox_snell_aft(const Dataset& d, const ModelParams& theta_hat, LocationScaleKind kind);
/// Cumulative hazard at the observed time.
ResidualSet cox_snell_ph(const Dataset& d, const ModelParams& theta_hat);

struct KMStep {
  double time = 0.0;
  double survival = 1.0;  // S(time), after the drop
  int at_risk = 0;
  int events = 0;
};

/// Kaplan-Meier estimate, one step per distinct event time. Censored values
/// tied with an event time are taken to follow the events.
std::vector<KMStep> km_survival(const std::vector<double>& values, const std::vector<int>& events);
/// Evaluates the right-continuous step function.
double km_at(const std::vector<KMStep>& steps, double t);

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
};

struct ProbabilityPlotData {
  std::vector<PlotPoint> points;    // event points
  std::vector<PlotPoint> censored;  // censored residuals placed on the KM curve
  double ref_slope = 1.0;
  double ref_intercept = 0.0;
};

/// (log e, log(-log S~)) at each distinct event residual with
/// S~ = (S_prev + S_curr) / 2.
ProbabilityPlotData weibull_plot_points(const ResidualSet& rs);

/// Ordinary least-squares (slope, intercept).
std::pair<double, double> fit_line(const std::vector<PlotPoint>& pts);

/// Negative data log-likelihood at theta_hat.
double nll(const Dataset& d, const ModelParams& theta_hat, LocationScaleKind kind);
/// Same plus minus the MVN log density of gamma_hat.
double nll_with_random_effects(const Dataset& d, const ModelParams& theta_hat, const SpatialLayout& layout,
                               LocationScaleKind kind);

/// rho(d) = exp(-d / nu) on n_points evenly spaced distances in [0, max_distance].
std::vector<std::pair<double, double>> correlation_curve(const KernelParams& kp, int n_points,
                                                         double max_distance = 1.0);

struct RandomEffectRow {
  std::string location_id;
  double coord1 = 0.0;
  double coord2 = 0.0;
  double gamma_mean = 0.0;
  double gamma_sd = 0.0;
};

std::vector<RandomEffectRow> random_effect_table(const SpatialLayout& layout, const Eigen::VectorXd& gamma_mean,
                                                 const Eigen::VectorXd& gamma_sd);

void write_plot_csv(std::ostream& os, const ProbabilityPlotData& data);
void write_correlation_csv(std::ostream& os, const std::vector<std::pair<double, double>>& curve);
void write_random_effect_csv(std::ostream& os, const std::vector<RandomEffectRow>& rows);

}  // namespace spvi

#endif  // SPVI_DIAGNOSTICS_HPP
