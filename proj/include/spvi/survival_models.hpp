#ifndef SPVI_SURVIVAL_MODELS_HPP
#define SPVI_SURVIVAL_MODELS_HPP

// Spatial AFT (cumulative exposure) and spatial proportional-hazards models:
// data containers, parameter containers, log-likelihoods, priors and the
// unnormalized log joint with analytic gradients.

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "spvi/dists.hpp"
#include "spvi/spatial_kernel.hpp"

namespace spvi {

/// Generic carries only a coefficient vector (`beta`) and has no built-in
/// likelihood; it backs caller-supplied targets.
enum class ModelKind { SpatialAFT, SpatialPH, Generic };

ModelKind parse_model(const std::string& name);
std::string to_string(ModelKind model);

/// Covariates held constant on (t_start, t_end].
struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  Eigen::VectorXd x;
};

struct Unit {
  std::string unit_id;
  int location = 0;
  double time = 0.0;  // event or censoring time
  int event = 0;      // 1 failed, 0 censored
  std::vector<Segment> path;

  /// Covariate value in force at the event time.
  const Eigen::VectorXd& x_at_end() const { return path.back().x; }
};

struct Dataset {
  int p = 0;  // number of covariates
  std::vector<Unit> units;
  std::optional<ModelKind> model_hint;  // model the data were produced for, if known

  std::size_t size() const { return units.size(); }
  /// Throws DataError if segments do not partition (0, time] or indices are out of range.
  void validate(Eigen::Index num_locations) const;
};

/// Builds a unit with a single time-invariant segment.
Unit make_unit(std::string id, int location, double time, int event, Eigen::VectorXd x);

/// One parameter draw. `s2_gamma` and `nu` are on their natural positive scale;
/// sigma, a and b are carried as logs.
struct ModelParams {
  ModelKind model = ModelKind::SpatialAFT;
  double mu = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double sigma_l = 0.0;
  double a_l = 0.0;
  double b_l = 0.0;
  KernelParams kp;
};

/// Partial derivatives of a log density with respect to ModelParams fields.
struct ModelGradient {
  double mu = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double sigma_l = 0.0;
  double a_l = 0.0;
  double b_l = 0.0;
  double s2_gamma = 0.0;
  double nu = 0.0;

  void reset(int p, int m);
};

struct PriorConfig {
  InvGammaParams s2{1.0, 1.0};
  InvGammaParams nu{13.0, 0.1};
};

/// Shape of the parameter vector and its unconstrained ordering:
/// [mu?] beta, gamma, (sigma_l | a_l, b_l), [log s2, log nu].
/// The log-scale pair is present only when there are locations (m > 0).
struct ParamLayout {
  ModelKind model = ModelKind::SpatialAFT;
  int p = 0;
  int m = 0;
  bool explicit_mu = false;

  int num_scalars() const {
    return (explicit_mu ? 1 : 0) + (model == ModelKind::SpatialAFT ? 1 : model == ModelKind::SpatialPH ? 2 : 0);
  }
  bool spatial() const { return m > 0; }
  /// Coordinates that are Gaussian under the variational family.
  int gauss_dim() const { return p + m + num_scalars(); }
  int dim() const { return gauss_dim() + (spatial() ? 2 : 0); }

  std::vector<std::string> unconstrained_names() const;
  /// Names on the reporting scale: sigma, a, b, s2_gamma, nu instead of logs.
  std::vector<std::string> constrained_names() const;

  ModelParams zero_params() const;
  Eigen::VectorXd to_unconstrained(const ModelParams& theta) const;
  ModelParams from_unconstrained(const Eigen::VectorXd& v) const;
  /// The Gaussian coordinates in unconstrained order.
  Eigen::VectorXd gauss_coords(const ModelParams& theta) const;
  void set_gauss_coords(ModelParams& theta, const Eigen::VectorXd& g) const;
  Eigen::VectorXd gauss_gradient(const ModelGradient& grad) const;
  /// Values of constrained_names() for one draw.
  Eigen::VectorXd constrained_values(const ModelParams& theta) const;
  /// Inverse of constrained_values.
  ModelParams from_constrained(const Eigen::VectorXd& values) const;
};

/// Log-likelihood of the cumulative-exposure model with piecewise-constant
/// covariates; reduces to the AFT likelihood for single-segment paths. The
/// random-effect density is not included.
double aft_log_lik(const Dataset& d, const ModelParams& theta, LocationScaleKind kind,
                   ModelGradient* grad = nullptr);

/// Cumulative hazard at the unit's final time under h0(t) = a t^b.
double ph_cum_hazard(const Unit& unit, const ModelParams& theta);
/// Cumulative hazard up to an arbitrary time t <= unit.time.
double ph_cum_hazard_at(const Unit& unit, const ModelParams& theta, double t);

double ph_log_lik(const Dataset& d, const ModelParams& theta, ModelGradient* grad = nullptr);

/// Random-effect MVN density plus inverse-gamma priors on s2_gamma and nu, in
/// the natural (s2_gamma, nu) coordinates. Flat priors contribute zero.
double log_prior_and_re(const ModelParams& theta, const SpatialLayout& layout, const PriorConfig& priors,
                        ModelGradient* grad = nullptr);

/// log p(theta, D) in natural coordinates.
double log_joint(const Dataset& d, const ModelParams& theta, const SpatialLayout& layout,
                 const PriorConfig& priors, LocationScaleKind kind, ModelGradient* grad = nullptr);

double model_log_lik(const Dataset& d, const ModelParams& theta, LocationScaleKind kind);

/// Bundles data, layout and priors into a log-density target.
class SpatialSurvivalModel {
 public:
  SpatialSurvivalModel(Dataset data, SpatialLayout layout, PriorConfig priors, ModelKind model,
                       LocationScaleKind kind = LocationScaleKind::SEV, bool explicit_mu = false);

  const Dataset& data() const { return data_; }
  const SpatialLayout& layout() const { return layout_; }
  const PriorConfig& priors() const { return priors_; }
  const ParamLayout& params() const { return params_; }
  LocationScaleKind kind() const { return kind_; }
  ModelKind model() const { return params_.model; }

  double log_joint(const ModelParams& theta, ModelGradient* grad = nullptr) const;
  /// log p in unconstrained coordinates, including the log-Jacobian of the
  /// (log s2, log nu) transform.
  double log_density(const Eigen::VectorXd& v, Eigen::VectorXd* grad = nullptr) const;

 private:
  Dataset data_;
  SpatialLayout layout_;
  PriorConfig priors_;
  ParamLayout params_;
  LocationScaleKind kind_;
};

}  // namespace spvi

#endif  // SPVI_SURVIVAL_MODELS_HPP
