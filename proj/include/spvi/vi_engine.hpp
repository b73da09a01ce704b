#ifndef SPVI_VI_ENGINE_HPP
#define SPVI_VI_ENGINE_HPP

// Black-box variational inference: Monte-Carlo VR-bound and ELBO estimators,
// their gradients, Adam ascent and the fitting loop.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spvi/summary.hpp"
#include "spvi/survival_models.hpp"
#include "spvi/variational_family.hpp"

namespace spvi {

enum class GradientMode { ScoreFunction, ReparamHybrid };

GradientMode parse_gradient_mode(const std::string& name);
std::string to_string(GradientMode mode);

/// alpha == 1 selects the ELBO.
struct VIConfig {
  double alpha = 0.8;
  int h = 500;
  double tau = 1e-4;
  int max_iters = 20000;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  GradientMode gradient_mode = GradientMode::ReparamHybrid;
  std::uint64_t seed = 1;
  bool smooth_stopping = true;  // apply the stopping rule to a moving average
  int smoothing_window = 10;
  bool score_baseline = true;   // control variate in score-function terms
  int posterior_draws = 4000;
  double ci_level = 0.95;
  unsigned threads = 0;  // 0 = all cores

  bool is_elbo() const { return alpha == 1.0; }
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

/// Log joint in natural coordinates; fills the gradient when `grad` is non-null.
using LogJointFn = std::function<double(const ModelParams&, ModelGradient*)>;

struct VITarget {
  ParamLayout shape;
  LogJointFn log_joint;
};

VITarget make_target(const SpatialSurvivalModel& model);

/// h draws from q with their log weights. Draw k of iteration `iter` uses
/// substream(seed, iter, k).
struct DrawBatch {
  std::vector<QDraw> draws;
  Eigen::VectorXd log_p;
  Eigen::VectorXd log_q;
  Eigen::VectorXd ell;                   // log_p - log_q
  std::vector<Eigen::VectorXd> grad_g;   // d log p / d Gaussian coords (when requested)
  std::vector<ModelGradient> grad_full;  // raw gradients (when requested)
};

DrawBatch draw_batch(const VariationalParams& eta, const VITarget& target, int h, std::uint64_t seed,
                     std::uint64_t iter, unsigned threads, bool with_gradient);

/// 1/(1-alpha) [logsumexp((1-alpha) ell) - log h]; the mean of ell when alpha == 1.
/// Throws EstimatorError naming the first non-finite entry.
double vr_bound_from_log_weights(const Eigen::VectorXd& ell, double alpha);

/// Self-normalized weights softmax((1-alpha) ell); uniform when alpha == 1.
Eigen::VectorXd normalized_weights(const Eigen::VectorXd& ell, double alpha);

double estimate_vr_bound(const VariationalParams& eta, const VITarget& target, const VIConfig& cfg,
                         std::uint64_t iter = 0);
double estimate_elbo(const VariationalParams& eta, const VITarget& target, const VIConfig& cfg,
                     std::uint64_t iter = 0);

struct GradientEstimate {
  double bound = 0.0;
  Eigen::VectorXd grad;  // flat ordering of eta
  double ess = 0.0;      // 1 / sum(omega^2)
  bool degenerate = false;
};

/// Gradient of the bound estimated from a batch.
GradientEstimate gradient_from_batch(const VariationalParams& eta, const DrawBatch& batch, const VIConfig& cfg);

/// Bound and gradient from the same draws (common random numbers).
GradientEstimate estimate_gradient(const VariationalParams& eta, const VITarget& target, const VIConfig& cfg,
                                   std::uint64_t iter = 0);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;
};

/// One Adam ascent step on `x`.
void adam_step(AdamState& state, Eigen::VectorXd& x, const Eigen::VectorXd& grad, const VIConfig& cfg);

/// Double relative-change rule, optionally on a moving average of the bound.
class StoppingRule {
 public:
  StoppingRule(double tau, bool smooth, int window);
  /// Records the next bound value; true once the rule fires.
  bool push(double bound);

 private:
  double tau_;
  bool smooth_;
  int window_;
  std::vector<double> raw_;
  std::vector<double> series_;
};

struct TraceRecord {
  int iter = 0;
  double bound = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
  bool degenerate = false;
};

struct FitResult {
  VariationalParams eta_star;
  std::vector<TraceRecord> trace;
  bool converged = false;
  int iterations = 0;
  PosteriorSummary summary;
  Eigen::MatrixXd draws;                  // constrained scale, one row per draw
  std::vector<std::string> draw_names;
  ModelParams theta_hat;                  // posterior means
  std::optional<double> nll;              // at theta_hat, model fits only
  double seconds = 0.0;
};

/// Draws L samples from q and summarizes them on the constrained scale.
struct PosteriorDraws {
  Eigen::MatrixXd draws;
  std::vector<std::string> names;
  PosteriorSummary summary;
  ModelParams theta_hat;
};
PosteriorDraws summarize_posterior(const VariationalParams& eta, int L, std::uint64_t seed, double ci_level,
                                   unsigned threads = 1);

FitResult fit(const VITarget& target, const VIConfig& cfg, const std::optional<VariationalParams>& init = {});
FitResult fit(const SpatialSurvivalModel& model, const VIConfig& cfg,
              const std::optional<VariationalParams>& init = {});

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace);

}  // namespace spvi

#endif  // SPVI_VI_ENGINE_HPP
