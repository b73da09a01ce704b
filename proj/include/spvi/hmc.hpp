#ifndef SPVI_HMC_HPP
#define SPVI_HMC_HPP

// Hamiltonian Monte Carlo with dual-averaging step-size adaptation, used as
// the sampling baseline on the unconstrained log joint.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spvi/summary.hpp"
#include "spvi/survival_models.hpp"

namespace spvi {

struct HMCConfig {
  int warmup_iters = 1000;
  int sample_iters = 1000;
  int leapfrog_steps = 32;  // jittered by +-20% per transition
  double target_accept = 0.8;
  std::uint64_t seed = 1;
  bool adapt_mass = false;  // diagonal mass adaptation during warmup
  double initial_step_size = 0.0;  // 0 = choose heuristically

  void validate() const;
};

/// Log density with gradient in unconstrained coordinates.
using GradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct LeapfrogState {
  Eigen::VectorXd theta;
  Eigen::VectorXd momentum;
  double log_p = 0.0;
  Eigen::VectorXd grad;
  bool divergent = false;
};

/// `n_steps` Stormer-Verlet steps. `inv_mass` is the diagonal of M^{-1}
/// (empty = identity). Stops early and flags divergence on non-finite values.
LeapfrogState leapfrog(const Eigen::VectorXd& theta, const Eigen::VectorXd& momentum, double step_size,
                       int n_steps, const GradFn& grad_fn, const Eigen::VectorXd& inv_mass = {});

struct ChainResult {
  Eigen::MatrixXd draws;  // sample_iters x dim, unconstrained
  double accept_rate = 0.0;
  double step_size = 0.0;
  Eigen::VectorXd inv_mass;
  int divergent = 0;     // post-warmup divergent transitions
  bool healthy = true;   // false when more than 10% of transitions diverged
  Eigen::VectorXd log_p;
};

ChainResult run_chain(const GradFn& grad_fn, const Eigen::VectorXd& init, const HMCConfig& cfg);
ChainResult run_chain(const SpatialSurvivalModel& model, const HMCConfig& cfg,
                      const std::optional<Eigen::VectorXd>& init = {});

/// Effective sample size with Geyer's initial monotone sequence estimator.
double ess(const Eigen::VectorXd& chain);

/// Split-R-hat over the given chains, each split in half. Empty when the
/// within-chain variance is zero.
std::optional<double> split_rhat(const std::vector<Eigen::VectorXd>& chains);

struct ChainSummary {
  Eigen::MatrixXd draws;  // constrained scale
  std::vector<std::string> names;
  PosteriorSummary summary;
  ModelParams theta_hat;  // chain means, gamma not centred
};

/// Constrained-scale summary with ESS and split-R-hat. When `center_gamma`
/// is set the reported gamma rows are centred draw by draw.
ChainSummary chain_summary(const ChainResult& chain, const ParamLayout& shape, double ci_level = 0.95,
                           bool center_gamma = true);

}  // namespace spvi

#endif  // SPVI_HMC_HPP
