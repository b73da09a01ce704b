#ifndef SPVI_SUMMARY_HPP
#define SPVI_SUMMARY_HPP

// Posterior summary tables shared by the VI and HMC engines.

#include <Eigen/Core>

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace spvi {

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> ess;
  std::optional<double> rhat;  // empty when undefined (e.g. constant chain)
};

struct PosteriorSummary {
  double ci_level = 0.95;
  std::size_t num_draws = 0;
  std::vector<ParamSummary> params;

  const ParamSummary& at(const std::string& name) const;
  const ParamSummary* find(const std::string& name) const;
};

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double prob);

/// Summaries of each column of `draws` (rows are draws).
PosteriorSummary summarize_draws(const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
                                 double ci_level = 0.95);

nlohmann::json to_json(const PosteriorSummary& s);
PosteriorSummary summary_from_json(const nlohmann::json& j);

/// Draws as CSV, header = names. Values printed with 17 significant digits.
void write_draws_csv(const std::string& path, const Eigen::MatrixXd& draws, const std::vector<std::string>& names);

}  // namespace spvi

#endif  // SPVI_SUMMARY_HPP
