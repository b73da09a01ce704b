#ifndef SPVI_DATA_IO_HPP
#define SPVI_DATA_IO_HPP

// CSV loaders for the GPU and pine-tree schemas, dummy coding, the canonical
// dataset format and the synthetic-data generator.

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

#include "spvi/rng.hpp"
#include "spvi/survival_models.hpp"

namespace spvi {

/// k levels -> k-1 indicator columns in level order, reference omitted.
struct DummyEncoding {
  std::vector<std::string> levels;
  std::string reference;

  int width() const { return static_cast<int>(levels.size()) - 1; }
  /// Names of the indicator columns, i.e. the non-reference levels.
  std::vector<std::string> columns() const;
  /// Throws std::out_of_range for a level not seen at build time.
  Eigen::VectorXd apply(const std::string& level) const;
};

DummyEncoding dummy_encode(const std::vector<std::string>& levels, const std::string& reference);

struct LoadedData {
  Dataset data;
  SpatialLayout layout;
  std::vector<std::string> covariate_names;
  int warnings = 0;  // rows coerced to censored because of an unrecognized fail type
};

/// Header: sn,column,row,cage,slot,node,fail_type,time_years
LoadedData load_gpu_csv(std::istream& is);
LoadedData load_gpu_csv(const std::string& path);

/// Header: sn,site_id,lat,lon,period,dbh_cm,th_m,crown_class,phys_region,thinning,died_this_period
LoadedData load_tree_csv(std::istream& is);
LoadedData load_tree_csv(const std::string& path);

struct SimulationSpec {
  ModelKind model = ModelKind::SpatialAFT;
  ModelParams truth;          // beta length fixes p; gamma is drawn, not read
  int n_per_location = 20;
  double censor_time = 1e300;  // infinity disables censoring
  LocationScaleKind kind = LocationScaleKind::SEV;
  bool intercept = true;       // first covariate is the constant 1
};

struct SimulatedData {
  Dataset data;
  Eigen::VectorXd gamma;  // realized random effects
};

/// Units are ordered by location, n_per_location each; covariates are N(0,1)
/// apart from the optional constant column.
SimulatedData simulate_dataset(const SimulationSpec& spec, const SpatialLayout& layout, Rng& rng);

/// Canonical dataset CSV: a schema line, a header, one row per segment.
void write_dataset_csv(std::ostream& os, const Dataset& d);
Dataset read_dataset_csv(std::istream& is);

void write_dataset_csv(const std::string& path, const Dataset& d);
Dataset read_dataset_csv(const std::string& path);

/// Splits one CSV record; no quoting support.
std::vector<std::string> split_csv(const std::string& line);

}  // namespace spvi

#endif  // SPVI_DATA_IO_HPP
