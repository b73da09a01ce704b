#ifndef SPVI_SPATIAL_KERNEL_HPP
#define SPVI_SPATIAL_KERNEL_HPP

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

#include "spvi/dists.hpp"

namespace spvi {

enum class DistanceMetric {
  EuclideanPerAxisStandardized,  // each axis mapped to [0,1], then Euclidean
  GreatCircleMaxStandardized,    // haversine distance / max pairwise distance
};

DistanceMetric parse_metric(const std::string& name);
std::string to_string(DistanceMetric metric);

inline constexpr double kEarthRadiusKm = 6371.0;

struct SpatialLayout {
  std::vector<std::string> location_ids;
  Eigen::MatrixX2d coords;
  DistanceMetric metric = DistanceMetric::EuclideanPerAxisStandardized;
  Eigen::MatrixXd dist;
  double max_raw_distance = 0.0;  // haversine km before standardization; 0 for Euclidean

  Eigen::Index size() const { return coords.rows(); }
};

struct KernelParams {
  double s2_gamma = 1.0;
  double nu = 1.0;
};

/// `ids` may be empty, in which case locations are named by index.
SpatialLayout build_layout(const Eigen::MatrixX2d& coords, DistanceMetric metric,
                           std::vector<std::string> ids = {});

/// Great-circle distance in km between (lat, lon) pairs given in degrees.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

inline double exp_correlation(double d, double nu) {
  if (!(nu > 0)) throw std::domain_error("exp_correlation: nu must be positive");
  if (d < 0) throw std::domain_error("exp_correlation: negative distance");
  return std::exp(-d / nu);
}

/// Omega with entries exp(-dist/nu).
Eigen::MatrixXd correlation_matrix(const SpatialLayout& layout, double nu);

/// Cholesky factor of s2_gamma * Omega, with the jitter policy of cholesky_with_jitter.
CholeskyFactor assemble_covariance(const SpatialLayout& layout, const KernelParams& kp);

void write_layout_csv(std::ostream& os, const SpatialLayout& layout);
SpatialLayout read_layout_csv(std::istream& is, DistanceMetric metric);
void write_distance_csv(std::ostream& os, const SpatialLayout& layout);

}  // namespace spvi

#endif  // SPVI_SPATIAL_KERNEL_HPP
