#include "spvi/spatial_kernel.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "spvi/errors.hpp"

namespace spvi {

DistanceMetric parse_metric(const std::string& name) {
  if (name == "euclidean" || name == "euclidean_per_axis") return DistanceMetric::EuclideanPerAxisStandardized;
  if (name == "great_circle" || name == "haversine") return DistanceMetric::GreatCircleMaxStandardized;
  throw std::invalid_argument("unknown distance metric: " + name);
}

std::string to_string(DistanceMetric metric) {
  return metric == DistanceMetric::EuclideanPerAxisStandardized ? "euclidean" : "great_circle";
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * deg;
  const double dlon = (lon2 - lon1) * deg;
  const double a = std::pow(std::sin(dlat / 2), 2) +
                   std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::pow(std::sin(dlon / 2), 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

SpatialLayout build_layout(const Eigen::MatrixX2d& coords, DistanceMetric metric, std::vector<std::string> ids) {
  const Eigen::Index m = coords.rows();
  if (m < 1) throw std::invalid_argument("build_layout: need at least one location");
  if (!coords.allFinite()) throw std::invalid_argument("build_layout: non-finite coordinates");
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != m)
    throw std::invalid_argument("build_layout: id count does not match coordinates");

  SpatialLayout layout;
  layout.coords = coords;
  layout.metric = metric;
  if (ids.empty()) {
    ids.reserve(m);
    for (Eigen::Index i = 0; i < m; ++i) ids.push_back(std::to_string(i));
  }
  layout.location_ids = std::move(ids);
  layout.dist = Eigen::MatrixXd::Zero(m, m);

  if (metric == DistanceMetric::EuclideanPerAxisStandardized) {
    Eigen::MatrixX2d scaled = coords;
    for (int axis = 0; axis < 2; ++axis) {
      const double lo = coords.col(axis).minCoeff();
      const double range = coords.col(axis).maxCoeff() - lo;
      // A constant axis contributes nothing.
      if (range > 0)
        scaled.col(axis) = (coords.col(axis).array() - lo) / range;
      else
        scaled.col(axis).setZero();
    }
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j)
        layout.dist(i, j) = layout.dist(j, i) = (scaled.row(i) - scaled.row(j)).norm();
    return layout;
  }

  double max_d = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d = haversine_km(coords(i, 0), coords(i, 1), coords(j, 0), coords(j, 1));
      layout.dist(i, j) = layout.dist(j, i) = d;
      max_d = std::max(max_d, d);
    }
  if (m > 1) {
    if (!(max_d > 0)) throw std::invalid_argument("build_layout: zero maximum distance");
    layout.dist /= max_d;
  }
  layout.max_raw_distance = max_d;
  return layout;
}

Eigen::MatrixXd correlation_matrix(const SpatialLayout& layout, double nu) {
  if (!(nu > 0)) throw std::domain_error("correlation_matrix: nu must be positive");
  return (-layout.dist.array() / nu).exp().matrix();
}

CholeskyFactor assemble_covariance(const SpatialLayout& layout, const KernelParams& kp) {
  if (!(kp.s2_gamma > 0)) throw std::domain_error("assemble_covariance: s2_gamma must be positive");
  const Eigen::MatrixXd cov = kp.s2_gamma * correlation_matrix(layout, kp.nu);
  return cholesky_with_jitter(cov, kp.nu);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_layout_csv(std::ostream& os, const SpatialLayout& layout) {
  os << "location_id,coord1,coord2\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < layout.size(); ++i)
    os << layout.location_ids[i] << ',' << layout.coords(i, 0) << ',' << layout.coords(i, 1) << '\n';
}

SpatialLayout read_layout_csv(std::istream& is, DistanceMetric metric) {
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<std::string> ids;
  std::vector<std::pair<double, double>> pts;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "location_id,coord1,coord2") throw DataError("layout CSV: unexpected header '" + line + "'", lineno);
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw DataError("layout CSV: expected 3 fields", lineno);
    try {
      ids.push_back(f[0]);
      pts.emplace_back(std::stod(f[1]), std::stod(f[2]));
    } catch (const std::exception&) {
      throw DataError("layout CSV: bad number", lineno);
    }
  }
  if (!header) throw DataError("layout CSV: missing header");
  Eigen::MatrixX2d coords(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) coords.row(static_cast<Eigen::Index>(i)) << pts[i].first, pts[i].second;
  return build_layout(coords, metric, std::move(ids));
}

void write_distance_csv(std::ostream& os, const SpatialLayout& layout) {
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < layout.size(); ++i) {
    for (Eigen::Index j = 0; j < layout.size(); ++j) os << (j ? "," : "") << layout.dist(i, j);
    os << '\n';
  }
}

}  // namespace spvi
