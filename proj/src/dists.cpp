#include "spvi/dists.hpp"

#include <random>

#include <boost/math/special_functions/digamma.hpp>

namespace spvi {

LocationScaleKind parse_location_scale(const std::string& name) {
  if (name == "sev" || name == "SEV") return LocationScaleKind::SEV;
  if (name == "normal" || name == "Normal") return LocationScaleKind::Normal;
  if (name == "logistic" || name == "Logistic") return LocationScaleKind::Logistic;
  throw std::invalid_argument("unknown location-scale kind: " + name);
}

std::string to_string(LocationScaleKind kind) {
  switch (kind) {
    case LocationScaleKind::SEV:
      return "sev";
    case LocationScaleKind::Normal:
      return "normal";
    case LocationScaleKind::Logistic:
      return "logistic";
  }
  return "sev";
}

double ls_sample(LocationScaleKind kind, Rng& rng) {
  switch (kind) {
    case LocationScaleKind::SEV: {
      // S(z) = exp(-e^z) is uniform; invert it.
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double u = unif(rng);
      while (u <= 0.0) u = unif(rng);
      return std::log(-std::log(u));
    }
    case LocationScaleKind::Normal: {
      std::normal_distribution<double> norm(0.0, 1.0);
      return norm(rng);
    }
    case LocationScaleKind::Logistic: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double u = unif(rng);
      while (u <= 0.0) u = unif(rng);
      return std::log(u) - std::log1p(-u);
    }
  }
  return 0.0;
}

double digamma(double x) {
  if (!(x > 0)) throw std::domain_error("digamma: x must be positive");
  return boost::math::digamma(x);
}

double invgamma_sample(const InvGammaParams& p, Rng& rng) {
  std::gamma_distribution<double> gamma(p.shape, 1.0);
  double g = gamma(rng);
  while (g <= 0.0) g = gamma(rng);
  return p.scale / g;
}

}  // namespace spvi
