#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spvi/diagnostics.hpp"
#include "test_support.hpp"

using namespace spvi;
using doctest::Approx;

namespace {

ResidualSet residuals(const std::vector<double>& v, const std::vector<int>& e) {
  ResidualSet rs;
  for (std::size_t i = 0; i < v.size(); ++i) rs.residuals.push_back({v[i], e[i]});
  return rs;
}

ResidualSet exp_residuals(double rate, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(rate);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = e(rng);
  return residuals(v, std::vector<int>(v.size(), 1));
}

Dataset single(double t, int event, Eigen::VectorXd x) {
  Dataset d;
  d.p = static_cast<int>(x.size());
  d.units.push_back(make_unit("u", 0, t, event, std::move(x)));
  return d;
}

ModelParams theta(ModelKind model, Eigen::VectorXd beta) {
  ModelParams th;
  th.model = model;
  th.beta = std::move(beta);
  th.gamma = Eigen::VectorXd::Zero(1);
  return th;
}

}  // namespace

TEST_CASE("AFT Cox-Snell residual examples") {
  ModelParams th = theta(ModelKind::SpatialAFT, Eigen::VectorXd::Zero(1));
  CHECK(cox_snell_aft(single(1.0, 1, Eigen::VectorXd::Ones(1)), th, LocationScaleKind::SEV).residuals[0].value ==
        Approx(1.0));
  th.beta << 1.0;
  const ResidualSet rs = cox_snell_aft(single(std::exp(1.0), 0, Eigen::VectorXd::Ones(1)), th, LocationScaleKind::SEV);
  CHECK(rs.residuals[0].value == Approx(1.0));
  CHECK(rs.residuals[0].event == 0);
}

TEST_CASE("PH Cox-Snell residual examples") {
  ModelParams th = theta(ModelKind::SpatialPH, Eigen::VectorXd::Zero(1));
  th.a_l = 0.0;
  th.b_l = -INFINITY;
  CHECK(cox_snell_ph(single(1.0, 1, Eigen::VectorXd::Zero(1)), th).residuals[0].value == Approx(1.0));
  th.a_l = std::log(2.0);
  th.b_l = 0.0;
  CHECK(cox_snell_ph(single(1.0, 1, Eigen::VectorXd::Zero(1)), th).residuals[0].value == Approx(1.0));

  // time-varying unit: piecewise closed form by hand
  Dataset d;
  d.p = 1;
  Unit u;
  u.unit_id = "tv";
  u.time = 2.0;
  u.event = 1;
  u.path = {{0.0, 1.0, Eigen::VectorXd::Constant(1, 0.0)}, {1.0, 2.0, Eigen::VectorXd::Constant(1, 1.0)}};
  d.units.push_back(u);
  th = theta(ModelKind::SpatialPH, Eigen::VectorXd::Constant(1, std::log(3.0)));
  th.a_l = 0.0;
  th.b_l = 0.0;  // h0 = t, H0 = t^2 / 2
  CHECK(cox_snell_ph(d, th).residuals[0].value == Approx(0.5 + 3.0 * 1.5));
}

TEST_CASE("Kaplan-Meier") {
  const auto s4 = km_survival({1, 2, 3, 4}, {1, 1, 1, 1});
  CHECK(s4.size() == 4);
  CHECK(s4[0].survival == Approx(0.75));
  CHECK(km_at(s4, 0.5) == 1.0);
  CHECK(km_at(s4, 2.5) == Approx(0.5));

  const auto none = km_survival({1, 2, 3}, {0, 0, 0});
  CHECK(none.empty());
  CHECK(km_at(none, 10.0) == 1.0);

  const auto tb = km_survival({1, 2, 3}, {1, 0, 1});
  CHECK(km_at(tb, 1.0) == Approx(2.0 / 3.0));
  CHECK(km_at(tb, 2.0) == Approx(2.0 / 3.0));
  CHECK(km_at(tb, 3.0) == Approx(0.0));
  CHECK(tb[1].at_risk == 1);

  // a censored value tied with an event stays at risk for that event
  const auto tie = km_survival({1, 1, 2}, {1, 0, 1});
  CHECK(tie[0].at_risk == 3);
  CHECK(tie[0].survival == Approx(2.0 / 3.0));

  CHECK_THROWS(km_survival({}, {}));
}

TEST_CASE("Weibull plot of Exp(1) residuals") {
  const ProbabilityPlotData pd = weibull_plot_points(exp_residuals(1.0, 500, 5));
  const auto [slope, intercept] = fit_line(pd.points);
  CHECK(slope >= 0.9);
  CHECK(slope <= 1.1);
  CHECK(std::abs(intercept) <= 0.15);
  CHECK(pd.ref_slope == 1.0);
  CHECK(pd.ref_intercept == 0.0);
  for (std::size_t i = 1; i < pd.points.size(); ++i) CHECK(pd.points[i].x > pd.points[i - 1].x);
}

TEST_CASE("Exp(2) residuals shift the intercept by log 2") {
  const auto [s1, i1] = fit_line(weibull_plot_points(exp_residuals(1.0, 2000, 8)).points);
  const auto [s2, i2] = fit_line(weibull_plot_points(exp_residuals(2.0, 2000, 8)).points);
  CHECK(s1 == Approx(s2).epsilon(1e-9));
  // same uniforms, so x shifts by -log 2 exactly
  CHECK(i2 - i1 == Approx(s1 * std::log(2.0)).epsilon(1e-9));
  CHECK(std::abs(i2 - i1 - std::log(2.0)) < 0.05);
}

TEST_CASE("two events give two finite points") {
  const ProbabilityPlotData pd = weibull_plot_points(residuals({0.5, 1.5}, {1, 1}));
  REQUIRE(pd.points.size() == 2);
  for (const auto& p : pd.points) {
    CHECK(std::isfinite(p.x));
    CHECK(std::isfinite(p.y));
  }
  CHECK_THROWS(weibull_plot_points(residuals({0.5, 1.5}, {1, 0})));
}

TEST_CASE("plot points are scale equivariant") {
  const ResidualSet rs = exp_residuals(1.0, 100, 3);
  ResidualSet scaled = rs;
  for (auto& r : scaled.residuals) r.value *= 3.0;
  const auto a = weibull_plot_points(rs).points, b = weibull_plot_points(scaled).points;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i].x == Approx(a[i].x + std::log(3.0)).epsilon(1e-12));
    CHECK(b[i].y == Approx(a[i].y).epsilon(1e-12));
  }
}

TEST_CASE("censored residuals sit on the KM curve") {
  const ProbabilityPlotData pd = weibull_plot_points(residuals({0.2, 0.4, 0.6, 0.9, 1.3}, {1, 0, 1, 0, 1}));
  CHECK(pd.points.size() == 3);
  CHECK(pd.censored.size() == 2);
  std::ostringstream os;
  write_plot_csv(os, pd);
  const std::string s = os.str();
  CHECK(s.rfind("x,y,event\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 6);
}

TEST_CASE("simulated AFT residuals are calibrated") {
  const SpatialLayout layout = testing::grid_layout(4, 4);
  std::vector<double> ks;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const SimulatedData sim = testing::simulate_aft(layout, 3, 63, 6.0, seed);
    ModelParams th = testing::aft_truth(3, 16);
    th.gamma = sim.gamma;
    const ResidualSet rs = cox_snell_aft(sim.data, th, LocationScaleKind::SEV);
    std::vector<double> v;
    std::vector<int> e;
    for (const auto& r : rs.residuals) {
      CHECK(r.value > 0);
      v.push_back(r.value);
      e.push_back(r.event);
    }
    const auto km = km_survival(v, e);
    double d = 0;
    for (const auto& st : km) d = std::max(d, std::abs(st.survival - std::exp(-st.time)));
    ks.push_back(d);
  }
  std::sort(ks.begin(), ks.end());
  CHECK(ks[2] < 0.08);
}

TEST_CASE("PH residuals under the true model have unit mean") {
  const SpatialLayout layout = testing::grid_layout(4, 4);
  SimulationSpec spec;
  spec.model = ModelKind::SpatialPH;
  spec.truth = testing::aft_truth(2, 16);
  spec.truth.model = ModelKind::SpatialPH;
  spec.truth.beta << 0.8, -0.6;
  spec.truth.a_l = std::log(0.5);
  spec.truth.b_l = 0.0;
  spec.intercept = false;
  spec.n_per_location = 100;
  spec.censor_time = 2.0;
  Rng rng(17);
  const SimulatedData sim = simulate_dataset(spec, layout, rng);
  ModelParams th = spec.truth;
  th.gamma = sim.gamma;
  const ResidualSet rs = cox_snell_ph(sim.data, th);
  // E[min(E, C)] + E[(E - C)^+] = 1 for E ~ Exp(1): censored mass adds 1 in expectation
  double total = 0, sq = 0;
  for (const auto& r : rs.residuals) {
    const double v = r.value + (r.event ? 0.0 : 1.0);
    total += v;
    sq += v * v;
  }
  const double n = double(rs.residuals.size());
  const double mean = total / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) < 3 * se);
}

TEST_CASE("NLL") {
  ModelParams th = theta(ModelKind::SpatialAFT, Eigen::VectorXd::Zero(1));
  const Dataset d = single(1.0, 1, Eigen::VectorXd::Zero(1));
  CHECK(nll(d, th, LocationScaleKind::SEV) == Approx(1.0));

  const SpatialLayout layout = testing::grid_layout(2, 2);
  const SimulatedData sim = testing::simulate_aft(layout, 3, 10, 3.0, 9);
  ModelParams t2 = testing::aft_truth(3, 4);
  t2.gamma = sim.gamma;
  CHECK(std::abs(nll(sim.data, t2, LocationScaleKind::SEV) + model_log_lik(sim.data, t2, LocationScaleKind::SEV)) <
        1e-12);
  const double with_re = nll_with_random_effects(sim.data, t2, layout, LocationScaleKind::SEV);
  const double mvn = mvn_log_pdf_chol(sim.gamma, assemble_covariance(layout, t2.kp));
  CHECK(with_re == Approx(nll(sim.data, t2, LocationScaleKind::SEV) - mvn).epsilon(1e-12));
}

TEST_CASE("correlation curve") {
  const auto c = correlation_curve({1.0, 0.1337}, 101, 1.0);
  REQUIRE(c.size() == 101);
  CHECK(c[0].first == 0.0);
  CHECK(c[0].second == 1.0);
  CHECK(c[21].first == Approx(0.21));
  CHECK(c[21].second == Approx(0.2078).epsilon(5e-4));
  const auto tree = correlation_curve({1.0, 0.0103}, 51, 0.5);
  CHECK(tree[2].first == Approx(0.02));
  CHECK(tree[2].second == Approx(0.1434).epsilon(5e-4));
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i].second < c[i - 1].second);

  std::ostringstream os;
  write_correlation_csv(os, c);
  CHECK(os.str().rfind("distance,correlation\n", 0) == 0);
}

TEST_CASE("random-effect table") {
  const SpatialLayout layout = testing::grid_layout(1, 3);
  const auto rows = random_effect_table(layout, Eigen::Vector3d(0.1, -0.2, 0.3), Eigen::Vector3d(0.01, 0.02, 0.03));
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].coord2 == 2.0);
  CHECK(rows[1].gamma_mean == -0.2);
  std::ostringstream os;
  write_random_effect_csv(os, rows);
  CHECK(os.str().rfind("location_id,coord1,coord2,gamma_mean,gamma_sd\n", 0) == 0);
}
