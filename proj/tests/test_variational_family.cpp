#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "spvi/dists.hpp"
#include "spvi/variational_family.hpp"
#include "test_support.hpp"

using namespace spvi;
using doctest::Approx;

namespace {

ParamLayout layout_of(ModelKind model, int p, int m, bool mu = false) {
  ParamLayout s;
  s.model = model;
  s.p = p;
  s.m = m;
  s.explicit_mu = mu;
  return s;
}

VariationalParams random_eta(const ParamLayout& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  VariationalParams eta = init_variational(shape);
  Eigen::VectorXd flat = flatten(eta);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) += n(rng);
  return unflatten(flat, shape);
}

}  // namespace

TEST_CASE("flat sizes") {
  CHECK(init_variational(layout_of(ModelKind::SpatialAFT, 2, 3)).flat_size() == 16);
  CHECK(flatten(init_variational(layout_of(ModelKind::SpatialAFT, 2, 3))).size() == 16);
  CHECK(init_variational(layout_of(ModelKind::SpatialPH, 9, 60)).flat_size() == 146);
  CHECK(init_variational(layout_of(ModelKind::SpatialAFT, 13, 0)).flat_size() == 28);
  CHECK(init_variational(layout_of(ModelKind::SpatialAFT, 2, 3, true)).flat_size() == 18);
  CHECK(flat_names(layout_of(ModelKind::SpatialPH, 9, 60)).size() == 146);
}

TEST_CASE("init defaults and overrides") {
  const ParamLayout s = layout_of(ModelKind::SpatialAFT, 2, 3);
  const VariationalParams d = init_variational(s);
  CHECK(d.gauss_mean().isZero());
  CHECK((d.gauss_log_sd().array() == std::log(0.1)).all());
  CHECK(d.q_s2().shape == Approx(2.0));
  CHECK(d.q_s2().scale == Approx(1.0));
  CHECK(d.q_nu().shape == Approx(2.0));

  VariationalInit init;
  init.mu_beta = Eigen::Vector2d(1.0, 1.0);
  const VariationalParams o = init_variational(s, init);
  CHECK(o.mu_beta == Eigen::Vector2d(1.0, 1.0));
}

TEST_CASE("q_log_pdf at block modes") {
  const ParamLayout s = layout_of(ModelKind::SpatialPH, 2, 3);
  const VariationalParams eta = random_eta(s, 3);
  ModelParams th = s.zero_params();
  s.set_gauss_coords(th, eta.gauss_mean());
  const InvGammaParams qs = eta.q_s2(), qn = eta.q_nu();
  th.kp.s2_gamma = qs.scale / (qs.shape + 1);
  th.kp.nu = qn.scale / (qn.shape + 1);
  const Eigen::VectorXd ls = eta.gauss_log_sd();
  const double expect = ls.size() * (-0.5 * std::log(2 * std::numbers::pi)) - ls.sum() +
                        invgamma_log_pdf(qs, th.kp.s2_gamma) + invgamma_log_pdf(qn, th.kp.nu);
  CHECK(q_log_pdf(eta, th) == Approx(expect).epsilon(1e-13));

  th.kp.nu = 0.0;
  CHECK_THROWS_AS(q_log_pdf(eta, th), std::domain_error);
  th.kp.nu = 0.1;
  th.kp.s2_gamma = -1.0;
  CHECK_THROWS_AS(q_log_pdf(eta, th), std::domain_error);
}

TEST_CASE("single-coordinate family is a scalar normal") {
  ParamLayout s;
  s.model = ModelKind::Generic;
  s.p = 1;
  const VariationalParams eta = testing::gaussian_q(s, 0.3, 0.6);
  ModelParams th = s.zero_params();
  th.beta(0) = -0.4;
  const double z = (-0.4 - 0.3) / 0.6;
  CHECK(q_log_pdf(eta, th) == Approx(-0.5 * std::log(2 * std::numbers::pi) - std::log(0.6) - 0.5 * z * z));
}

TEST_CASE("q_log_pdf is a sum of independent blocks") {
  const ParamLayout s = layout_of(ModelKind::SpatialAFT, 3, 4, true);
  const VariationalParams eta = random_eta(s, 9);
  Rng rng(1);
  const ModelParams th = q_sample(eta, rng).theta;
  const double blocks = diag_normal_log_pdf(th.beta, eta.mu_beta, eta.log_sd_beta) +
                        diag_normal_log_pdf(th.gamma, eta.mu_gamma, eta.log_sd_gamma) +
                        diag_normal_log_pdf(Eigen::Vector2d(th.mu, th.sigma_l), eta.mu_scalar, eta.log_sd_scalar) +
                        invgamma_log_pdf(eta.q_s2(), th.kp.s2_gamma) + invgamma_log_pdf(eta.q_nu(), th.kp.nu);
  CHECK(q_log_pdf(eta, th) == Approx(blocks).epsilon(1e-13));
}

TEST_CASE("q_sample") {
  const ParamLayout s = layout_of(ModelKind::SpatialAFT, 2, 3);
  VariationalParams eta = random_eta(s, 5);
  eta.set_gauss(eta.gauss_mean(), Eigen::VectorXd::Constant(s.gauss_dim(), -30.0));
  Rng rng(2);
  const QDraw q = q_sample(eta, rng);
  CHECK((s.gauss_coords(q.theta) - eta.gauss_mean()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(q.eps.size() == s.gauss_dim());

  Rng a(77), b(77);
  const QDraw qa = q_sample(eta, a), qb = q_sample(eta, b);
  CHECK(s.to_unconstrained(qa.theta) == s.to_unconstrained(qb.theta));
}

TEST_CASE("q_sample moments") {
  const ParamLayout s = layout_of(ModelKind::SpatialPH, 2, 2);
  VariationalParams eta = random_eta(s, 6);
  eta.ig_s2 = Eigen::Vector2d(std::log(4.0), std::log(3.0));  // mean 1, variance 0.5
  const int n = 100000;
  Rng rng(3);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(s.gauss_dim());
  double s2 = 0;
  for (int i = 0; i < n; ++i) {
    const ModelParams th = q_sample(eta, rng).theta;
    sum += s.gauss_coords(th);
    s2 += th.kp.s2_gamma;
  }
  const Eigen::ArrayXd err = (sum / n - eta.gauss_mean()).array().abs();
  const Eigen::ArrayXd bound = 3.0 * eta.gauss_log_sd().array().exp() / std::sqrt(double(n));
  CHECK((err <= bound).all());
  CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(0.5 / n));
}

TEST_CASE("flatten and unflatten") {
  const ParamLayout s = layout_of(ModelKind::SpatialPH, 3, 5);
  const VariationalParams eta = random_eta(s, 8);
  const Eigen::VectorXd f = flatten(eta);
  CHECK(flatten(unflatten(f, s)) == f);
  CHECK_THROWS(unflatten(Eigen::VectorXd::Zero(f.size() - 1), s));

  // documented ordering
  CHECK(f.segment(0, 3) == eta.mu_beta);
  CHECK(f.segment(3, 3) == eta.log_sd_beta);
  CHECK(f.segment(6, 5) == eta.mu_gamma);
  CHECK(f.segment(11, 5) == eta.log_sd_gamma);
  CHECK(f(16) == eta.mu_scalar(0));
  CHECK(f(17) == eta.log_sd_scalar(0));
  CHECK(f.segment(20, 2) == eta.ig_s2);
  CHECK(f.segment(22, 2) == eta.ig_nu);

  for (Eigen::Index i = 0; i < f.size(); ++i) {
    Eigen::VectorXd g = f;
    g(i) += 0.5;
    const Eigen::VectorXd back = flatten(unflatten(g, s));
    CHECK((back - f).cwiseAbs().cwiseMin(1.0).sum() == Approx(0.5));
  }
}

TEST_CASE("blocks normalize") {
  for (InvGammaParams p : {InvGammaParams{2.0, 1.0}, InvGammaParams{13.0, 0.1}, InvGammaParams{1.5, 3.0}}) {
    const auto f = [&](double x) { return x > 0 ? std::exp(invgamma_log_pdf(p, x)) : 0.0; };
    const double z = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, INFINITY, 15, 1e-12);
    CHECK(std::abs(z - 1.0) < 1e-6);
  }
}

TEST_CASE("negative entropy matches the mean log density") {
  const ParamLayout s = layout_of(ModelKind::SpatialAFT, 3, 4);
  const VariationalParams eta = random_eta(s, 10);
  const int n = 10000;
  Rng rng(4);
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double lq = q_log_pdf(eta, q_sample(eta, rng).theta);
    sum += lq;
    sq += lq * lq;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean + q_entropy(eta)) < 3 * se);
}

TEST_CASE("reparameterization derivatives") {
  const ParamLayout s = layout_of(ModelKind::SpatialAFT, 2, 2);
  const VariationalParams eta = random_eta(s, 12);
  const Eigen::VectorXd mean = eta.gauss_mean(), log_sd = eta.gauss_log_sd();
  const int G = s.gauss_dim();
  const double h = 1e-6;
  const auto draw = [&](const Eigen::VectorXd& m, const Eigen::VectorXd& ls) {
    VariationalParams e = eta;
    e.set_gauss(m, ls);
    Rng rng(99);
    return s.gauss_coords(q_sample(e, rng).theta);
  };
  const Eigen::VectorXd theta = draw(mean, log_sd);
  for (int i = 0; i < G; ++i) {
    Eigen::VectorXd up = mean, down = mean;
    up(i) += h;
    down(i) -= h;
    const Eigen::VectorXd dmu = (draw(up, log_sd) - draw(down, log_sd)) / (2 * h);
    CHECK(dmu(i) == Approx(1.0).epsilon(1e-8));
    CHECK(dmu.norm() == Approx(1.0).epsilon(1e-8));
    up = log_sd;
    down = log_sd;
    up(i) += h;
    down(i) -= h;
    const Eigen::VectorXd dls = (draw(mean, up) - draw(mean, down)) / (2 * h);
    CHECK(dls(i) == Approx(theta(i) - mean(i)).epsilon(1e-7).scale(1e-9));
  }
}

TEST_CASE("q_score matches finite differences of q_log_pdf") {
  const ParamLayout s = layout_of(ModelKind::SpatialPH, 2, 3, true);
  const VariationalParams eta = random_eta(s, 14);
  Rng rng(5);
  const ModelParams th = q_sample(eta, rng).theta;
  const Eigen::VectorXd fd = testing::central_difference(
      [&](const Eigen::VectorXd& flat) { return q_log_pdf(unflatten(flat, s), th); }, flatten(eta), 1e-6);
  const Eigen::VectorXd sc = q_score(eta, th);
  for (Eigen::Index i = 0; i < sc.size(); ++i) CHECK(sc(i) == Approx(fd(i)).epsilon(1e-6).scale(1e-6));
}

TEST_CASE("json round trip") {
  const ParamLayout s = layout_of(ModelKind::SpatialAFT, 2, 3, true);
  const VariationalParams eta = random_eta(s, 15);
  const VariationalParams back = variational_from_json(nlohmann::json::parse(to_json(eta).dump()));
  CHECK(flatten(back) == flatten(eta));
  CHECK(back.shape.explicit_mu);
  CHECK(back.shape.m == 3);
}
