#include <doctest.h>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spvi/data_io.hpp"
#include "spvi/errors.hpp"
#include "test_support.hpp"

using namespace spvi;
using doctest::Approx;

namespace {

const char* kTable1 =
    "SN,Column,Row,Cage,Slot,Node,Fail Type,Failure Time (years)\n"
    "323512026070,11,4,0,7,2,censor,5.91\n"
    "323512026071,18,6,1,3,0,censor,3.68\n"
    "323512026072,24,1,0,4,2,censor,0.44\n"
    "323512026108,9,1,0,0,2,OTB,4.00\n"
    "323512026161,12,4,2,6,2,OTB,3.15\n";

const char* kTreeHeader = "sn,site_id,lat,lon,period,dbh_cm,th_m,crown_class,phys_region,thinning,died_this_period\n";

std::string tree_rows(const std::string& sn, const std::string& site, double lat, double lon, int periods, bool dies,
                      int crown = 1, int region = 1, int thinning = 1) {
  std::ostringstream os;
  for (int k = 1; k <= periods; ++k)
    os << sn << ',' << site << ',' << lat << ',' << lon << ',' << k << ',' << 20 + k << ',' << 15 + 0.5 * k << ','
       << crown << ',' << region << ',' << thinning << ',' << (dies && k == periods ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace

TEST_CASE("GPU loader on the illustration rows") {
  std::istringstream is(kTable1);
  const LoadedData ld = load_gpu_csv(is);
  CHECK(ld.data.size() == 5);
  CHECK(ld.layout.size() == 5);
  CHECK(ld.data.p == 13);
  CHECK(ld.covariate_names.size() == 13);
  CHECK(ld.covariate_names[0] == "const");
  const std::vector<int> delta{0, 0, 0, 1, 1};
  for (std::size_t i = 0; i < 5; ++i) CHECK(ld.data.units[i].event == delta[i]);
  CHECK(ld.data.units[0].time == Approx(5.91));
  CHECK(ld.warnings == 0);
  CHECK(ld.data.model_hint == ModelKind::SpatialAFT);
  CHECK(ld.layout.metric == DistanceMetric::EuclideanPerAxisStandardized);
  for (const Unit& u : ld.data.units) CHECK(u.path[0].x(0) == 1.0);
}

TEST_CASE("GPU reference levels and shared locations") {
  std::istringstream is(
      "sn,column,row,cage,slot,node,fail_type,time_years\n"
      "a,1,1,2,7,3,OTB,1.0\n"
      "b,1,1,0,0,0,censor,2.0\n"
      "c,5,2,1,1,1,DBE,2.5\n");
  const LoadedData ld = load_gpu_csv(is);
  CHECK(ld.data.units[0].path[0].x.tail(12).isZero());
  CHECK(ld.data.units[0].location == ld.data.units[1].location);
  CHECK(ld.layout.size() == 2);
  CHECK(ld.warnings == 1);
  CHECK(ld.data.units[2].event == 0);
  const Eigen::VectorXd& xb = ld.data.units[1].path[0].x;
  CHECK(xb(1) == 1.0);  // cage0
  CHECK(xb(3) == 1.0);  // slot0
  CHECK(xb(10) == 1.0);  // node0
}

TEST_CASE("GPU loader errors carry line numbers") {
  std::istringstream bad_field("sn,column,row,cage,slot,node,fail_type,time_years\na,1,1,0,0,0,OTB,1.0\nb,1,x,0,0,0,OTB,1\n");
  try {
    load_gpu_csv(bad_field);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream range("sn,column,row,cage,slot,node,fail_type,time_years\na,1,1,3,0,0,OTB,1.0\n");
  CHECK_THROWS_AS(load_gpu_csv(range), DataError);
  std::istringstream header("sn,col,row\n");
  CHECK_THROWS_AS(load_gpu_csv(header), DataError);
  std::istringstream short_row("sn,column,row,cage,slot,node,fail_type,time_years\na,1,1,0,0\n");
  CHECK_THROWS_AS(load_gpu_csv(short_row), DataError);
  CHECK_THROWS_AS(load_gpu_csv(std::string("/nonexistent/gpu.csv")), IoError);
}

TEST_CASE("tree loader") {
  std::istringstream is(std::string(kTreeHeader) + tree_rows("t1", "s1", 45.0, -120.0, 7, false) +
                        tree_rows("t2", "s2", 46.0, -121.0, 3, true, 4, 3, 3) +
                        tree_rows("t3", "s1", 45.0, -120.0, 2, false, 2, 2, 2));
  const LoadedData ld = load_tree_csv(is);
  CHECK(ld.data.p == 9);
  CHECK(ld.data.size() == 3);
  CHECK(ld.layout.size() == 2);
  CHECK(ld.layout.metric == DistanceMetric::GreatCircleMaxStandardized);
  CHECK(ld.data.model_hint == ModelKind::SpatialPH);

  const Unit& alive = ld.data.units[0];
  CHECK(alive.time == 21.0);
  CHECK(alive.event == 0);
  CHECK(alive.path.size() == 7);
  CHECK(alive.path[6].t_end == 21.0);
  CHECK(alive.path[2].x(0) == 23.0);

  const Unit& dead = ld.data.units[1];
  CHECK(dead.time == 9.0);
  CHECK(dead.event == 1);
  CHECK(dead.path.back().x.tail(7).isZero());

  CHECK(ld.data.units[2].location == alive.location);
  CHECK(ld.layout.max_raw_distance > 0);
}

TEST_CASE("tree loader errors") {
  std::istringstream gap(std::string(kTreeHeader) + "t1,s1,45,-120,1,20,15,1,1,1,0\nt1,s1,45,-120,3,21,16,1,1,1,0\n");
  CHECK_THROWS_WITH_AS(load_tree_csv(gap), doctest::Contains("t1"), DataError);
  std::istringstream after(std::string(kTreeHeader) + "t1,s1,45,-120,1,20,15,1,1,1,1\nt1,s1,45,-120,2,21,16,1,1,1,0\n");
  CHECK_THROWS_AS(load_tree_csv(after), DataError);
  std::istringstream level(std::string(kTreeHeader) + "t1,s1,45,-120,1,20,15,5,1,1,0\n");
  CHECK_THROWS_AS(load_tree_csv(level), DataError);
  std::istringstream coords(std::string(kTreeHeader) + "t1,s1,45,-120,1,20,15,1,1,1,0\nt2,s1,44,-120,1,20,15,1,1,1,0\n");
  CHECK_THROWS_AS(load_tree_csv(coords), DataError);
}

TEST_CASE("dummy coding") {
  const DummyEncoding e = dummy_encode({"a", "b", "c"}, "c");
  CHECK(e.width() == 2);
  CHECK(e.apply("a") == Eigen::Vector2d(1, 0));
  CHECK(e.apply("b") == Eigen::Vector2d(0, 1));
  CHECK(e.apply("c") == Eigen::Vector2d(0, 0));
  CHECK(e.columns() == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(e.apply("d"), std::out_of_range);

  const DummyEncoding two = dummy_encode({"x", "y"}, "y");
  CHECK(two.width() == 1);
  CHECK(two.apply("x")(0) == 1.0);

  const DummyEncoding big = dummy_encode({"0", "1", "2", "3", "4"}, "2");
  std::vector<Eigen::VectorXd> codes;
  for (const auto& l : big.levels) codes.push_back(big.apply(l));
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t j = i + 1; j < codes.size(); ++j) CHECK(codes[i] != codes[j]);
  CHECK_THROWS(dummy_encode({"a"}, "a"));
  CHECK_THROWS(dummy_encode({"a", "b"}, "z"));
}

TEST_CASE("design matrix has full column rank when every level occurs") {
  std::ostringstream csv;
  csv << "sn,column,row,cage,slot,node,fail_type,time_years\n";
  int id = 0;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 8; ++s)
      for (int n = 0; n < 4; ++n) csv << id++ << ',' << s << ',' << c << ',' << c << ',' << s << ',' << n << ",OTB,1.5\n";
  std::istringstream is(csv.str());
  const LoadedData ld = load_gpu_csv(is);
  Eigen::MatrixXd X(ld.data.size(), ld.data.p);
  for (std::size_t i = 0; i < ld.data.size(); ++i) X.row(Eigen::Index(i)) = ld.data.units[i].path[0].x.transpose();
  CHECK(Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(X).rank() == 13);
}

TEST_CASE("simulation without noise") {
  const SpatialLayout layout = testing::grid_layout(2, 2);
  SimulationSpec spec;
  spec.truth = testing::aft_truth(3, 4);
  spec.truth.sigma_l = std::log(1e-8);
  spec.truth.kp.s2_gamma = 0.0;
  spec.truth.mu = 0.2;
  Rng rng(1);
  const SimulatedData sim = simulate_dataset(spec, layout, rng);
  CHECK(sim.gamma.isZero());
  CHECK(sim.data.size() == 80);
  for (const Unit& u : sim.data.units)
    CHECK(std::log(u.time) == Approx(0.2 + u.path[0].x.dot(spec.truth.beta)).epsilon(1e-6));
}

TEST_CASE("constant hazard simulation is Exp(1)") {
  Eigen::MatrixX2d one(1, 2);
  one << 0, 0;
  const SpatialLayout layout = build_layout(one, DistanceMetric::EuclideanPerAxisStandardized);
  SimulationSpec spec;
  spec.model = ModelKind::SpatialPH;
  spec.truth.model = ModelKind::SpatialPH;
  spec.truth.beta = Eigen::VectorXd::Zero(1);
  spec.truth.a_l = 0.0;
  spec.truth.b_l = -INFINITY;
  spec.truth.kp.s2_gamma = 0.0;
  spec.intercept = false;
  spec.n_per_location = 10000;
  Rng rng(2);
  const SimulatedData sim = simulate_dataset(spec, layout, rng);
  std::vector<double> t;
  for (const Unit& u : sim.data.units) t.push_back(u.time);
  std::sort(t.begin(), t.end());
  const double n = double(t.size());
  double d = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double f = 1 - std::exp(-t[i]);
    d = std::max({d, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("censoring fraction matches the model cdf") {
  // no random effects, no covariates beyond the intercept: P(T > c) is closed form
  Eigen::MatrixX2d one(1, 2);
  one << 0, 0;
  const SpatialLayout layout = build_layout(one, DistanceMetric::EuclideanPerAxisStandardized);
  SimulationSpec spec;
  spec.truth = testing::aft_truth(1, 1);
  spec.truth.kp.s2_gamma = 0.0;
  spec.n_per_location = 5000;
  spec.censor_time = 3.0;
  Rng rng(3);
  const SimulatedData sim = simulate_dataset(spec, layout, rng);
  int censored = 0;
  for (const Unit& u : sim.data.units) {
    censored += u.event == 0;
    if (!u.event) CHECK(u.time == 3.0);
  }
  const double z = (std::log(3.0) - 1.0) / 0.3;
  const double p = std::exp(-std::exp(z));
  const double n = double(sim.data.size());
  CHECK(std::abs(censored / n - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("canonical CSV round trip") {
  std::istringstream tree(std::string(kTreeHeader) + tree_rows("t1", "s1", 45.0, -120.0, 4, true) +
                          tree_rows("t2", "s2", 46.0, -121.5, 7, false));
  const Dataset d = load_tree_csv(tree).data;
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const Dataset back = read_dataset_csv(ss);
  CHECK(back.p == d.p);
  CHECK(back.model_hint == d.model_hint);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Unit &a = d.units[i], &b = back.units[i];
    CHECK(a.unit_id == b.unit_id);
    CHECK(a.location == b.location);
    CHECK(a.time == b.time);
    CHECK(a.event == b.event);
    REQUIRE(a.path.size() == b.path.size());
    for (std::size_t k = 0; k < a.path.size(); ++k) {
      CHECK(a.path[k].t_start == b.path[k].t_start);
      CHECK(a.path[k].t_end == b.path[k].t_end);
      CHECK(a.path[k].x == b.path[k].x);
    }
  }

  const SimulatedData sim = testing::simulate_aft(testing::grid_layout(2, 2), 3, 5, 2.0, 4);
  std::stringstream s2;
  write_dataset_csv(s2, sim.data);
  const std::string first = s2.str();
  std::stringstream s3;
  write_dataset_csv(s3, read_dataset_csv(s2));
  CHECK(s3.str() == first);

  std::istringstream no_schema("unit_id,location,time,event,t_start,t_end\n");
  CHECK_THROWS_AS(read_dataset_csv(no_schema), DataError);
}

TEST_CASE("split_csv") {
  CHECK(split_csv("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv("x") == std::vector<std::string>{"x"});
}
