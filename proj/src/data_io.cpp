#include "spvi/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spvi {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double to_double(const std::string& s, const std::string& what, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad " + what + " '" + s + "'", line);
  }
}

int to_int(const std::string& s, const std::string& what, std::size_t line) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad " + what + " '" + s + "'", line);
  }
}

// Reads non-empty, non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_records(std::istream& is, std::string& header) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty() || line[0] == '#') continue;
    if (!have_header) {
      header = line;
      have_header = true;
      continue;
    }
    auto f = split_csv(line);
    for (auto& x : f) x = trim(x);
    rows.emplace_back(lineno, std::move(f));
  }
  if (!have_header) throw DataError("missing header row");
  return rows;
}

std::vector<std::string> normalized_header(const std::string& header) {
  auto cols = split_csv(header);
  for (auto& c : cols) c = lower(trim(c));
  return cols;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return f;
}

std::vector<std::string> int_levels(int lo, int hi) {
  std::vector<std::string> v;
  for (int i = lo; i <= hi; ++i) v.push_back(std::to_string(i));
  return v;
}

}  // namespace

std::vector<std::string> DummyEncoding::columns() const {
  std::vector<std::string> out;
  for (const auto& l : levels)
    if (l != reference) out.push_back(l);
  return out;
}

Eigen::VectorXd DummyEncoding::apply(const std::string& level) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(width());
  if (level == reference) return x;
  int k = 0;
  for (const auto& l : levels) {
    if (l == reference) continue;
    if (l == level) {
      x(k) = 1.0;
      return x;
    }
    ++k;
  }
  throw std::out_of_range("dummy encoding: unseen level '" + level + "'");
}

DummyEncoding dummy_encode(const std::vector<std::string>& levels, const std::string& reference) {
  if (levels.size() < 2) throw std::invalid_argument("dummy_encode: need at least two levels");
  if (std::find(levels.begin(), levels.end(), reference) == levels.end())
    throw std::invalid_argument("dummy_encode: reference level not among levels");
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = i + 1; j < levels.size(); ++j)
      if (levels[i] == levels[j]) throw std::invalid_argument("dummy_encode: duplicate level '" + levels[i] + "'");
  return {levels, reference};
}

// --- GPU ---------------------------------------------------------------------

LoadedData load_gpu_csv(std::istream& is) {
  std::string header;
  const auto rows = read_records(is, header);
  const std::vector<std::string> plain{"sn", "column", "row", "cage", "slot", "node", "fail_type", "time_years"};
  const std::vector<std::string> display{"sn",   "column",    "row", "cage", "slot", "node", "fail type",
                                         "failure time (years)"};
  const auto cols = normalized_header(header);
  if (cols != plain && cols != display) throw DataError("GPU CSV: unexpected header '" + header + "'", 1);

  const DummyEncoding cage = dummy_encode(int_levels(0, 2), "2");
  const DummyEncoding slot = dummy_encode(int_levels(0, 7), "7");
  const DummyEncoding node = dummy_encode(int_levels(0, 3), "3");

  LoadedData out;
  out.covariate_names.emplace_back("const");
  for (const auto& c : cage.columns()) out.covariate_names.push_back("cage" + c);
  for (const auto& c : slot.columns()) out.covariate_names.push_back("slot" + c);
  for (const auto& c : node.columns()) out.covariate_names.push_back("node" + c);
  const int p = static_cast<int>(out.covariate_names.size());
  out.data.p = p;
  out.data.model_hint = ModelKind::SpatialAFT;

  struct Raw {
    std::string sn;
    int row, col;
    Eigen::VectorXd x;
    int event;
    double time;
  };
  std::vector<Raw> raw;
  std::map<std::pair<int, int>, int> loc_index;
  for (const auto& [line, f] : rows) {
    if (f.size() != 8) throw DataError("GPU CSV: expected 8 fields, got " + std::to_string(f.size()), line);
    Raw r;
    r.sn = f[0];
    r.col = to_int(f[1], "column", line);
    r.row = to_int(f[2], "row", line);
    const int c = to_int(f[3], "cage", line), s = to_int(f[4], "slot", line), n = to_int(f[5], "node", line);
    if (c < 0 || c > 2) throw DataError("GPU CSV: cage out of range", line);
    if (s < 0 || s > 7) throw DataError("GPU CSV: slot out of range", line);
    if (n < 0 || n > 3) throw DataError("GPU CSV: node out of range", line);
    r.x.resize(p);
    r.x(0) = 1.0;
    r.x.segment(1, 2) = cage.apply(std::to_string(c));
    r.x.segment(3, 7) = slot.apply(std::to_string(s));
    r.x.segment(10, 3) = node.apply(std::to_string(n));
    const std::string ft = f[6];
    if (ft == "OTB") {
      r.event = 1;
    } else {
      r.event = 0;
      if (lower(ft) != "censor") ++out.warnings;
    }
    r.time = to_double(f[7], "time", line);
    if (!(r.time > 0)) throw DataError("GPU CSV: time must be positive", line);
    loc_index.emplace(std::make_pair(r.row, r.col), 0);
    raw.push_back(std::move(r));
  }
  if (raw.empty()) throw DataError("GPU CSV: no data rows");

  Eigen::MatrixX2d coords(static_cast<Eigen::Index>(loc_index.size()), 2);
  std::vector<std::string> ids;
  int k = 0;
  for (auto& [rc, idx] : loc_index) {
    idx = k;
    coords.row(k) << rc.first, rc.second;
    ids.push_back("r" + std::to_string(rc.first) + "c" + std::to_string(rc.second));
    ++k;
  }
  out.layout = build_layout(coords, DistanceMetric::EuclideanPerAxisStandardized, ids);
  for (auto& r : raw)
    out.data.units.push_back(make_unit(r.sn, loc_index.at({r.row, r.col}), r.time, r.event, std::move(r.x)));
  out.data.validate(out.layout.size());
  return out;
}

LoadedData load_gpu_csv(const std::string& path) {
  auto f = open_in(path);
  return load_gpu_csv(f);
}

// --- pine trees ----------------------------------------------------------------

LoadedData load_tree_csv(std::istream& is) {
  std::string header;
  const auto rows = read_records(is, header);
  const std::vector<std::string> expected{"sn",   "site_id",     "lat",         "lon",      "period",          "dbh_cm",
                                          "th_m", "crown_class", "phys_region", "thinning", "died_this_period"};
  if (normalized_header(header) != expected) throw DataError("tree CSV: unexpected header '" + header + "'", 1);

  const DummyEncoding crown = dummy_encode(int_levels(1, 4), "4");
  const DummyEncoding region = dummy_encode(int_levels(1, 3), "3");
  const DummyEncoding thin = dummy_encode(int_levels(1, 3), "3");
  constexpr double kPeriodYears = 3.0;
  constexpr int kPeriods = 7;

  LoadedData out;
  out.covariate_names = {"dbh", "th"};
  for (const auto& c : crown.columns()) out.covariate_names.push_back("crown" + c);
  for (const auto& c : region.columns()) out.covariate_names.push_back("region" + c);
  for (const auto& c : thin.columns()) out.covariate_names.push_back("thinning" + c);
  const int p = static_cast<int>(out.covariate_names.size());
  out.data.p = p;
  out.data.model_hint = ModelKind::SpatialPH;

  struct Tree {
    std::string site;
    std::vector<int> periods;
    std::vector<Eigen::VectorXd> xs;
    std::vector<std::size_t> lines;
    bool died = false;
  };
  std::vector<std::string> tree_order;
  std::map<std::string, Tree> trees;
  std::vector<std::string> site_order;
  std::map<std::string, std::pair<double, double>> sites;

  for (const auto& [line, f] : rows) {
    if (f.size() != 11) throw DataError("tree CSV: expected 11 fields, got " + std::to_string(f.size()), line);
    const std::string& sn = f[0];
    const std::string& site = f[1];
    const double lat = to_double(f[2], "lat", line), lon = to_double(f[3], "lon", line);
    const int period = to_int(f[4], "period", line);
    if (period < 1 || period > kPeriods) throw DataError("tree CSV: period out of range", line);
    Eigen::VectorXd x(p);
    x(0) = to_double(f[5], "dbh_cm", line);
    x(1) = to_double(f[6], "th_m", line);
    try {
      x.segment(2, 3) = crown.apply(f[7]);
      x.segment(5, 2) = region.apply(f[8]);
      x.segment(7, 2) = thin.apply(f[9]);
    } catch (const std::out_of_range& e) {
      throw DataError(std::string("tree CSV: ") + e.what(), line);
    }
    const std::string died_s = lower(f[10]);
    bool died;
    if (died_s == "1" || died_s == "true") died = true;
    else if (died_s == "0" || died_s == "false") died = false;
    else throw DataError("tree CSV: bad died_this_period '" + f[10] + "'", line);

    auto [it, fresh] = sites.emplace(site, std::make_pair(lat, lon));
    if (fresh) site_order.push_back(site);
    else if (it->second != std::make_pair(lat, lon)) throw DataError("tree CSV: site '" + site + "' has inconsistent coordinates", line);

    auto [tit, new_tree] = trees.try_emplace(sn);
    Tree& t = tit->second;
    if (new_tree) {
      tree_order.push_back(sn);
      t.site = site;
    } else if (t.site != site) {
      throw DataError("tree CSV: tree '" + sn + "' changes site", line);
    }
    if (t.died) throw DataError("tree CSV: tree '" + sn + "' has rows after its death", line);
    t.periods.push_back(period);
    t.xs.push_back(std::move(x));
    t.lines.push_back(line);
    t.died = died;
  }
  if (trees.empty()) throw DataError("tree CSV: no data rows");

  std::map<std::string, int> site_index;
  Eigen::MatrixX2d coords(static_cast<Eigen::Index>(site_order.size()), 2);
  for (std::size_t i = 0; i < site_order.size(); ++i) {
    site_index[site_order[i]] = static_cast<int>(i);
    coords.row(static_cast<Eigen::Index>(i)) << sites[site_order[i]].first, sites[site_order[i]].second;
  }
  out.layout = build_layout(coords, DistanceMetric::GreatCircleMaxStandardized, site_order);

  for (const auto& sn : tree_order) {
    const Tree& t = trees.at(sn);
    for (std::size_t k = 0; k < t.periods.size(); ++k)
      if (t.periods[k] != static_cast<int>(k) + 1)
        throw DataError("tree CSV: tree '" + sn + "' has a gap in its periods", t.lines[k]);
    Unit u;
    u.unit_id = sn;
    u.location = site_index.at(t.site);
    u.event = t.died ? 1 : 0;
    const int last = t.periods.back();
    u.time = kPeriodYears * last;
    for (std::size_t k = 0; k < t.periods.size(); ++k)
      u.path.push_back({kPeriodYears * static_cast<double>(k), kPeriodYears * static_cast<double>(k + 1), t.xs[k]});
    out.data.units.push_back(std::move(u));
  }
  out.data.validate(out.layout.size());
  return out;
}

LoadedData load_tree_csv(const std::string& path) {
  auto f = open_in(path);
  return load_tree_csv(f);
}

// --- simulation ------------------------------------------------------------------

SimulatedData simulate_dataset(const SimulationSpec& spec, const SpatialLayout& layout, Rng& rng) {
  if (spec.model == ModelKind::Generic) throw std::invalid_argument("simulate_dataset: generic model");
  if (spec.n_per_location < 1) throw std::invalid_argument("simulate_dataset: n_per_location must be positive");
  if (!(spec.censor_time > 0)) throw std::invalid_argument("simulate_dataset: censor_time must be positive");
  const ModelParams& th = spec.truth;
  const int p = static_cast<int>(th.beta.size());
  if (p < 1) throw std::invalid_argument("simulate_dataset: beta must be non-empty");
  const Eigen::Index m = layout.size();
  std::normal_distribution<double> norm(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  SimulatedData out;
  out.gamma = Eigen::VectorXd::Zero(m);
  if (m > 0 && th.kp.s2_gamma > 0) {
    const CholeskyFactor chol = assemble_covariance(layout, th.kp);
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = norm(rng);
    out.gamma = chol.lower * z;
  }
  out.data.p = p;
  out.data.model_hint = spec.model;
  const double sigma = std::exp(th.sigma_l);
  const double a = std::exp(th.a_l), b = std::exp(th.b_l);
  int id = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int j = 0; j < spec.n_per_location; ++j) {
      Eigen::VectorXd x(p);
      for (int c = 0; c < p; ++c) x(c) = (c == 0 && spec.intercept) ? 1.0 : norm(rng);
      double t;
      if (spec.model == ModelKind::SpatialAFT) {
        const double eps = ls_sample(spec.kind, rng);
        t = std::exp(th.mu + x.dot(th.beta) + out.gamma(i) + sigma * eps);
      } else {
        // H(t) = exp(gamma + x'beta) a t^(b+1) / (b+1) = E, E ~ Exp(1)
        const double e = expo(rng);
        t = std::pow((b + 1.0) * e / (a * std::exp(out.gamma(i) + x.dot(th.beta))), 1.0 / (b + 1.0));
      }
      int event = 1;
      if (t > spec.censor_time) {
        t = spec.censor_time;
        event = 0;
      }
      out.data.units.push_back(make_unit("u" + std::to_string(id++), static_cast<int>(i), t, event, std::move(x)));
    }
  }
  return out;
}

// --- canonical CSV -----------------------------------------------------------------

void write_dataset_csv(std::ostream& os, const Dataset& d) {
  os << "# spvi-dataset v1 p=" << d.p << " model=" << (d.model_hint ? to_string(*d.model_hint) : "none") << '\n';
  os << "unit_id,location,time,event,t_start,t_end";
  for (int j = 0; j < d.p; ++j) os << ",x" << j;
  os << '\n' << std::setprecision(17);
  for (const Unit& u : d.units) {
    for (const Segment& s : u.path) {
      os << u.unit_id << ',' << u.location << ',' << u.time << ',' << u.event << ',' << s.t_start << ',' << s.t_end;
      for (Eigen::Index j = 0; j < s.x.size(); ++j) os << ',' << s.x(j);
      os << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("dataset CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream schema(line);
  std::string hash, tag, version, p_s, model_s;
  schema >> hash >> tag >> version >> p_s >> model_s;
  if (hash != "#" || tag != "spvi-dataset" || version != "v1" || p_s.rfind("p=", 0) != 0 ||
      model_s.rfind("model=", 0) != 0)
    throw DataError("dataset CSV: missing or unsupported schema line", 1);
  Dataset d;
  d.p = to_int(p_s.substr(2), "p", 1);
  if (d.p < 0) throw DataError("dataset CSV: negative p", 1);
  const std::string model = model_s.substr(6);
  if (model != "none") {
    try {
      d.model_hint = parse_model(model);
    } catch (const std::invalid_argument&) {
      throw DataError("dataset CSV: unknown model '" + model + "'", 1);
    }
  }
  if (!std::getline(is, line)) throw DataError("dataset CSV: missing header", 2);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected = "unit_id,location,time,event,t_start,t_end";
  for (int j = 0; j < d.p; ++j) expected += ",x" + std::to_string(j);
  if (line != expected) throw DataError("dataset CSV: unexpected header '" + line + "'", 2);

  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != static_cast<std::size_t>(6 + d.p)) throw DataError("dataset CSV: wrong field count", lineno);
    Segment s;
    s.t_start = to_double(f[4], "t_start", lineno);
    s.t_end = to_double(f[5], "t_end", lineno);
    s.x.resize(d.p);
    for (int j = 0; j < d.p; ++j) s.x(j) = to_double(f[static_cast<std::size_t>(6 + j)], "covariate", lineno);
    const int loc = to_int(f[1], "location", lineno);
    const double time = to_double(f[2], "time", lineno);
    const int event = to_int(f[3], "event", lineno);
    if (!d.units.empty() && d.units.back().unit_id == f[0]) {
      Unit& u = d.units.back();
      if (u.location != loc || u.time != time || u.event != event)
        throw DataError("dataset CSV: inconsistent unit fields for '" + f[0] + "'", lineno);
      u.path.push_back(std::move(s));
    } else {
      Unit u;
      u.unit_id = f[0];
      u.location = loc;
      u.time = time;
      u.event = event;
      u.path.push_back(std::move(s));
      d.units.push_back(std::move(u));
    }
  }
  return d;
}

void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_dataset_csv(f, d);
  if (!f) throw IoError("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  auto f = open_in(path);
  return read_dataset_csv(f);
}

}  // namespace spvi
