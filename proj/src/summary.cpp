#include "spvi/summary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "spvi/errors.hpp"

namespace spvi {

const ParamSummary* PosteriorSummary::find(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

const ParamSummary& PosteriorSummary::at(const std::string& name) const {
  const ParamSummary* p = find(name);
  if (!p) throw std::out_of_range("no parameter named " + name);
  return *p;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile: prob outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PosteriorSummary summarize_draws(const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
                                 double ci_level) {
  if (static_cast<Eigen::Index>(names.size()) != draws.cols())
    throw std::invalid_argument("summarize_draws: names/columns mismatch");
  if (draws.rows() < 2) throw std::invalid_argument("summarize_draws: need at least two draws");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw std::invalid_argument("summarize_draws: ci_level outside (0, 1)");
  PosteriorSummary out;
  out.ci_level = ci_level;
  out.num_draws = static_cast<std::size_t>(draws.rows());
  const double tail = 0.5 * (1.0 - ci_level);
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    ParamSummary s;
    s.name = names[static_cast<std::size_t>(j)];
    const Eigen::VectorXd col = draws.col(j);
    s.mean = col.mean();
    s.sd = std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(col.size() - 1));
    std::vector<double> v(col.data(), col.data() + col.size());
    s.lower = quantile(v, tail);
    s.upper = quantile(std::move(v), 1.0 - tail);
    out.params.push_back(std::move(s));
  }
  return out;
}

nlohmann::json to_json(const PosteriorSummary& s) {
  nlohmann::json j;
  j["ci_level"] = s.ci_level;
  j["num_draws"] = s.num_draws;
  j["params"] = nlohmann::json::array();
  for (const auto& p : s.params) {
    nlohmann::json r{{"name", p.name}, {"mean", p.mean}, {"sd", p.sd}, {"lower", p.lower}, {"upper", p.upper}};
    r["ess"] = p.ess ? nlohmann::json(*p.ess) : nlohmann::json(nullptr);
    r["rhat"] = p.rhat ? nlohmann::json(*p.rhat) : nlohmann::json(nullptr);
    j["params"].push_back(std::move(r));
  }
  return j;
}

PosteriorSummary summary_from_json(const nlohmann::json& j) {
  PosteriorSummary s;
  s.ci_level = j.at("ci_level").get<double>();
  s.num_draws = j.value("num_draws", std::size_t{0});
  for (const auto& r : j.at("params")) {
    ParamSummary p;
    p.name = r.at("name").get<std::string>();
    p.mean = r.at("mean").get<double>();
    p.sd = r.at("sd").get<double>();
    p.lower = r.at("lower").get<double>();
    p.upper = r.at("upper").get<double>();
    if (r.contains("ess") && !r["ess"].is_null()) p.ess = r["ess"].get<double>();
    if (r.contains("rhat") && !r["rhat"].is_null()) p.rhat = r["rhat"].get<double>();
    s.params.push_back(std::move(p));
  }
  return s;
}

void write_draws_csv(const std::string& path, const Eigen::MatrixXd& draws, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    for (Eigen::Index j = 0; j < draws.cols(); ++j) out << (j ? "," : "") << draws(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace spvi
