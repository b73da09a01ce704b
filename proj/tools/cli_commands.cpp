#include "cli_commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "spvi/data_io.hpp"
#include "spvi/diagnostics.hpp"
#include "spvi/errors.hpp"
#include "spvi/hmc.hpp"
#include "spvi/summary.hpp"
#include "spvi/vi_engine.hpp"

namespace spvi::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// --- config schema -----------------------------------------------------------

// Allowed keys per section; a nested section maps to its own key set.
const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"", {"model", "kind", "explicit_mu", "engine", "seed", "threads", "out_dir", "data", "priors", "vi", "hmc",
            "simulate", "fit_result", "inputs", "nll_include_random_effects", "correlation_points"}},
      {"data", {"schema", "path", "layout", "metric"}},
      {"priors", {"s2", "nu"}},
      {"priors.s2", {"shape", "scale"}},
      {"priors.nu", {"shape", "scale"}},
      {"vi",
       {"alpha", "h", "tau", "max_iters", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "gradient_mode",
        "smooth_stopping", "smoothing_window", "score_baseline", "posterior_draws", "ci_level"}},
      {"hmc", {"warmup_iters", "sample_iters", "leapfrog_steps", "target_accept", "adapt_mass", "initial_step_size"}},
      {"simulate", {"grid", "layout", "metric", "n_per_location", "censor_time", "intercept", "truth"}},
      {"simulate.truth", {"mu", "beta", "sigma", "a", "b", "s2_gamma", "nu"}},
  };
  return s;
}

void check_section(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  const auto& allowed = schema().at(path);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + (path.empty() ? key : path + "." + key) + "'");
    const std::string child = path.empty() ? key : path + "." + key;
    if (schema().count(child)) check_section(value, child);
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

const json& section(const json& cfg, const std::string& key) {
  static const json empty = json::object();
  return cfg.contains(key) ? cfg.at(key) : empty;
}

std::string out_dir(const json& cfg) {
  const std::string d = get_or<std::string>(cfg, "out_dir", "out");
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create output directory " + d + ": " + ec.message());
  return d;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << std::setprecision(17);
  return f;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const fs::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + p.string());
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).string();
}

ModelKind model_of(const json& cfg) {
  const std::string m = get_or<std::string>(cfg, "model", "aft");
  try {
    const ModelKind k = parse_model(m);
    if (k == ModelKind::Generic) throw std::invalid_argument(m);
    return k;
  } catch (const std::invalid_argument&) {
    throw ConfigError("unknown model '" + m + "'");
  }
}

LocationScaleKind kind_of(const json& cfg) {
  const std::string k = get_or<std::string>(cfg, "kind", "sev");
  try {
    return parse_location_scale(k);
  } catch (const std::invalid_argument&) {
    throw ConfigError("unknown error distribution '" + k + "'");
  }
}

PriorConfig priors_of(const json& cfg) {
  PriorConfig p;
  const json& pr = section(cfg, "priors");
  auto read_ig = [&](const char* key, InvGammaParams& ig) {
    const json& s = section(pr, key);
    ig.shape = get_or<double>(s, "shape", ig.shape);
    ig.scale = get_or<double>(s, "scale", ig.scale);
    if (!(ig.shape > 0 && ig.scale > 0)) throw ConfigError(std::string("prior ") + key + " needs positive shape and scale");
  };
  read_ig("s2", p.s2);
  read_ig("nu", p.nu);
  return p;
}

VIConfig vi_config_of(const json& cfg, const std::string& engine) {
  VIConfig c;
  const json& v = section(cfg, "vi");
  c.alpha = get_or<double>(v, "alpha", c.alpha);
  c.h = get_or<int>(v, "h", c.h);
  c.tau = get_or<double>(v, "tau", c.tau);
  c.max_iters = get_or<int>(v, "max_iters", c.max_iters);
  c.learning_rate = get_or<double>(v, "learning_rate", c.learning_rate);
  c.adam_beta1 = get_or<double>(v, "adam_beta1", c.adam_beta1);
  c.adam_beta2 = get_or<double>(v, "adam_beta2", c.adam_beta2);
  c.adam_eps = get_or<double>(v, "adam_eps", c.adam_eps);
  if (v.contains("gradient_mode")) {
    try {
      c.gradient_mode = parse_gradient_mode(get_or<std::string>(v, "gradient_mode", ""));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  c.smooth_stopping = get_or<bool>(v, "smooth_stopping", c.smooth_stopping);
  c.smoothing_window = get_or<int>(v, "smoothing_window", c.smoothing_window);
  c.score_baseline = get_or<bool>(v, "score_baseline", c.score_baseline);
  c.posterior_draws = get_or<int>(v, "posterior_draws", c.posterior_draws);
  c.ci_level = get_or<double>(v, "ci_level", c.ci_level);
  c.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  c.threads = get_or<unsigned>(cfg, "threads", 0);
  if (engine == "vi-kl") c.alpha = 1.0;
  else if (c.alpha == 1.0) throw ConfigError("vi-alpha needs alpha != 1 (use engine vi-kl for the ELBO)");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

HMCConfig hmc_config_of(const json& cfg) {
  HMCConfig c;
  const json& h = section(cfg, "hmc");
  c.warmup_iters = get_or<int>(h, "warmup_iters", c.warmup_iters);
  c.sample_iters = get_or<int>(h, "sample_iters", c.sample_iters);
  c.leapfrog_steps = get_or<int>(h, "leapfrog_steps", c.leapfrog_steps);
  c.target_accept = get_or<double>(h, "target_accept", c.target_accept);
  c.adapt_mass = get_or<bool>(h, "adapt_mass", c.adapt_mass);
  c.initial_step_size = get_or<double>(h, "initial_step_size", c.initial_step_size);
  c.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

struct LoadedInput {
  Dataset data;
  SpatialLayout layout;
  json source;
};

DistanceMetric metric_of(const json& j, DistanceMetric fallback) {
  if (!j.contains("metric")) return fallback;
  try {
    return parse_metric(get_or<std::string>(j, "metric", ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

LoadedInput load_input(const json& data_cfg, const std::string& base_dir = "") {
  const std::string schema = get_or<std::string>(data_cfg, "schema", "canonical");
  const std::string path = resolve(base_dir, get_or<std::string>(data_cfg, "path", ""));
  if (path.empty()) throw ConfigError("data.path is required");
  LoadedInput in;
  in.source = {{"schema", schema}, {"path", fs::absolute(path).string()}};
  if (schema == "gpu") {
    LoadedData d = load_gpu_csv(path);
    if (d.warnings > 0) std::cerr << "warning: " << d.warnings << " rows with other fail types treated as censored\n";
    in.data = std::move(d.data);
    in.layout = std::move(d.layout);
  } else if (schema == "tree") {
    LoadedData d = load_tree_csv(path);
    in.data = std::move(d.data);
    in.layout = std::move(d.layout);
  } else if (schema == "canonical") {
    const std::string layout_path = resolve(base_dir, get_or<std::string>(data_cfg, "layout", ""));
    if (layout_path.empty()) throw ConfigError("data.layout is required for the canonical schema");
    in.data = read_dataset_csv(path);
    std::ifstream lf(layout_path);
    if (!lf) throw IoError("cannot open " + layout_path);
    const DistanceMetric metric = metric_of(data_cfg, DistanceMetric::EuclideanPerAxisStandardized);
    in.layout = read_layout_csv(lf, metric);
    in.source["layout"] = fs::absolute(layout_path).string();
    in.source["metric"] = to_string(metric);
  } else {
    throw ConfigError("unknown data schema '" + schema + "'");
  }
  in.data.validate(in.layout.size());
  return in;
}

json named_values(const std::vector<std::string>& names, const Eigen::VectorXd& v) {
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = v(static_cast<Eigen::Index>(i));
  return j;
}

Eigen::VectorXd gamma_sd_from(const PosteriorSummary& s, int m) {
  Eigen::VectorXd sd(m);
  for (int i = 0; i < m; ++i) sd(i) = s.at("gamma[" + std::to_string(i) + "]").sd;
  return sd;
}

}  // namespace

// --- config -------------------------------------------------------------------

nlohmann::json load_config(const std::string& path, const FlagOverrides& flags) {
  json cfg = json::object();
  if (!path.empty()) {
    cfg = read_json_file(path);
    if (!cfg.is_object()) throw ConfigError("config root must be an object");
    // Relative data paths are interpreted against the config file's directory.
    const std::string base = fs::path(path).parent_path().string();
    if (cfg.contains("data") && cfg["data"].is_object()) {
      for (const char* k : {"path", "layout"})
        if (cfg["data"].contains(k) && cfg["data"][k].is_string())
          cfg["data"][k] = resolve(base, cfg["data"][k].get<std::string>());
    }
    if (cfg.contains("simulate") && cfg["simulate"].is_object() && cfg["simulate"].contains("layout") &&
        cfg["simulate"]["layout"].is_string())
      cfg["simulate"]["layout"] = resolve(base, cfg["simulate"]["layout"].get<std::string>());
  }
  if (flags.seed) cfg["seed"] = *flags.seed;
  if (flags.engine) cfg["engine"] = *flags.engine;
  if (flags.alpha) cfg["vi"]["alpha"] = *flags.alpha;
  if (flags.mc_samples) cfg["vi"]["h"] = *flags.mc_samples;
  if (flags.threads) cfg["threads"] = *flags.threads;
  if (flags.out_dir) cfg["out_dir"] = *flags.out_dir;
  validate_config(cfg);
  return cfg;
}

void validate_config(const nlohmann::json& cfg) { check_section(cfg, ""); }

// --- simulate -------------------------------------------------------------------

void cmd_simulate(const nlohmann::json& cfg) {
  const ModelKind model = model_of(cfg);
  const LocationScaleKind kind = kind_of(cfg);
  const json& sim = section(cfg, "simulate");
  const json& truth = section(sim, "truth");
  const std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 1);

  SpatialLayout layout;
  if (sim.contains("layout")) {
    const std::string lp = get_or<std::string>(sim, "layout", "");
    std::ifstream lf(lp);
    if (!lf) throw IoError("cannot open " + lp);
    layout = read_layout_csv(lf, metric_of(sim, DistanceMetric::EuclideanPerAxisStandardized));
  } else {
    const auto grid = get_or<std::vector<int>>(sim, "grid", {4, 4});
    if (grid.size() != 2 || grid[0] < 1 || grid[1] < 1) throw ConfigError("simulate.grid must be two positive integers");
    Eigen::MatrixX2d coords(grid[0] * grid[1], 2);
    std::vector<std::string> ids;
    for (int i = 0; i < grid[0]; ++i)
      for (int j = 0; j < grid[1]; ++j) {
        coords.row(i * grid[1] + j) << i, j;
        ids.push_back("g" + std::to_string(i) + "_" + std::to_string(j));
      }
    layout = build_layout(coords, metric_of(sim, DistanceMetric::EuclideanPerAxisStandardized), ids);
  }

  SimulationSpec spec;
  spec.model = model;
  spec.kind = kind;
  spec.n_per_location = get_or<int>(sim, "n_per_location", 20);
  spec.intercept = get_or<bool>(sim, "intercept", true);
  if (sim.contains("censor_time")) {
    const json& c = sim.at("censor_time");
    if (c.is_string() && (c.get<std::string>() == "inf" || c.get<std::string>() == "infinity"))
      spec.censor_time = std::numeric_limits<double>::infinity();
    else if (c.is_number())
      spec.censor_time = c.get<double>();
    else
      throw ConfigError("simulate.censor_time must be a number or \"inf\"");
  } else {
    spec.censor_time = std::numeric_limits<double>::infinity();
  }
  if (!(spec.censor_time > 0)) throw ConfigError("simulate.censor_time must be positive");
  if (spec.n_per_location < 1) throw ConfigError("simulate.n_per_location must be positive");

  ModelParams th;
  th.model = model;
  const auto beta = get_or<std::vector<double>>(truth, "beta", {});
  if (beta.empty()) throw ConfigError("simulate.truth.beta is required");
  th.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  th.mu = get_or<double>(truth, "mu", 0.0);
  const double sigma = get_or<double>(truth, "sigma", 1.0);
  const double a = get_or<double>(truth, "a", 1.0);
  const double b = get_or<double>(truth, "b", 1.0);
  if (!(sigma > 0) || !(a > 0) || !(b >= 0)) throw ConfigError("simulate.truth: sigma and a must be positive, b non-negative");
  th.sigma_l = std::log(sigma);
  th.a_l = std::log(a);
  th.b_l = std::log(b);
  th.kp.s2_gamma = get_or<double>(truth, "s2_gamma", 0.25);
  th.kp.nu = get_or<double>(truth, "nu", 0.3);
  if (!(th.kp.s2_gamma >= 0) || !(th.kp.nu > 0)) throw ConfigError("simulate.truth: s2_gamma >= 0 and nu > 0 required");
  spec.truth = th;

  Rng rng = substream(seed, 0, 0x53494dULL);
  const SimulatedData sim_data = simulate_dataset(spec, layout, rng);

  const fs::path dir = out_dir(cfg);
  write_dataset_csv((dir / "dataset.csv").string(), sim_data.data);
  {
    auto f = open_out(dir / "layout.csv");
    write_layout_csv(f, layout);
  }
  json t;
  t["model"] = to_string(model);
  t["kind"] = to_string(kind);
  t["seed"] = seed;
  t["n_per_location"] = spec.n_per_location;
  t["censor_time"] = std::isfinite(spec.censor_time) ? json(spec.censor_time) : json("inf");
  t["truth"] = {{"mu", th.mu}, {"beta", beta}, {"s2_gamma", th.kp.s2_gamma}, {"nu", th.kp.nu}};
  if (model == ModelKind::SpatialAFT) t["truth"]["sigma"] = sigma;
  else {
    t["truth"]["a"] = a;
    t["truth"]["b"] = b;
  }
  t["gamma"] = std::vector<double>(sim_data.gamma.data(), sim_data.gamma.data() + sim_data.gamma.size());
  int events = 0;
  for (const auto& u : sim_data.data.units) events += u.event;
  t["n_units"] = sim_data.data.size();
  t["n_events"] = events;
  write_json_file(dir / "truth.json", t);
  std::cout << "wrote " << sim_data.data.size() << " units to " << (dir / "dataset.csv").string() << '\n';
}

// --- fit -------------------------------------------------------------------------

void cmd_fit(const nlohmann::json& cfg) {
  const std::string engine = get_or<std::string>(cfg, "engine", "vi-alpha");
  if (engine != "vi-alpha" && engine != "vi-kl" && engine != "hmc") throw ConfigError("unknown engine '" + engine + "'");
  const ModelKind model_kind = model_of(cfg);
  const LocationScaleKind kind = kind_of(cfg);
  if (!cfg.contains("data")) throw ConfigError("fit needs a data section");
  LoadedInput in = load_input(cfg.at("data"));
  if (in.data.model_hint && *in.data.model_hint != model_kind)
    throw ConfigError("dataset was produced for the " + to_string(*in.data.model_hint) + " model, config asks for " +
                      to_string(model_kind));
  const bool explicit_mu = get_or<bool>(cfg, "explicit_mu", false);
  const SpatialSurvivalModel model(in.data, in.layout, priors_of(cfg), model_kind, kind, explicit_mu);
  const ParamLayout& shape = model.params();
  const fs::path dir = out_dir(cfg);

  json out;
  out["schema"] = "spvi-fit v1";
  out["engine"] = engine;
  out["model"] = to_string(model_kind);
  out["kind"] = to_string(kind);
  out["explicit_mu"] = shape.explicit_mu;
  out["p"] = shape.p;
  out["m"] = shape.m;
  out["data"] = in.source;
  out["seed"] = get_or<std::uint64_t>(cfg, "seed", 1);

  Eigen::MatrixXd draws;
  std::vector<std::string> names;
  PosteriorSummary summary;
  ModelParams theta_hat;
  double seconds = 0.0;
  if (engine == "hmc") {
    const HMCConfig hc = hmc_config_of(cfg);
    const auto start = std::chrono::steady_clock::now();
    const ChainResult chain = run_chain(model, hc);
    ChainSummary cs = chain_summary(chain, shape, get_or<double>(section(cfg, "vi"), "ci_level", 0.95));
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    draws = std::move(cs.draws);
    names = std::move(cs.names);
    summary = std::move(cs.summary);
    theta_hat = std::move(cs.theta_hat);
    out["converged"] = chain.healthy;
    out["hmc"] = {{"warmup_iters", hc.warmup_iters}, {"sample_iters", hc.sample_iters},
                  {"leapfrog_steps", hc.leapfrog_steps}, {"target_accept", hc.target_accept},
                  {"accept_rate", chain.accept_rate}, {"step_size", chain.step_size},
                  {"divergent", chain.divergent}, {"healthy", chain.healthy}};
    auto f = open_out(dir / "trace.csv");
    f << "iter,log_density\n";
    for (Eigen::Index i = 0; i < chain.log_p.size(); ++i) f << i + 1 << ',' << chain.log_p(i) << '\n';
  } else {
    const VIConfig vc = vi_config_of(cfg, engine);
    FitResult fr = fit(model, vc);
    seconds = fr.seconds;
    draws = std::move(fr.draws);
    names = std::move(fr.draw_names);
    summary = std::move(fr.summary);
    theta_hat = std::move(fr.theta_hat);
    out["converged"] = fr.converged;
    out["iterations"] = fr.iterations;
    out["vi"] = {{"alpha", vc.alpha}, {"h", vc.h}, {"tau", vc.tau}, {"max_iters", vc.max_iters},
                 {"learning_rate", vc.learning_rate}, {"gradient_mode", to_string(vc.gradient_mode)},
                 {"smooth_stopping", vc.smooth_stopping}, {"posterior_draws", vc.posterior_draws}};
    out["eta"] = to_json(fr.eta_star);
    out["final_bound"] = fr.trace.empty() ? json(nullptr) : json(fr.trace.back().bound);
    auto f = open_out(dir / "trace.csv");
    write_trace_csv(f, fr.trace);
  }
  out["nll"] = nll(model.data(), theta_hat, kind);
  out["nll_with_random_effects"] = nll_with_random_effects(model.data(), theta_hat, model.layout(), kind);
  out["theta_hat"] = named_values(shape.constrained_names(), shape.constrained_values(theta_hat));
  out["summary"] = to_json(summary);
  out["timing"] = {{"seconds", seconds}};
  write_draws_csv((dir / "draws.csv").string(), draws, names);
  write_json_file(dir / "fit.json", out);
  std::cout << engine << ": nll " << out["nll"].get<double>() << ", converged "
            << (out["converged"].get<bool>() ? "yes" : "no") << ", " << seconds << " s\n";
}

// --- diagnose -----------------------------------------------------------------------

void cmd_diagnose(const nlohmann::json& cfg) {
  const std::string fit_path = get_or<std::string>(cfg, "fit_result", "");
  if (fit_path.empty()) throw ConfigError("diagnose needs fit_result (path to fit.json)");
  const json fr = read_json_file(fit_path);
  if (fr.value("schema", "") != "spvi-fit v1") throw ConfigError(fit_path + " is not a fit result");

  const ModelKind model_kind = parse_model(fr.at("model").get<std::string>());
  const LocationScaleKind kind = parse_location_scale(fr.at("kind").get<std::string>());
  json data_cfg = cfg.contains("data") ? cfg.at("data") : fr.at("data");
  LoadedInput in = load_input(data_cfg);
  if (in.data.model_hint && *in.data.model_hint != model_kind)
    throw ConfigError("fit is a " + to_string(model_kind) + " result but the dataset is " +
                      to_string(*in.data.model_hint) + " data");
  ParamLayout shape;
  shape.model = model_kind;
  shape.p = fr.at("p").get<int>();
  shape.m = fr.at("m").get<int>();
  shape.explicit_mu = fr.value("explicit_mu", false);
  if (shape.p != in.data.p || shape.m != in.layout.size())
    throw ConfigError("fit dimensions (p, m) do not match the dataset");

  const auto names = shape.constrained_names();
  Eigen::VectorXd values(shape.dim());
  const json& th = fr.at("theta_hat");
  for (std::size_t i = 0; i < names.size(); ++i) values(static_cast<Eigen::Index>(i)) = th.at(names[i]).get<double>();
  const ModelParams theta_hat = shape.from_constrained(values);
  const PosteriorSummary summary = summary_from_json(fr.at("summary"));

  const ResidualSet rs =
      model_kind == ModelKind::SpatialAFT ? cox_snell_aft(in.data, theta_hat, kind) : cox_snell_ph(in.data, theta_hat);
  const ProbabilityPlotData plot = weibull_plot_points(rs);
  const auto [slope, intercept] = fit_line(plot.points);
  const fs::path dir = out_dir(cfg);
  {
    auto f = open_out(dir / "residual_plot.csv");
    write_plot_csv(f, plot);
  }
  {
    auto f = open_out(dir / "correlation.csv");
    write_correlation_csv(f, correlation_curve(theta_hat.kp, get_or<int>(cfg, "correlation_points", 101)));
  }
  {
    auto f = open_out(dir / "random_effects.csv");
    write_random_effect_csv(f, random_effect_table(in.layout, theta_hat.gamma, gamma_sd_from(summary, shape.m)));
  }
  json nj;
  nj["engine"] = fr.at("engine");
  nj["nll"] = nll(in.data, theta_hat, kind);
  nj["nll_with_random_effects"] = nll_with_random_effects(in.data, theta_hat, in.layout, kind);
  nj["default"] = get_or<bool>(cfg, "nll_include_random_effects", false) ? "nll_with_random_effects" : "nll";
  nj["residual_plot"] = {{"slope", slope}, {"intercept", intercept}, {"event_points", plot.points.size()}};
  write_json_file(dir / "nll.json", nj);
  std::cout << "nll " << nj["nll"].get<double>() << ", residual slope " << slope << '\n';
}

// --- report ---------------------------------------------------------------------------

void cmd_report(const nlohmann::json& cfg, const std::vector<std::string>& cli_inputs) {
  std::vector<std::string> inputs = cli_inputs;
  if (inputs.empty()) inputs = get_or<std::vector<std::string>>(cfg, "inputs", {});
  if (inputs.empty()) throw ConfigError("report needs at least one fit result");
  std::vector<json> fits;
  for (const auto& p : inputs) fits.push_back(read_json_file(p));

  std::vector<std::string> headers, params;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    headers.push_back(fits[i].value("engine", "fit" + std::to_string(i + 1)));
    if (fits[i].contains("summary"))
      for (const auto& r : fits[i]["summary"].value("params", json::array())) {
        const std::string n = r.value("name", "");
        if (seen.insert(n).second) params.push_back(n);
      }
  }
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  auto number_or_na = [&](const json& j, const char* key) {
    return j.contains(key) && j[key].is_number() ? fmt(j[key].get<double>()) : std::string("NA");
  };
  std::vector<std::vector<std::string>> rows;
  {
    std::vector<std::string> r{"NLL"};
    for (const auto& f : fits) r.push_back(number_or_na(f, "nll"));
    rows.push_back(r);
  }
  {
    std::vector<std::string> r{"wall time (s)"};
    for (const auto& f : fits) r.push_back(f.contains("timing") ? number_or_na(f["timing"], "seconds") : "NA");
    rows.push_back(r);
  }
  for (const auto& name : params) {
    std::vector<std::string> r{name};
    for (const auto& f : fits) {
      std::string cell = "NA";
      if (f.contains("summary"))
        for (const auto& p : f["summary"].value("params", json::array()))
          if (p.value("name", "") == name) cell = fmt(p.value("mean", 0.0)) + " ± " + fmt(p.value("sd", 0.0));
      r.push_back(cell);
    }
    rows.push_back(r);
  }
  const fs::path dir = out_dir(cfg);
  auto md = open_out(dir / "report.md");
  md << "| quantity |";
  for (const auto& h : headers) md << ' ' << h << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < headers.size(); ++i) md << "---|";
  md << '\n';
  for (const auto& r : rows) {
    md << '|';
    for (const auto& c : r) md << ' ' << c << " |";
    md << '\n';
  }
  auto csv = open_out(dir / "report.csv");
  csv << "quantity";
  for (const auto& h : headers) csv << ',' << h;
  csv << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) csv << (i ? "," : "") << r[i];
    csv << '\n';
  }
  std::cout << "wrote " << (dir / "report.md").string() << " (" << fits.size() << " result"
            << (fits.size() == 1 ? "" : "s") << ")\n";
}

int run_guarded(const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace spvi::cli
