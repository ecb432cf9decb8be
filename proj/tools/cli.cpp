#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "shapecox/baselines.hpp"
#include "shapecox/breslow.hpp"
#include "shapecox/errors.hpp"
#include "shapecox/parallel.hpp"
#include "shapecox/rng.hpp"
#include "shapecox/sim_harness.hpp"
#include "shapecox/smple_fit.hpp"
#include "shapecox/variance_inference.hpp"

namespace shapecox::cli {

namespace {

using json = nlohmann::ordered_json;

// Raised for anything the user must fix; maps to kExitInvalid.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

// --- model specification shared by fit and infer -------------------------

struct ModelFlags {
  std::string input;
  std::string time;
  std::string status;
  std::string x;
  std::string z;
  double tol = 1e-8;
  int max_iter = 200;
};

struct ModelSpec {
  CsvSchema schema;
  std::vector<Shape> shapes;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--in", f.input, "Input CSV file");
  cmd->add_option("--time", f.time, "Follow-up time column");
  cmd->add_option("--status", f.status, "Event indicator column (1 = event, 0 = censored)");
  cmd->add_option("--x", f.x, "Comma-separated linear covariate columns");
  cmd->add_option("--z", f.z, "Comma-separated additive covariates as column:shape (shapes: " + valid_shape_names() + ")");
  cmd->add_option("--tol", f.tol, "Relative log-likelihood change stopping rule");
  cmd->add_option("--max-iter", f.max_iter, "Maximum outer backfitting iterations");
}

ModelSpec parse_model_flags(const ModelFlags& f) {
  if (f.input.empty()) throw UsageError("input file required (--in)");
  if (f.time.empty()) throw UsageError("time column required (--time)");
  if (f.status.empty()) throw UsageError("status column required (--status)");
  if (!(f.tol > 0.0)) throw UsageError("--tol must be positive");
  if (f.max_iter < 1) throw UsageError("--max-iter must be >= 1");
  ModelSpec spec;
  spec.schema.time = f.time;
  spec.schema.status = f.status;
  spec.schema.x = split(f.x, ',');
  for (const auto& item : split(f.z, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
      throw UsageError("--z entry '" + item + "' must be column:shape (shapes: " + valid_shape_names() + ")");
    spec.schema.z.push_back(item.substr(0, colon));
    try {
      spec.shapes.push_back(parse_shape(item.substr(colon + 1)));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--z: ") + e.what());
    }
  }
  if (spec.schema.z.empty()) throw UsageError("at least one additive covariate required (--z column:shape)");
  return spec;
}

FitOptions fit_options(const ModelFlags& f) {
  FitOptions o;
  o.tol_loglik = f.tol;
  o.max_outer_iters = f.max_iter;
  return o;
}

Dataset load_input(const std::string& path, const CsvSchema& schema) {
  try {
    return load_csv(path, schema);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct SplitFlags {
  double alpha_tilde = 0.3;
  int repeats = 20;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_split_flags(CLI::App* cmd, SplitFlags& f) {
  cmd->add_option("--alpha-tilde", f.alpha_tilde, "Block-count exponent: k_n = n^alpha_tilde");
  cmd->add_option("--repeats", f.repeats, "Random partitions averaged by the split variance estimator");
  cmd->add_option("--level", f.level, "Confidence level of Wald intervals");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--threads", f.threads, "Worker threads (default: SHAPECOX_THREADS or all cores)");
}

void check_split_flags(const SplitFlags& f) {
  if (!(f.alpha_tilde > 0.0 && f.alpha_tilde < 1.0)) throw UsageError("--alpha-tilde must lie in (0, 1)");
  if (f.repeats < 1) throw UsageError("--repeats must be >= 1");
  if (!(f.level > 0.0 && f.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
}

SplitVariance smple_split_variance(const Dataset& ds, const ModelSpec& spec, const FitOptions& fo, const SplitFlags& f) {
  if (ds.num_linear() < 1) throw UsageError("interval estimation needs at least one linear covariate (--x)");
  SubsampleEstimator est = [&](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
    const Dataset sub = ds.subset(rows);
    return fit_smple(sub, spec.shapes, fo).beta;
  };
  SplitOptions so;
  so.alpha_tilde = f.alpha_tilde;
  so.repeats = f.repeats;
  so.seed = f.seed;
  so.threads = resolve_threads(f.threads);
  return split_variance(ds.size(), est, so);
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json split_json(const SplitVariance& sv, const SplitFlags& f) {
  json j;
  j["alpha_tilde"] = sv.alpha_tilde;
  j["repeats_requested"] = f.repeats;
  j["repeats_used"] = sv.repeats;
  j["seed"] = f.seed;
  j["k_n"] = sv.k_n;
  j["m_n"] = sv.m_n;
  j["sigma_hat"] = matrix_json(sv.sigma_hat);
  j["warnings"] = sv.warnings;
  return j;
}

json model_json(const Dataset& ds, const std::string& input, const ModelSpec& spec, const FittedModel& m) {
  json j;
  j["schema"] = kFitSchema;
  j["data"] = {{"input", input},
               {"checksum", hex64(ds.checksum())},
               {"n", ds.size()},
               {"events", ds.num_events()},
               {"time", spec.schema.time},
               {"status", spec.schema.status},
               {"x", spec.schema.x},
               {"z", spec.schema.z}};
  json beta = json::array();
  for (Index k = 0; k < m.beta.size(); ++k)
    beta.push_back({{"name", spec.schema.x[static_cast<std::size_t>(k)]}, {"estimate", m.beta(k)}});
  j["beta"] = beta;
  json comps = json::array();
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    const auto& comp = m.components[c];
    comps.push_back({{"name", spec.schema.z[c]},
                     {"shape", std::string(shape_name(comp.shape))},
                     {"knots", comp.knots},
                     {"values", comp.values},
                     {"centering_residual", m.centering_residuals[c]}});
  }
  j["components"] = comps;
  j["loglik"] = m.loglik;
  j["iterations"] = m.iters;
  j["converged"] = m.converged;
  j["warnings"] = m.warnings;
  return j;
}

// --- fit ------------------------------------------------------------------

struct FitCmd {
  ModelFlags model;
  SplitFlags split;
  bool ci = false;
  std::string out;
};

int cmd_fit(const FitCmd& c, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = parse_model_flags(c.model);
  if (c.ci) check_split_flags(c.split);
  const Dataset ds = load_input(c.model.input, spec.schema);
  const FitOptions fo = fit_options(c.model);
  FittedModel m;
  try {
    m = fit_smple(ds, spec.shapes, fo);
  } catch (const SingularError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  }
  for (const auto& w : m.warnings) err << "warning: " << w << '\n';
  json j = model_json(ds, c.model.input, spec, m);
  if (c.ci) {
    const SplitVariance sv = smple_split_variance(ds, spec, fo, c.split);
    json ci = split_json(sv, c.split);
    ci["level"] = c.split.level;
    json intervals = json::array();
    for (Index k = 0; k < m.beta.size(); ++k) {
      const auto [lo, hi] = wald_interval(m.beta, sv, c.split.level, k);
      intervals.push_back({{"name", spec.schema.x[static_cast<std::size_t>(k)]},
                           {"estimate", m.beta(k)},
                           {"std_error", std::sqrt(sv.sigma_hat(k, k) / static_cast<double>(ds.size()))},
                           {"low", lo},
                           {"high", hi}});
    }
    ci["intervals"] = intervals;
    j["ci"] = ci;
  }
  write_text(c.out, j.dump(2) + "\n", out);
  return kExitOk;
}

// --- infer ----------------------------------------------------------------

struct InferCmd {
  ModelFlags model;
  SplitFlags split;
  std::string beta0;
  double alpha = 0.05;
  std::string out;
};

int cmd_infer(const InferCmd& c, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = parse_model_flags(c.model);
  check_split_flags(c.split);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  const Dataset ds = load_input(c.model.input, spec.schema);
  const Index d = ds.num_linear();
  if (d < 1) throw UsageError("inference needs at least one linear covariate (--x)");
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(d);
  if (!c.beta0.empty()) {
    const auto parts = split(c.beta0, ',');
    if (static_cast<Index>(parts.size()) != d)
      throw UsageError("--beta0 needs " + std::to_string(d) + " comma-separated values");
    for (Index k = 0; k < d; ++k) {
      try {
        theta0(k) = std::stod(parts[static_cast<std::size_t>(k)]);
      } catch (...) {
        throw UsageError("--beta0: cannot parse '" + parts[static_cast<std::size_t>(k)] + "'");
      }
    }
  }
  const FitOptions fo = fit_options(c.model);
  FittedModel m;
  try {
    m = fit_smple(ds, spec.shapes, fo);
  } catch (const SingularError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  }
  const SplitVariance sv = smple_split_variance(ds, spec, fo, c.split);
  json j;
  j["schema"] = "shapecox.infer/1";
  j["data"] = {{"input", c.model.input}, {"checksum", hex64(ds.checksum())}, {"n", ds.size()}};
  j["beta"] = std::vector<double>(m.beta.data(), m.beta.data() + d);
  j["names"] = spec.schema.x;
  j["split"] = split_json(sv, c.split);
  json intervals = json::array();
  for (Index k = 0; k < d; ++k) {
    const auto [lo, hi] = wald_interval(m.beta, sv, c.split.level, k);
    intervals.push_back({{"name", spec.schema.x[static_cast<std::size_t>(k)]}, {"low", lo}, {"high", hi}});
  }
  j["level"] = c.split.level;
  j["intervals"] = intervals;
  try {
    const ChisqTest t = chisq_test(m.beta, theta0, sv, c.alpha);
    j["test"] = {{"beta0", std::vector<double>(theta0.data(), theta0.data() + d)},
                 {"alpha", c.alpha},
                 {"statistic", t.statistic},
                 {"dof", d},
                 {"critical", t.critical},
                 {"p_value", 1.0 - chisq_cdf(t.statistic, static_cast<int>(d))},
                 {"reject", t.reject}};
  } catch (const SingularError& e) {
    err << "inference failed: " << e.what() << '\n';
    return kExitFitFailed;
  }
  write_text(c.out, j.dump(2) + "\n", out);
  return kExitOk;
}

// --- hazard ---------------------------------------------------------------

struct HazardCmd {
  std::string fit;
  std::string input;
  std::string out;
};

int cmd_hazard(const HazardCmd& c, std::ostream& out, std::ostream&) {
  if (c.fit.empty()) throw UsageError("fit JSON required (--fit)");
  if (c.input.empty()) throw UsageError("input file required (--in)");
  std::ifstream f(c.fit);
  if (!f) throw UsageError("cannot open '" + c.fit + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const std::exception& e) {
    throw UsageError("'" + c.fit + "' is not valid JSON: " + e.what());
  }
  if (j.value("schema", "") != kFitSchema) throw UsageError("'" + c.fit + "' is not a " + std::string(kFitSchema) + " document");

  FittedModel m;
  CsvSchema schema;
  std::string checksum;
  try {
    const auto& data = j.at("data");
    schema.time = data.at("time").get<std::string>();
    schema.status = data.at("status").get<std::string>();
    schema.x = data.at("x").get<std::vector<std::string>>();
    schema.z = data.at("z").get<std::vector<std::string>>();
    checksum = data.at("checksum").get<std::string>();
    const auto& beta = j.at("beta");
    m.beta.resize(static_cast<Index>(beta.size()));
    for (std::size_t k = 0; k < beta.size(); ++k) m.beta(static_cast<Index>(k)) = beta[k].at("estimate").get<double>();
    for (const auto& comp : j.at("components")) {
      AdditiveComponent a;
      a.shape = parse_shape(comp.at("shape").get<std::string>());
      a.knots = comp.at("knots").get<std::vector<double>>();
      a.values = comp.at("values").get<std::vector<double>>();
      if (a.knots.size() != a.values.size()) throw UsageError("component knots and values differ in length");
      m.components.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed fit document: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw UsageError("malformed fit document: " + std::string(e.what()));
  }
  if (static_cast<std::size_t>(m.beta.size()) != schema.x.size() || m.components.size() != schema.z.size())
    throw UsageError("malformed fit document: coefficient counts do not match the column lists");

  const Dataset ds = load_input(c.input, schema);
  if (hex64(ds.checksum()) != checksum)
    throw UsageError("data checksum " + hex64(ds.checksum()) + " does not match the fit (" + checksum +
                     "); pass the CSV the model was fitted on");

  Eigen::VectorXd r(ds.size());
  std::vector<double> xi(static_cast<std::size_t>(ds.num_linear())), zi(static_cast<std::size_t>(ds.num_additive()));
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index k = 0; k < ds.num_linear(); ++k) xi[static_cast<std::size_t>(k)] = ds.x()(i, k);
    for (Index k = 0; k < ds.num_additive(); ++k) zi[static_cast<std::size_t>(k)] = ds.z()(i, k);
    r(i) = predict_r(m, xi, zi);
  }
  const CumulativeHazard h = breslow_hazard(ds, r);
  std::string text = "time,cumulative_hazard,survival\n";
  for (std::size_t k = 0; k < h.times.size(); ++k)
    text += fmt17(h.times[k]) + "," + fmt17(h.cumulative[k]) + "," + fmt17(std::exp(-h.cumulative[k])) + "\n";
  write_text(c.out, text, out);
  return kExitOk;
}

// --- simulate -------------------------------------------------------------

struct SimConfig {
  std::string scenario;
  double c = 5.0;
  Index n = 600;
  int reps = 200;
  double alpha_tilde = 0.35;
  int repeats = 20;
  double level = 0.95;
  std::uint64_t seed = 1;
  bool coverage = false;
  bool distance = false;
  int mc_points = 4000;
  std::string estimators = "smple,tcr";
};

// Plain key = value lines; '#' starts a comment.
void read_config(const std::string& path, SimConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      if (key == "scenario") cfg.scenario = value;
      else if (key == "c") cfg.c = std::stod(value);
      else if (key == "n") cfg.n = std::stol(value);
      else if (key == "reps") cfg.reps = std::stoi(value);
      else if (key == "alpha_tilde") cfg.alpha_tilde = std::stod(value);
      else if (key == "repeats") cfg.repeats = std::stoi(value);
      else if (key == "level") cfg.level = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "coverage") cfg.coverage = value == "1" || value == "true" || value == "yes";
      else if (key == "distance") cfg.distance = value == "1" || value == "true" || value == "yes";
      else if (key == "mc_points") cfg.mc_points = std::stoi(value);
      else if (key == "estimators") cfg.estimators = value;
      else throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": invalid value for '" + key + "'");
    }
  }
}

struct SimulateCmd {
  SimConfig cfg;
  std::string config;
  std::string out_dir;
  int threads = 0;
};

int cmd_simulate(SimulateCmd c, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  SimConfig cfg;
  if (!c.config.empty()) read_config(c.config, cfg);
  auto given = [sub](const char* flag) { return sub->get_option(flag)->count() > 0; };
  if (given("--scenario")) cfg.scenario = c.cfg.scenario;
  if (given("--c")) cfg.c = c.cfg.c;
  if (given("--n")) cfg.n = c.cfg.n;
  if (given("--reps")) cfg.reps = c.cfg.reps;
  if (given("--alpha-tilde")) cfg.alpha_tilde = c.cfg.alpha_tilde;
  if (given("--repeats")) cfg.repeats = c.cfg.repeats;
  if (given("--level")) cfg.level = c.cfg.level;
  if (given("--seed")) cfg.seed = c.cfg.seed;
  if (given("--coverage")) cfg.coverage = c.cfg.coverage;
  if (given("--distance")) cfg.distance = c.cfg.distance;
  if (given("--mc-points")) cfg.mc_points = c.cfg.mc_points;
  if (given("--estimators")) cfg.estimators = c.cfg.estimators;

  if (cfg.scenario.empty()) throw UsageError("scenario required (--scenario I|II|III)");
  Scenario sc;
  try {
    sc.id = parse_scenario(cfg.scenario);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.reps < 2) throw UsageError("reps ≥ 2 required");
  if (cfg.n < 10) throw UsageError("n >= 10 required");
  if (!(cfg.c > 0.0)) throw UsageError("c must be positive");
  if (!(cfg.alpha_tilde > 0.0 && cfg.alpha_tilde < 1.0)) throw UsageError("alpha_tilde must lie in (0, 1)");
  if (cfg.repeats < 1) throw UsageError("repeats must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw UsageError("level must lie in (0, 1)");
  if (cfg.mc_points < 2) throw UsageError("mc_points must be >= 2");
  sc.c = cfg.c;
  sc.n = cfg.n;

  StudyOptions so;
  so.estimators.clear();
  for (const auto& e : split(cfg.estimators, ',')) {
    std::string lower = e;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (lower == "smple") so.estimators.push_back(Estimator::Smple);
    else if (lower == "tcr") so.estimators.push_back(Estimator::Tcr);
    else throw UsageError("unknown estimator '" + e + "'; valid estimators: smple, tcr");
  }
  if (so.estimators.empty()) throw UsageError("no estimators selected");
  so.n_reps = cfg.reps;
  so.seed = cfg.seed;
  so.threads = resolve_threads(c.threads);
  so.coverage = cfg.coverage;
  so.alpha_tilde = cfg.alpha_tilde;
  so.repeats = cfg.repeats;
  so.level = cfg.level;
  so.distance = cfg.distance;
  so.mc_points = cfg.mc_points;

  if (c.out_dir.empty()) throw UsageError("output directory required (--out-dir)");
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw UsageError("cannot create '" + c.out_dir + "': " + ec.message());

  RepSummary s;
  try {
    s = run_study(sc, so);
  } catch (const FitError& e) {
    err << "simulation failed: " << e.what() << '\n';
    return kExitFitFailed;
  }

  const std::filesystem::path dir(c.out_dir);
  std::string summary =
      "scenario,c,n,reps,estimator,rmse_x100,bias_x100,mae_x100,coverage,avg_length,n_ok,dropped,n_ci,censoring\n";
  for (const auto& e : s.estimators) {
    double mae = 0.0;
    int k = 0;
    const auto idx = static_cast<std::size_t>(&e - s.estimators.data());
    for (const auto& rec : s.records)
      if (rec.estimates[idx].ok) {
        mae += std::abs(rec.estimates[idx].beta - sc.beta0);
        ++k;
      }
    summary += std::string(scenario_name(sc.id)) + "," + fmt17(sc.c) + "," + std::to_string(sc.n) + "," +
               std::to_string(s.n_reps) + "," + std::string(estimator_name(e.estimator)) + "," + fmt17(e.rmse_x100) +
               "," + fmt17(e.bias_x100) + "," + fmt17(k ? 100.0 * mae / k : 0.0) + "," +
               (e.n_ci ? fmt17(e.coverage) : std::string()) + "," + (e.n_ci ? fmt17(e.avg_length) : std::string()) +
               "," + std::to_string(e.n_ok) + "," + std::to_string(e.dropped) + "," + std::to_string(e.n_ci) + "," +
               fmt17(s.censoring) + "\n";
  }
  write_text((dir / "summary.csv").string(), summary, out);

  std::string reps = "rep,censoring";
  for (const auto e : so.estimators) {
    const std::string name(estimator_name(e));
    reps += "," + name + "_ok," + name + "_beta";
    if (so.coverage) reps += "," + name + "_sigma," + name + "_low," + name + "_high";
  }
  if (so.distance) reps += ",distance";
  reps += "\n";
  std::vector<double> standardized;
  for (const auto& rec : s.records) {
    reps += std::to_string(rec.rep) + "," + fmt17(rec.censoring);
    for (std::size_t k = 0; k < rec.estimates.size(); ++k) {
      const auto& er = rec.estimates[k];
      reps += std::string(",") + (er.ok ? "1" : "0") + "," + (er.ok ? fmt17(er.beta) : std::string());
      if (so.coverage) {
        if (er.ci_ok)
          reps += "," + fmt17(er.sigma) + "," + fmt17(er.low) + "," + fmt17(er.high);
        else
          reps += ",,,";
      }
      if (so.coverage && k == 0 && so.estimators[0] == Estimator::Smple && er.ok && er.ci_ok && er.sigma > 0.0)
        standardized.push_back(std::sqrt(static_cast<double>(sc.n)) * (er.beta - sc.beta0) / er.sigma);
    }
    if (so.distance) reps += "," + fmt17(rec.distance);
    reps += "\n";
  }
  write_text((dir / "replications.csv").string(), reps, out);
  if (!standardized.empty()) qq_export(standardized, dir / "qq.csv");

  json meta;
  meta["schema"] = "shapecox.simulate/1";
  meta["tool_version"] = kToolVersion;
  meta["rng"] = std::string(kRngName);
  meta["config"] = {{"scenario", std::string(scenario_name(sc.id))},
                    {"beta0", sc.beta0},
                    {"c", sc.c},
                    {"n", sc.n},
                    {"reps", cfg.reps},
                    {"seed", cfg.seed},
                    {"coverage", cfg.coverage},
                    {"alpha_tilde", cfg.alpha_tilde},
                    {"repeats", cfg.repeats},
                    {"level", cfg.level},
                    {"distance", cfg.distance},
                    {"mc_points", cfg.mc_points},
                    {"shape_for_fit", std::string(shape_name(sc.shape_for_fit()))}};
  meta["seeds"] = {{"base", cfg.seed}, {"replication_streams", "stream r of the base seed for replication r"}};
  meta["censoring_proportion"] = s.censoring;
  json drops = json::object();
  for (const auto& e : s.estimators) drops[std::string(estimator_name(e.estimator))] = e.dropped;
  meta["dropped_replications"] = drops;
  if (so.distance) meta["median_distance"] = s.median_distance;
  write_text((dir / "metadata.json").string(), meta.dump(2) + "\n", out);

  out << summary;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shape-restricted partially linear Cox regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  FitCmd fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the shape-restricted Cox model to a CSV file");
  add_model_flags(fit_cmd, fit.model);
  add_split_flags(fit_cmd, fit.split);
  fit_cmd->add_flag("--ci", fit.ci, "Add split-variance Wald intervals for the linear coefficients");
  fit_cmd->add_option("--out", fit.out, "Output JSON (default: stdout)");

  InferCmd infer;
  auto* infer_cmd = app.add_subcommand("infer", "Fit, then test H0: beta = beta0 with the split variance");
  add_model_flags(infer_cmd, infer.model);
  add_split_flags(infer_cmd, infer.split);
  infer_cmd->add_option("--beta0", infer.beta0, "Comma-separated null values (default: zeros)");
  infer_cmd->add_option("--alpha", infer.alpha, "Significance level of the chi-square test");
  infer_cmd->add_option("--out", infer.out, "Output JSON (default: stdout)");

  HazardCmd hazard;
  auto* hazard_cmd = app.add_subcommand("hazard", "Export the Breslow cumulative hazard of a saved fit");
  hazard_cmd->add_option("--fit", hazard.fit, "Fit JSON written by 'fit'");
  hazard_cmd->add_option("--in", hazard.input, "The CSV the model was fitted on");
  hazard_cmd->add_option("--out", hazard.out, "Output CSV (default: stdout)");

  SimulateCmd sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo study of one scenario");
  sim_cmd->add_option("--config", sim.config, "key = value file with scenario, c, n, reps, alpha_tilde, seed, ...");
  sim_cmd->add_option("--scenario", sim.cfg.scenario, "I, II or III");
  sim_cmd->add_option("--c", sim.cfg.c, "Upper bound of the uniform censoring time");
  sim_cmd->add_option("--n", sim.cfg.n, "Sample size");
  sim_cmd->add_option("--reps", sim.cfg.reps, "Replications");
  sim_cmd->add_option("--alpha-tilde", sim.cfg.alpha_tilde, "Split variance exponent");
  sim_cmd->add_option("--repeats", sim.cfg.repeats, "Split variance repeats");
  sim_cmd->add_option("--level", sim.cfg.level, "Confidence level");
  sim_cmd->add_option("--seed", sim.cfg.seed, "Random seed");
  sim_cmd->add_flag("--coverage", sim.cfg.coverage, "Compute Wald intervals and their coverage");
  sim_cmd->add_flag("--distance", sim.cfg.distance, "Record the Monte Carlo distance d(eta_hat, eta_0)");
  sim_cmd->add_option("--mc-points", sim.cfg.mc_points, "Monte Carlo points for the distance");
  sim_cmd->add_option("--estimators", sim.cfg.estimators, "Comma-separated: smple, tcr");
  sim_cmd->add_option("--out-dir", sim.out_dir, "Directory for summary.csv, replications.csv, metadata.json");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (default: SHAPECOX_THREADS or all cores)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out, err);
    if (infer_cmd->parsed()) return cmd_infer(infer, out, err);
    if (hazard_cmd->parsed()) return cmd_hazard(hazard, out, err);
    if (sim_cmd->parsed()) return cmd_simulate(sim, sim_cmd, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const SingularError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace shapecox::cli
