#include "fsens/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fsens/dual.hpp"
#include "fsens/errors.hpp"
#include "fsens/rng.hpp"

namespace fsens::io {

namespace fs = std::filesystem;

namespace {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + (where.empty() ? "" : where + ".") + key + "'");
}

std::string basis_name(sieve::BasisKind k) { return k == sieve::BasisKind::Polynomial ? "polynomial" : "spline"; }

sieve::BasisKind basis_from_name(const std::string& name) {
  if (name == "polynomial") return sieve::BasisKind::Polynomial;
  if (name == "spline") return sieve::BasisKind::Spline;
  throw ConfigError("unknown sieve kind '" + name + "' (expected polynomial or spline)");
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 20; ++k) g.push_back(0.05 * k);
  return g;
}

json ci_json(const effects::ConfidenceInterval& ci) {
  auto end = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); };
  return json{{"lo", end(ci.lo)}, {"hi", end(ci.hi)}, {"level", ci.level}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json("none"); }

}  // namespace

// ---------------------------------------------------------------- config

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"divergence", "k", "rho", "rho_grid", "target", "effect", "level", "threshold", "eps", "clip", "seed",
                  "folds", "sieve", "regressor", "dgp", "data", "output_dir", "threads", "figure", "scale"},
                 "");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "divergence") c.divergence = get_as<std::string>(v, key);
    else if (key == "k") c.k = get_as<double>(v, key);
    else if (key == "rho") c.rho = get_as<double>(v, key);
    else if (key == "rho_grid") c.rho_grid = get_as<std::vector<double>>(v, key);
    else if (key == "target") c.target = get_as<std::string>(v, key);
    else if (key == "effect") c.effect = get_as<std::string>(v, key);
    else if (key == "level") c.level = get_as<double>(v, key);
    else if (key == "threshold") c.threshold = get_as<double>(v, key);
    else if (key == "eps") c.eps = get_as<double>(v, key);
    else if (key == "clip") c.clip = get_as<double>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "folds") c.folds = get_as<int>(v, key);
    else if (key == "data") c.data = get_as<std::string>(v, key);
    else if (key == "output_dir") c.output_dir = get_as<std::string>(v, key);
    else if (key == "threads") c.threads = get_as<int>(v, key);
    else if (key == "figure") c.figure = v.is_number() ? std::to_string(get_as<int>(v, key)) : get_as<std::string>(v, key);
    else if (key == "scale") c.scale = get_as<std::string>(v, key);
    else if (key == "sieve") {
      reject_unknown(v, {"kind", "order", "J", "smoothness", "interaction_order"}, "sieve");
      for (const auto& [sk, sv] : v.items()) {
        if (sk == "kind") c.sieve.kind = basis_from_name(get_as<std::string>(sv, "sieve.kind"));
        else if (sk == "order") c.sieve.order = get_as<int>(sv, "sieve.order");
        else if (sk == "J") {
          if (sv.is_string()) {
            if (sv.get<std::string>() != "auto") throw ConfigError("sieve.J must be an integer or \"auto\"");
            c.sieve.J = -1;
          } else {
            c.sieve.J = get_as<int>(sv, "sieve.J");
          }
        } else if (sk == "smoothness") c.sieve.smoothness = get_as<double>(sv, "sieve.smoothness");
        else if (sk == "interaction_order") c.sieve.interaction_order = get_as<int>(sv, "sieve.interaction_order");
      }
    } else if (key == "regressor") {
      reject_unknown(v, {"kind", "trees", "min_leaf", "max_depth", "mtry", "split_penalty", "bandwidth", "k"}, "regressor");
      for (const auto& [rk, rv] : v.items()) {
        const std::string name = "regressor." + rk;
        if (rk == "kind") c.regressor.kind = nuisance::RegressorSpec::kind_from_name(get_as<std::string>(rv, name));
        else if (rk == "trees") c.regressor.trees = get_as<int>(rv, name);
        else if (rk == "min_leaf") c.regressor.min_leaf = get_as<int>(rv, name);
        else if (rk == "max_depth") c.regressor.max_depth = get_as<int>(rv, name);
        else if (rk == "mtry") c.regressor.mtry = get_as<int>(rv, name);
        else if (rk == "split_penalty") c.regressor.split_penalty = get_as<double>(rv, name);
        else if (rk == "bandwidth") c.regressor.bandwidth = get_as<double>(rv, name);
        else if (rk == "k") c.regressor.k = get_as<int>(rv, name);
      }
    } else if (key == "dgp") {
      reject_unknown(v, {"n", "delta", "sigma_coef", "seed"}, "dgp");
      for (const auto& [dk, dv] : v.items()) {
        if (dk == "n") c.dgp_n = get_as<long>(dv, "dgp.n");
        else if (dk == "delta") c.dgp_delta = get_as<double>(dv, "dgp.delta");
        else if (dk == "sigma_coef") c.dgp_sigma_coef = get_as<double>(dv, "dgp.sigma_coef");
        else if (dk == "seed") c.dgp_seed = get_as<std::uint64_t>(dv, "dgp.seed");
      }
    }
  }
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["divergence"] = divergence;
  if (k) j["k"] = *k;
  if (rho) j["rho"] = *rho;
  if (!rho_grid.empty()) j["rho_grid"] = rho_grid;
  j["target"] = target;
  j["effect"] = effect;
  j["level"] = level;
  j["threshold"] = threshold;
  j["eps"] = eps;
  j["clip"] = clip;
  j["seed"] = seed;
  j["folds"] = folds;
  j["sieve"] = {{"kind", basis_name(sieve.kind)},
                {"order", sieve.order},
                {"J", sieve.J < 0 ? json("auto") : json(sieve.J)},
                {"smoothness", sieve.smoothness},
                {"interaction_order", sieve.interaction_order}};
  j["regressor"] = {{"kind", nuisance::RegressorSpec::kind_name(regressor.kind)},
                    {"trees", regressor.trees},
                    {"min_leaf", regressor.min_leaf},
                    {"max_depth", regressor.max_depth},
                    {"mtry", regressor.mtry},
                    {"split_penalty", regressor.split_penalty},
                    {"bandwidth", regressor.bandwidth},
                    {"k", regressor.k}};
  j["dgp"] = {{"n", dgp_n}, {"delta", dgp_delta}, {"sigma_coef", dgp_sigma_coef}, {"seed", dgp_seed}};
  j["data"] = data;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  j["figure"] = figure;
  j["scale"] = scale;
  return j;
}

void RunConfig::validate(const std::string& command) const {
  if (folds != 3) throw ConfigError("folds is fixed at 3");
  if (!(level > 0.5 && level < 1.0)) throw ConfigError("level must lie in (0.5, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(clip > 0.0 && clip < 0.5)) throw ConfigError("clip must lie in (0, 0.5)");
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  if (sieve.order < 1) throw ConfigError("sieve.order must be positive");
  if (sieve.interaction_order < 0) throw ConfigError("sieve.interaction_order must be nonnegative");
  regressor.validate();
  divergence_spec();
  if (command == "simulate" || command == "reproduce") {
    if (dgp_n < 1) throw ConfigError("dgp.n must be positive");
    if (!(dgp_delta >= 0.0) || !std::isfinite(dgp_delta)) throw ConfigError("dgp.delta must be nonnegative");
    if (!(dgp_sigma_coef >= 0.0)) throw ConfigError("dgp.sigma_coef must be nonnegative");
  }
  if (command == "estimate") {
    if (!rho || !(*rho > 0.0)) throw ConfigError("estimate needs a positive rho");
    est::target_from_name(target);
    if (data.empty()) throw ConfigError("estimate needs a dataset path (data)");
  }
  if (command == "curve") {
    if (rho_grid.empty()) throw ConfigError("curve needs a non-empty rho_grid");
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
      if (!(rho_grid[i] > 0.0)) throw ConfigError("rho_grid values must be positive");
      if (i > 0 && !(rho_grid[i] > rho_grid[i - 1])) throw ConfigError("rho_grid must be strictly ascending");
    }
    effects::effect_from_name(effect);
    if (data.empty()) throw ConfigError("curve needs a dataset path (data)");
  }
  if (command == "reproduce") {
    const auto& ids = figure_ids();
    if (std::find(ids.begin(), ids.end(), figure) == ids.end()) {
      std::string list;
      for (const auto& id : ids) list += (list.empty() ? "" : ", ") + id;
      throw ConfigError("unknown figure '" + figure + "' (valid: " + list + ")");
    }
    if (scale != "paper" && scale != "desk") throw ConfigError("scale must be paper or desk");
  }
}

Divergence RunConfig::divergence_spec() const { return Divergence::from_name(divergence, k); }

est::EstimatorConfig RunConfig::estimator() const {
  est::EstimatorConfig c;
  c.regressor = regressor;
  c.sieve = sieve;
  c.eps = eps;
  c.clip = clip;
  c.seed = seed;
  return c;
}

sim::DgpConfig RunConfig::dgp() const {
  auto c = sim::DgpConfig::paper();
  c.n = dgp_n;
  c.delta = dgp_delta;
  c.sigma_coef = dgp_sigma_coef;
  c.seed = dgp_seed;
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
  json j = cfg.to_json();
  j.erase("output_dir");
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string version() { return FSENS_VERSION; }

fs::path resolve_output_dir(const RunConfig& cfg, const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FSENS_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

// ---------------------------------------------------------------- files

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json provenance(const RunConfig& cfg, const std::string& command) {
  return json{{"version", version()}, {"config_hash", config_hash(cfg)}, {"command", command}, {"config", cfg.to_json()}};
}

est::Dataset read_dataset_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int t_col = -1, y_col = -1;
  std::map<int, int> x_cols;  // covariate index -> column
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const auto& h = header[static_cast<std::size_t>(c)];
    if (h == "t") t_col = c;
    else if (h == "y") y_col = c;
    else if (h.size() > 1 && h[0] == 'x' && std::all_of(h.begin() + 1, h.end(), ::isdigit)) x_cols[std::stoi(h.substr(1))] = c;
    else throw DataError("unexpected column '" + h + "' in " + path.string());
  }
  if (t_col < 0) throw DataError("dataset " + path.string() + " is missing column 't'");
  if (y_col < 0) throw DataError("dataset " + path.string() + " is missing column 'y'");
  if (x_cols.empty()) throw DataError("dataset " + path.string() + " has no covariate columns x1..xd");
  const int d = static_cast<int>(x_cols.size());
  for (int j = 1; j <= d; ++j)
    if (!x_cols.count(j)) throw DataError("dataset " + path.string() + " is missing column 'x" + std::to_string(j) + "'");

  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw DataError("bad number '" + cell + "' on line " + std::to_string(line_no) + " of " + path.string());
      vals.push_back(v);
    }
    if (vals.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + " of " + path.string() + " has " + std::to_string(vals.size()) +
                      " fields, expected " + std::to_string(header.size()));
    rows.push_back(std::move(vals));
  }
  est::Dataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.X.resize(n, d);
  data.T.resize(n);
  data.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (int j = 1; j <= d; ++j) data.X(i, j - 1) = r[static_cast<std::size_t>(x_cols[j])];
    const double t = r[static_cast<std::size_t>(t_col)];
    if (t != 0.0 && t != 1.0) throw DataError("column 't' must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    data.T(i) = static_cast<int>(t);
    data.Y(i) = r[static_cast<std::size_t>(y_col)];
  }
  data.validate();
  return data;
}

void write_dataset_csv(const fs::path& path, const est::Dataset& data) {
  std::string out;
  for (int j = 0; j < data.d(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "t,y\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) out += format_double(data.X(i, j)) + ",";
    out += std::to_string(data.T(i)) + "," + format_double(data.Y(i)) + "\n";
  }
  write_text(path, out);
}

std::string curve_csv(const sens::SensitivityCurve& curve) {
  std::string out = "rho,lcb,ucb,lcb_monotone,ucb_monotone\n";
  for (std::size_t k = 0; k < curve.size(); ++k)
    out += format_double(curve.rho_grid[k]) + "," + format_double(curve.lcb[k]) + "," + format_double(curve.ucb[k]) + "," +
           format_double(curve.lcb_monotone[k]) + "," + format_double(curve.ucb_monotone[k]) + "\n";
  return out;
}

// ---------------------------------------------------------------- commands

std::vector<fs::path> cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  cfg.validate("simulate");
  const auto dgp = cfg.dgp();
  const auto data = sim::generate(dgp);
  const fs::path csv = out / "dataset.csv", side = out / "dataset.json";
  write_dataset_csv(csv, data);
  json j = provenance(cfg, "simulate");
  j["dgp"] = {{"n", dgp.n},
              {"d", dgp.d},
              {"gamma", std::vector<double>(dgp.gamma.data(), dgp.gamma.data() + dgp.d)},
              {"beta1", std::vector<double>(dgp.beta1.data(), dgp.beta1.data() + dgp.d)},
              {"beta0", std::vector<double>(dgp.beta0.data(), dgp.beta0.data() + dgp.d)},
              {"delta", dgp.delta},
              {"sigma_sq", "1 + " + format_double(dgp.sigma_coef) + " * x1^2"},
              {"seed", dgp.seed}};
  j["rho"] = dgp.attained_rho();
  j["treated"] = static_cast<long>(data.arm(1).size());
  write_json(side, j);
  return {csv, side};
}

std::vector<fs::path> cmd_estimate(const RunConfig& cfg, const fs::path& out) {
  cfg.validate("estimate");
  const auto data = read_dataset_csv(cfg.data);
  const auto target = est::target_from_name(cfg.target);
  const auto spec = cfg.divergence_spec();
  const auto b = est::estimate_bound(data, spec, *cfg.rho, target, cfg.estimator());
  using effects::CIKind;
  const auto pe = effects::summary(b);
  json j = provenance(cfg, "estimate");
  j["target"] = est::target_name(target);
  j["divergence"] = spec.name();
  j["rho"] = *cfg.rho;
  j["point"] = b.point;
  j["sigma_hat"] = b.sigma_hat;
  j["standard_error"] = b.standard_error();
  j["n"] = b.n;
  j["ci"] = {{"two_sided", ci_json(effects::confidence_interval(pe, cfg.level, CIKind::TwoSidedBound))},
             {"one_sided_lower", ci_json(effects::confidence_interval(pe, cfg.level, CIKind::OneSidedLower))},
             {"one_sided_upper", ci_json(effects::confidence_interval(pe, cfg.level, CIKind::OneSidedUpper))}};
  j["fold_values"] = b.fold_values;
  j["p_source"] = b.p_source;
  j["plan_seed"] = b.plan_seed;
  j["warnings"] = b.warnings;
  json diags = json::array();
  for (const auto& d : b.diagnostics)
    diags.push_back({{"fold", d.fold},
                     {"erm_risk", d.erm_risk},
                     {"constant_risk", d.constant_risk},
                     {"floor_hits", d.floor_hits},
                     {"hit_coefficient_bound", d.hit_coefficient_bound},
                     {"p1_hat", d.p1_hat},
                     {"sieve_terms", d.sieve_terms}});
  j["diagnostics"] = diags;
  const fs::path res = out / "estimate.json", comp = out / "estimate_components.csv";
  write_json(res, j);
  std::string csv = "row,arm,fold,component\n";
  const int src = est::source_arm(target);
  for (std::size_t k = 0; k < b.source_rows.size(); ++k)
    csv += std::to_string(b.source_rows[k]) + "," + std::to_string(src) + "," +
           std::to_string(b.fold_of[static_cast<std::size_t>(b.source_rows[k])]) + "," +
           format_double(b.d1(static_cast<Eigen::Index>(k))) + "\n";
  for (std::size_t k = 0; k < b.target_rows.size(); ++k)
    csv += std::to_string(b.target_rows[k]) + "," + std::to_string(1 - src) + "," +
           std::to_string(b.fold_of[static_cast<std::size_t>(b.target_rows[k])]) + "," +
           format_double(b.d0(static_cast<Eigen::Index>(k))) + "\n";
  write_text(comp, csv);
  return {res, comp};
}

std::vector<fs::path> cmd_curve(const RunConfig& cfg, const fs::path& out) {
  cfg.validate("curve");
  const auto data = read_dataset_csv(cfg.data);
  sens::CurveConfig cc;
  cc.level = cfg.level;
  cc.plan_seed = cfg.seed;
  const auto curve = sens::compute_curve(data, cfg.divergence_spec(), cfg.rho_grid, effects::effect_from_name(cfg.effect),
                                         cfg.estimator(), cc);
  const auto inv = sens::invert(curve, cfg.threshold);
  const fs::path csv = out / "curve.csv", side = out / "curve.json";
  write_text(csv, curve_csv(curve));
  json j = provenance(cfg, "curve");
  j["effect"] = cfg.effect;
  j["level"] = cfg.level;
  j["threshold"] = cfg.threshold;
  j["rho_hat"] = optional_json(inv.rho_hat);
  j["rho_hat_previous"] = optional_json(inv.previous);
  j["rho_hat_next"] = optional_json(inv.next);
  j["interpretation"] = inv.rho_hat ? "the level-" + format_double(cfg.level) +
                                          " interval first contains the threshold at this budget; smaller budgets "
                                          "exclude it"
                                    : "no budget on the grid yields an interval containing the threshold";
  json gaps = json::array();
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (!curve.ok[k]) gaps.push_back({{"rho", curve.rho_grid[k]}, {"error", curve.errors[k]}});
  j["gaps"] = gaps;
  write_json(side, j);
  return {csv, side};
}

json cmd_validate_divergence(const RunConfig& cfg) {
  const auto spec = cfg.divergence_spec();
  const auto rep = validate_spec(spec);
  return json{{"divergence", spec.name()},
              {"ok", rep.ok()},
              {"f_at_one", rep.f_at_one},
              {"max_fenchel_violation", rep.max_fenchel_violation},
              {"max_fenchel_equality_gap", rep.max_fenchel_equality_gap},
              {"max_convexity_violation", rep.max_convexity_violation},
              {"max_conj_mismatch", rep.max_conj_mismatch},
              {"max_conj_monotonicity_violation", rep.max_conj_monotonicity_violation},
              {"max_conj_convexity_violation", rep.max_conj_convexity_violation},
              {"max_derivative_mismatch", rep.max_derivative_mismatch},
              {"s_points_checked", rep.s_points_checked},
              {"issues", rep.issues},
              {"version", version()}};
}

// ---------------------------------------------------------------- figures

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"1", "2", "3", "4", "5", "6"};
  return ids;
}

namespace {

struct Scale {
  bool paper = false;
};

std::vector<fs::path> figure1(const RunConfig& cfg, const fs::path& out) {
  // Integral table over a fine delta grid, then bounds from n = 2000 N(0, 1)
  // treated outcomes for budgets equal to the integral, 20 repeats each.
  std::string table = "delta,integral,quadrature_error\n";
  for (int i = 1; i <= 20; ++i) {
    const double delta = 0.1 * i;
    const auto q = sim::example1_bound(delta);
    table += format_double(delta) + "," + format_double(q.value) + "," + format_double(q.error) + "\n";
  }
  const auto kl = Divergence::kl();
  std::string bounds = "delta,rho,rep,lower,upper,truth_lower,truth_upper\n";
  for (int i = 1; i <= 8; ++i) {
    const double delta = 0.25 * i;
    const double rho = sim::example1_bound(delta).value;
    for (int rep = 0; rep < 20; ++rep) {
      rng::Philox gen(rng::derive_seed(cfg.seed, {0x666967ULL, 1, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(rep)}));
      std::vector<double> y(2000), neg(2000);
      for (std::size_t k = 0; k < y.size(); ++k) {
        y[k] = gen.normal();
        neg[k] = -y[k];
      }
      const double lo = dual::solve_pointwise_dual(kl, rho, y, cfg.eps).lower_bound();
      const double hi = -dual::solve_pointwise_dual(kl, rho, neg, cfg.eps).lower_bound();
      const double b = std::sqrt(2.0 * rho);
      bounds += format_double(delta) + "," + format_double(rho) + "," + std::to_string(rep) + "," + format_double(lo) + "," +
                format_double(hi) + "," + format_double(-b) + "," + format_double(b) + "\n";
    }
  }
  const fs::path a = out / "figure1_integral.csv", b = out / "figure1_bounds.csv";
  write_text(a, table);
  write_text(b, bounds);
  return {a, b};
}

std::vector<fs::path> figure2(const RunConfig& cfg, const fs::path& out, Scale s) {
  const std::vector<double> probs{0.05, 0.25, 0.5, 0.75, 0.95};
  std::string csv = "delta,rho,q05,q25,q50,q75,q95\n";
  auto dgp = cfg.dgp();
  for (int i = 1; i <= 15; ++i) {
    dgp.delta = 0.1 * i;
    const auto q = sim::odds_ratio_quantiles(dgp, probs, s.paper ? 1000000 : 100000);
    csv += format_double(dgp.delta) + "," + format_double(dgp.attained_rho());
    for (double v : q) csv += "," + format_double(v);
    csv += "\n";
  }
  const fs::path p = out / "figure2.csv";
  write_text(p, csv);
  return {p};
}

std::vector<fs::path> figure3(const RunConfig& cfg, const fs::path& out, Scale s, json& meta) {
  auto dgp = cfg.dgp();
  dgp.n = s.paper ? 15000 : 5000;
  dgp.delta = 0.5;
  const auto data = sim::generate(dgp);
  sens::CurveConfig cc;
  cc.level = cfg.level;
  cc.plan_seed = cfg.seed;
  const auto curve =
      sens::compute_curve(data, cfg.divergence_spec(), default_grid(), effects::Effect::ATC, cfg.estimator(), cc);
  const double atc = sim::true_effects(dgp).atc;
  // rho-hat for the truth: the first budget whose lower end reaches it.
  std::optional<double> truth_cross;
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve.lcb_monotone[k] <= atc) {
      truth_cross = curve.rho_grid[k];
      break;
    }
  meta["true_atc"] = atc;
  meta["rho_hat_truth"] = optional_json(truth_cross);
  meta["rho_hat_zero"] = optional_json(sens::invert(curve, 0.0).rho_hat);
  meta["n"] = dgp.n;
  const fs::path p = out / "figure3.csv";
  write_text(p, curve_csv(curve));
  return {p};
}

std::vector<sim::CoverageCell> coverage_cells(const RunConfig& cfg, Scale s, json& meta) {
  sim::CoverageConfig cc;
  cc.base = cfg.dgp();
  cc.base.n = s.paper ? 15000 : 2000;
  cc.reps = s.paper ? 500 : 200;
  if (s.paper) {
    cc.deltas.clear();
    for (int i = 1; i <= 15; ++i) cc.deltas.push_back(0.1 * i);
  }
  cc.level = cfg.level;
  cc.spec = cfg.divergence_spec();
  cc.estimator = cfg.estimator();
  const auto cells = sim::coverage_experiment(cc);
  json info = json::array();
  for (const auto& c : cells)
    info.push_back({{"delta", c.delta},
                    {"reps", c.reps},
                    {"failures", c.failures},
                    {"failure_messages", c.failure_messages},
                    {"truth_lower", c.truth_lower},
                    {"truth_upper", c.truth_upper},
                    {"true_mean", c.true_mean}});
  meta["cells"] = info;
  meta["n"] = cc.base.n;
  return cells;
}

std::vector<fs::path> figure4(const RunConfig& cfg, const fs::path& out, Scale s, json& meta) {
  const auto cells = coverage_cells(cfg, s, meta);
  std::string csv = "delta,rho,rep,lower,upper,truth_lower,truth_upper,true_mean\n";
  for (const auto& c : cells)
    for (std::size_t r = 0; r < c.lower_points.size(); ++r)
      csv += format_double(c.delta) + "," + format_double(c.rho) + "," + std::to_string(r) + "," +
             format_double(c.lower_points[r]) + "," + format_double(c.upper_points[r]) + "," + format_double(c.truth_lower) +
             "," + format_double(c.truth_upper) + "," + format_double(c.true_mean) + "\n";
  const fs::path p = out / "figure4.csv";
  write_text(p, csv);
  return {p};
}

std::vector<fs::path> figure5(const RunConfig& cfg, const fs::path& out, Scale s, json& meta) {
  const auto cells = coverage_cells(cfg, s, meta);
  std::string csv = "delta,rho,coverage_lower,coverage_upper,coverage_mean,se\n";
  for (const auto& c : cells)
    csv += format_double(c.delta) + "," + format_double(c.rho) + "," + format_double(c.coverage_lower) + "," +
           format_double(c.coverage_upper) + "," + format_double(c.coverage_mean) + "," + format_double(c.se) + "\n";
  const fs::path p = out / "figure5.csv";
  write_text(p, csv);
  return {p};
}

std::vector<fs::path> figure6(const RunConfig& cfg, const fs::path& out, Scale s, json& meta) {
  const auto cells = coverage_cells(cfg, s, meta);
  std::string csv = "delta,rho,coverage_one_sided_lower,coverage_one_sided_upper,se\n";
  for (const auto& c : cells)
    csv += format_double(c.delta) + "," + format_double(c.rho) + "," + format_double(c.coverage_one_sided_lower) + "," +
           format_double(c.coverage_one_sided_upper) + "," + format_double(c.se) + "\n";
  const fs::path p = out / "figure6.csv";
  write_text(p, csv);
  return {p};
}

}  // namespace

std::vector<fs::path> cmd_reproduce(const RunConfig& cfg, const fs::path& out) {
  cfg.validate("reproduce");
  const Scale s{cfg.scale == "paper"};
  json meta = provenance(cfg, "reproduce");
  meta["figure"] = cfg.figure;
  meta["scale"] = cfg.scale;
  std::vector<fs::path> files;
  const int id = std::stoi(cfg.figure);
  switch (id) {
    case 1: files = figure1(cfg, out); break;
    case 2: files = figure2(cfg, out, s); break;
    case 3: files = figure3(cfg, out, s, meta); break;
    case 4: files = figure4(cfg, out, s, meta); break;
    case 5: files = figure5(cfg, out, s, meta); break;
    case 6: files = figure6(cfg, out, s, meta); break;
    default: throw ConfigError("unknown figure");
  }
  const fs::path side = out / ("figure" + cfg.figure + ".json");
  write_json(side, meta);
  files.push_back(side);
  return files;
}

}  // namespace fsens::io
