#include "brwre/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "brwre/asymptotics.hpp"
#include "brwre/errors.hpp"
#include "brwre/estimators.hpp"
#include "brwre/forest.hpp"
#include "brwre/oracle.hpp"
#include "brwre/presets.hpp"
#include "brwre/spine.hpp"

namespace brwre::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

json defaults() {
  return json::parse(R"({
    "env": {"preset": "env_a"},
    "step": {"preset": "pm1"},
    "seed": 1,
    "env_seed": 7,
    "workers": 0,
    "classify": {"theta_tol": 1e-9, "grid": 20},
    "oracle": {"xs": [1, 2, 3, 4], "horizon": 40, "mode": "quenched", "n_env": 1000},
    "simulate": {"replicates": 1000, "max_gen": 500, "max_particles": 10000000,
                 "quenched": false},
    "spine": {"xs": [1, 2, 3], "measure": "annealed_base", "lambda": null, "rho": null,
              "runs": 100, "max_gen": 400, "max_particles": 1000000000000000,
              "complete_on_cap": true},
    "estimate": {"xs": [2, 3, 4, 5], "schemes": ["naive", "spine", "class1"], "n": 10000,
                 "n_by_scheme": {"naive": null, "spine": null, "class1": null,
                                 "class3": null},
                 "lambda": null, "rho": null, "quenched": false},
    "fit": {"input": "", "scheme": "", "unscale": false},
    "report": {"quenched_xs": [10, 15, 20, 25, 30], "class_xs": [5, 10, 20], "n": 2000},
    "selftest": {"scale": 1}
  })");
}

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorKind::ConfigError, msg);
}

void check_keys(const json& user, const json& schema, const std::string& path) {
  if (!schema.is_object()) return;
  if (!user.is_object()) config_error("'" + path + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (path.empty() && key == "env") {
      if (!value.is_object()) config_error("'env' must be an object");
      for (const auto& [k, v] : value.items()) {
        if (k == "states") {
          if (!v.is_array()) config_error("'env.states' must be an array");
          for (const auto& st : v) {
            if (!st.is_object()) config_error("env state must be an object");
            for (const auto& [sk, sv] : st.items()) {
              (void)sv;
              if (sk != "weight" && sk != "pmf") config_error("unknown key 'env.states[]." + sk + "'");
            }
          }
        } else if (k != "preset") {
          config_error("unknown key 'env." + k + "'");
        }
      }
      continue;
    }
    if (path.empty() && key == "step") {
      if (!value.is_object()) config_error("'step' must be an object");
      for (const auto& [k, v] : value.items()) {
        (void)v;
        if (k != "preset" && k != "pmf") config_error("unknown key 'step." + k + "'");
      }
      continue;
    }
    if (!schema.contains(key)) config_error("unknown key '" + p + "'");
    check_keys(value, schema.at(key), p);
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

void apply_set(json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_error("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  json* node = &user;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (child.is_null()) child = json::object();
    node = &child;
  }
  (*node)[parts.back()] = parse_value(assignment.substr(eq + 1));
}

struct Config {
  json doc;
  std::uint64_t seed = 1;
  int workers = 0;
  fs::path out;

  const json& at(const std::string& pointer) const {
    try {
      return doc.at(json::json_pointer(pointer));
    } catch (const json::exception&) {
      config_error("missing config value " + pointer);
    }
  }

  std::int64_t integer(const std::string& p, std::int64_t lo, std::int64_t hi) const {
    const json& v = at(p);
    double d = 0.0;
    if (v.is_number_integer()) {
      d = static_cast<double>(v.get<std::int64_t>());
    } else if (v.is_number()) {
      d = v.get<double>();
      if (d != std::floor(d)) config_error(p + " must be an integer");
    } else {
      config_error(p + " must be an integer");
    }
    if (d < static_cast<double>(lo) || d > static_cast<double>(hi)) {
      config_error(p + " = " + v.dump() + " outside [" + std::to_string(lo) + ", " +
                   std::to_string(hi) + "]");
    }
    return v.is_number_integer() ? v.get<std::int64_t>() : static_cast<std::int64_t>(d);
  }

  double real(const std::string& p, double lo, double hi) const {
    const json& v = at(p);
    if (!v.is_number()) config_error(p + " must be a number");
    const double d = v.get<double>();
    if (!(d >= lo && d <= hi)) config_error(p + " = " + v.dump() + " out of range");
    return d;
  }

  std::optional<double> optional_real(const std::string& p, double lo, double hi) const {
    if (at(p).is_null()) return std::nullopt;
    return real(p, lo, hi);
  }

  bool boolean(const std::string& p) const {
    const json& v = at(p);
    if (!v.is_boolean()) config_error(p + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& p) const {
    const json& v = at(p);
    if (!v.is_string()) config_error(p + " must be a string");
    return v.get<std::string>();
  }

  std::vector<int> int_list(const std::string& p, int lo, int hi) const {
    const json& v = at(p);
    if (!v.is_array() || v.empty()) config_error(p + " must be a non-empty list");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(static_cast<int>(integer(p + "/" + std::to_string(i), lo, hi)));
    }
    return out;
  }

  std::vector<std::string> string_list(const std::string& p) const {
    const json& v = at(p);
    if (!v.is_array() || v.empty()) config_error(p + " must be a non-empty list");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) config_error(p + " must hold strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
};

std::vector<std::pair<int, double>> read_pmf(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) config_error(where + " must be a list of [value, prob]");
  std::vector<std::pair<int, double>> out;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number()) {
      config_error(where + " entries must be [integer, probability]");
    }
    out.emplace_back(e[0].get<int>(), e[1].get<double>());
  }
  return out;
}

EnvModel build_env(const json& env) {
  if (env.contains("states")) {
    if (env.contains("preset")) config_error("env takes either 'preset' or 'states'");
    std::vector<EnvModel::State> states;
    for (const auto& st : env.at("states")) {
      if (!st.contains("weight") || !st.contains("pmf") || !st.at("weight").is_number()) {
        config_error("env state needs 'weight' and 'pmf'");
      }
      states.push_back({st.at("weight").get<double>(),
                        OffspringLaw::make(read_pmf(st.at("pmf"), "env.states[].pmf"))});
    }
    return EnvModel::make(std::move(states));
  }
  if (!env.contains("preset") || !env.at("preset").is_string()) {
    config_error("env needs 'preset' or 'states'");
  }
  const std::string name = env.at("preset").get<std::string>();
  auto m = presets::env_by_name(name);
  if (!m) config_error("unknown env preset '" + name + "'");
  return *m;
}

StepLaw build_step(const json& step) {
  if (step.contains("pmf")) {
    if (step.contains("preset")) config_error("step takes either 'preset' or 'pmf'");
    return StepLaw::make(read_pmf(step.at("pmf"), "step.pmf"));
  }
  if (!step.contains("preset") || step.at("preset") != "pm1") {
    config_error("step needs 'pmf' or preset 'pm1'");
  }
  return presets::pm1_walk();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_json(const ClassificationReport& r) {
  json j;
  j["a"] = r.a;
  j["alpha_infinite"] = r.alpha_infinite();
  j["alpha"] = r.alpha_infinite() ? json(nullptr) : json(r.alpha);
  j["lambda0"] = r.lambda0;
  j["lambda1"] = opt_json(r.lambda1);
  j["theta1"] = opt_json(r.theta1);
  j["rho_star"] = opt_json(r.rho_star);
  j["lambda_rho_star"] = opt_json(r.lambda_rho_star);
  j["class_label"] = std::string(to_string(r.class_label));
  j["predicted"] = {{"exp_rate", r.predicted.exp_rate},
                    {"poly_power", r.predicted.poly_power},
                    {"poly_is_bound", r.predicted.poly_is_bound}};
  return j;
}

struct Context {
  Config cfg;
  std::shared_ptr<const EnvModel> model;
  StepLaw step;
  std::ostream& out;
  std::vector<std::string> artifacts;
  json manifest_extra = json::object();

  std::ofstream open(const std::string& name) {
    std::ofstream f(cfg.out / name, std::ios::binary);
    if (!f) config_error("cannot write " + (cfg.out / name).string());
    artifacts.push_back(name);
    return f;
  }

  RunOptions run_options() const {
    RunOptions o;
    o.workers = cfg.workers;
    o.tree_caps.max_gen = static_cast<int>(cfg.integer("/simulate/max_gen", 1, 100000));
    o.tree_caps.max_particles = cfg.integer("/simulate/max_particles", 1, std::int64_t{1} << 60);
    o.subtree_caps.max_gen = static_cast<int>(cfg.integer("/spine/max_gen", 1, 100000));
    o.subtree_caps.max_particles =
        cfg.integer("/spine/max_particles", 1, std::int64_t{1} << 60);
    o.subtree_caps.complete_on_cap = cfg.boolean("/spine/complete_on_cap");
    return o;
  }

  std::shared_ptr<const EnvSequence> fixed_sequence() const {
    return std::make_shared<const EnvSequence>(
        model, static_cast<std::uint64_t>(cfg.integer("/env_seed", 0, INT64_MAX)));
  }
};

// ---- classify -------------------------------------------------------------

int cmd_classify(Context& ctx) {
  const double tol = ctx.cfg.real("/classify/theta_tol", 0.0, 1.0);
  const int grid = static_cast<int>(ctx.cfg.integer("/classify/grid", 2, 100000));
  const ClassificationReport r = classify(*ctx.model, ctx.step, tol);
  json j = report_json(r);

  const double top = std::min(r.alpha, 5.0);
  json table = json::array();
  auto csv = ctx.open("theta_table.csv");
  csv << "rho,lambda_rho,theta\n";
  for (int i = 1; i <= grid; ++i) {
    const double rho = top * i / grid;
    const double lam = lambda_rho(*ctx.model, ctx.step, rho);
    const double th = theta(*ctx.model, ctx.step, rho);
    table.push_back({{"rho", rho}, {"lambda_rho", lam}, {"theta", th}});
    csv << num(rho) << ',' << num(lam) << ',' << num(th) << '\n';
  }
  j["theta_table"] = table;
  ctx.open("classification.json") << j.dump(2) << '\n';

  auto line = [&](const char* name, const std::string& value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", name);
    ctx.out << buf << value << '\n';
  };
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string("-"); };
  line("class", std::string(to_string(r.class_label)));
  line("a", num(r.a));
  line("alpha", r.alpha_infinite() ? "inf" : num(r.alpha));
  line("lambda0", num(r.lambda0));
  line("lambda1", opt(r.lambda1));
  line("theta(1)", opt(r.theta1));
  line("rho*", opt(r.rho_star));
  line("lambda_rho*", opt(r.lambda_rho_star));
  line("exp_rate", num(r.predicted.exp_rate));
  line("poly_power", num(r.predicted.poly_power) + (r.predicted.poly_is_bound ? " (bound)" : ""));
  ctx.out << j.dump() << '\n';
  return kOk;
}

// ---- oracle ---------------------------------------------------------------

int cmd_oracle(Context& ctx) {
  const auto xs = ctx.cfg.int_list("/oracle/xs", 1, 100000);
  const int T = static_cast<int>(ctx.cfg.integer("/oracle/horizon", 0, 1000000));
  const std::string mode = ctx.cfg.string("/oracle/mode");
  auto csv = ctx.open("oracle.csv");
  csv << "x,T,value,error_bound\n";
  for (int x : xs) {
    OracleResult r;
    if (mode == "quenched") {
      r = quenched_hit_prob(*ctx.fixed_sequence(), ctx.step, x, T);
    } else if (mode == "annealed_enumerate") {
      r = annealed_hit_prob_small(*ctx.model, ctx.step, x, T, AnnealedMode::enumerate);
    } else if (mode == "annealed_average") {
      r = annealed_hit_prob_small(*ctx.model, ctx.step, x, T, AnnealedMode::average,
                                  ctx.cfg.integer("/oracle/n_env", 2, INT64_MAX),
                                  derive_seed(ctx.cfg.seed, static_cast<std::uint64_t>(x)));
    } else {
      config_error("oracle.mode must be quenched, annealed_enumerate or annealed_average");
    }
    csv << x << ',' << T << ',' << num(r.value) << ',' << num(r.error_bound) << '\n';
    ctx.out << "x=" << x << " T=" << T << " value=" << num(r.value)
            << " error_bound=" << num(r.error_bound) << '\n';
  }
  return kOk;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(Context& ctx) {
  const std::int64_t n = ctx.cfg.integer("/simulate/replicates", 1, INT64_MAX);
  const bool quenched = ctx.cfg.boolean("/simulate/quenched");
  const RunOptions opt = ctx.run_options();
  const auto seq = quenched ? ctx.fixed_sequence() : nullptr;
  std::vector<TreeStats> stats(static_cast<std::size_t>(n));
  parallel_for(n, opt.workers, [&](std::int64_t i) {
    const std::uint64_t rs = replicate_seed(ctx.cfg.seed, i);
    Rng rng(derive_seed(rs, stream::tree));
    if (seq) {
      stats[static_cast<std::size_t>(i)] = simulate_tree(*seq, ctx.step, opt.tree_caps, rng);
    } else {
      const EnvSequence own(ctx.model, derive_seed(rs, stream::environment));
      stats[static_cast<std::size_t>(i)] = simulate_tree(own, ctx.step, opt.tree_caps, rng);
    }
  });
  auto csv = ctx.open("simulate.csv");
  csv << "replicate,M,extinct_at,truncated\n";
  double mean_m = 0.0;
  int max_m = 0;
  std::int64_t truncated = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const TreeStats& s = stats[static_cast<std::size_t>(i)];
    csv << i << ',' << s.max_disp << ',' << (s.extinct_at ? std::to_string(*s.extinct_at) : "")
        << ',' << (s.truncated ? 1 : 0) << '\n';
    mean_m += s.max_disp;
    max_m = std::max(max_m, s.max_disp);
    truncated += s.truncated ? 1 : 0;
  }
  json summary = {{"replicates", n},
                  {"quenched", quenched},
                  {"mean_M", mean_m / static_cast<double>(n)},
                  {"max_M", max_m},
                  {"truncated_fraction", static_cast<double>(truncated) / static_cast<double>(n)}};
  ctx.open("simulate_summary.json") << summary.dump(2) << '\n';
  ctx.out << summary.dump() << '\n';
  return kOk;
}

// ---- spine ----------------------------------------------------------------

int cmd_spine(Context& ctx) {
  const auto xs = ctx.cfg.int_list("/spine/xs", 1, 100000);
  const Measure measure = parse_measure(ctx.cfg.string("/spine/measure"));
  const std::int64_t runs = ctx.cfg.integer("/spine/runs", 1, INT64_MAX);
  std::optional<double> lam = ctx.cfg.optional_real("/spine/lambda", 1e-12, 1e6);
  const std::optional<double> rho = ctx.cfg.optional_real("/spine/rho", 1e-12, 1e6);
  const RunOptions opt = ctx.run_options();
  std::shared_ptr<const EnvSequence> seq;
  if (measure == Measure::forward_quenched) {
    seq = ctx.fixed_sequence();
    if (!lam) lam = ctx.step.inverse_log_laplace(-ctx.model->drift());
  }
  const CouplingSampler sampler(ctx.model, ctx.step, measure, lam, rho, opt.subtree_caps, seq);
  auto csv = ctx.open("spine.csv");
  csv << "x,measure,T_x,R_x,B_x,truncated_subtrees\n";
  for (int x : xs) {
    std::vector<CouplingRun> rows(static_cast<std::size_t>(runs));
    const std::uint64_t xseed = derive_seed(ctx.cfg.seed, static_cast<std::uint64_t>(x));
    parallel_for(runs, opt.workers, [&](std::int64_t i) {
      rows[static_cast<std::size_t>(i)] = sampler.run(x, replicate_seed(xseed, i));
    });
    for (const CouplingRun& r : rows) {
      csv << r.x << ',' << to_string(r.measure) << ',' << r.T_x << ',' << num(r.R_x) << ','
          << num(r.B_x) << ',' << r.truncated_subtrees << '\n';
    }
  }
  ctx.out << "wrote " << (ctx.cfg.out / "spine.csv").string() << '\n';
  return kOk;
}

// ---- estimate -------------------------------------------------------------

void write_estimate_header(std::ostream& csv) {
  csv << "x,scheme,n,mean,stderr,ci_lo,ci_hi,truncated_fraction,seed\n";
}

void write_estimate(std::ostream& csv, const Estimate& e) {
  csv << e.x << ',' << e.scheme << ',' << e.n << ',' << num(e.mean) << ',' << num(e.stderr_)
      << ',' << num(e.ci_lo) << ',' << num(e.ci_hi) << ',' << num(e.truncated_fraction) << ','
      << e.seed << '\n';
}

int cmd_estimate(Context& ctx) {
  const auto xs = ctx.cfg.int_list("/estimate/xs", 0, 100000);
  const auto schemes = ctx.cfg.string_list("/estimate/schemes");
  const bool quenched = ctx.cfg.boolean("/estimate/quenched");
  const std::int64_t n_default = ctx.cfg.integer("/estimate/n", 2, INT64_MAX);
  const RunOptions opt = ctx.run_options();
  const auto seq = quenched ? ctx.fixed_sequence() : nullptr;

  auto csv = ctx.open("estimates.csv");
  write_estimate_header(csv);
  for (const std::string& scheme : schemes) {
    const std::string np = "/estimate/n_by_scheme/" + scheme;
    if (!ctx.cfg.doc.contains(json::json_pointer(np))) {
      config_error("unknown scheme '" + scheme + "'");
    }
    const std::int64_t n =
        ctx.cfg.at(np).is_null() ? n_default : ctx.cfg.integer(np, 2, INT64_MAX);
    for (int x : xs) {
      const std::uint64_t s = derive_seed(derive_seed(ctx.cfg.seed, fnv1a(scheme)),
                                          static_cast<std::uint64_t>(x));
      Estimate e;
      if (scheme == "naive") {
        e = quenched ? estimate_naive_quenched(seq, ctx.step, x, n, s, opt)
                     : estimate_naive(ctx.model, ctx.step, x, n, s, opt);
      } else if (scheme == "spine") {
        if (x < 1) config_error("spine needs x >= 1");
        std::optional<double> lam = ctx.cfg.optional_real("/estimate/lambda", 1e-12, 1e6);
        if (quenched) {
          if (!lam) lam = ctx.step.inverse_log_laplace(-ctx.model->drift());
          e = estimate_spine_quenched(seq, ctx.step, x, *lam, n, s, opt);
        } else {
          if (!lam) {
            const ClassificationReport r = classify(*ctx.model, ctx.step);
            lam = r.lambda1 ? *r.lambda1 : r.lambda0;
          }
          e = estimate_spine(ctx.model, ctx.step, x, *lam, n, s, opt);
        }
      } else if (scheme == "class1") {
        if (x < 1) config_error("class1 needs x >= 1");
        e = estimate_class1(ctx.model, ctx.step, x, n, s, opt);
      } else if (scheme == "class3") {
        if (x < 1) config_error("class3 needs x >= 1");
        e = estimate_class3(ctx.model, ctx.step, x, n, s,
                            ctx.cfg.optional_real("/estimate/rho", 1e-12, 1e6), opt);
      }
      write_estimate(csv, e);
      ctx.out << e.scheme << " x=" << x << " n=" << e.n << " mean=" << num(e.mean)
              << " stderr=" << num(e.stderr_) << '\n';
    }
  }
  ctx.manifest_extra["classification"] = report_json(classify(*ctx.model, ctx.step));
  return kOk;
}

// ---- fit ------------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

int cmd_fit(Context& ctx) {
  std::string input = ctx.cfg.string("/fit/input");
  if (input.empty()) input = (ctx.cfg.out / "estimates.csv").string();
  std::ifstream in(input);
  if (!in) config_error("cannot read " + input);
  const std::string only = ctx.cfg.string("/fit/scheme");
  const bool unscale = ctx.cfg.boolean("/fit/unscale");

  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const auto col = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) config_error(input + " lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cx = col("x"), cs = col("scheme"), cm = col("mean");
  std::map<std::string, std::vector<std::pair<double, double>>> groups;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < header.size()) config_error("short row in " + input);
    if (!only.empty() && cells[cs] != only) continue;
    groups[cells[cs]].emplace_back(std::stod(cells[cx]), std::stod(cells[cm]));
  }
  if (groups.empty()) config_error("no rows to fit in " + input);

  std::optional<ClassificationReport> rep;
  auto csv = ctx.open("fits.csv");
  csv << "scheme,lambda_hat,beta_hat,c,residual,lambda_hat_diff\n";
  for (auto& [scheme, pts] : groups) {
    if (unscale && (scheme == "class1" || scheme == "class3")) {
      if (!rep) rep = classify(*ctx.model, ctx.step);
      const double rate = scheme == "class1" ? rep->lambda1.value_or(0.0)
                                             : rep->predicted.exp_rate;
      for (auto& [x, p] : pts) p *= std::exp(-rate * x);
    }
    const RateFit f = fit_rate(pts);
    csv << scheme << ',' << num(f.exp_rate) << ',' << num(f.poly_power) << ','
        << num(f.intercept) << ',' << num(f.residual) << ',' << num(f.exp_rate_diff) << '\n';
    ctx.out << scheme << ": lambda_hat=" << num(f.exp_rate) << " beta_hat=" << num(f.poly_power)
            << " residual=" << num(f.residual) << '\n';
  }
  return kOk;
}

// ---- report ---------------------------------------------------------------

void write_report_row(std::ostream& csv, int x, double v, double lo, double hi) {
  csv << x << ',' << num(v) << ',' << num(lo) << ',' << num(hi) << '\n';
}

int cmd_report(Context& ctx) {
  const ClassificationReport rep = classify(*ctx.model, ctx.step);
  const RunOptions opt = ctx.run_options();
  const std::int64_t n = ctx.cfg.integer("/report/n", 2, INT64_MAX);
  const auto qxs = ctx.cfg.int_list("/report/quenched_xs", 1, 100000);
  const auto cxs = ctx.cfg.int_list("/report/class_xs", 1, 100000);
  ctx.manifest_extra["classification"] = report_json(rep);

  {
    // e^{λ_0 x} P_ξ(M >= x) from the certified oracle on the fixed sequence.
    const auto seq = ctx.fixed_sequence();
    auto csv = ctx.open("report_quenched.csv");
    csv << "x,rescaled_value,ci_lo,ci_hi\n";
    for (int x : qxs) {
      const OracleResult r = quenched_hit_prob_certified(*seq, ctx.step, x, 1e-3);
      const double s = std::exp(rep.lambda0 * x);
      write_report_row(csv, x, s * r.value, s * r.value, s * (r.value + r.error_bound));
    }
  }
  const auto emit = [&](const char* name, auto&& estimate, auto&& scale) {
    auto csv = ctx.open(name);
    csv << "x,rescaled_value,ci_lo,ci_hi\n";
    for (int x : cxs) {
      const Estimate e = estimate(x);
      const double s = scale(x);
      write_report_row(csv, x, s * e.mean, s * e.ci_lo, s * e.ci_hi);
    }
  };
  if (rep.class_label != RegimeClass::III) {
    const auto est = [&](int x) {
      return estimate_class1(ctx.model, ctx.step, x, n,
                             derive_seed(ctx.cfg.seed, static_cast<std::uint64_t>(x)), opt);
    };
    emit("report_class1.csv", est, [](int) { return 1.0; });
    if (rep.class_label == RegimeClass::II) {
      emit("report_class2_sqrt.csv", est, [](int x) { return std::sqrt(static_cast<double>(x)); });
    }
  } else {
    emit("report_class3.csv",
         [&](int x) {
           return estimate_class3(ctx.model, ctx.step, x, n,
                                  derive_seed(ctx.cfg.seed, static_cast<std::uint64_t>(x)),
                                  rep.rho_star, opt);
         },
         [](int) { return 1.0; });
  }
  ctx.out << "class " << to_string(rep.class_label) << ": wrote";
  for (const auto& a : ctx.artifacts) ctx.out << ' ' << a;
  ctx.out << '\n';
  return kOk;
}

// ---- selftest -------------------------------------------------------------

int cmd_selftest(Context& ctx) {
  const std::int64_t scale = ctx.cfg.integer("/selftest/scale", 1, 1000);
  RunOptions opt;
  opt.workers = ctx.cfg.workers;
  const StepLaw step = presets::pm1_walk();
  const auto env_a = std::make_shared<const EnvModel>(presets::env_a());
  const auto env_c = std::make_shared<const EnvModel>(presets::env_c());
  const ClassificationReport ra = classify(*env_a, step);
  const ClassificationReport rc = classify(*env_c, step);
  const std::uint64_t seed = ctx.cfg.seed;

  auto checks = ctx.open("selftest.csv");
  checks << "check,value,reference,tolerance,pass\n";
  int failed = 0;
  const auto record = [&](const char* name, double value, double ref, double tol) {
    const bool ok = std::abs(value - ref) <= tol;
    failed += ok ? 0 : 1;
    checks << name << ',' << num(value) << ',' << num(ref) << ',' << num(tol) << ','
           << (ok ? 1 : 0) << '\n';
    ctx.out << (ok ? "PASS " : "FAIL ") << name << " value=" << num(value)
            << " reference=" << num(ref) << " tol=" << num(tol) << '\n';
  };

  record("env_a_lambda0", ra.lambda0, 0.588964, 5e-6);
  record("env_a_lambda1", *ra.lambda1, std::acosh(10.0 / 9.0), 1e-10);
  record("env_a_class", static_cast<double>(ra.class_label), 0.0, 0.0);
  record("env_c_class", static_cast<double>(rc.class_label), 2.0, 0.0);

  const OracleResult exact = annealed_hit_prob_small(*env_a, step, 2, 12, AnnealedMode::enumerate);
  auto ests = ctx.open("selftest_estimates.csv");
  write_estimate_header(ests);
  const auto cross = [&](const char* name, const Estimate& e) {
    write_estimate(ests, e);
    // The horizon-12 value is a lower bound; the survival bound caps the remainder.
    const double mid = exact.value + 0.5 * exact.survival_bound;
    record(name, e.mean, mid, 4.0 * e.stderr_ + 0.5 * exact.survival_bound);
  };
  cross("naive_x2_vs_oracle", estimate_naive(env_a, step, 2, 20000 * scale, derive_seed(seed, 1), opt));
  cross("spine_x2_vs_oracle",
        estimate_spine(env_a, step, 2, *ra.lambda1, 2000 * scale, derive_seed(seed, 2), opt));

  const Estimate spine3 = estimate_spine(env_a, step, 3, *ra.lambda1, 2000 * scale, derive_seed(seed, 3), opt);
  const Estimate c1 = estimate_class1(env_a, step, 3, 2000 * scale, derive_seed(seed, 4), opt);
  write_estimate(ests, spine3);
  write_estimate(ests, c1);
  const double sc = std::exp(*ra.lambda1 * 3);
  record("class1_rescale_x3", c1.mean, sc * spine3.mean,
         4.0 * std::hypot(c1.stderr_, sc * spine3.stderr_));

  const Estimate c3 = estimate_class3(env_c, step, 3, 1000 * scale, derive_seed(seed, 5), std::nullopt, opt);
  const Estimate spc = estimate_spine(env_c, step, 3, rc.lambda0, 4000 * scale, derive_seed(seed, 6), opt);
  write_estimate(ests, c3);
  write_estimate(ests, spc);
  const double sc3 = std::exp(rc.predicted.exp_rate * 3);
  record("class3_rescale_x3", c3.mean, sc3 * spc.mean,
         4.0 * std::hypot(c3.stderr_, sc3 * spc.stderr_));

  auto runs = ctx.open("selftest_runs.csv");
  runs << "x,measure,T_x,R_x,B_x,truncated_subtrees\n";
  const CouplingSampler sampler(env_a, step, Measure::tilted_rho1);
  std::vector<CouplingRun> rows(static_cast<std::size_t>(64));
  parallel_for(64, opt.workers, [&](std::int64_t i) {
    rows[static_cast<std::size_t>(i)] = sampler.run(4, replicate_seed(derive_seed(seed, 7), i));
  });
  for (const CouplingRun& r : rows) {
    runs << r.x << ',' << to_string(r.measure) << ',' << r.T_x << ',' << num(r.R_x) << ','
         << num(r.B_x) << ',' << r.truncated_subtrees << '\n';
  }
  ctx.out << (failed == 0 ? "selftest passed" : "selftest FAILED") << '\n';
  return failed == 0 ? kOk : kFailure;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::BadPmf:
    case ErrorKind::NonPositiveMean:
    case ErrorKind::MeanNotZero:
    case ErrorKind::SupportAbovePlusOne:
    case ErrorKind::TrivialLaw:
    case ErrorKind::MissingUpStep:
    case ErrorKind::NotSubcritical:
    case ErrorKind::BadWeights:
    case ErrorKind::AlphaTooSmall:
    case ErrorKind::NotClassIII:
    case ErrorKind::DomainError: return kConfigError;
    case ErrorKind::CapacityError:
    case ErrorKind::RunawayError: return kCapacityError;
    case ErrorKind::Inconclusive:
    case ErrorKind::AllTruncated:
    case ErrorKind::DegenerateFit: return kInconclusive;
    default: return kFailure;
  }
}

void report_failure(std::ostream& err, std::string_view kind, const std::string& msg) {
  err << json({{"error", kind}, {"reason", msg}}).dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Branching random walks in random environment: classification, exact "
               "oracles and spine estimators of P(M >= x)"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "brwre_out";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"classify", "classify the system and print the predicted tail"},
      {"oracle", "exact P(M >= x) by backward recursion"},
      {"simulate", "direct simulation of whole trees"},
      {"spine", "sample coupled (R_x, B_x) runs"},
      {"estimate", "Monte Carlo estimates of P(M >= x)"},
      {"fit", "fit log p = -lambda x - beta log x + c"},
      {"report", "plot-ready CSVs for the tail theorems"},
      {"selftest", "fast end-to-end checks"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("-c,--config", config_path, "JSON config file");
    s->add_option("--set", sets, "override, key.path=value")->take_all();
    s->add_option("-o,--out", out_dir, "output directory");
    s->add_option("-w,--workers", workers, "worker threads (0: all cores)");
    s->add_option("-s,--seed", seed, "master seed");
    subs[name] = s;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_failure(err, "ConfigError", e.what());
    return kConfigError;
  }

  std::string command;
  for (const auto& [name, s] : subs) {
    if (s->parsed()) command = name;
  }

  try {
    json user = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) config_error("cannot open config " + config_path);
      try {
        user = json::parse(f);
      } catch (const json::exception& e) {
        config_error(std::string("config is not valid JSON: ") + e.what());
      }
    }
    for (const auto& s : sets) apply_set(user, s);
    const json schema = defaults();
    check_keys(user, schema, "");
    json doc = schema;
    for (const char* whole : {"env", "step"}) {
      if (user.contains(whole)) {
        doc[whole] = user[whole];
        user.erase(whole);
      }
    }
    doc.merge_patch(user);
    // merge_patch drops keys set to null; restore them so lookups succeed.
    for (const auto& ptr : {"/spine/lambda", "/spine/rho", "/estimate/lambda", "/estimate/rho",
                            "/estimate/n_by_scheme/naive", "/estimate/n_by_scheme/spine",
                            "/estimate/n_by_scheme/class1", "/estimate/n_by_scheme/class3"}) {
      const json::json_pointer p(ptr);
      if (!doc.contains(p)) doc[p] = nullptr;
    }
    if (seed) doc["seed"] = *seed;
    if (workers) doc["workers"] = *workers;

    Config cfg;
    cfg.doc = doc;
    cfg.seed = static_cast<std::uint64_t>(cfg.integer("/seed", 0, INT64_MAX));
    cfg.workers = static_cast<int>(cfg.integer("/workers", 0, 4096));
    cfg.out = out_dir;
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) config_error("cannot create output directory " + out_dir);

    Context ctx{cfg, std::make_shared<const EnvModel>(build_env(doc.at("env"))),
                build_step(doc.at("step")), out, {}, json::object()};

    int code = kOk;
    if (command == "classify") code = cmd_classify(ctx);
    else if (command == "oracle") code = cmd_oracle(ctx);
    else if (command == "simulate") code = cmd_simulate(ctx);
    else if (command == "spine") code = cmd_spine(ctx);
    else if (command == "estimate") code = cmd_estimate(ctx);
    else if (command == "fit") code = cmd_fit(ctx);
    else if (command == "report") code = cmd_report(ctx);
    else if (command == "selftest") code = cmd_selftest(ctx);

    json manifest = {{"command", command},
                     {"seed", cfg.seed},
                     {"workers", cfg.workers},
                     {"config", doc},
                     {"artifacts", ctx.artifacts},
                     {"versions",
                      {{"brwre", kVersion},
                       {"compiler", __VERSION__},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(doc.dump())));
    manifest["config_hash"] = hash;
    if (!ctx.manifest_extra.contains("classification")) {
      try {
        manifest["classification"] = report_json(classify(*ctx.model, ctx.step));
      } catch (const Error&) {
        manifest["classification"] = nullptr;
      }
    }
    manifest.update(ctx.manifest_extra);
    std::ofstream(cfg.out / "manifest.json") << manifest.dump(2) << '\n';
    return code;
  } catch (const Error& e) {
    report_failure(err, to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    report_failure(err, "ConfigError", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    report_failure(err, "Failure", e.what());
    return kFailure;
  }
}

}  // namespace brwre::cli
