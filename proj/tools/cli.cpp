#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "slabsep/analysis.hpp"
#include "slabsep/lpp.hpp"
#include "slabsep/model.hpp"
#include "slabsep/oracle.hpp"
#include "slabsep/parallel.hpp"
#include "slabsep/rng.hpp"
#include "slabsep/tasep.hpp"

#ifndef SLABSEP_GIT_VERSION
#define SLABSEP_GIT_VERSION "unknown"
#endif

namespace slabsep::cli {

using nlohmann::json;
namespace fs = std::filesystem;

Format format_from_string(const std::string& name) {
  if (name == "csv") return Format::Csv;
  if (name == "jsonl") return Format::Jsonl;
  if (name == "json") return Format::Json;
  throw ValidationError("unknown format '" + name + "' (expected csv, jsonl or json)");
}

std::string to_string(Format f) {
  switch (f) {
    case Format::Csv: return "csv";
    case Format::Jsonl: return "jsonl";
    case Format::Json: return "json";
  }
  return "csv";
}

std::string extension(Format f) { return to_string(f); }

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return v.dump();
}

}  // namespace

std::string emit_report(const Report& report, Format format) {
  if (report.records.empty()) throw ValidationError("cannot emit a report without records");
  std::ostringstream os;
  switch (format) {
    case Format::Json: {
      json doc = {{"schema_version", kSchemaVersion}, {"meta", report.meta}, {"records", report.records}};
      os << doc.dump(2) << '\n';
      break;
    }
    case Format::Jsonl: {
      os << json{{"schema_version", kSchemaVersion}, {"meta", report.meta}}.dump() << '\n';
      for (const auto& r : report.records) os << r.dump() << '\n';
      break;
    }
    case Format::Csv: {
      if (report.columns.empty()) throw ValidationError("csv output needs a column list");
      os << "# " << report.meta.dump() << '\n';
      for (std::size_t i = 0; i < report.columns.size(); ++i) os << (i ? "," : "") << report.columns[i];
      os << '\n';
      for (const auto& r : report.records) {
        for (std::size_t i = 0; i < report.columns.size(); ++i) {
          const auto it = r.find(report.columns[i]);
          os << (i ? "," : "") << (it == r.end() ? std::string() : csv_cell(*it));
        }
        os << '\n';
      }
      break;
    }
  }
  return os.str();
}

Report parse_jsonl(const std::string& text) {
  Report report;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto v = json::parse(line);
    if (first) {
      first = false;
      if (v.contains("schema_version") && v.contains("meta")) {
        report.meta = v["meta"];
        continue;
      }
    }
    report.records.push_back(std::move(v));
  }
  return report;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string version_string() { return SLABSEP_GIT_VERSION; }

const std::vector<std::string>& examples() {
  static const std::vector<std::string> list = {
      "slabsep derive --alpha 0.6 --beta 0.2",
      "slabsep simulate --alpha 0.6 --beta 0.2 --n 8 --t 5 --snapshots 5 --seed 1",
      "slabsep couple --alpha 0.6 --beta 0.2 --n 16 --replicas 10 --seed 1",
      "slabsep mix-estimate --alpha 0.6 --beta 0.2 --n 16 --replicas 50 --seed 1",
      "slabsep lpp field --alpha 0.5 --beta 0.5 --n 4 --to 6,4 --seed 1",
      "slabsep lpp geodesic --mode full-plane --to 10,10 --seed 1",
      "slabsep lpp semi-infinite --alpha 0.6 --beta 0.2 --n 6 --depth 10 --seed 1",
      "slabsep oracle stationary --alpha 0.3 --beta 0.3 --n 4",
      "slabsep oracle transient --alpha 0.3 --beta 0.3 --n 4 --t 2 --initial 0000",
      "slabsep oracle mixing --alpha 0.6 --beta 0.2 --n 4 --epsilon 0.25",
      "slabsep experiment scaling --n-list 8,16 --replicas 100 --lower-replicas 200 --grid 8 --seed 1",
      "slabsep experiment h-moments --n 200 --replicas 50 --band 32 --seed 1",
      "slabsep experiment hitting --n 40 --y 30 --x 120 --replicas 20 --seed 1",
      "slabsep experiment traversal --n-list 8,12 --replicas 50 --seed 1",
      "slabsep experiment certificate --n 8 --replicas 20 --seed 1",
      "slabsep experiment density --n 32 --burn-in 200 --duration 500 --seed 1",
      "slabsep experiment symmetry --n-list 4,6 --replicas 20 --seed 1",
  };
  return list;
}

namespace {

struct Schema {
  std::string command;
  std::vector<std::string> columns;
};

const std::vector<Schema>& schemas() {
  static const std::vector<Schema> list = {
      {"derive", {"alpha", "beta", "a", "b", "a_hat", "b_hat", "rho_alpha", "rho_beta", "sigma2", "x_star", "phase",
                  "c_high", "c_low"}},
      {"simulate", {"t", "site", "value"}},
      {"couple", {"replica", "tau", "timed_out"}},
      {"mix-estimate", {"N", "epsilon", "s", "ci_lo", "ci_hi", "ok", "replicas", "timeouts", "horizon"}},
      {"lpp field", {"x", "y", "value"}},
      {"lpp geodesic", {"idx", "x", "y"}},
      {"lpp semi-infinite", {"idx", "x", "y"}},
      {"oracle stationary", {"state", "probability"}},
      {"oracle transient", {"state", "probability"}},
      {"oracle mixing", {"t", "tv", "argmax"}},
      {"experiment scaling", {"N", "lower", "upper", "midpoint", "ci_lo", "ci_hi"}},
      {"experiment h-moments", {"replica", "value"}},
      {"experiment hitting", {"replica", "offset"}},
      {"experiment traversal", {"N", "m", "p", "ci_lo", "ci_hi", "successes", "trials"}},
      {"experiment certificate",
       {"N", "horizon", "replicas", "certificates", "coalesced", "violations", "late_coalescence"}},
      {"experiment density", {"site", "density"}},
      {"experiment symmetry",
       {"N", "max_reflection_gap", "hole_majority", "residual", "mc_estimate", "mc_ci_lo", "mc_ci_hi"}},
  };
  return list;
}

const std::vector<std::string>& columns_of(const std::string& command) {
  for (const auto& s : schemas()) {
    if (s.command == command) return s.columns;
  }
  throw std::logic_error("no schema for " + command);
}

const std::vector<std::string> kExperiments = {"scaling", "h-moments", "hitting", "traversal",
                                               "certificate", "density", "symmetry"};

}  // namespace

std::string schemas_text() {
  std::ostringstream os;
  os << "CSV schemas (schema_version " << kSchemaVersion << ")\n";
  os << "Every CSV starts with a '# ' line holding the metadata JSON, then the header below.\n\n";
  for (const auto& s : schemas()) {
    os << "  " << s.command << ": ";
    for (std::size_t i = 0; i < s.columns.size(); ++i) os << (i ? "," : "") << s.columns[i];
    os << '\n';
  }
  return os.str();
}

namespace {

/// Result of one subcommand before it is written out.
struct Output {
  std::string name;  // artifact base name
  Format default_format = Format::Csv;
  Report report;
  json summary;  // stored under meta.summary when non-null
  std::vector<json> replicas;
  int exit_code = kExitOk;
};

struct Context;

/// Partial results of an experiment; one JSONL line per finished unit.
class Progress {
 public:
  Progress() = default;
  Progress(fs::path path, const json& config, bool resume) : path_(std::move(path)) {
    const json header = {{"config", config}};
    if (resume && fs::exists(*path_)) {
      std::ifstream f(*path_);
      std::string line;
      if (!std::getline(f, line) || json::parse(line) != header) {
        throw ValidationError("--resume: " + path_->string() + " was written with a different config");
      }
      while (std::getline(f, line)) {
        if (line.empty()) continue;
        json unit;
        try {
          unit = json::parse(line);
        } catch (const json::parse_error&) {
          break;  // torn final line
        }
        done_[unit.at("unit").get<std::string>()] = unit.at("data");
      }
    } else {
      fs::create_directories(path_->parent_path());
      std::ofstream f(*path_, std::ios::trunc);
      f << header.dump() << '\n';
    }
  }

  std::optional<json> find(const std::string& unit) const {
    const auto it = done_.find(unit);
    if (it == done_.end()) return std::nullopt;
    return std::optional<json>(std::in_place, it->second);
  }

  void put(const std::string& unit, const json& data) {
    done_[unit] = data;
    if (!path_) return;
    std::ofstream f(*path_, std::ios::app);
    f << json{{"unit", unit}, {"data", data}}.dump() << '\n';
    f.flush();
  }

  std::size_t resumed() const { return done_.size(); }

  void finish() {
    if (path_) fs::remove(*path_);
  }

  template <class Fn>
  json unit(const std::string& key, Fn&& compute) {
    if (auto v = find(key)) return *v;
    json v = compute();
    put(key, v);
    return v;
  }

 private:
  std::optional<fs::path> path_;
  std::map<std::string, json> done_;
};

struct Context {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  std::uint64_t seed = 0;
  int threads = 0;
  std::optional<fs::path> output;
  bool resume = false;
  json config;
  std::string name;

  Progress progress() const {
    if (!output) {
      if (resume) throw ValidationError("--resume needs --output");
      return {};
    }
    return Progress(*output / (name + ".partial.jsonl"), config, resume);
  }
};

/// Option values live here, so subcommand actions can hold references.
class Store {
 public:
  template <class T>
  T& make(T init) {
    auto p = std::make_shared<T>(std::move(init));
    T& ref = *p;
    items_.push_back(std::move(p));
    return ref;
  }

 private:
  std::deque<std::shared_ptr<void>> items_;
};

struct Leaf {
  std::string path;  // e.g. "lpp field"
  bool stochastic = true;
  std::function<Output(Context&)> action;
};

class Builder {
 public:
  template <class T>
  T& option(CLI::App* app, const std::string& name, T init, const std::string& desc, bool required = false) {
    T& ref = store_.make<T>(std::move(init));
    auto* opt = app->add_option("--" + name, ref, desc);
    opt->capture_default_str();
    if (required) opt->required();
    getters_[app].push_back({name, [&ref] { return json(ref); }});
    return ref;
  }

  std::vector<std::int64_t>& point(CLI::App* app, const std::string& name, std::vector<std::int64_t> init,
                                   const std::string& desc, bool required = false) {
    auto& ref = store_.make(std::move(init));
    auto* opt = app->add_option("--" + name, ref, desc)->delimiter(',')->expected(2);
    opt->capture_default_str();
    if (required) opt->required();
    getters_[app].push_back({name, [&ref] { return json(ref); }});
    return ref;
  }

  std::vector<int>& list(CLI::App* app, const std::string& name, std::vector<int> init, const std::string& desc) {
    auto& ref = store_.make(std::move(init));
    app->add_option("--" + name, ref, desc)->delimiter(',')->capture_default_str();
    getters_[app].push_back({name, [&ref] { return json(ref); }});
    return ref;
  }

  bool& flag(CLI::App* app, const std::string& name, const std::string& desc) {
    bool& ref = store_.make(false);
    app->add_flag("--" + name, ref, desc);
    getters_[app].push_back({name, [&ref] { return json(ref); }});
    return ref;
  }

  void leaf(CLI::App* app, std::string path, bool stochastic, std::function<Output(Context&)> action) {
    leaves_[app] = Leaf{std::move(path), stochastic, std::move(action)};
  }

  const Leaf* find_leaf(const CLI::App* app) const {
    const auto it = leaves_.find(app);
    return it == leaves_.end() ? nullptr : &it->second;
  }

  void collect(const CLI::App* app, json& config) const {
    const auto it = getters_.find(app);
    if (it == getters_.end()) return;
    for (const auto& [name, get] : it->second) config[name] = get();
  }

 private:
  Store store_;
  std::map<const CLI::App*, std::vector<std::pair<std::string, std::function<json()>>>> getters_;
  std::map<const CLI::App*, Leaf> leaves_;
};

Point to_point(const std::vector<std::int64_t>& v) { return {v.at(0), v.at(1)}; }

Configuration parse_configuration(const std::string& text, int n) {
  if (text == "empty") return Configuration::all_empty(n);
  if (text == "full") return Configuration::all_full(n);
  auto c = Configuration::from_string(text);
  if (c.size() != n) throw ValidationError("initial configuration must have N = " + std::to_string(n) + " sites");
  return c;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json derived_json(const model::DerivedParams& d) {
  return {{"alpha", d.alpha},
          {"beta", d.beta},
          {"a", d.a},
          {"b", d.b},
          {"a_hat", d.a_hat},
          {"b_hat", d.b_hat},
          {"rho_alpha", d.rho_alpha},
          {"rho_beta", d.rho_beta},
          {"sigma2", optional_json(d.sigma2)},
          {"x_star", optional_json(d.x_star)},
          {"phase", std::string(model::to_string(d.phase))},
          {"c_high", optional_json(d.c_high)},
          {"c_low", optional_json(d.c_low)}};
}

json fit_json(const std::optional<analysis::LinearFit>& fit) {
  if (!fit) return nullptr;
  json j = {{"slope", fit->slope}, {"intercept", fit->intercept}, {"points", fit->points}};
  if (fit->slope_ci) j["slope_ci"] = {fit->slope_ci->lo, fit->slope_ci->hi};
  return j;
}

Output table(const std::string& name, const std::string& command, Format fmt, std::vector<json> records) {
  Output o;
  o.name = name;
  o.default_format = fmt;
  o.report.columns = columns_of(command);
  o.report.records = std::move(records);
  return o;
}

void require_positive(int v, const char* what) {
  if (v < 1) throw ValidationError(std::string(what) + " must be at least 1");
}

lpp::EnvironmentSpec environment_spec(const std::string& mode, int n, double alpha, double beta,
                                      std::uint64_t seed) {
  lpp::EnvironmentSpec spec{lpp::mode_from_string(mode), n, alpha, beta, seed};
  if (spec.mode != lpp::Mode::Slab) spec.n = 1;
  if (spec.mode == lpp::Mode::FullPlane) spec.alpha = spec.beta = 1;
  if (spec.mode == lpp::Mode::HalfQuadrant) spec.beta = 1;
  spec.validate();
  return spec;
}

void add_rates(Builder& b, CLI::App* app, double*& alpha, double*& beta, double a0, double b0, bool required) {
  alpha = &b.option(app, "alpha", a0, "entry rate in (0, 1]", required);
  beta = &b.option(app, "beta", b0, "exit rate in (0, 1]", required);
}

std::string footer() {
  std::ostringstream os;
  os << "\nExperiments (slabsep experiment <name>):\n ";
  for (const auto& e : kExperiments) os << ' ' << e;
  os << "\n\nCSV headers: slabsep --help schemas\n";
  os << "Seeds: --seed S is the master seed; replica r uses a hash of (S, r). Without --seed a random\n"
        "seed is drawn and printed on stderr.\n";
  os << "Threads: --threads k, else SLABSEP_THREADS, else all cores.\n";
  os << "\nExamples:\n";
  for (const auto& e : examples()) os << "  " << e << '\n';
  return os.str();
}

void define_commands(CLI::App& app, Builder& b) {
  // derive
  {
    auto* sub = app.add_subcommand("derive", "Derived constants and phase of (alpha, beta)");
    double *alpha, *beta;
    add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
    b.leaf(sub, "derive", false, [=](Context&) {
      const auto d = model::derive({*alpha, *beta});
      return table("derive", "derive", Format::Json, {derived_json(d)});
    });
  }
  // simulate
  {
    auto* sub = app.add_subcommand("simulate", "Exact continuous-time simulation; snapshots as t,site,value");
    double *alpha, *beta;
    add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
    auto& n = b.option(sub, "n", 0, "number of sites N", true);
    auto& t = b.option(sub, "t", 0.0, "time horizon", true);
    auto& initial = b.option<std::string>(sub, "initial", "empty", "start: empty, full or a 0/1 string");
    auto& snapshots = b.option(sub, "snapshots", 1, "snapshot count after t = 0, evenly spaced up to t");
    b.leaf(sub, "simulate", true, [=, &n, &t, &initial, &snapshots](Context& ctx) {
      require_positive(n, "N");
      require_positive(snapshots, "snapshots");
      if (!(t >= 0)) throw ValidationError("t must be non-negative");
      tasep::SimulateOptions opt;
      for (int k = 0; k <= snapshots; ++k) opt.snapshot_times.push_back(t * k / snapshots);
      const auto res = tasep::simulate(parse_configuration(initial, n), {*alpha, *beta}, t, ctx.seed, opt);
      std::vector<json> rows;
      for (const auto& s : res.trajectory->snapshots) {
        for (int i = 0; i < n; ++i) rows.push_back({{"t", s.t}, {"site", i + 1}, {"value", s.state[i]}});
      }
      auto o = table("simulate", "simulate", Format::Csv, std::move(rows));
      o.summary = {{"final_state", res.final_state.to_string()}, {"particles", res.final_state.particles()}};
      return o;
    });
  }
  // couple
  {
    auto* sub = app.add_subcommand("couple", "Coalescence times of the coupled pair (all-full, all-empty)");
    double *alpha, *beta;
    add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
    auto& n = b.option(sub, "n", 0, "number of sites N", true);
    auto& replicas = b.option(sub, "replicas", 100, "coupled replicas");
    auto& horizon = b.option(sub, "horizon", 0.0, "timeout horizon; 0 uses the default");
    b.leaf(sub, "couple", true, [=, &n, &replicas, &horizon](Context& ctx) {
      require_positive(n, "N");
      require_positive(replicas, "replicas");
      const model::BoundaryParams p{*alpha, *beta};
      p.validate();
      const double h = horizon > 0 ? horizon : tasep::default_timeout(p, n);
      std::vector<tasep::CouplingResult> res(static_cast<std::size_t>(replicas));
      parallel_for(res.size(), ctx.threads, [&](std::size_t r) {
        res[r] = tasep::coupled_simulate(Configuration::all_full(n), Configuration::all_empty(n), p, h,
                                         derive_seed(ctx.seed, r));
      });
      std::vector<json> rows;
      std::size_t timeouts = 0;
      for (std::size_t r = 0; r < res.size(); ++r) {
        rows.push_back({{"replica", r}, {"tau", res[r].tau}, {"timed_out", res[r].timed_out}});
        timeouts += res[r].timed_out;
      }
      auto o = table("couple", "couple", Format::Jsonl, std::move(rows));
      o.summary = {{"horizon", h}, {"timeouts", timeouts}};
      return o;
    });
  }
  // mix-estimate
  {
    auto* sub = app.add_subcommand("mix-estimate", "Upper estimate of t_mix(epsilon) from coalescence quantiles");
    double *alpha, *beta;
    add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
    auto& n = b.option(sub, "n", 0, "number of sites N", true);
    auto& epsilon = b.option(sub, "epsilon", 0.25, "TV threshold");
    auto& replicas = b.option(sub, "replicas", 200, "coupled replicas");
    auto& horizon = b.option(sub, "horizon", 0.0, "timeout horizon; 0 uses the default");
    b.leaf(sub, "mix-estimate", true, [=, &n, &epsilon, &replicas, &horizon](Context& ctx) {
      require_positive(n, "N");
      require_positive(replicas, "replicas");
      if (!(epsilon > 0 && epsilon < 1)) throw ValidationError("epsilon must lie in (0, 1)");
      const auto est = tasep::mixing_upper_estimate({*alpha, *beta}, n, epsilon, static_cast<std::size_t>(replicas),
                                                    ctx.seed, horizon > 0 ? std::optional(horizon) : std::nullopt,
                                                    ctx.threads);
      auto o = table("mix-estimate", "mix-estimate", Format::Json,
                     {{{"N", n},
                       {"epsilon", epsilon},
                       {"s", est.s},
                       {"ci_lo", est.ci_lo},
                       {"ci_hi", est.ci_hi},
                       {"ok", est.ok},
                       {"replicas", est.replicas},
                       {"timeouts", est.timeouts},
                       {"horizon", est.horizon}}});
      for (std::size_t r = 0; r < est.taus.size(); ++r) {
        o.replicas.push_back({{"replica", r}, {"tau", est.taus[r]}, {"timed_out", bool(est.timed_out[r])}});
      }
      return o;
    });
  }
  // lpp
  {
    auto* lpp = app.add_subcommand("lpp", "Exponential last-passage percolation");
    lpp->require_subcommand(1);
    lpp->fallthrough();
    auto env_options = [&b](CLI::App* sub, double*& alpha, double*& beta, int*& n, std::string*& mode) {
      mode = &b.option<std::string>(sub, "mode", "slab", "slab, half-quadrant or full-plane");
      add_rates(b, sub, alpha, beta, 0.5, 0.5, false);
      n = &b.option(sub, "n", 4, "slab width N");
    };
    {
      auto* sub = lpp->add_subcommand("field", "Passage times T(from, v) over the box [from, to]");
      double *alpha, *beta;
      int* n;
      std::string* mode;
      env_options(sub, alpha, beta, n, mode);
      auto& from = b.point(sub, "from", {0, 0}, "start site x,y");
      auto& to = b.point(sub, "to", {0, 0}, "far corner x,y", true);
      b.leaf(sub, "lpp field", true, [=, &from, &to](Context& ctx) {
        const lpp::Environment env(environment_spec(*mode, *n, *alpha, *beta, ctx.seed));
        const Point u = to_point(from), v = to_point(to);
        if (!env.contains(u)) throw ValidationError("--from lies outside the environment");
        if (!precedes(u, v)) throw ValidationError("--to must dominate --from");
        const lpp::PassageField field(env, lpp::Window::box(u, v), {{u, 0.0}});
        std::vector<json> rows;
        for (auto x = u.x; x <= v.x; ++x) {
          for (auto y = u.y; y <= v.y; ++y) {
            const double val = field.value({x, y});
            if (val != lpp::kUnreachable) rows.push_back({{"x", x}, {"y", y}, {"value", val}});
          }
        }
        return table("lpp-field", "lpp field", Format::Csv, std::move(rows));
      });
    }
    {
      auto* sub = lpp->add_subcommand("geodesic", "Geodesic from --from to --to");
      double *alpha, *beta;
      int* n;
      std::string* mode;
      env_options(sub, alpha, beta, n, mode);
      auto& from = b.point(sub, "from", {0, 0}, "start site x,y");
      auto& to = b.point(sub, "to", {0, 0}, "end site x,y", true);
      b.leaf(sub, "lpp geodesic", true, [=, &from, &to](Context& ctx) {
        const lpp::Environment env(environment_spec(*mode, *n, *alpha, *beta, ctx.seed));
        const Point u = to_point(from), v = to_point(to);
        if (!env.contains(u) || !env.contains(v)) throw ValidationError("endpoints must lie in the environment");
        if (!precedes(u, v)) throw ValidationError("--to must dominate --from");
        const auto g = lpp::geodesic(env, u, v);
        std::vector<json> rows;
        for (std::size_t i = 0; i < g.path.size(); ++i) {
          rows.push_back({{"idx", i}, {"x", g.path[i].x}, {"y", g.path[i].y}});
        }
        auto o = table("lpp-geodesic", "lpp geodesic", Format::Csv, std::move(rows));
        o.summary = {{"value", g.value}, {"ties", g.ties}};
        return o;
      });
    }
    {
      auto* sub = lpp->add_subcommand("semi-infinite", "Prefix of the semi-infinite slab geodesic from --start");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.5, 0.5, false);
      auto& n = b.option(sub, "n", 4, "slab width N");
      auto& start = b.point(sub, "start", {0, 0}, "start site x,y");
      auto& depth = b.option(sub, "depth", 10, "prefix length in steps");
      auto& m0 = b.option<std::int64_t>(sub, "m0", 0, "first far line; 0 uses N^2");
      auto& doublings = b.option(sub, "max-doublings", 8, "doubling budget of the far line");
      b.leaf(sub, "lpp semi-infinite", true, [=, &n, &start, &depth, &m0, &doublings](Context& ctx) {
        const lpp::Environment env(lpp::EnvironmentSpec::slab(n, *alpha, *beta, ctx.seed));
        require_positive(depth, "depth");
        const auto res = lpp::semi_infinite_prefix(env, to_point(start), depth,
                                                   m0 > 0 ? std::optional(m0) : std::nullopt, doublings);
        std::vector<json> rows;
        for (std::size_t i = 0; i < res.prefix.size(); ++i) {
          rows.push_back({{"idx", i}, {"x", res.prefix[i].x}, {"y", res.prefix[i].y}});
        }
        auto o = table("lpp-semi-infinite", "lpp semi-infinite", Format::Csv, std::move(rows));
        o.summary = {{"stabilized", res.stabilized}, {"horizon", res.horizon}, {"doublings", res.doublings}};
        return o;
      });
    }
  }
  // oracle
  {
    auto* oracle = app.add_subcommand("oracle", "Exact computations on {0,1}^N for small N");
    oracle->require_subcommand(1);
    oracle->fallthrough();
    auto distribution_rows = [](const Eigen::VectorXd& p, int n) {
      std::vector<json> rows;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        rows.push_back({{"state", Configuration::from_index(static_cast<std::uint64_t>(i), n).to_string()},
                        {"probability", p(i)}});
      }
      return rows;
    };
    {
      auto* sub = oracle->add_subcommand("stationary", "Stationary law");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
      auto& n = b.option(sub, "n", 0, "number of sites N", true);
      b.leaf(sub, "oracle stationary", false, [=, &n](Context&) {
        const auto s = oracle::stationary_exact({*alpha, *beta}, n);
        auto o = table("oracle-stationary", "oracle stationary", Format::Csv, distribution_rows(s.pi, n));
        o.summary = {{"residual", s.residual}};
        return o;
      });
    }
    {
      auto* sub = oracle->add_subcommand("transient", "Law at time t from --initial");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
      auto& n = b.option(sub, "n", 0, "number of sites N", true);
      auto& t = b.option(sub, "t", 0.0, "time", true);
      auto& initial = b.option<std::string>(sub, "initial", "empty", "start: empty, full or a 0/1 string");
      b.leaf(sub, "oracle transient", false, [=, &n, &t, &initial](Context&) {
        require_positive(n, "N");
        if (!(t >= 0)) throw ValidationError("t must be non-negative");
        const auto tr = oracle::transient({*alpha, *beta}, n, parse_configuration(initial, n), t);
        auto o = table("oracle-transient", "oracle transient", Format::Csv, distribution_rows(tr.p, n));
        o.summary = {{"truncation", tr.truncation}, {"terms", tr.terms}};
        return o;
      });
    }
    {
      auto* sub = oracle->add_subcommand("mixing", "Exact worst-case mixing time");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.5, 0.5, true);
      auto& n = b.option(sub, "n", 0, "number of sites N", true);
      auto& epsilon = b.option(sub, "epsilon", 0.25, "TV threshold");
      auto& rel_tol = b.option(sub, "rel-tol", 1e-6, "relative tolerance of the search");
      b.leaf(sub, "oracle mixing", false, [=, &n, &epsilon, &rel_tol](Context&) {
        require_positive(n, "N");
        if (!(epsilon > 0 && epsilon < 1)) throw ValidationError("epsilon must lie in (0, 1)");
        const auto m = oracle::mixing_time_exact({*alpha, *beta}, n, epsilon, rel_tol);
        std::vector<json> rows;
        for (const auto& pt : m.curve) {
          rows.push_back({{"t", pt.t}, {"tv", pt.tv}, {"argmax", Configuration::from_index(pt.argmax, n).to_string()}});
        }
        auto o = table("oracle-mixing", "oracle mixing", Format::Csv, std::move(rows));
        o.summary = {{"t_mix", m.t_mix},
                     {"argmax_state", Configuration::from_index(m.argmax_state, n).to_string()},
                     {"bracket_hi", m.bracket_hi},
                     {"monotonicity_faults", m.monotonicity_faults}};
        return o;
      });
    }
  }
  // experiment
  {
    auto* exp = app.add_subcommand("experiment", "Reproducible experiments with pass/fail thresholds");
    exp->require_subcommand(1);
    exp->fallthrough();
    {
      auto* sub = exp->add_subcommand("scaling", "Mixing-time bracket per N and log-log fits");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.6, 0.2, false);
      auto& n_list = b.list(sub, "n-list", {64, 128, 256}, "slab widths");
      auto& epsilon = b.option(sub, "epsilon", 0.25, "TV threshold");
      auto& replicas = b.option(sub, "replicas", 200, "coupling replicas per N");
      auto& lower_replicas = b.option(sub, "lower-replicas", 400, "samples per start for the TV lower bound");
      auto& grid = b.option(sub, "grid", 48, "candidate times for the lower endpoint");
      auto& reference = b.option(sub, "reference-factor", 3.0, "reference time over the upper estimate");
      b.leaf(sub, "experiment scaling", true,
             [=, &n_list, &epsilon, &replicas, &lower_replicas, &grid, &reference](Context& ctx) {
               if (n_list.empty()) throw ValidationError("--n-list is empty");
               const model::BoundaryParams p{*alpha, *beta};
               const auto d = model::derive(p);
               analysis::ScalingOptions opt;
               opt.replicas = static_cast<std::size_t>(replicas);
               opt.lower_replicas = static_cast<std::size_t>(lower_replicas);
               opt.grid = grid;
               opt.reference_factor = reference;
               opt.threads = ctx.threads;
               auto progress = ctx.progress();
               std::vector<json> rows, reps, warnings;
               std::vector<double> ns, mids, ups;
               bool upper_ok = true;
               for (int n : n_list) {
                 require_positive(n, "N");
                 const json unit = progress.unit("N=" + std::to_string(n), [&] {
                   const auto res = analysis::mixing_scaling(p, {n}, epsilon, ctx.seed, opt);
                   const auto& r = res.rows.at(0);
                   return json{{"row",
                                {{"N", r.n},
                                 {"lower", r.lower},
                                 {"upper", r.upper},
                                 {"midpoint", r.midpoint},
                                 {"ci_lo", r.ci_lo},
                                 {"ci_hi", r.ci_hi},
                                 {"upper_ok", r.upper_ok}}},
                               {"taus", r.taus},
                               {"warnings", res.warnings}};
                 });
                 json row = unit.at("row");
                 upper_ok &= row.at("upper_ok").get<bool>();
                 ns.push_back(n);
                 mids.push_back(row.at("midpoint").get<double>());
                 ups.push_back(row.at("upper").get<double>());
                 const auto& taus = unit.at("taus");
                 for (std::size_t r = 0; r < taus.size(); ++r) reps.push_back({{"N", n}, {"replica", r}, {"tau", taus[r]}});
                 for (const auto& w : unit.at("warnings")) warnings.push_back(w);
                 row.erase("upper_ok");
                 rows.push_back(std::move(row));
               }
               std::optional<analysis::LinearFit> mid_fit, up_fit;
               if (ns.size() >= 2) {
                 mid_fit = analysis::fit_loglog(ns, mids);
                 up_fit = analysis::fit_loglog(ns, ups);
                 if (ns.size() == 2) warnings.push_back("two-point fit: slope reported without a CI");
               }
               json checks = {{"upper_ok", upper_ok}};
               bool pass = upper_ok;
               const std::optional<double> c = d.c_high ? d.c_high : d.c_low;
               if (c) {
                 // Bracket at the largest N, and midpoints approaching c N.
                 const auto& last = rows.back();
                 const double n = last.at("N").get<double>();
                 const bool contains = last.at("lower").get<double>() / n <= 1.25 * *c &&
                                       last.at("upper").get<double>() / n >= 0.75 * *c;
                 bool monotone = true;
                 for (std::size_t i = 1; i < ns.size(); ++i) {
                   monotone &= std::abs(mids[i] / ns[i] - *c) <= std::abs(mids[i - 1] / ns[i - 1] - *c);
                 }
                 checks["constant"] = *c;
                 checks["contains"] = contains;
                 checks["monotone"] = monotone;
                 pass = pass && contains && monotone;
               } else if (d.phase == model::Phase::CoexistenceLine && mid_fit) {
                 const bool in_range = up_fit->slope >= 1.75 && up_fit->slope <= 2.25;
                 checks["exponent_in_range"] = in_range;
                 pass = pass && in_range;
               }
               checks["pass"] = pass;
               progress.finish();
               auto o = table("scaling", "experiment scaling", Format::Csv, std::move(rows));
               o.summary = {{"derived", derived_json(d)},
                            {"midpoint_fit", fit_json(mid_fit)},
                            {"upper_fit", fit_json(up_fit)},
                            {"warnings", warnings},
                            {"checks", checks}};
               o.replicas = std::move(reps);
               o.exit_code = pass ? kExitOk : kExitThreshold;
               return o;
             });
    }
    {
      auto* sub = exp->add_subcommand("h-moments", "Mean and variance of half-quadrant passage times");
      auto& alpha = b.option(sub, "alpha", 0.25, "diagonal rate in (0, 1/2)");
      auto& n = b.option<std::int64_t>(sub, "n", 4000, "endpoint p_n");
      auto& replicas = b.option(sub, "replicas", 400, "environments");
      auto& band = b.option<std::int64_t>(sub, "band", 256, "band width of the recursion");
      b.leaf(sub, "experiment h-moments", true, [&alpha, &n, &replicas, &band](Context& ctx) {
        if (!(alpha > 0 && alpha < 0.5)) throw ValidationError("alpha must lie in (0, 1/2)");
        require_positive(replicas, "replicas");
        auto progress = ctx.progress();
        const json unit = progress.unit("all", [&] {
          const auto r = analysis::h_moment_check(alpha, n, static_cast<std::size_t>(replicas), ctx.seed, band,
                                                  ctx.threads);
          return json{{"mean", r.mean},
                      {"variance", r.variance},
                      {"target_mean", r.target_mean},
                      {"target_sigma2", r.target_sigma2},
                      {"centred_mean", r.centred_mean},
                      {"mean_z", r.mean_z},
                      {"variance_ratio", r.variance_ratio},
                      {"values", r.values}};
        });
        std::vector<json> rows;
        const auto& values = unit.at("values");
        for (std::size_t r = 0; r < values.size(); ++r) rows.push_back({{"replica", r}, {"value", values[r]}});
        json summary = unit;
        summary.erase("values");
        const double z = unit.at("mean_z").get<double>(), ratio = unit.at("variance_ratio").get<double>();
        const bool pass = std::abs(z) <= 4 && ratio >= 0.7 && ratio <= 1.3;
        summary["checks"] = {{"mean_z_within_4", std::abs(z) <= 4},
                             {"variance_ratio_within_30pct", ratio >= 0.7 && ratio <= 1.3},
                             {"pass", pass}};
        progress.finish();
        auto o = table("h-moments", "experiment h-moments", Format::Csv, std::move(rows));
        o.summary = std::move(summary);
        o.exit_code = pass ? kExitOk : kExitThreshold;
        return o;
      });
    }
    {
      auto* sub = exp->add_subcommand("hitting", "First lower-boundary hit of slab geodesics");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.6, 0.2, false);
      auto& n = b.option(sub, "n", 200, "slab width N");
      auto& y = b.option<std::int64_t>(sub, "y", 150, "start (N - y, 0)");
      auto& x = b.option<std::int64_t>(sub, "x", 600, "target q_{x + N/2}");
      auto& replicas = b.option(sub, "replicas", 200, "environments");
      b.leaf(sub, "experiment hitting", true, [=, &n, &y, &x, &replicas](Context& ctx) {
        require_positive(n, "N");
        require_positive(replicas, "replicas");
        auto progress = ctx.progress();
        const json unit = progress.unit("all", [&] {
          const auto r = analysis::hitting_stats({*alpha, *beta}, n, y, x, static_cast<std::size_t>(replicas),
                                                 ctx.seed, ctx.threads);
          const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
          return json{{"center", r.center},     {"median", num(r.median)}, {"q10", num(r.q10)},
                      {"q90", num(r.q90)},      {"replicas", r.replicas}, {"misses", r.misses},
                      {"hits", r.hits}};
        });
        std::vector<json> rows;
        const auto& hits = unit.at("hits");
        for (std::size_t r = 0; r < hits.size(); ++r) rows.push_back({{"replica", r}, {"offset", hits[r]}});
        if (rows.empty()) rows.push_back({{"replica", nullptr}, {"offset", nullptr}});
        json summary = unit;
        summary.erase("hits");
        const double tol = std::pow(static_cast<double>(n), 0.85);
        const bool pass = !unit.at("median").is_null() &&
                          std::abs(unit.at("median").get<double>() - unit.at("center").get<double>()) <= tol;
        summary["checks"] = {{"tolerance", tol}, {"pass", pass}};
        progress.finish();
        auto o = table("hitting", "experiment hitting", Format::Csv, std::move(rows));
        o.summary = std::move(summary);
        o.exit_code = pass ? kExitOk : kExitThreshold;
        return o;
      });
    }
    {
      auto* sub = exp->add_subcommand("traversal", "Probability that the geodesic crosses the slab");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.3, 0.3, false);
      auto& n_list = b.list(sub, "n-list", {12, 16, 24}, "slab widths");
      auto& m = b.option<std::int64_t>(sub, "m", 0, "endpoint p_m; 0 uses N^2");
      auto& replicas = b.option(sub, "replicas", 500, "environments per N");
      auto& threshold = b.option(sub, "threshold", 0.03, "minimal probability");
      b.leaf(sub, "experiment traversal", true, [=, &n_list, &m, &replicas, &threshold](Context& ctx) {
        if (n_list.empty()) throw ValidationError("--n-list is empty");
        require_positive(replicas, "replicas");
        auto progress = ctx.progress();
        std::vector<json> rows;
        bool pass = true;
        for (int n : n_list) {
          require_positive(n, "N");
          const std::int64_t mm = m > 0 ? m : std::int64_t{n} * n;
          json row = progress.unit("N=" + std::to_string(n), [&] {
            const auto e = analysis::traversal_prob({*alpha, *beta}, n, mm, static_cast<std::size_t>(replicas),
                                                    derive_seed(ctx.seed, static_cast<std::uint64_t>(n)), ctx.threads);
            return json{{"N", n},          {"m", mm},
                        {"p", e.p},        {"ci_lo", e.ci.lo},
                        {"ci_hi", e.ci.hi}, {"successes", e.successes},
                        {"trials", e.trials}};
          });
          pass &= row.at("p").get<double>() >= threshold;
          rows.push_back(std::move(row));
        }
        progress.finish();
        auto o = table("traversal", "experiment traversal", Format::Csv, std::move(rows));
        o.summary = {{"checks", {{"threshold", threshold}, {"pass", pass}}}};
        o.exit_code = pass ? kExitOk : kExitThreshold;
        return o;
      });
    }
    {
      auto* sub = exp->add_subcommand("certificate", "Soundness of the coalescence certificate scan");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.3, 0.3, false);
      auto& n = b.option(sub, "n", 12, "number of sites N");
      auto& t = b.option(sub, "t", 0.0, "horizon T; 0 uses 4 N^2 / rho_alpha");
      auto& replicas = b.option(sub, "replicas", 200, "coupled runs");
      b.leaf(sub, "experiment certificate", true, [=, &n, &t, &replicas](Context& ctx) {
        require_positive(n, "N");
        require_positive(replicas, "replicas");
        const auto d = model::derive({*alpha, *beta});
        const double cap = t > 0 ? t : 4.0 * n * n / d.rho_alpha;
        auto progress = ctx.progress();
        json row = progress.unit("all", [&] {
          const auto r = analysis::validate_certificates({*alpha, *beta}, n, cap, static_cast<std::size_t>(replicas),
                                                         ctx.seed, ctx.threads);
          return json{{"N", n},
                      {"horizon", r.horizon},
                      {"replicas", r.replicas},
                      {"certificates", r.certificates},
                      {"coalesced", r.coalesced},
                      {"violations", r.violations},
                      {"late_coalescence", r.late_coalescence}};
        });
        const bool pass = row.at("violations").get<std::size_t>() == 0;
        progress.finish();
        auto o = table("certificate", "experiment certificate", Format::Csv, {row});
        o.summary = {{"checks", {{"no_violations", pass}, {"pass", pass}}}};
        o.exit_code = pass ? kExitOk : kExitThreshold;
        return o;
      });
    }
    {
      auto* sub = exp->add_subcommand("density", "Time-averaged density profile");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.6, 0.2, false);
      auto& n = b.option(sub, "n", 256, "number of sites N");
      auto& burn_in = b.option(sub, "burn-in", 5000.0, "discarded initial time");
      auto& duration = b.option(sub, "duration", 20000.0, "averaging time");
      auto& tolerance = b.option(sub, "tolerance", 0.03, "allowed deviation from 1 - beta");
      b.leaf(sub, "experiment density", true, [=, &n, &burn_in, &duration, &tolerance](Context& ctx) {
        require_positive(n, "N");
        if (!(burn_in >= 0 && duration > 0)) throw ValidationError("burn-in must be >= 0 and duration > 0");
        const auto d = model::derive({*alpha, *beta});
        auto progress = ctx.progress();
        const json unit = progress.unit("all", [&] {
          const auto r = analysis::density_profile({*alpha, *beta}, n, burn_in, duration, ctx.seed);
          return json{{"mean_density", r.mean_density}, {"target", r.target}, {"profile", r.profile}};
        });
        std::vector<json> rows;
        const auto& profile = unit.at("profile");
        for (std::size_t i = 0; i < profile.size(); ++i) rows.push_back({{"site", i + 1}, {"density", profile[i]}});
        const double dev = std::abs(unit.at("mean_density").get<double>() - unit.at("target").get<double>());
        // The bulk density 1 - beta is predicted in the high density phase only.
        const bool applies = d.phase == model::Phase::HighDensity;
        const bool pass = !applies || dev <= tolerance;
        json summary = unit;
        summary.erase("profile");
        summary["phase"] = std::string(model::to_string(d.phase));
        summary["checks"] = {{"applies", applies}, {"deviation", dev}, {"pass", pass}};
        progress.finish();
        auto o = table("density", "experiment density", Format::Csv, std::move(rows));
        o.summary = std::move(summary);
        o.exit_code = pass ? kExitOk : kExitThreshold;
        return o;
      });
    }
    {
      auto* sub = exp->add_subcommand("symmetry", "Particle-hole symmetry of the stationary law");
      double *alpha, *beta;
      add_rates(b, sub, alpha, beta, 0.3, 0.3, false);
      auto& n_list = b.list(sub, "n-list", {4, 6}, "system sizes (exact, N <= 12)");
      auto& replicas = b.option(sub, "replicas", 0, "Monte Carlo replicas of the hole-majority probability; 0 skips");
      auto& burn_in = b.option(sub, "burn-in", 50.0, "Monte Carlo burn-in time");
      b.leaf(sub, "experiment symmetry", true, [=, &n_list, &replicas, &burn_in](Context& ctx) {
        if (n_list.empty()) throw ValidationError("--n-list is empty");
        auto progress = ctx.progress();
        std::vector<json> rows;
        const bool symmetric = *alpha == *beta;
        bool pass = true;
        for (int n : n_list) {
          require_positive(n, "N");
          json row = progress.unit("N=" + std::to_string(n), [&] {
            const auto r = analysis::hole_symmetry_exact({*alpha, *beta}, n);
            json j = {{"N", n},
                      {"max_reflection_gap", r.max_reflection_gap},
                      {"hole_majority", r.hole_majority},
                      {"residual", r.residual},
                      {"mc_estimate", nullptr},
                      {"mc_ci_lo", nullptr},
                      {"mc_ci_hi", nullptr}};
            if (replicas > 0) {
              const auto mc = analysis::hole_majority_mc({*alpha, *beta}, n, static_cast<std::size_t>(replicas),
                                                         burn_in, derive_seed(ctx.seed, static_cast<std::uint64_t>(n)),
                                                         ctx.threads);
              j["mc_estimate"] = mc.p;
              j["mc_ci_lo"] = mc.ci.lo;
              j["mc_ci_hi"] = mc.ci.hi;
            }
            return j;
          });
          if (symmetric) {
            pass &= row.at("max_reflection_gap").get<double>() <= 1e-10 &&
                    row.at("hole_majority").get<double>() <= 0.5;
          }
          rows.push_back(std::move(row));
        }
        progress.finish();
        auto o = table("symmetry", "experiment symmetry", Format::Csv, std::move(rows));
        o.summary = {{"checks", {{"applies", symmetric}, {"pass", pass}}}};
        o.exit_code = pass ? kExitOk : kExitThreshold;
        return o;
      });
    }
  }
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  for (const auto& a : args) {
    if (a == "--") break;
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

/// Reads a config file: a flat JSON object, or any artifact written by this tool.
json load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    std::string first = text.substr(0, text.find('\n'));
    if (first.rfind("# ", 0) == 0) first = first.substr(2);
    try {
      doc = json::parse(first);
    } catch (const json::parse_error& e) {
      throw ValidationError("config file " + path.string() + " is not JSON: " + e.what());
    }
  }
  if (doc.contains("meta")) doc = doc["meta"];
  if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  if (!doc.is_object()) throw ValidationError("config file must hold a JSON object");
  return doc;
}

std::string config_token(const std::string& key, const json& v) {
  std::string value;
  if (v.is_string()) {
    value = v.get<std::string>();
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      value += (i ? "," : "") + (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
    }
  } else {
    value = v.dump();
  }
  return "--" + key + "=" + value;
}

/// Splices a config file into argv. Flags already on the command line win.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file");
      file = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!file) return args;
  const json cfg = load_config(*file);
  std::vector<std::string> extra;
  for (const auto& [key, v] : cfg.items()) {
    if (key == "command" || v.is_null()) continue;
    if (given_on_command_line(args, key)) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) extra.push_back("--" + key);
      continue;
    }
    extra.push_back(config_token(key, v));
  }
  if ((args.empty() || args.front().rfind("-", 0) == 0) && cfg.contains("command")) {
    std::vector<std::string> cmd = cfg["command"].get<std::vector<std::string>>();
    args.insert(args.begin(), cmd.begin(), cmd.end());
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  for (std::size_t i = 0; i + 1 < raw_args.size(); ++i) {
    if ((raw_args[i] == "--help" || raw_args[i] == "-h") && raw_args[i + 1] == "schemas") {
      out << schemas_text();
      return kExitOk;
    }
  }

  CLI::App app{"Open-boundary TASEP mixing times and exponential last-passage percolation on slabs", "slabsep"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", version_string());
  app.footer(footer());

  auto& seed_opt = *app.add_option("--seed", "master seed (unsigned 64-bit); random when omitted");
  std::uint64_t seed = 0;
  seed_opt.each([&seed](const std::string& s) { seed = std::stoull(s); });
  int threads = 0;
  auto* threads_opt = app.add_option("--threads", threads, "worker threads; default SLABSEP_THREADS, else all cores");
  std::string format;
  app.add_option("--format", format, "csv, jsonl or json; default depends on the command")
      ->check(CLI::IsMember({"csv", "jsonl", "json"}));
  std::string output;
  app.add_option("--output", output, "directory for artifacts; stdout when omitted");
  bool resume = false;
  app.add_flag("--resume", resume, "continue an interrupted experiment from its partial JSONL");
  bool wall_clock = false;
  app.add_flag("--wall-clock", wall_clock, "record elapsed wall-clock seconds in the metadata");
  app.add_option("--config", "JSON config file or an artifact to replay; flags override it");

  Builder builder;
  define_commands(app, builder);

  std::vector<std::string> args;
  try {
    args = apply_config(raw_args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    out << version_string() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::vector<const CLI::App*> chain;
  const CLI::App* cur = &app;
  while (true) {
    const auto subs = cur->get_subcommands();
    if (subs.empty()) break;
    cur = subs.front();
    chain.push_back(cur);
  }
  const Leaf* leaf = builder.find_leaf(cur);
  if (!leaf) {
    err << "error: incomplete command\n\n" << app.help();
    return kExitUsage;
  }

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.resume = resume;
  if (!output.empty()) ctx.output = fs::path(output);
  if (threads_opt->count() > 0) {
    ctx.threads = threads;
  } else if (const char* env = std::getenv("SLABSEP_THREADS")) {
    try {
      ctx.threads = std::stoi(env);
    } catch (const std::exception&) {
      err << "error: SLABSEP_THREADS must be an integer\n";
      return kExitUsage;
    }
  }

  json config = json::object();
  json command = json::array();
  for (const auto* a : chain) command.push_back(a->get_name());
  config["command"] = command;
  for (const auto* a : chain) builder.collect(a, config);
  if (leaf->stochastic) {
    if (seed_opt.count() == 0) {
      seed = random_seed();
      err << "seed: " << seed << '\n';
    }
    config["seed"] = seed;
  }
  if (!format.empty()) config["format"] = format;
  ctx.seed = seed;
  ctx.config = config;
  const auto first_name = leaf->path.rfind(' ');
  ctx.name = leaf->path.rfind("experiment ", 0) == 0 ? leaf->path.substr(first_name + 1) : leaf->path;
  std::replace(ctx.name.begin(), ctx.name.end(), ' ', '-');

  try {
    const auto start = std::chrono::steady_clock::now();
    Output o = leaf->action(ctx);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json meta = {{"schema_version", kSchemaVersion},
                 {"version", version_string()},
                 {"command", leaf->path},
                 {"config", config}};
    if (leaf->stochastic) meta["seed"] = seed;
    if (!o.summary.is_null()) meta["summary"] = o.summary;
    if (wall_clock) meta["wall_clock_s"] = elapsed;
    o.report.meta = meta;
    const Format fmt = format.empty() ? o.default_format : format_from_string(format);
    const std::string body = emit_report(o.report, fmt);
    if (ctx.output) {
      write_atomic(*ctx.output / (o.name + "." + extension(fmt)), body);
      if (!o.replicas.empty()) {
        Report reps;
        reps.meta = meta;
        reps.records = o.replicas;
        write_atomic(*ctx.output / (o.name + ".replicas.jsonl"), emit_report(reps, Format::Jsonl));
      }
      if (leaf->path.rfind("experiment ", 0) == 0) {
        write_atomic(*ctx.output / (o.name + ".summary.json"), meta.dump(2) + "\n");
      }
    } else {
      out << body;
    }
    if (o.exit_code == kExitThreshold) err << "acceptance threshold not met; see meta.summary.checks\n";
    return o.exit_code;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace slabsep::cli
