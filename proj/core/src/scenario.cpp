#include "ordflow/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "ordflow/burgers.hpp"
#include "ordflow/continuity.hpp"
#include "ordflow/csv.hpp"
#include "ordflow/error.hpp"
#include "ordflow/flow.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/nonlinear.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/random.hpp"
#include "ordflow/regularize.hpp"
#include "ordflow/stochastic.hpp"
#include "ordflow/transport.hpp"

#ifndef ORDFLOW_VERSION
#define ORDFLOW_VERSION "0.0.0"
#endif

namespace ordflow {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config schema

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; });
    if (!known) fail(where, "unknown key '" + item.key() + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

std::vector<double> number_list(const json& j, const std::string& where) {
  if (j.is_number()) return {number(j, where)};
  if (!j.is_array()) fail(where, "expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::size_t count_value(const json& j, const std::string& where, std::size_t min) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) fail(where, "expected an integer");
  const auto v = j.get<long long>();
  if (v < static_cast<long long>(min)) fail(where, "must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

FieldParams param_map(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  FieldParams out;
  for (const auto& item : j.items()) out[item.key()] = number_list(item.value(), where + "." + item.key());
  return out;
}

GridSpec parse_grid(const json& j, const std::string& where, bool counts_required) {
  only_keys(j, where, {"lower", "upper", "counts"});
  if (!j.contains("lower") || !j.contains("upper")) fail(where, "needs 'lower' and 'upper'");
  GridSpec g;
  g.lower = number_list(j["lower"], where + ".lower");
  g.upper = number_list(j["upper"], where + ".upper");
  if (g.lower.empty() || g.lower.size() != g.upper.size()) fail(where, "lower and upper need the same nonzero length");
  for (std::size_t a = 0; a < g.lower.size(); ++a)
    if (!(g.upper[a] > g.lower[a])) fail(where, "upper must exceed lower on every axis");
  if (j.contains("counts")) {
    const auto& c = j["counts"];
    if (!c.is_array()) fail(where + ".counts", "expected an array of integers");
    for (std::size_t i = 0; i < c.size(); ++i)
      g.counts.push_back(count_value(c[i], where + ".counts[" + std::to_string(i) + "]", 2));
    if (g.counts.size() != g.lower.size()) fail(where + ".counts", "needs one count per axis");
  } else if (counts_required) {
    fail(where, "needs 'counts'");
  }
  return g;
}

bool in_catalog(const std::string& id, const std::string& kind) {
  const auto all = catalog();
  return std::any_of(all.begin(), all.end(), [&](const CatalogEntry& e) { return e.id == id && e.kind == kind; });
}

struct KindRules {
  const char* kind;
  bool needs_field;
  bool needs_nonlinearity;
  bool needs_grid;
  std::vector<const char*> options;
};

const std::vector<KindRules>& kind_rules() {
  static const std::vector<KindRules> rules = {
      {"flow", true, false, true, {"masks", "set_lower", "set_upper", "eps0", "eps_floor"}},
      {"transport", true, false, true, {"step", "ramp"}},
      {"continuity", true, false, true, {"source_lower", "source_upper", "source_density", "test_lower", "test_upper"}},
      {"sde", true, false, true, {"sigma", "starts_low", "starts_high"}},
      {"nonlinear", false, true, true, {"step", "max_iter"}},
      {"burgers-selection", false, false, true, {"speeds", "cells_per_eps", "speed_tolerance", "output_slices", "skip"}},
      {"diagnostics", false, false, false, {"functions", "eps"}},
  };
  return rules;
}

const KindRules& rules_for(const std::string& kind) {
  for (const auto& r : kind_rules())
    if (kind == r.kind) return r;
  fail("kind", "unknown scenario kind '" + kind + "'");
}

void require_length(const ScenarioConfig& c, const char* key, std::size_t n) {
  const auto it = c.options.find(key);
  if (it != c.options.end() && it->second.size() != n)
    fail(std::string("options.") + key, "needs " + std::to_string(n) + " value(s)");
}

void validate_kind(const ScenarioConfig& c) {
  const auto& r = rules_for(c.kind);
  if (r.needs_field && c.field.empty()) fail("field", "required for kind '" + c.kind + "'");
  if (r.needs_nonlinearity && c.nonlinearity.empty()) fail("nonlinearity", "required for kind '" + c.kind + "'");
  if (r.needs_grid && !c.grid) fail("grid", "required for kind '" + c.kind + "'");
  for (const auto& [key, values] : c.options) {
    if (std::none_of(r.options.begin(), r.options.end(), [&](const char* k) { return key == k; }))
      fail("options", "unknown option '" + key + "' for kind '" + c.kind + "'");
    if (values.empty()) fail("options." + key, "must not be empty");
  }
  for (const char* scalar : {"masks", "eps0", "eps_floor", "ramp", "source_density", "sigma", "max_iter",
                             "cells_per_eps", "speed_tolerance", "output_slices", "skip", "functions", "eps"})
    require_length(c, scalar, 1);

  const std::size_t d = c.grid ? c.grid->lower.size() : 0;
  if (c.kind != "burgers-selection" && c.kind != "diagnostics" && c.grid && c.grid->counts.empty())
    fail("grid", "needs 'counts'");
  if (!c.field.empty()) {
    const auto b = build_field(c);
    if (c.grid && b->dim() != d) fail("field", "dimension " + std::to_string(b->dim()) + " does not match the grid");
  }
  for (const char* vec : {"set_lower", "set_upper", "step", "source_lower", "source_upper", "test_lower", "test_upper"})
    require_length(c, vec, d);
  if (c.options.count("set_lower") != c.options.count("set_upper"))
    fail("options", "set_lower and set_upper go together");
  if (c.options.count("starts_low") != c.options.count("starts_high"))
    fail("options", "starts_low and starts_high go together");
  if (c.options.count("starts_low")) {
    const auto& lo = c.options.at("starts_low");
    const auto& hi = c.options.at("starts_high");
    if (lo.size() != hi.size() || lo.size() % d != 0) fail("options.starts_low", "needs whole points matching starts_high");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (lo[i] > hi[i]) fail("options.starts_low", "start pairs must be ordered");
  }
  if (c.option("ramp", 0.0) < 0.0) fail("options.ramp", "must be nonnegative");
  if (c.option("masks", 10.0) < 0.0) fail("options.masks", "must be nonnegative");
  if (c.option("sigma", 0.2) < 0.0) fail("options.sigma", "must be nonnegative");
  if (c.option("source_density", 1.0) <= 0.0) fail("options.source_density", "must be positive");
  if (c.option("max_iter", 20.0) < 1.0) fail("options.max_iter", "must be at least 1");
  if (c.option("functions", 20.0) < 1.0) fail("options.functions", "must be at least 1");
  if (c.option("eps", 0.1) <= 0.0) fail("options.eps", "must be positive");

  if (c.kind == "nonlinear") {
    NonlinearParams p;
    p.dim = d;
    if (c.nonlinearity_params.count("a")) p.a = c.nonlinearity_params.at("a").front();
    if (c.nonlinearity_params.count("width")) p.width = static_cast<std::size_t>(c.nonlinearity_params.at("width").front());
    const auto nl = make_nonlinearity(c.nonlinearity, p);
    if (nl.dim != d) fail("nonlinearity", "dimension does not match the grid");
  }
  if (c.kind == "burgers-selection") {
    if (d != 1) fail("grid", "burgers-selection is one-dimensional");
    if (c.time.start != 0.0) fail("time.start", "burgers-selection starts at 0");
    for (double s : c.option_list("speeds", {0.5}))
      if (!(s > 0.0 && s < 1.0)) fail("options.speeds", "speeds must lie in (0, 1)");
    if (c.option("cells_per_eps", 4.0) <= 0.0) fail("options.cells_per_eps", "must be positive");
    if (c.option("output_slices", 100.0) < 1.0) fail("options.output_slices", "must be at least 1");
    const double skip = c.option("skip", 0.1);
    if (!(skip >= 0.0 && skip < 1.0)) fail("options.skip", "must lie in [0, 1)");
  }
  if (c.kind == "sde" && !c.options.count("starts_low") && d != 1 && d != 2)
    fail("options", "sde scenarios above two dimensions need explicit starts");
}

}  // namespace

Grid GridSpec::build() const {
  if (counts.size() != lower.size()) throw ConfigError("grid: needs one count per axis");
  return Grid::box(lower, upper, counts);
}

std::vector<double> TimeSpec::times() const {
  std::vector<double> out(slices + 1);
  for (std::size_t k = 0; k <= slices; ++k)
    out[k] = k == slices ? end : start + (end - start) * static_cast<double>(k) / static_cast<double>(slices);
  return out;
}

double ScenarioConfig::option(const std::string& key, double fallback) const {
  const auto it = options.find(key);
  return it == options.end() || it->second.empty() ? fallback : it->second.front();
}

std::vector<double> ScenarioConfig::option_list(const std::string& key, std::vector<double> fallback) const {
  const auto it = options.find(key);
  return it == options.end() ? fallback : it->second;
}

const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k;
    for (const auto& r : kind_rules()) k.emplace_back(r.kind);
    return k;
  }();
  return kinds;
}

ScenarioConfig parse_scenario(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "config",
            {"version", "kind", "field", "nonlinearity", "grid", "time", "schedules", "seed", "output", "side",
             "options"});
  ScenarioConfig c;
  if (!j.contains("version")) fail("version", "required");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kScenarioSchemaVersion)
    fail("version", "unsupported schema version (expected " + std::to_string(kScenarioSchemaVersion) + ")");
  if (!j.contains("kind")) fail("kind", "required");
  c.kind = text(j["kind"], "kind");
  rules_for(c.kind);

  if (j.contains("field")) {
    const auto& f = j["field"];
    only_keys(f, "field", {"id", "params", "grid", "times", "values", "interpolation"});
    if (!f.contains("id")) fail("field", "needs 'id'");
    c.field = text(f["id"], "field.id");
    if (!in_catalog(c.field, "field")) fail("field.id", "unknown field '" + c.field + "'");
    if (f.contains("params")) c.field_params = param_map(f["params"], "field.params");
    if (c.field == "user-grid") {
      UserGridSpec u;
      if (!f.contains("grid") || !f.contains("values")) fail("field", "user-grid needs 'grid' and 'values'");
      u.grid = parse_grid(f["grid"], "field.grid", true);
      u.values = number_list(f["values"], "field.values");
      u.times = f.contains("times") ? number_list(f["times"], "field.times") : std::vector<double>{0.0};
      if (f.contains("interpolation")) u.interpolation = text(f["interpolation"], "field.interpolation");
      if (u.interpolation != "hold" && u.interpolation != "linear")
        fail("field.interpolation", "expected 'hold' or 'linear'");
      std::size_t nodes = 1;
      for (auto n : u.grid.counts) nodes *= n;
      if (u.times.empty() || u.values.size() != u.times.size() * nodes * u.grid.lower.size())
        fail("field.values", "needs times x nodes x dim numbers");
      for (std::size_t k = 1; k < u.times.size(); ++k)
        if (!(u.times[k] > u.times[k - 1])) fail("field.times", "must be strictly increasing");
      c.user_grid = std::move(u);
    } else if (f.contains("grid") || f.contains("values") || f.contains("times") || f.contains("interpolation")) {
      fail("field", "grid samples are only valid for user-grid");
    }
  }
  if (j.contains("nonlinearity")) {
    const auto& n = j["nonlinearity"];
    only_keys(n, "nonlinearity", {"id", "params"});
    if (!n.contains("id")) fail("nonlinearity", "needs 'id'");
    c.nonlinearity = text(n["id"], "nonlinearity.id");
    if (!in_catalog(c.nonlinearity, "nonlinearity"))
      fail("nonlinearity.id", "unknown nonlinearity '" + c.nonlinearity + "'");
    if (n.contains("params")) c.nonlinearity_params = param_map(n["params"], "nonlinearity.params");
    for (const auto& [key, v] : c.nonlinearity_params) {
      if (key != "a" && key != "width") fail("nonlinearity.params", "unknown parameter '" + key + "'");
      if (v.size() != 1) fail("nonlinearity.params." + key, "needs one value");
    }
    if (c.nonlinearity_params.count("width") &&
        (c.nonlinearity_params["width"][0] < 1 || std::floor(c.nonlinearity_params["width"][0]) != c.nonlinearity_params["width"][0]))
      fail("nonlinearity.params.width", "must be a positive integer");
  }
  if (j.contains("grid")) c.grid = parse_grid(j["grid"], "grid", false);
  if (j.contains("time")) {
    const auto& t = j["time"];
    only_keys(t, "time", {"start", "end", "slices"});
    if (t.contains("start")) c.time.start = number(t["start"], "time.start");
    if (t.contains("end")) c.time.end = number(t["end"], "time.end");
    if (t.contains("slices")) c.time.slices = count_value(t["slices"], "time.slices", 1);
    if (!(c.time.end > c.time.start)) fail("time", "end must exceed start");
  }
  if (j.contains("schedules")) {
    const auto& s = j["schedules"];
    only_keys(s, "schedules", {"eps", "dt", "N"});
    if (s.contains("eps")) c.eps_schedule = number_list(s["eps"], "schedules.eps");
    if (s.contains("dt")) c.dt_schedule = number_list(s["dt"], "schedules.dt");
    for (double v : c.eps_schedule)
      if (!(v > 0.0)) fail("schedules.eps", "values must be positive");
    for (double v : c.dt_schedule)
      if (!(v > 0.0)) fail("schedules.dt", "values must be positive");
    if (s.contains("N")) {
      const auto& n = s["N"];
      if (n.is_array()) {
        for (std::size_t i = 0; i < n.size(); ++i)
          c.n_schedule.push_back(count_value(n[i], "schedules.N[" + std::to_string(i) + "]", 1));
      } else {
        c.n_schedule.push_back(count_value(n, "schedules.N", 1));
      }
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      fail("seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) c.output = text(j["output"], "output");
  if (j.contains("side")) {
    c.side = text(j["side"], "side");
    if (c.side != "lower" && c.side != "upper") fail("side", "expected 'lower' or 'upper'");
  }
  if (j.contains("options")) c.options = param_map(j["options"], "options");
  validate_kind(c);
  return c;
}

FieldPtr build_field(const ScenarioConfig& config) {
  if (config.field.empty()) throw ConfigError("field: none configured");
  if (config.field != "user-grid") return make_field(config.field, config.field_params);
  if (!config.user_grid) throw ConfigError("field: user-grid needs samples");
  const auto& u = *config.user_grid;
  const Grid g = u.grid.build();
  const std::size_t d = g.dim(), per_slice = g.size() * d;
  std::vector<GridFunction> slices;
  for (std::size_t k = 0; k < u.times.size(); ++k)
    slices.emplace_back(g, std::vector<double>(u.values.begin() + k * per_slice, u.values.begin() + (k + 1) * per_slice),
                        d);
  try {
    return std::make_shared<GriddedField>("user-grid", u.times, std::move(slices),
                                          u.interpolation == "hold" ? TimeInterpolation::hold : TimeInterpolation::linear);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("field: ") + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }
}

bool ScenarioOutput::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

// ---------------------------------------------------------------- runners

namespace {

std::vector<std::string> slice_header(std::size_t d, std::vector<std::string> values, const char* index = "node") {
  std::vector<std::string> cols{"t", index};
  for (std::size_t a = 0; a < d; ++a) cols.push_back("x" + std::to_string(a));
  cols.insert(cols.end(), values.begin(), values.end());
  return cols;
}

void slice_rows(CsvTable& table, double t, const Grid& g, const std::vector<const GridFunction*>& fns) {
  std::vector<double> x(g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<CsvCell> row{t, i};
    g.coords(i, x);
    for (double v : x) row.emplace_back(v);
    for (const auto* f : fns)
      for (std::size_t k = 0; k < f->width(); ++k) row.emplace_back((*f)(i, k));
    table.add_row(row);
  }
}

std::vector<std::string> component_names(const std::string& base, std::size_t w) {
  if (w == 1) return {base};
  std::vector<std::string> out;
  for (std::size_t k = 0; k < w; ++k) out.push_back(base + "_" + std::to_string(k));
  return out;
}

std::string label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

FlowSide side_of(const ScenarioConfig& c) { return c.side == "upper" ? FlowSide::upper : FlowSide::lower; }

std::vector<double> after_start(const ScenarioConfig& c) {
  auto all = c.time.times();
  return {all.begin() + 1, all.end()};
}

ScalarFn box_indicator(Point lo, Point hi, double value) {
  return [lo = std::move(lo), hi = std::move(hi), value](std::span<const double> x) {
    for (std::size_t a = 0; a < x.size(); ++a)
      if (x[a] < lo[a] || x[a] > hi[a]) return 0.0;
    return value;
  };
}

double box_volume(const Point& lo, const Point& hi) {
  double v = 1.0;
  for (std::size_t a = 0; a < lo.size(); ++a) v *= hi[a] - lo[a];
  return v;
}

ScenarioOutput run_flow(const ScenarioConfig& c) {
  const auto b = build_field(c);
  const Grid g = c.grid->build();
  const std::size_t d = g.dim();
  const double h = g.min_spacing();
  const auto times = after_start(c);
  const auto schedule = c.eps_schedule.empty()
                            ? default_eps_schedule(c.option("eps0", 8 * h), c.option("eps_floor", 2 * h))
                            : c.eps_schedule;
  FlowOptions fo;
  if (!c.dt_schedule.empty()) fo.dt = c.dt_schedule.front();
  const MaxMinFlow mm = maximal_minimal_flow(*b, c.time.start, times, g, schedule, fo);

  ScenarioOutput out;
  std::vector<std::string> values = component_names("maximal", d);
  const auto mins = component_names("minimal", d);
  values.insert(values.end(), mins.begin(), mins.end());
  CsvTable slices(slice_header(d, values));
  for (std::size_t k = 0; k < mm.maximal.times.size(); ++k)
    slice_rows(slices, mm.maximal.times[k], g, {&mm.maximal.slices[k], &mm.minimal.slices[k]});
  out.files.emplace_back("flow_slices.csv", slices.str());

  CsvTable conv({"eps", "t", "upper_l1_to_limit", "lower_l1_to_limit"});
  for (std::size_t k = 0; k < mm.schedule.size(); ++k)
    for (double t : times)
      conv.add_row({mm.schedule[k], t, lp_distance(mm.upper_sequence[k].at(t), mm.maximal.at(t)),
                    lp_distance(mm.lower_sequence[k].at(t), mm.minimal.at(t))});
  out.files.emplace_back("convergence.csv", conv.str());

  std::vector<Box> sets;
  if (c.options.count("set_lower")) sets.push_back(Box{c.options.at("set_lower"), c.options.at("set_upper")});
  const auto masks = static_cast<std::size_t>(c.option("masks", 10.0));
  for (std::size_t k = 0; k < masks; ++k) {
    const CounterRng rng(CounterRng::derive(c.seed, 0x6d61736bULL + k));
    Box box{Point(d), Point(d)};
    for (std::size_t a = 0; a < d; ++a) {
      const double len = g.upper(a) - g.lower(a);
      const double mid = g.lower(a) + len * (0.25 + 0.5 * rng.uniform(2 * a));
      const double half = len * (0.02 + 0.18 * rng.uniform(2 * a + 1));
      box.lower[a] = mid - half;
      box.upper[a] = mid + half;
    }
    sets.push_back(box);
  }
  std::vector<std::string> cols{"set", "t"};
  for (std::size_t a = 0; a < d; ++a) cols.push_back("lower" + std::to_string(a));
  for (std::size_t a = 0; a < d; ++a) cols.push_back("upper" + std::to_string(a));
  for (const char* s : {"set_measure", "preimage_measure", "bound", "tolerance", "holds"}) cols.emplace_back(s);
  CsvTable mb(cols);
  std::size_t broken = 0;
  double worst = -std::numeric_limits<double>::infinity();
  const double t_end = times.back();
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto r = measure_bound(mm.maximal, sets[k], t_end, *b);
    std::vector<CsvCell> row{k, t_end};
    for (double v : r.set.lower) row.emplace_back(v);
    for (double v : r.set.upper) row.emplace_back(v);
    for (double v : {r.set_measure, r.preimage_measure, r.bound, r.grid_tolerance}) row.emplace_back(v);
    row.emplace_back(r.holds ? 1 : 0);
    mb.add_row(row);
    if (!r.holds) ++broken;
    worst = std::max(worst, r.preimage_measure - r.bound - r.grid_tolerance);
  }
  out.files.emplace_back("measure_bound.csv", mb.str());
  out.checks.push_back({"measure_bound", broken == 0, sets.empty() ? 0.0 : worst, 0.0,
                        std::to_string(broken) + " of " + std::to_string(sets.size()) + " sets exceed the bound"});
  const auto order = check_comparison(mm.minimal, mm.maximal);
  out.checks.push_back({"minimal_below_maximal", order.ordered, order.worst, 0.0,
                        std::to_string(order.violations) + " violations"});
  return out;
}

ScenarioOutput run_transport(const ScenarioConfig& c) {
  const auto b = build_field(c);
  const Grid g = c.grid->build();
  const std::size_t d = g.dim();
  const auto step = c.option_list("step", std::vector<double>(d, 0.0));
  const double ramp = c.option("ramp", 0.0);
  TransportProblem p;
  p.b = b;
  p.T = c.time.end;
  p.terminal_tag = Monotonicity::decreasing;
  p.terminal = [step, ramp](std::span<const double> x, std::span<double> out) {
    double v = 1.0;
    for (std::size_t a = 0; a < x.size(); ++a)
      v *= ramp > 0.0 ? std::clamp(0.5 + (step[a] - x[a]) / ramp, 0.0, 1.0) : (x[a] <= step[a] ? 1.0 : 0.0);
    out[0] = v;
  };
  const auto times = c.time.times();
  TransportOptions o;
  o.side = side_of(c);
  if (!c.dt_schedule.empty()) o.dt = c.dt_schedule.front();
  const std::vector<double> eps_list = c.eps_schedule.empty() ? std::vector<double>{0.0} : c.eps_schedule;
  std::vector<TransportSolution> runs;
  for (double e : eps_list) {
    o.eps = e;
    runs.push_back(solve_transport(p, g, times, o));
  }

  ScenarioOutput out;
  const auto& fine = runs.back();
  CsvTable slices(slice_header(d, {"u"}));
  for (std::size_t k = 0; k < fine.times.size(); ++k) slice_rows(slices, fine.times[k], g, {&fine.slices[k]});
  out.files.emplace_back("transport_slices.csv", slices.str());

  CsvTable conv({"eps", "t", "l1_to_last"});
  std::size_t not_monotone = 0;
  double lo = 0.0, hi = 1.0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    conv.add_row({runs[r].eps, c.time.start, lp_distance(runs[r].at(c.time.start), fine.at(c.time.start))});
    for (const auto& s : runs[r].slices) {
      if (!is_decreasing(s)) ++not_monotone;
      lo = std::min(lo, s.min());
      hi = std::max(hi, s.max());
    }
  }
  out.files.emplace_back("convergence.csv", conv.str());
  out.checks.push_back({"decreasing_slices", not_monotone == 0, static_cast<double>(not_monotone), 0.0,
                        "slices that lost monotonicity"});
  const double excess = std::max(-lo, hi - 1.0);
  out.checks.push_back({"maximum_principle", excess <= 1e-12, excess, 1e-12, "distance outside [0, 1]"});
  return out;
}

ScenarioOutput run_continuity(const ScenarioConfig& c) {
  const auto b = build_field(c);
  const Grid g = c.grid->build();
  const std::size_t d = g.dim();
  const double h = g.max_spacing();
  const Point src_lo = c.option_list("source_lower", std::vector<double>(d, -1.0));
  const Point src_hi = c.option_list("source_upper", std::vector<double>(d, 1.0));
  const double density = c.option("source_density", 1.0 / box_volume(src_lo, src_hi));
  const auto f0 = box_indicator(src_lo, src_hi, density);
  const auto ubar = box_indicator(c.option_list("test_lower", std::vector<double>(d, 1.0)),
                                  c.option_list("test_upper", std::vector<double>(d, 2.0)), 1.0);
  const auto times = c.time.times();
  const double t0 = c.time.end;
  const std::vector<std::size_t> ns = c.n_schedule.empty() ? std::vector<std::size_t>{10000} : c.n_schedule;

  ScenarioOutput out;
  CsvTable conv({"N", "pushed", "pulled", "residual", "tolerance"});
  std::optional<DensitySolution> last;
  for (std::size_t n : ns) {
    PushforwardOptions po;
    po.particles = n;
    po.seed = c.seed;
    po.side = side_of(c);
    auto f = pushforward_solve(*b, g, f0, times, po);
    const auto r = duality_check(f, b, f0, g, ubar, t0);
    const double tol = 3.0 * (1.0 / std::sqrt(static_cast<double>(n)) + h);
    conv.add_row({n, r.pushed, r.pulled, r.residual, tol});
    out.checks.push_back({"duality_N" + std::to_string(n), r.residual <= tol, r.residual, tol,
                          "pushed " + format_number(r.pushed) + ", pulled " + format_number(r.pulled)});
    if (!last || n >= last->ensembles.front().size()) last = std::move(f);
  }
  CsvTable slices(slice_header(d, {"histogram", "smoothed"}, "bin"));
  for (std::size_t k = 0; k < last->times.size(); ++k)
    slice_rows(slices, last->times[k], last->grid(), {&last->slices[k], &last->smoothed[k]});
  out.files.emplace_back("density_slices.csv", slices.str());
  out.files.emplace_back("convergence.csv", conv.str());
  return out;
}

ScenarioOutput run_sde(const ScenarioConfig& c) {
  const auto b = build_field(c);
  const Grid g = c.grid->build();
  const std::size_t d = g.dim();
  std::vector<double> lo, hi;
  if (c.options.count("starts_low")) {
    lo = c.options.at("starts_low");
    hi = c.options.at("starts_high");
  } else {
    for (int k = 0; k < 10; ++k)
      for (std::size_t a = 0; a < d; ++a) {
        lo.push_back(-1.0 + 0.2 * k);
        hi.push_back(-1.0 + 0.2 * k + 0.01 * (k + 1));
      }
  }
  const std::size_t paths = c.n_schedule.empty() ? 1000 : c.n_schedule.front();
  const double eps = c.eps_schedule.empty() ? 2.0 * g.max_spacing() : c.eps_schedule.front();
  const auto noise = NoiseSpec::additive(d, c.option("sigma", 0.2));
  EmOptions o;
  o.field_grid = g;
  if (!c.dt_schedule.empty()) o.dt = c.dt_schedule.front();
  const auto times = after_start(c);
  const auto side = side_of(c);
  const auto a = em_flow(*b, noise, side, eps, c.time.start, times, lo, paths, c.seed, o);
  const auto bb = em_flow(*b, noise, side, eps, c.time.start, times, hi, paths, c.seed, o);
  const auto other = em_flow(*b, noise, side == FlowSide::upper ? FlowSide::lower : FlowSide::upper, eps, c.time.start,
                             times, lo, paths, c.seed, o);

  ScenarioOutput out;
  CsvTable table({"t", "start", "mean_low", "mean_high", "min_gap"});
  const std::size_t starts = lo.size() / d;
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t s = 0; s < starts; ++s) {
      double ml = 0.0, mh = 0.0, gap = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < paths; ++p) {
        const double xl = a.at(k, s, p)[0], xh = bb.at(k, s, p)[0];
        ml += xl;
        mh += xh;
        gap = std::min(gap, xh - xl);
      }
      table.add_row({times[k], s, ml / static_cast<double>(paths), mh / static_cast<double>(paths), gap});
    }
  out.files.emplace_back("sde_paths.csv", table.str());
  const auto pair = coupled_order_check(a, bb);
  out.checks.push_back({"ordered_starts", pair.violations == 0, static_cast<double>(pair.violations), 0.0,
                        std::to_string(pair.checked) + " coupled states"});
  const auto sides = side == FlowSide::upper ? coupled_order_check(other, a) : coupled_order_check(a, other);
  out.checks.push_back({"lower_below_upper", sides.violations == 0, static_cast<double>(sides.violations), 0.0,
                        std::to_string(sides.checked) + " coupled states"});
  return out;
}

ScenarioOutput run_nonlinear(const ScenarioConfig& c) {
  const Grid g = c.grid->build();
  const std::size_t d = g.dim();
  NonlinearParams np;
  np.dim = d;
  if (c.nonlinearity_params.count("a")) np.a = c.nonlinearity_params.at("a").front();
  if (c.nonlinearity_params.count("width"))
    np.width = static_cast<std::size_t>(c.nonlinearity_params.at("width").front());
  const auto nl = make_nonlinearity(c.nonlinearity, np);
  const auto step = c.option_list("step", std::vector<double>(d, 0.0));
  const VectorFn uT = [step](std::span<const double> x, std::span<double> out) {
    double v = 1.0;
    for (std::size_t a = 0; a < x.size(); ++a) v *= x[a] <= step[a] ? 1.0 : 0.0;
    std::fill(out.begin(), out.end(), v);
  };
  const auto times = c.time.times();
  NonlinearOptions o;
  if (!c.eps_schedule.empty()) o.eps = c.eps_schedule.front();
  const auto iters = static_cast<std::size_t>(c.option("max_iter", 20.0));
  const auto top = solve_extremal(nl, uT, g, times, LatticeDirection::from_top, iters, 0.0, o);
  const auto bottom = solve_extremal(nl, uT, g, times, LatticeDirection::from_bottom, iters, 0.0, o);

  ScenarioOutput out;
  auto values = component_names("u_top", nl.width);
  const auto bot = component_names("u_bottom", nl.width);
  values.insert(values.end(), bot.begin(), bot.end());
  CsvTable slices(slice_header(d, values));
  for (std::size_t k = 0; k < top.solution.times.size(); ++k)
    slice_rows(slices, top.solution.times[k], g, {&top.solution.slices[k], &bottom.solution.slices[k]});
  out.files.emplace_back("nonlinear_slices.csv", slices.str());
  CsvTable conv({"direction", "iteration", "change"});
  for (const auto* r : {&top, &bottom})
    for (std::size_t k = 0; k < r->changes.size(); ++k)
      conv.add_row({to_string(r->solution.direction), k + 1, r->changes[k]});
  out.files.emplace_back("convergence.csv", conv.str());
  for (const auto* r : {&top, &bottom})
    out.checks.push_back({std::string("converged_") + to_string(r->solution.direction), r->converged,
                          r->fixed_point_residual, r->tolerance,
                          std::to_string(r->iterations) + " iterations"});
  const bool sandwich = lattice_leq(bottom.solution, top.solution, 1e-12);
  out.checks.push_back({"bottom_below_top", sandwich, lattice_distance(bottom.solution, top.solution), 0.0,
                        "lattice order of the extremal solutions"});
  return out;
}

ScenarioOutput run_burgers(const ScenarioConfig& c) {
  const double lo = c.grid->lower[0], hi = c.grid->upper[0], T = c.time.end;
  std::vector<double> eps = c.eps_schedule.empty() ? std::vector<double>{0.04, 0.02, 0.01} : c.eps_schedule;
  std::sort(eps.rbegin(), eps.rend());
  const auto speeds = c.option_list("speeds", {0.5});
  const double ratio = c.option("cells_per_eps", 4.0), tol = c.option("speed_tolerance", 0.05);
  ViscousOptions vo;
  vo.output_slices = static_cast<std::size_t>(c.option("output_slices", 100.0));
  if (!c.dt_schedule.empty()) vo.dt = c.dt_schedule.front();

  ScenarioOutput out;
  const double c0 = speed_map_C(0.0);
  out.checks.push_back({"speed_map_at_zero", std::abs(c0 - 0.5) <= 1e-15, c0, 0.5, "C(0)"});
  CsvTable conv({"speed", "eps", "h", "theta", "measured_speed", "max_deviation", "dt", "steps"});
  for (std::size_t si = 0; si < speeds.size(); ++si) {
    const double speed = speeds[si];
    const auto path = ShockPath::linear(speed, T);
    const auto prof = theta_for_path(path);
    const double rt = std::abs(speed_map_C(speed_map_inverse(speed)) - speed);
    out.checks.push_back({"theta_roundtrip_" + label(speed), rt <= 1e-10, rt, 1e-10, "|C(C^-1(c)) - c|"});
    CsvTable traj({"t", "eps", "shock_x_measured", "shock_x_target", "l1_gap"});
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    ShockFit fit;
    for (double e : eps) {
      const double h = e / ratio;
      const Grid g = Grid::line(lo, hi, static_cast<std::size_t>(std::lround((hi - lo) / h)) + 1);
      const auto run = viscous_solve(prof, e, g, vo);
      fit = shock_fit(run, path, c.option("skip", 0.1));
      for (std::size_t k = 0; k < run.times.size(); ++k) {
        const double t = run.times[k];
        const auto exact = GridFunction::sample(g, [&](std::span<const double> x) { return u_c_exact(path, t, x[0]); });
        traj.add_row({t, e, locate_shock(run.slices[k]), path(t), l1_distance(run.slices[k], exact)});
      }
      conv.add_row({speed, e, g.spacing(0), prof(0.5 * T), fit.speed, fit.max_deviation,
                    run.dt, run.steps});
      if (fit.max_deviation > prev) monotone = false;
      prev = fit.max_deviation;
    }
    const std::string name = speeds.size() == 1 ? "shock_trajectory.csv" : "shock_trajectory_" + std::to_string(si) + ".csv";
    out.files.emplace_back(name, traj.str());
    const double err = std::abs(fit.speed - speed);
    out.checks.push_back({"shock_speed_" + label(speed), err <= tol, err, tol,
                          "measured " + format_number(fit.speed) + " at eps " + format_number(eps.back())});
    out.checks.push_back({"deviation_nonincreasing_" + label(speed), monotone, prev, 0.0,
                          "sup |shock - c(t)| across the eps schedule"});
  }
  out.files.emplace_back("convergence.csv", conv.str());
  return out;
}

GridFunction random_increasing(const Grid& g, std::uint64_t key) {
  const CounterRng rng(key);
  const std::size_t d = g.dim();
  std::vector<std::vector<double>> parts(d);
  std::uint64_t counter = 0;
  for (std::size_t a = 0; a < d; ++a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.count(a); ++i) {
      const double u = rng.uniform(counter++);
      acc += u < 0.05 ? 3.0 * rng.uniform(counter++) : 0.1 * u * u;
      parts[a].push_back(acc);
    }
  }
  const double weight = rng.uniform(counter++);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double sum = 0.0, prod = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double p = parts[a][g.axis_index(i, a)];
      sum += p;
      prod *= p;
    }
    v[i] = sum + weight * prod;
  }
  // Scaled into [0, 1] so every regularization width below 1/2 passes the growth guard.
  const double top = v.back();
  if (top > 0.0)
    for (double& x : v) x /= top;
  return GridFunction(g, std::move(v), 1, Monotonicity::increasing);
}

ScenarioOutput run_diagnostics(const ScenarioConfig& c) {
  const auto count = static_cast<std::size_t>(c.option("functions", 20.0));
  const double eps = c.option("eps", 0.1);
  ScenarioOutput out;
  CsvTable table({"case", "dim", "shift_error", "ordering_violations", "abv_error"});
  double worst_shift = 0.0, worst_abv = 0.0;
  std::size_t violations = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t d = 1 + k % 2;
    const Grid g = d == 1 ? Grid::line(-1, 1, 81) : Grid::box({-1, -1}, {1, 1}, {41, 41});
    const auto phi = random_increasing(g, CounterRng::derive(c.seed, k));
    const MollifierKernel up(g, eps, KernelSide::upper), dn(g, eps, KernelSide::lower);
    const auto fu = one_sided_mollify(phi, up), fl = one_sided_mollify(phi, dn);
    const double scale = std::max({1.0, std::abs(phi.min()), std::abs(phi.max())});
    double shift = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      bool inside = true;
      std::size_t j = i;
      for (std::size_t a = 0; a < d; ++a) {
        if (g.axis_index(i, a) < up.steps(a)) inside = false;
        else j -= up.steps(a) * g.stride(a);
      }
      if (inside) shift = std::max(shift, std::abs(fu(j) - fl(i)) / scale);
    }
    const auto sup = sup_convolution(phi, eps), inf = inf_convolution(phi, eps);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (sup(i) < phi(i) || inf(i) > phi(i)) ++bad;
      if (fu(i) < phi(i) || fl(i) > phi(i)) ++bad;
    }
    const Point lo = g.lower_corner(), hi = g.upper_corner();
    const double norm = abv_norm(phi, lo, hi);
    const double abv = std::abs(norm - (phi(g.size() - 1) - phi(0))) / scale;
    table.add_row({k, d, shift, bad, abv});
    worst_shift = std::max(worst_shift, shift);
    worst_abv = std::max(worst_abv, abv);
    violations += bad;
  }
  out.files.emplace_back("diagnostics.csv", table.str());
  out.checks.push_back({"mollifier_shift_identity", worst_shift <= 1e-14, worst_shift, 1e-14, "relative error"});
  out.checks.push_back({"regularization_ordering", violations == 0, static_cast<double>(violations), 0.0,
                        "node-wise ordering violations"});
  out.checks.push_back({"increasing_variation", worst_abv <= 1e-12, worst_abv, 1e-12, "|norm - (phi(b) - phi(a))|"});
  return out;
}

}  // namespace

ScenarioOutput execute_scenario(const ScenarioConfig& config) {
  if (config.kind == "flow") return run_flow(config);
  if (config.kind == "transport") return run_transport(config);
  if (config.kind == "continuity") return run_continuity(config);
  if (config.kind == "sde") return run_sde(config);
  if (config.kind == "nonlinear") return run_nonlinear(config);
  if (config.kind == "burgers-selection") return run_burgers(config);
  if (config.kind == "diagnostics") return run_diagnostics(config);
  throw ConfigError("kind: unknown scenario kind '" + config.kind + "'");
}

// ---------------------------------------------------------------- manifest

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

std::string library_version() { return ORDFLOW_VERSION; }

std::string RunManifest::to_json() const {
  json j;
  j["format"] = "ordflow-manifest";
  j["version"] = version;
  j["config"] = {{"path", config_path}, {"sha256", config_sha256}};
  j["kind"] = kind;
  j["seed"] = seed;
  j["workers"] = workers;
  j["wall_seconds"] = wall_seconds;
  j["exit_code"] = exit_code;
  j["status"] = status;
  j["error"] = error;
  j["checks"] = json::array();
  for (const auto& c : checks)
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"measured", std::isfinite(c.measured) ? json(c.measured) : json(format_number(c.measured))},
                           {"threshold", c.threshold},
                           {"detail", c.detail}});
  j["files"] = json::array();
  for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text.begin(), text.end());
    if (j.value("format", "") != "ordflow-manifest") throw ConfigError("not an ordflow manifest");
    m.version = j.at("version").get<std::string>();
    m.config_path = j.at("config").at("path").get<std::string>();
    m.config_sha256 = j.at("config").at("sha256").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.workers = j.at("workers").get<std::size_t>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    m.exit_code = j.at("exit_code").get<int>();
    m.status = j.at("status").get<std::string>();
    m.error = j.at("error").get<std::string>();
    for (const auto& c : j.at("checks")) {
      CheckResult r;
      r.name = c.at("name").get<std::string>();
      r.passed = c.at("passed").get<bool>();
      r.measured = c.at("measured").is_number() ? c.at("measured").get<double>() : std::nan("");
      r.threshold = c.at("threshold").get<double>();
      r.detail = c.at("detail").get<std::string>();
      m.checks.push_back(r);
    }
    for (const auto& f : j.at("files"))
      m.files.push_back({f.at("path").get<std::string>(), f.at("bytes").get<std::uintmax_t>(),
                         f.at("sha256").get<std::string>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream outf(p, std::ios::binary | std::ios::trunc);
  outf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!outf) throw Error("cannot write " + p.string());
}

}  // namespace

RunOutcome run_scenario(const fs::path& config_path, const std::optional<fs::path>& output_override) {
  const auto started = std::chrono::steady_clock::now();
  RunOutcome outcome;
  const auto bytes = read_file(config_path);
  if (!bytes) {
    outcome.exit_code = exit_config;
    outcome.message = "cannot read config " + config_path.string();
    return outcome;
  }
  ScenarioConfig config;
  try {
    config = parse_scenario(*bytes);
  } catch (const ConfigError& e) {
    outcome.exit_code = exit_config;
    outcome.message = e.what();
    return outcome;
  }
  outcome.output_dir = output_override ? *output_override
                       : config.output.empty() ? fs::path(config_path.stem().string() + "_out")
                                               : fs::path(config.output);

  RunManifest m;
  m.version = library_version();
  std::error_code ec;
  const auto abs = fs::weakly_canonical(fs::absolute(config_path), ec);
  m.config_path = (ec ? fs::absolute(config_path) : abs).string();
  m.config_sha256 = sha256_hex(*bytes);
  m.kind = config.kind;
  m.seed = config.seed;
  m.workers = worker_count();

  ScenarioOutput result;
  try {
    result = execute_scenario(config);
    m.checks = result.checks;
    m.exit_code = result.passed() ? exit_ok : exit_check_failed;
    m.status = result.passed() ? "pass" : "fail";
  } catch (const GuardError& e) {
    m.exit_code = exit_guard;
    m.status = "guard";
    m.error = e.what();
    result.files.clear();
  } catch (const ConfigError& e) {
    outcome.exit_code = exit_config;
    outcome.message = e.what();
    return outcome;
  } catch (const DomainError& e) {
    outcome.exit_code = exit_config;
    outcome.message = e.what();
    return outcome;
  } catch (const DimensionError& e) {
    outcome.exit_code = exit_config;
    outcome.message = e.what();
    return outcome;
  }

  fs::create_directories(outcome.output_dir, ec);
  if (ec) {
    outcome.exit_code = exit_config;
    outcome.message = "cannot create output directory " + outcome.output_dir.string() + ": " + ec.message();
    return outcome;
  }
  for (const auto& [name, contents] : result.files) {
    write_file(outcome.output_dir / name, contents);
    m.files.push_back({name, contents.size(), sha256_hex(contents)});
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file(outcome.output_dir / "manifest.json", m.to_json());
  outcome.exit_code = m.exit_code;
  outcome.message = m.status == "guard" ? "guard tripped: " + m.error : m.status;
  outcome.manifest = std::move(m);
  return outcome;
}

ManifestCheck check_manifest(const fs::path& manifest_path) {
  ManifestCheck r;
  const auto text = read_file(manifest_path);
  if (!text) {
    r.problems.push_back("cannot read manifest " + manifest_path.string());
    return r;
  }
  try {
    r.manifest = RunManifest::from_json(*text);
  } catch (const ConfigError& e) {
    r.problems.emplace_back(e.what());
    return r;
  }
  const auto config = read_file(r.manifest.config_path);
  if (!config) r.problems.push_back("config missing: " + r.manifest.config_path);
  else if (sha256_hex(*config) != r.manifest.config_sha256) r.problems.push_back("config digest differs: " + r.manifest.config_path);
  const fs::path dir = manifest_path.parent_path();
  for (const auto& f : r.manifest.files) {
    const auto bytes = read_file(dir / f.path);
    if (!bytes) r.problems.push_back("file missing: " + f.path);
    else if (bytes->size() != f.bytes || sha256_hex(*bytes) != f.sha256) r.problems.push_back("file digest differs: " + f.path);
  }
  r.ok = r.problems.empty();
  return r;
}

std::string format_catalog(const std::vector<CatalogEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries) {
    std::string tags;
    for (const auto& t : e.tags) tags += (tags.empty() ? "" : ",") + t;
    os << std::left << std::setw(14) << e.id << std::setw(14) << e.kind << std::setw(6)
       << (e.dim == 0 ? std::string("any") : std::to_string(e.dim) + "d") << std::setw(18) << tags << e.description
       << "\n";
    os << std::string(14, ' ') << "params: " << e.parameters << "\n";
  }
  return os.str();
}

}  // namespace ordflow
