#include "issf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "issf/csv_export.hpp"
#include "issf/envelope_fit.hpp"
#include "issf/errors.hpp"
#include "issf/expression.hpp"
#include "issf/plot_export.hpp"

namespace issf {

using Json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kStages = {"certify", "gains", "simulate", "issf", "export"};

// ---------------------------------------------------------------- serialization

Json region_json(const RegionDecl& r) {
  Json j;
  j["shape"] = r.shape;
  if (r.shape == "disk_union") {
    Json members = Json::array();
    for (const auto& m : r.members) members.push_back(region_json(m));
    j["members"] = members;
  } else {
    j["center"] = r.center;
    j["radius"] = r.radius;
  }
  j["open"] = r.open;
  return j;
}

Json fn_json(const FnDecl& f) {
  Json j;
  j["name"] = f.name;
  for (const auto& [k, v] : f.params) j[k] = v;
  return j;
}

// Strict reader: every access names its dotted path, unknown keys are errors.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SpecError(path_, "expected an object");
  }

  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) const {
    seen_.insert(key);
    if (!j_.contains(key)) throw SpecError(sub(key), "missing required field");
    return j_.at(key);
  }

  double number(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw SpecError(sub(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : (seen_.insert(key), fallback);
  }
  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number_integer()) throw SpecError(sub(key), "expected an integer");
    return v.get<int>();
  }
  std::uint64_t uint(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw SpecError(sub(key), "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::string string(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw SpecError(sub(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_boolean()) throw SpecError(sub(key), "expected true or false");
    return v.get<bool>();
  }
  std::vector<double> numbers(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw SpecError(sub(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw SpecError(fmt::format("{}[{}]", sub(key), i), "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw SpecError(sub(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw SpecError(fmt::format("{}[{}]", sub(key), i), "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }
  Reader object(const std::string& key) const { return Reader(at(key), sub(key)); }

  /// Throws for keys that were never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw SpecError(sub(it.key()), "unknown field");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const Json& j_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

RegionDecl parse_region(const Reader& r) {
  RegionDecl d;
  d.shape = r.string("shape");
  if (d.shape == "disk_union") {
    const auto& arr = r.at("members");
    if (!arr.is_array() || arr.empty()) {
      throw SpecError(r.sub("members"), "expected a nonempty array of regions");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      d.members.push_back(parse_region(Reader(arr[i], fmt::format("{}[{}]", r.sub("members"), i))));
    }
  } else if (d.shape == "disk" || d.shape == "ball" || d.shape == "ball_complement") {
    d.center = r.numbers("center");
    d.radius = r.number("radius");
  } else {
    throw SpecError(r.sub("shape"), fmt::format("unknown shape '{}'", d.shape));
  }
  d.open = r.boolean("open", true);
  r.finish();
  return d;
}

FnDecl parse_fn(const Reader& r) {
  FnDecl d;
  d.name = r.string("name");
  std::vector<std::string> keys;
  if (d.name == "identity") {
  } else if (d.name == "linear") {
    keys = {"c"};
  } else if (d.name == "power") {
    keys = {"p"};
    if (r.has("c")) keys.push_back("c");
  } else if (d.name == "poly_odd") {
    keys = {"a", "b"};
  } else {
    throw SpecError(r.sub("name"), fmt::format("'{}' is not in the catalog (identity, linear, "
                                               "power, poly_odd)", d.name));
  }
  for (const auto& k : keys) d.params[k] = r.number(k);
  r.finish();
  return d;
}

void parse_error_location(const std::string& text, std::size_t byte, int& line, int& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

}  // namespace

std::string ExperimentSpec::to_json() const {
  Json j;
  j["name"] = name;
  Json sys;
  if (!system.catalog.empty()) sys["catalog"] = system.catalog;
  sys["dim_x"] = system.dim_x;
  sys["dim_u"] = system.dim_u;
  if (system.catalog.empty()) {
    sys["f"] = system.f;
    sys["g"] = system.g;
  }
  j["system"] = sys;
  Json geo;
  geo["unsafe"] = region_json(unsafe);
  geo["locality"] = region_json(locality);
  if (issf_locality) geo["issf_locality"] = region_json(*issf_locality);
  if (robust_region) geo["robust_region"] = region_json(*robust_region);
  j["geometry"] = geo;
  Json fns;
  fns["V"] = lyapunov;
  if (!barrier.empty()) fns["B"] = barrier;
  j["functions"] = fns;
  j["iss"] = {{"alpha1", fn_json(iss_alpha1)},
              {"alpha2", fn_json(iss_alpha2)},
              {"alpha3", fn_json(iss_alpha3)},
              {"gamma", fn_json(iss_gamma)}};
  j["gains"] = {{"theta", theta}, {"epsilon", epsilon}, {"k1", k1}, {"k2", k2}};
  j["controller"] = controller;
  Json dist;
  dist["kind"] = disturbance.kind;
  if (disturbance.kind == "constant") {
    dist["value"] = disturbance.value;
  } else if (disturbance.kind == "sinusoid") {
    dist["amplitude"] = disturbance.amplitude;
    dist["frequency"] = disturbance.frequency;
    dist["phase"] = disturbance.phase;
  } else if (disturbance.kind == "seeded_noise") {
    dist["bound"] = disturbance.bound;
    dist["seed"] = disturbance.seed;
    dist["hold_dt"] = disturbance.hold_dt;
  }
  j["disturbance"] = dist;
  j["initial_conditions"] = initial_conditions;
  j["simulation"] = {{"t_end", t_end}, {"dt", dt}};
  Json bounds = Json::array();
  for (const auto& [lo, hi] : grid.bounds) bounds.push_back({lo, hi});
  j["grid"] = {{"bounds", bounds},
               {"resolution", grid.resolution},
               {"input_radius", grid.input_radius},
               {"input_norms", grid.input_norms},
               {"input_directions", grid.input_directions}};
  j["fit"] = {{"family", fit_family}, {"supply_gain", supply_gain}};
  j["envelope_k"] = envelope_k;
  j["stages"] = stages;
  return j.dump(2) + "\n";
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 0, col = 0;
    parse_error_location(text, e.byte, line, col);
    throw SpecError("", fmt::format("JSON syntax error at line {}, column {}: {}", line, col, e.what()));
  }
  const Reader root(j, "");
  ExperimentSpec s;
  s.name = root.string("name", "");

  const auto sys = root.object("system");
  s.system.catalog = sys.string("catalog", "");
  s.system.dim_x = sys.integer("dim_x", 2);
  s.system.dim_u = sys.integer("dim_u", s.system.catalog.empty() ? 2 : s.system.dim_x);
  if (s.system.catalog.empty()) {
    s.system.f = sys.strings("f");
    const auto& g = sys.at("g");
    if (!g.is_array()) throw SpecError(sys.sub("g"), "expected an array of rows");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].is_array()) throw SpecError(fmt::format("system.g[{}]", i), "expected a row of strings");
      std::vector<std::string> row;
      for (std::size_t k = 0; k < g[i].size(); ++k) {
        if (!g[i][k].is_string()) {
          throw SpecError(fmt::format("system.g[{}][{}]", i, k), "expected a string");
        }
        row.push_back(g[i][k].get<std::string>());
      }
      s.system.g.push_back(std::move(row));
    }
  }
  sys.finish();

  const auto geo = root.object("geometry");
  s.unsafe = parse_region(geo.object("unsafe"));
  s.locality = parse_region(geo.object("locality"));
  if (geo.has("issf_locality")) s.issf_locality = parse_region(geo.object("issf_locality"));
  if (geo.has("robust_region")) s.robust_region = parse_region(geo.object("robust_region"));
  geo.finish();

  const auto fns = root.object("functions");
  s.lyapunov = fns.string("V");
  s.barrier = fns.string("B", "");
  fns.finish();

  if (root.has("iss")) {
    const auto iss = root.object("iss");
    s.iss_alpha1 = parse_fn(iss.object("alpha1"));
    s.iss_alpha2 = parse_fn(iss.object("alpha2"));
    s.iss_alpha3 = parse_fn(iss.object("alpha3"));
    s.iss_gamma = parse_fn(iss.object("gamma"));
    iss.finish();
  }
  if (root.has("gains")) {
    const auto g = root.object("gains");
    s.theta = g.number("theta", s.theta);
    s.epsilon = g.number("epsilon", s.epsilon);
    s.k1 = g.number("k1", s.k1);
    s.k2 = g.number("k2", s.k2);
    g.finish();
  }
  s.controller = root.string("controller", s.controller);

  if (root.has("disturbance")) {
    const auto d = root.object("disturbance");
    s.disturbance.kind = d.string("kind");
    if (s.disturbance.kind == "constant") {
      s.disturbance.value = d.numbers("value");
    } else if (s.disturbance.kind == "sinusoid") {
      s.disturbance.amplitude = d.numbers("amplitude");
      s.disturbance.frequency = d.numbers("frequency");
      s.disturbance.phase = d.numbers("phase");
    } else if (s.disturbance.kind == "seeded_noise") {
      s.disturbance.bound = d.number("bound");
      s.disturbance.seed = d.uint("seed", 0);
      s.disturbance.hold_dt = d.number("hold_dt", s.disturbance.hold_dt);
    } else if (s.disturbance.kind != "zero") {
      throw SpecError(d.sub("kind"), fmt::format("unknown disturbance kind '{}'", s.disturbance.kind));
    }
    d.finish();
  }

  if (root.has("initial_conditions")) {
    const auto& ics = root.at("initial_conditions");
    if (!ics.is_array()) throw SpecError("initial_conditions", "expected an array of states");
    for (std::size_t i = 0; i < ics.size(); ++i) {
      const auto path = fmt::format("initial_conditions[{}]", i);
      if (!ics[i].is_array()) throw SpecError(path, "expected an array of numbers");
      std::vector<double> x;
      for (const auto& v : ics[i]) {
        if (!v.is_number()) throw SpecError(path, "expected numbers");
        x.push_back(v.get<double>());
      }
      s.initial_conditions.push_back(std::move(x));
    }
  }
  if (root.has("simulation")) {
    const auto sim = root.object("simulation");
    s.t_end = sim.number("t_end", s.t_end);
    s.dt = sim.number("dt", s.dt);
    sim.finish();
  }
  if (root.has("grid")) {
    const auto g = root.object("grid");
    const auto& b = g.at("bounds");
    if (!b.is_array()) throw SpecError("grid.bounds", "expected an array of [lo, hi] pairs");
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b[i].is_array() || b[i].size() != 2 || !b[i][0].is_number() || !b[i][1].is_number()) {
        throw SpecError(fmt::format("grid.bounds[{}]", i), "expected [lo, hi]");
      }
      s.grid.bounds.emplace_back(b[i][0].get<double>(), b[i][1].get<double>());
    }
    s.grid.resolution = g.integer("resolution", s.grid.resolution);
    s.grid.input_radius = g.number("input_radius", s.grid.input_radius);
    s.grid.input_norms = g.integer("input_norms", s.grid.input_norms);
    s.grid.input_directions = g.integer("input_directions", s.grid.input_directions);
    g.finish();
  }
  if (root.has("fit")) {
    const auto f = root.object("fit");
    s.fit_family = f.string("family", s.fit_family);
    s.supply_gain = f.number("supply_gain", s.supply_gain);
    f.finish();
  }
  if (root.has("envelope_k")) s.envelope_k = root.numbers("envelope_k");
  s.stages = root.has("stages") ? root.strings("stages") : kStages;
  root.finish();
  return s;
}

bool ExperimentSpec::has_stage(const std::string& st) const {
  return std::find(stages.begin(), stages.end(), st) != stages.end();
}

// ---------------------------------------------------------------- bundled specs

std::vector<std::string> bundled_spec_names() { return {"paper_sec4", "paper_sec4_nominal"}; }

ExperimentSpec bundled_spec(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  s.system.catalog = "single_integrator";
  s.system.dim_x = 2;
  s.system.dim_u = 2;
  s.unsafe = RegionDecl{"disk", {4.0, 6.0}, 2.0, {}, true};
  s.locality = RegionDecl{"disk", {4.0, 6.0}, 3.0, {}, true};
  // The dissipation bound on B holds under the merged law up to |x|_D ≈ 0.85.
  s.issf_locality = RegionDecl{"disk", {4.0, 6.0}, 2.8, {}, true};
  s.robust_region = RegionDecl{"disk", {4.0, 6.0}, 2.1, {}, true};
  s.lyapunov = "x1^2 + x1*x2 + x2^2";
  s.barrier = "4 - (x1 - 4)^2 - (x2 - 6)^2";
  s.iss_alpha1 = FnDecl{"power", {{"p", 2.0}, {"c", 0.5}}};
  s.iss_alpha2 = FnDecl{"power", {{"p", 2.0}, {"c", 1.5}}};
  s.iss_alpha3 = FnDecl{"power", {{"p", 2.0}, {"c", 0.5}}};
  s.iss_gamma = FnDecl{"power", {{"p", 2.0}, {"c", 9.0}}};
  s.theta = 0.5;
  s.epsilon = 0.5;
  s.k1 = 100.0;
  s.k2 = -10.0;
  s.controller = "merged_gradient";
  s.initial_conditions = {{5.0, 8.0}, {7.0, 10.0}, {2.0, 9.5}, {9.0, 4.0}};
  s.t_end = 10.0;
  s.dt = 1e-3;
  s.grid.bounds = {{-10.0, 12.0}, {-10.0, 12.0}};
  s.grid.resolution = 401;
  s.grid.input_radius = 3.0;
  s.grid.input_norms = 4;
  s.grid.input_directions = 16;
  s.fit_family = "quadratic";
  s.supply_gain = 0.5;
  s.envelope_k = {0.0, 0.5, 1.0, 2.0, 3.0};
  s.stages = kStages;
  if (name == "paper_sec4") {
    s.disturbance.kind = "seeded_noise";
    s.disturbance.bound = 3.0;
    s.disturbance.seed = 42;
    s.disturbance.hold_dt = 0.1;
  } else if (name == "paper_sec4_nominal") {
    s.disturbance.kind = "zero";
  } else {
    throw SpecError("", fmt::format("unknown bundled spec '{}' (available: {})", name,
                                    fmt::join(bundled_spec_names(), ", ")));
  }
  return s;
}

ExperimentSpec load_spec(const std::string& ref) {
  const std::string prefix = "bundled:";
  if (ref.rfind(prefix, 0) == 0) return bundled_spec(ref.substr(prefix.size()));
  std::ifstream f(ref, std::ios::binary);
  if (!f) throw SpecError("", fmt::format("cannot read spec file '{}'", ref));
  std::stringstream ss;
  ss << f.rdbuf();
  return ExperimentSpec::from_json(ss.str());
}

// ---------------------------------------------------------------- model building

MonotoneFn make_fn(const FnDecl& d) {
  auto param = [&](const std::string& k, std::optional<double> fallback = std::nullopt) {
    const auto it = d.params.find(k);
    if (it != d.params.end()) return it->second;
    if (fallback) return *fallback;
    throw SpecError(d.name, fmt::format("missing parameter '{}'", k));
  };
  try {
    if (d.name == "identity") return MonotoneFn::identity();
    if (d.name == "linear") return MonotoneFn::linear(param("c"));
    if (d.name == "power") return MonotoneFn::power(param("p"), param("c", 1.0));
    if (d.name == "poly_odd") return MonotoneFn::poly_odd(param("a"), param("b"));
  } catch (const std::invalid_argument& e) {
    throw SpecError(d.name, e.what());
  }
  throw SpecError(d.name, "not in the comparison-function catalog");
}

Region make_region(const RegionDecl& d) {
  auto center = [&] { return Eigen::Map<const Vec>(d.center.data(), static_cast<Eigen::Index>(d.center.size())).eval(); };
  if (d.shape == "disk") {
    if (d.center.size() != 2) throw SpecError("center", "a disk needs a 2-vector center");
    return Region::ball(center(), d.radius, d.open);
  }
  if (d.shape == "ball") return Region::ball(center(), d.radius, d.open);
  if (d.shape == "ball_complement") return Region::ball_complement(center(), d.radius, d.open);
  if (d.shape == "disk_union") {
    std::vector<Ball> members;
    for (const auto& m : d.members) {
      if (m.shape != "disk" && m.shape != "ball") {
        throw SpecError("members", "union members must be disks or balls");
      }
      members.push_back(Ball{Eigen::Map<const Vec>(m.center.data(), static_cast<Eigen::Index>(m.center.size())), m.radius});
    }
    return Region::ball_union(std::move(members), d.open);
  }
  throw SpecError("shape", fmt::format("unknown shape '{}'", d.shape));
}

ControlAffineSystem make_system(const SystemDecl& d) {
  if (!d.catalog.empty()) {
    if (d.catalog == "single_integrator") {
      if (d.dim_u != d.dim_x) throw SpecError("system.dim_u", "single_integrator needs dim_u = dim_x");
      return ControlAffineSystem::single_integrator(d.dim_x);
    }
    throw SpecError("system.catalog", fmt::format("unknown system '{}'", d.catalog));
  }
  if (static_cast<int>(d.f.size()) != d.dim_x) {
    throw SpecError("system.f", fmt::format("expected {} expressions", d.dim_x));
  }
  if (static_cast<int>(d.g.size()) != d.dim_x) {
    throw SpecError("system.g", fmt::format("expected {} rows", d.dim_x));
  }
  std::vector<Expression> f;
  for (std::size_t i = 0; i < d.f.size(); ++i) {
    try {
      f.push_back(Expression::parse(d.f[i], d.dim_x));
    } catch (const SpecError& e) {
      throw SpecError(fmt::format("system.f[{}]", i), e.what());
    }
  }
  std::vector<std::vector<Expression>> g;
  for (std::size_t i = 0; i < d.g.size(); ++i) {
    if (static_cast<int>(d.g[i].size()) != d.dim_u) {
      throw SpecError(fmt::format("system.g[{}]", i), fmt::format("expected {} entries", d.dim_u));
    }
    g.emplace_back();
    for (std::size_t k = 0; k < d.g[i].size(); ++k) {
      try {
        g.back().push_back(Expression::parse(d.g[i][k], d.dim_x));
      } catch (const SpecError& e) {
        throw SpecError(fmt::format("system.g[{}][{}]", i, k), e.what());
      }
    }
  }
  const int n = d.dim_x;
  const int m = d.dim_u;
  return ControlAffineSystem(
      n, m,
      [f, n](const Vec& x) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = f[i](x);
        return v;
      },
      [g, n, m](const Vec& x) {
        Mat G(n, m);
        for (int i = 0; i < n; ++i) {
          for (int k = 0; k < m; ++k) G(i, k) = g[i][k](x);
        }
        return G;
      },
      fmt::format("f = ({}), g = [...]", fmt::join(d.f, ", ")));
}

DisturbanceSignal make_disturbance(const DisturbanceDecl& d, int dim_u) {
  auto vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  if (d.kind == "zero") return DisturbanceSignal::zero(dim_u);
  if (d.kind == "constant") {
    if (static_cast<int>(d.value.size()) != dim_u) throw SpecError("disturbance.value", "wrong length");
    return DisturbanceSignal::constant(vec(d.value));
  }
  if (d.kind == "sinusoid") {
    if (static_cast<int>(d.amplitude.size()) != dim_u || d.frequency.size() != d.amplitude.size() ||
        d.phase.size() != d.amplitude.size()) {
      throw SpecError("disturbance", "amplitude, frequency and phase need one entry per input");
    }
    return DisturbanceSignal::sinusoid(vec(d.amplitude), vec(d.frequency), vec(d.phase));
  }
  if (d.kind == "seeded_noise") {
    try {
      return DisturbanceSignal::seeded_noise(dim_u, d.bound, d.seed, d.hold_dt);
    } catch (const std::invalid_argument& e) {
      throw SpecError("disturbance", e.what());
    }
  }
  throw SpecError("disturbance.kind", fmt::format("unknown kind '{}'", d.kind));
}

ScalarField make_field(const std::string& expression, int dim, const std::string& label) {
  Expression e = Expression::parse(expression, dim);
  ScalarField field;
  field.value = [e](const Vec& x) { return e(x); };
  field.description = fmt::format("{} = {}", label, expression);
  try {
    std::vector<Expression> partials;
    for (int i = 0; i < dim; ++i) partials.push_back(e.derivative(i));
    field.gradient = [partials](const Vec& x) {
      Vec g(static_cast<Eigen::Index>(partials.size()));
      for (std::size_t i = 0; i < partials.size(); ++i) g(static_cast<Eigen::Index>(i)) = partials[i](x);
      return g;
    };
  } catch (const std::invalid_argument&) {
    // No symbolic derivative: the field falls back to finite differences.
  }
  return field;
}

std::vector<std::pair<std::string, ScalarField>> ExperimentModel::fields() const {
  std::vector<std::pair<std::string, ScalarField>> out{{"V", V}};
  if (B) out.emplace_back("B", *B);
  if (Bt) out.emplace_back("Bt", Bt->as_field());
  if (W) out.emplace_back("W", W->as_field());
  return out;
}

namespace {

SafetyGeometry make_geometry(const RegionDecl& unsafe, const RegionDecl& locality,
                             const std::string& path) {
  try {
    return SafetyGeometry::make(make_region(unsafe), make_region(locality));
  } catch (const SpecError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SpecError(path, e.what());
  }
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExperimentModel build_model(const ExperimentSpec& spec) {
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    if (std::find(kStages.begin(), kStages.end(), spec.stages[i]) == kStages.end()) {
      throw SpecError(fmt::format("stages[{}]", i), fmt::format("unknown stage '{}'", spec.stages[i]));
    }
  }
  if (!(spec.theta > 0.0 && spec.theta < 1.0)) throw SpecError("gains.theta", "must lie in (0, 1)");
  if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0)) throw SpecError("gains.epsilon", "must lie in (0, 1)");
  if (!(spec.t_end > 0.0)) throw SpecError("simulation.t_end", "must be positive");
  if (!(spec.dt > 0.0)) throw SpecError("simulation.dt", "must be positive");
  if (!(spec.supply_gain > 0.0)) throw SpecError("fit.supply_gain", "must be positive");
  try {
    parse_envelope_family(spec.fit_family);
  } catch (const std::invalid_argument& e) {
    throw SpecError("fit.family", e.what());
  }
  for (double k : spec.envelope_k) {
    if (!(k >= 0.0)) throw SpecError("envelope_k", "entries must be nonnegative");
  }

  ControlAffineSystem plant = make_system(spec.system);
  const int n = plant.dim_x();
  SafetyGeometry geometry = make_geometry(spec.unsafe, spec.locality, "geometry");
  SafetyGeometry issf_geometry =
      spec.issf_locality ? make_geometry(spec.unsafe, *spec.issf_locality, "geometry.issf_locality")
                         : geometry;
  if (geometry.unsafe.dim() != n) throw SpecError("geometry.unsafe", "dimension differs from the state");

  for (std::size_t i = 0; i < spec.initial_conditions.size(); ++i) {
    if (static_cast<int>(spec.initial_conditions[i].size()) != n) {
      throw SpecError(fmt::format("initial_conditions[{}]", i), fmt::format("expected {} coordinates", n));
    }
  }
  if (static_cast<int>(spec.grid.bounds.size()) != n) {
    throw SpecError("grid.bounds", fmt::format("expected {} intervals", n));
  }
  for (const auto& [lo, hi] : spec.grid.bounds) {
    if (!(hi > lo)) throw SpecError("grid.bounds", "each interval needs lo < hi");
  }
  if (spec.grid.resolution < 2) throw SpecError("grid.resolution", "must be at least 2");

  auto field = [&](const std::string& text, const std::string& path, const std::string& label) {
    try {
      return make_field(text, n, label);
    } catch (const SpecError& e) {
      throw SpecError(path, e.what());
    }
  };
  ScalarField V = field(spec.lyapunov, "functions.V", "V");
  std::optional<ScalarField> B;
  std::optional<CompactBarrier> Bt;
  std::optional<MergedFunction> W;
  if (!spec.barrier.empty()) {
    B = field(spec.barrier, "functions.B", "B");
    try {
      Bt = compact_support_transform(*B, geometry.unsafe, geometry.locality);
      W = merged_W(V, *Bt, spec.k1, spec.k2);
    } catch (const UnsupportedShapeError& e) {
      if (spec.controller == "merged_gradient") throw SpecError("functions.B", e.what());
    } catch (const std::invalid_argument& e) {
      throw SpecError("gains.k1", e.what());
    }
  }

  std::optional<FeedbackLaw> law;
  if (spec.controller == "merged_gradient") {
    if (!W) throw SpecError("controller", "merged_gradient needs a barrier B");
    law = gradient_control(*W);
  } else if (spec.controller == "lyapunov_gradient") {
    law = lyapunov_gradient_control(V);
  } else if (spec.controller != "none") {
    throw SpecError("controller", fmt::format("unknown controller '{}'", spec.controller));
  }
  if (law && plant.dim_u() == 0) throw SpecError("controller", "the system has no inputs");
  ControlAffineSystem loop = law ? closed_loop(plant, *law) : plant;

  DisturbanceSignal disturbance = make_disturbance(spec.disturbance, plant.dim_u());

  GridSpec grid;
  for (const auto& [lo, hi] : spec.grid.bounds) grid.bounds.push_back({lo, hi});
  grid.resolution = spec.grid.resolution;
  if (plant.dim_u() > 0) {
    try {
      grid.input_samples = input_ball_samples(plant.dim_u(), spec.grid.input_radius,
                                              spec.grid.input_norms, spec.grid.input_directions);
    } catch (const std::invalid_argument& e) {
      throw SpecError("grid", e.what());
    }
  }

  return ExperimentModel{spec,
                         std::move(plant),
                         std::move(geometry),
                         std::move(issf_geometry),
                         std::move(V),
                         std::move(B),
                         std::move(Bt),
                         std::move(W),
                         std::move(law),
                         std::move(loop),
                         std::move(disturbance),
                         std::move(grid)};
}

// ---------------------------------------------------------------- stages

CertificationOutcome run_certification(const ExperimentModel& m) {
  CertificationOutcome out;
  const auto family = parse_envelope_family(m.spec.fit_family);
  const auto& D = m.geometry.unsafe;

  const auto outer = closed_loop(m.plant, lyapunov_gradient_control(m.V));
  out.reports.push_back(check_iss_lyapunov(m.V, outer, make_fn(m.spec.iss_alpha1),
                                           make_fn(m.spec.iss_alpha2), make_fn(m.spec.iss_alpha3),
                                           make_fn(m.spec.iss_gamma), m.grid));
  if (!m.B) {
    out.notes.push_back("no barrier declared: barrier checks skipped");
    return out;
  }
  const auto& B = *m.B;

  if (m.geometry.locality.kind() == Region::Kind::ball) {
    const auto& x = m.geometry.locality.balls().front();
    const Region initial = Region::ball_complement(x.center, x.radius, true);
    out.reports.push_back(check_barrier_certificate(B, m.loop, D, initial, m.grid));
  }

  // Strict barrier rate: half the smallest measured decrease ratio on X'\D.
  GridSpec band = m.grid;
  band.inclusion = m.issf_geometry.locality;
  band.exclusion = D;
  double ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < band.point_count(); ++i) {
    const Vec x = band.point(i);
    if (!contains(x, *band.inclusion) || contains(x, D)) continue;
    const double d = distance_to_set(x, D);
    if (d <= kBoundaryExclusion) continue;
    ratio = std::min(ratio, -B.grad(x).dot(m.loop.drift(x)) / d);
  }
  const bool measurable = std::isfinite(ratio) && ratio > 0.0;
  const double rate = measurable ? 0.5 * ratio : 1e-3;
  out.notes.push_back(measurable
                          ? fmt::format("strict barrier rate alpha(s) = {:.6g} s (half the measured minimum ratio)", rate)
                          : "strict barrier: no positive decrease ratio measured; alpha(s) = 1e-3 s");
  auto strict = check_strict_barrier(B, m.loop, D, MonotoneFn::linear(rate), band);
  out.reports.push_back(std::move(strict));

  GridSpec robust = m.grid;
  robust.inclusion = m.spec.robust_region ? make_region(*m.spec.robust_region) : m.geometry.locality;
  robust.exclusion = D;
  out.reports.push_back(check_robust_barrier(B, m.plant, robust));

  const auto fit = fit_issf_barrier(B, m.loop, D, m.issf_geometry.locality, m.grid, family,
                                    m.spec.supply_gain);
  out.notes.insert(out.notes.end(), fit.notes.begin(), fit.notes.end());
  auto issf = check_issf_barrier(B, m.loop, D, m.issf_geometry.locality, fit.alphas[0],
                                 fit.alphas[1], fit.alphas[2], fit.alphas[3], m.grid);
  issf.notes.push_back("envelopes fitted from dense grid samples (derived)");
  out.reports.push_back(std::move(issf));

  if (m.W) {
    const auto Wf = m.W->as_field();
    auto mf = fit_merged_envelopes(Wf, m.loop, D, m.geometry.locality, m.grid, family,
                                   m.spec.supply_gain);
    out.notes.insert(out.notes.end(), mf.notes.begin(), mf.notes.end());
    if (mf.c > 0.0) {
      auto rep = check_merged_W(Wf, m.loop, D, m.geometry.locality, mf.c, mf.envelopes, m.grid);
      rep.notes.push_back(mf.feasible ? "envelopes fitted from dense grid samples (derived)"
                                      : "some envelopes could not be fitted; see notes");
      rep.notes.insert(rep.notes.end(), mf.notes.begin(), mf.notes.end());
      out.reports.push_back(std::move(rep));
    } else {
      out.notes.push_back(fmt::format("merged W: c = {:.6g} is not positive; check skipped", mf.c));
    }
    out.merged_fit = std::move(mf);
  }
  return out;
}

GainsOutcome run_gains(const ExperimentModel& m) {
  if (!m.B) throw std::invalid_argument("gains: no barrier declared");
  const auto family = parse_envelope_family(m.spec.fit_family);
  auto fit = fit_issf_barrier(*m.B, m.loop, m.geometry.unsafe, m.issf_geometry.locality, m.grid,
                              family, m.spec.supply_gain);
  auto bundle = build_gains(fit.alphas[0], fit.alphas[1], fit.alphas[2], fit.alphas[3],
                            m.spec.theta, m.spec.epsilon, m.issf_geometry, m.spec.dt);
  auto iss = build_iss_gains(make_fn(m.spec.iss_alpha1), make_fn(m.spec.iss_alpha2),
                             make_fn(m.spec.iss_alpha3), make_fn(m.spec.iss_gamma), m.spec.theta);
  auto envelope = safety_envelope(bundle, m.spec.envelope_k);
  std::vector<AdmissibilityWitness> witnesses;
  for (const auto& x0 : m.spec.initial_conditions) {
    witnesses.push_back(admissibility_witness(bundle, *m.B, iss, to_vec(x0),
                                              m.disturbance.linf_bound(), m.issf_geometry));
  }
  return GainsOutcome{std::move(fit), std::move(bundle), std::move(iss), std::move(envelope),
                      std::move(witnesses)};
}

std::vector<Trajectory> run_simulations(const ExperimentModel& m) {
  const auto& ics = m.spec.initial_conditions;
  std::vector<Trajectory> out(ics.size());
  std::vector<std::exception_ptr> errors(ics.size());
  auto job = [&](std::size_t i) {
    try {
      out[i] = integrate(m.plant, to_vec(ics[i]), m.disturbance, m.law, m.spec.t_end, m.spec.dt,
                         m.geometry);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), ics.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < ics.size(); ++i) job(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < ics.size(); i = next++) job(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

std::string RunManifest::digest() const {
  std::string acc = spec_hash + "|" + std::to_string(seed) + "|" + version;
  for (const auto& f : files) acc += "|" + f.name + ":" + f.hash;
  return fnv1a_hex(acc);
}

std::string RunManifest::to_json() const {
  Json j;
  j["spec_hash"] = spec_hash;
  j["seed"] = seed;
  j["version"] = version;
  Json fs = Json::array();
  for (const auto& f : files) fs.push_back({{"name", f.name}, {"fnv1a64", f.hash}});
  j["files"] = fs;
  Json st = Json::array();
  for (const auto& s : stages) {
    st.push_back({{"stage", s.stage}, {"ok", s.ok}, {"message", s.message}, {"seconds", s.seconds}});
  }
  j["stages"] = st;
  j["digest"] = digest();
  return j.dump(2) + "\n";
}

namespace {

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

class OutputSink {
 public:
  explicit OutputSink(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    write_text_file(dir_ / name, contents);
    files_.push_back({name, fnv1a_hex(contents)});
  }
  void record_existing(const std::string& name) {
    std::ifstream f(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    files_.push_back({name, fnv1a_hex(ss.str())});
  }
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<OutputFile>& files() { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<OutputFile> files_;
};

Json gains_json(const ExperimentModel& m, const GainsOutcome& g) {
  Json j;
  j["theta"] = g.bundle.theta;
  j["epsilon"] = g.bundle.epsilon;
  j["kappa"] = g.bundle.kappa;
  j["delta"] = g.bundle.delta;
  j["sigma"] = g.bundle.sigma.label();
  j["alphas"] = {g.bundle.alphas[0].label(), g.bundle.alphas[1].label(),
                 g.bundle.alphas[2].label(), g.bundle.alphas[3].label()};
  j["fit_feasible"] = g.fit.feasible;
  j["fit_notes"] = g.fit.notes;
  j["mu"] = g.bundle.mu.label;
  j["phi"] = g.bundle.phi.label();
  Json phi_table = Json::array();
  for (double k : m.spec.envelope_k) phi_table.push_back({{"k", k}, {"phi", g.bundle.phi(k)}});
  j["phi_table"] = phi_table;
  j["iss"] = {{"construction", g.iss.construction}, {"gamma", g.iss.gamma.label()}};
  Json ics = Json::array();
  for (std::size_t i = 0; i < g.witnesses.size(); ++i) {
    const auto& w = g.witnesses[i];
    const Vec x0 = to_vec(m.spec.initial_conditions[i]);
    const double d0 = distance_to_set(x0, m.issf_geometry.unsafe);
    ics.push_back({{"x0", vec_to_json(x0)},
                   {"dist_D", d0},
                   {"mu0", g.bundle.mu(d0, 0.0)},
                   {"phi_linf", g.bundle.phi(m.disturbance.linf_bound())},
                   {"rho_x0", w.rho_at(x0)},
                   {"D1", w.d1},
                   {"D2", w.d2},
                   {"mu_tilde0", w.mu_tilde0},
                   {"eta", w.eta}});
  }
  j["initial_conditions"] = ics;
  return j;
}

}  // namespace

RunManifest run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.spec_hash = fnv1a_hex(spec.to_json());
  manifest.seed = spec.disturbance.seed;
  OutputSink sink(out_dir);
  sink.write("spec.json", spec.to_json());

  const ExperimentModel model = build_model(spec);
  std::optional<GainsOutcome> gains;
  std::optional<std::vector<Trajectory>> trajs;

  auto stage = [&](const std::string& name, bool ready, const std::string& blocked,
                   const std::function<void()>& body) {
    if (!spec.has_stage(name)) return;
    StageRecord rec;
    rec.stage = name;
    const auto t0 = std::chrono::steady_clock::now();
    if (!ready) {
      rec.ok = false;
      rec.message = "skipped: " + blocked;
    } else {
      try {
        body();
        rec.message = "ok";
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.message = e.what();
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.stages.push_back(std::move(rec));
  };

  stage("certify", true, "", [&] {
    auto cert = run_certification(model);
    Json reports = Json::array();
    std::string text;
    for (const auto& r : cert.reports) {
      reports.push_back(Json::parse(r.to_json()));
      text += r.summary();
    }
    Json j;
    j["reports"] = reports;
    j["notes"] = cert.notes;
    if (cert.merged_fit) {
      j["merged_fit"] = {{"c", cert.merged_fit->c},
                         {"boundary_min", cert.merged_fit->boundary_min},
                         {"boundary_max", cert.merged_fit->boundary_max},
                         {"feasible", cert.merged_fit->feasible}};
    }
    for (const auto& n : cert.notes) text += "note: " + n + "\n";
    sink.write("certificates.json", j.dump(2) + "\n");
    sink.write("certificates.txt", text);
  });

  stage("gains", model.B.has_value(), "no barrier declared", [&] {
    gains = run_gains(model);
    sink.write("gains.json", gains_json(model, *gains).dump(2) + "\n");
    sink.write("envelope.csv", envelope_csv(gains->envelope));
  });

  stage("simulate", true, "", [&] {
    trajs = run_simulations(model);
    for (std::size_t i = 0; i < trajs->size(); ++i) {
      sink.write(fmt::format("trajectory_{}.csv", i), trajectory_csv((*trajs)[i]));
      sink.write(fmt::format("events_{}.csv", i), events_csv((*trajs)[i]));
    }
  });

  stage("issf", gains && trajs, "needs the gains and simulate stages", [&] {
    Json summary = Json::array();
    for (std::size_t i = 0; i < trajs->size(); ++i) {
      const auto& tr = (*trajs)[i];
      const auto ev = evaluate_issf_inequality(gains->bundle, tr);
      const auto adm = admissibility_check(gains->bundle, tr.states.front(), model.disturbance,
                                           model.issf_geometry, spec.t_end, spec.dt);
      sink.write(fmt::format("issf_residual_{}.csv", i), residual_csv(ev));
      summary.push_back({{"trajectory", i},
                         {"x0", vec_to_json(tr.states.front())},
                         {"admissible", adm.admissible},
                         {"verdict", to_string(ev.verdict)},
                         {"min_residual", ev.min_residual},
                         {"min_dist_D", tr.min_dist_to_D()},
                         {"final_norm", tr.norm_x.back()},
                         {"max_branch_mismatch", tr.max_branch_mismatch}});
    }
    sink.write("issf_summary.json", summary.dump(2) + "\n");
  });

  stage("export", true, "", [&] {
    const std::vector<Trajectory> none;
    for (const auto& name : emit_plot_data(out_dir, trajs ? *trajs : none, model.geometry,
                                           model.grid.bounds)) {
      sink.record_existing(name);
    }
    if (model.plant.dim_x() == 2) {
      for (const auto& [name, field] : model.fields()) {
        if (name == "B") continue;
        sink.write(fmt::format("field_{}.csv", name), field_grid_csv(field, model.grid.bounds, 111));
      }
    }
  });

  manifest.files = sink.files();
  write_text_file(out_dir / "manifest.json", manifest.to_json());
  return manifest;
}

}  // namespace issf
