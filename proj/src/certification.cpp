#include "issf/certification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "issf/errors.hpp"
#include "issf/random.hpp"

namespace issf {

std::size_t GridSpec::point_count() const {
  if (resolution < 2) throw std::invalid_argument("GridSpec: resolution must be at least 2");
  if (bounds.empty()) throw std::invalid_argument("GridSpec: empty bounds");
  std::size_t n = 1;
  for (std::size_t i = 0; i < bounds.size(); ++i) n *= static_cast<std::size_t>(resolution);
  return n;
}

Vec GridSpec::point(std::size_t flat_index) const {
  Vec x(static_cast<Eigen::Index>(bounds.size()));
  const auto r = static_cast<std::size_t>(resolution);
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const std::size_t k = flat_index % r;
    flat_index /= r;
    const auto& iv = bounds[d];
    x(static_cast<Eigen::Index>(d)) =
        k + 1 == r ? iv.hi : iv.lo + (iv.hi - iv.lo) * static_cast<double>(k) / (resolution - 1);
  }
  return x;
}

std::vector<Vec> input_ball_samples(int dim_u, double radius, int n_norms, int n_dirs) {
  if (dim_u < 1 || n_norms < 1 || n_dirs < 1 || !(radius >= 0.0)) {
    throw std::invalid_argument("input_ball_samples: bad arguments");
  }
  std::vector<Vec> dirs;
  if (dim_u == 1) {
    dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
  } else if (dim_u == 2) {
    for (int k = 0; k < n_dirs; ++k) {
      const double a = 2.0 * std::numbers::pi * k / n_dirs;
      dirs.push_back(Vec{{std::cos(a), std::sin(a)}});
    }
  } else {
    SplitMix64 rng(0xD1Aull);
    for (int k = 0; k < n_dirs; ++k) {
      Vec d(dim_u);
      for (int j = 0; j < dim_u; ++j) d(j) = rng.normal();
      dirs.push_back(d.normalized());
    }
  }
  std::vector<Vec> out{Vec::Zero(dim_u)};
  for (int i = 1; i <= n_norms; ++i) {
    const double r = radius * i / n_norms;
    for (const auto& d : dirs) out.push_back(r * d);
  }
  return out;
}

const char* to_string(Verdict v) { return v == Verdict::pass ? "pass" : "fail"; }

namespace {

constexpr double kRelTol = 1e-12;

struct MarginParts {
  double margin;
  double scale;
};

MarginParts margin_parts(double base, const Vec& coef, const std::optional<Vec>& v,
                         const std::optional<MonotoneFn>& supply) {
  double m = base;
  double scale = std::max(1.0, std::abs(base));
  if (v) {
    if (coef.size() > 0) {
      const double cv = coef.dot(*v);
      m -= cv;
      scale = std::max(scale, std::abs(cv));
    }
    if (supply) {
      const double s = (*supply)(v->norm());
      m += s;
      scale = std::max(scale, std::abs(s));
    }
  }
  return {m, scale};
}

bool is_violation(const MarginParts& p, bool strict) {
  return strict ? !(p.margin > 0.0) : p.margin < -kRelTol * p.scale;
}

bool lex_less(const Vec& a, const std::optional<Vec>& av, const Vec& b,
              const std::optional<Vec>& bv) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  if (av && bv) {
    for (Eigen::Index i = 0; i < av->size(); ++i) {
      if ((*av)(i) != (*bv)(i)) return (*av)(i) < (*bv)(i);
    }
  }
  return false;
}

struct Candidate {
  double margin = std::numeric_limits<double>::infinity();
  Vec x;
  std::optional<Vec> v;
  bool set = false;

  void offer(double m, const Vec& px, const std::optional<Vec>& pv) {
    if (!set || m < margin || (m == margin && lex_less(px, pv, x, v))) {
      margin = m;
      x = px;
      v = pv;
      set = true;
    }
  }
  void merge(const Candidate& o) {
    if (o.set) offer(o.margin, o.x, o.v);
  }
};

struct Accumulator {
  Candidate worst;
  Candidate worst_violation;
  std::size_t count = 0;

  void merge(const Accumulator& o) {
    worst.merge(o.worst);
    worst_violation.merge(o.worst_violation);
    count += o.count;
  }
};

std::string vec_str(const Vec& v) {
  return fmt::format("({:.6g})", fmt::join(v.data(), v.data() + v.size(), ", "));
}

}  // namespace

double InequalityFamily::margin(const Vec& x, const std::optional<Vec>& v) const {
  double base = 0.0;
  Vec coef;
  eval(x, base, coef);
  return margin_parts(base, coef, v, supply).margin;
}

bool InequalityFamily::violated(const Vec& x, const std::optional<Vec>& v) const {
  double base = 0.0;
  Vec coef;
  eval(x, base, coef);
  return is_violation(margin_parts(base, coef, v, supply), strict);
}

CertificateReport run_families(const std::string& condition_id,
                               const std::vector<InequalityFamily>& families,
                               const GridSpec& grid) {
  const std::size_t total = grid.point_count();
  const auto& inputs = grid.input_samples;
  std::vector<std::vector<double>> supply(families.size());
  for (std::size_t f = 0; f < families.size(); ++f) {
    if (!families[f].supply) continue;
    for (const auto& v : inputs) supply[f].push_back((*families[f].supply)(v.norm()));
  }

  auto work = [&](std::size_t begin, std::size_t end, std::vector<Accumulator>& acc) {
    double base = 0.0;
    Vec coef;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec x = grid.point(idx);
      if (grid.exclusion && contains(x, *grid.exclusion)) continue;
      if (grid.inclusion && !contains(x, *grid.inclusion)) continue;
      for (std::size_t f = 0; f < families.size(); ++f) {
        const auto& fam = families[f];
        if (fam.applies && !fam.applies(x)) continue;
        coef.resize(0);
        fam.eval(x, base, coef);
        auto& a = acc[f];
        if (inputs.empty() || (coef.size() == 0 && !fam.supply)) {
          const MarginParts p{base, std::max(1.0, std::abs(base))};
          ++a.count;
          a.worst.offer(p.margin, x, std::nullopt);
          if (is_violation(p, fam.strict)) a.worst_violation.offer(p.margin, x, std::nullopt);
          continue;
        }
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          double m = base;
          double scale = std::max(1.0, std::abs(base));
          if (coef.size() > 0) {
            const double cv = coef.dot(inputs[j]);
            m -= cv;
            scale = std::max(scale, std::abs(cv));
          }
          if (fam.supply) {
            m += supply[f][j];
            scale = std::max(scale, std::abs(supply[f][j]));
          }
          ++a.count;
          if (m <= a.worst.margin) a.worst.offer(m, x, inputs[j]);
          if (is_violation({m, scale}, fam.strict)) a.worst_violation.offer(m, x, inputs[j]);
        }
      }
    }
  };

  const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 16u));
  std::vector<std::vector<Accumulator>> partial(workers,
                                                std::vector<Accumulator>(families.size()));
  if (workers == 1) {
    work(0, total, partial[0]);
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (total + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = std::min(total, w * chunk);
      const std::size_t e = std::min(total, b + chunk);
      threads.emplace_back(work, b, e, std::ref(partial[w]));
    }
    for (auto& t : threads) t.join();
  }

  CertificateReport rep;
  rep.condition_id = condition_id;
  rep.window = grid.bounds;
  rep.resolution = grid.resolution;
  rep.input_sample_count = inputs.size();
  rep.worst_margin = std::numeric_limits<double>::infinity();
  const PartReport* lead = nullptr;
  for (std::size_t f = 0; f < families.size(); ++f) {
    Accumulator acc;
    for (const auto& p : partial) acc.merge(p[f]);
    PartReport part;
    part.id = families[f].id;
    part.statement = families[f].statement;
    part.checked_count = acc.count;
    part.worst_margin = acc.worst.margin;
    const Candidate& shown = acc.worst_violation.set ? acc.worst_violation : acc.worst;
    part.verdict = acc.worst_violation.set ? Verdict::fail : Verdict::pass;
    if (shown.set) {
      part.witness_point = shown.x;
      part.witness_input = shown.v;
    }
    rep.checked_count += acc.count;
    rep.parts.push_back(std::move(part));
  }
  for (const auto& part : rep.parts) {
    rep.worst_margin = std::min(rep.worst_margin, part.worst_margin);
    const bool better =
        !lead || (part.verdict == Verdict::fail && lead->verdict == Verdict::pass) ||
        (part.verdict == lead->verdict && part.worst_margin < lead->worst_margin);
    if (part.checked_count > 0 && better) lead = &part;
  }
  if (lead) {
    rep.verdict = lead->verdict;
    rep.witness_point = lead->witness_point;
    rep.witness_input = lead->witness_input;
  }
  rep.notes.push_back(fmt::format(
      "checked on the window {} at resolution {}; behaviour outside the window is not tested",
      [&] {
        std::string s;
        for (const auto& iv : grid.bounds) s += fmt::format("[{}, {}]", iv.lo, iv.hi);
        return s;
      }(),
      grid.resolution));
  return rep;
}

const PartReport* CertificateReport::part(const std::string& id) const {
  for (const auto& p : parts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

namespace {

nlohmann::ordered_json vec_json(const Vec& v) {
  auto arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

nlohmann::ordered_json margin_json(double m) {
  if (std::isfinite(m)) return m;
  return nullptr;
}

}  // namespace

std::string CertificateReport::to_json() const {
  nlohmann::ordered_json j;
  j["condition_id"] = condition_id;
  j["verdict"] = to_string(verdict);
  j["worst_margin"] = margin_json(worst_margin);
  j["witness"] = vec_json(witness_point);
  j["witness_input"] = witness_input ? vec_json(*witness_input) : nlohmann::ordered_json(nullptr);
  j["checked_count"] = checked_count;
  auto window_json = nlohmann::ordered_json::array();
  for (const auto& iv : window) window_json.push_back({iv.lo, iv.hi});
  j["grid"] = {{"window", window_json},
               {"resolution", resolution},
               {"input_samples", input_sample_count}};
  auto parts_json = nlohmann::ordered_json::array();
  for (const auto& p : parts) {
    parts_json.push_back({{"id", p.id},
                          {"statement", p.statement},
                          {"verdict", to_string(p.verdict)},
                          {"worst_margin", margin_json(p.worst_margin)},
                          {"witness", vec_json(p.witness_point)},
                          {"witness_input", p.witness_input ? vec_json(*p.witness_input)
                                                            : nlohmann::ordered_json(nullptr)},
                          {"checked_count", p.checked_count}});
  }
  j["parts"] = parts_json;
  j["notes"] = notes;
  return j.dump(2);
}

std::string CertificateReport::summary() const {
  std::string out = fmt::format("{:<28} {:<6} {:>14}  {}\n", condition_id, to_string(verdict),
                                fmt::format("{:.6g}", worst_margin), vec_str(witness_point));
  for (const auto& p : parts) {
    out += fmt::format("  {:<26} {:<6} {:>14}  {} [{} checks]\n", p.id, to_string(p.verdict),
                       fmt::format("{:.6g}", p.worst_margin), vec_str(p.witness_point),
                       p.checked_count);
  }
  return out;
}

void require_field_gradient(const ScalarField& field, const GridSpec& grid,
                            const std::string& what) {
  require_gradient(field, grid.bounds, what);
}

namespace {

auto off_unsafe(const Region& unsafe) {
  return [unsafe](const Vec& x) { return distance_to_set(x, unsafe) > kBoundaryExclusion; };
}

// Dissipation family: margin = −rate(x) − ∇F·f − (gᵀ∇F)·v + supply(‖v‖).
InequalityFamily dissipation(std::string id, std::string statement, const ScalarField& F,
                             const ControlAffineSystem& sys,
                             std::function<double(const Vec&)> rate,
                             std::optional<MonotoneFn> supply,
                             std::function<bool(const Vec&)> applies) {
  InequalityFamily fam;
  fam.id = std::move(id);
  fam.statement = std::move(statement);
  fam.applies = std::move(applies);
  fam.supply = std::move(supply);
  fam.eval = [F, sys, rate = std::move(rate)](const Vec& x, double& base, Vec& coef) {
    const Vec grad = F.grad(x);
    base = -rate(x) - grad.dot(sys.drift(x));
    if (sys.dim_u() > 0) coef = sys.input_matrix(x).transpose() * grad;
  };
  return fam;
}

InequalityFamily state_only(std::string id, std::string statement,
                            std::function<double(const Vec&)> margin,
                            std::function<bool(const Vec&)> applies, bool strict = false) {
  InequalityFamily fam;
  fam.id = std::move(id);
  fam.statement = std::move(statement);
  fam.applies = std::move(applies);
  fam.strict = strict;
  fam.eval = [margin = std::move(margin)](const Vec& x, double& base, Vec&) { base = margin(x); };
  return fam;
}

void require_all(const std::vector<const MonotoneFn*>& fs, FnClass cls, const std::string& what) {
  for (std::size_t i = 0; i < fs.size(); ++i) {
    require_class(*fs[i], cls, fmt::format("{} alpha{}", what, i + 1));
  }
}

}  // namespace

CertificateReport check_iss_lyapunov(const ScalarField& V, const ControlAffineSystem& sys,
                                     const MonotoneFn& a1, const MonotoneFn& a2,
                                     const MonotoneFn& a3, const MonotoneFn& gamma,
                                     const GridSpec& grid) {
  require_field_gradient(V, grid, "V");
  std::vector<InequalityFamily> fams;
  fams.push_back(state_only(
      "sandwich_lower", "alpha1(|x|) <= V(x)",
      [V, a1](const Vec& x) { return V(x) - a1(x.norm()); }, nullptr));
  fams.push_back(state_only(
      "sandwich_upper", "V(x) <= alpha2(|x|)",
      [V, a2](const Vec& x) { return a2(x.norm()) - V(x); }, nullptr));
  fams.push_back(dissipation(
      "dissipation", "dV/dx (f + g v) <= -alpha3(|x|) + gamma(|v|)", V, sys,
      [a3](const Vec& x) { return a3(x.norm()); }, gamma, nullptr));
  auto rep = run_families("iss_lyapunov", fams, grid);
  if (grid.input_samples.empty()) rep.notes.push_back("no input samples: autonomous part only");
  return rep;
}

CertificateReport check_barrier_certificate(const ScalarField& B, const ControlAffineSystem& sys,
                                            const Region& unsafe, const Region& initial,
                                            const GridSpec& grid, double level_band) {
  require_field_gradient(B, grid, "B");
  std::vector<InequalityFamily> fams;
  fams.push_back(state_only(
      "positive_on_unsafe", "B(x) > 0 on D", [B](const Vec& x) { return B(x); },
      [unsafe](const Vec& x) { return contains(x, unsafe); }, true));
  fams.push_back(state_only(
      "negative_on_initial", "B(x) < 0 on X0", [B](const Vec& x) { return -B(x); },
      [initial](const Vec& x) { return contains(x, initial); }, true));
  fams.push_back(state_only(
      "level_set_flow", fmt::format("dB/dx f <= 0 where |B| <= {}", level_band),
      [B, sys](const Vec& x) { return -B.grad(x).dot(sys.drift(x)); },
      [B, level_band](const Vec& x) { return std::abs(B(x)) <= level_band; }));
  return run_families("barrier_certificate", fams, grid);
}

CertificateReport check_strict_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                       const Region& unsafe, const MonotoneFn& alpha,
                                       const GridSpec& grid) {
  require_class(alpha, FnClass::K, "strict barrier rate");
  require_field_gradient(B, grid, "B");
  std::vector<InequalityFamily> fams;
  fams.push_back(state_only(
      "strict_decrease", "dB/dx f <= -alpha(|x|_D) off D",
      [B, sys, alpha, unsafe](const Vec& x) {
        return -alpha(distance_to_set(x, unsafe)) - B.grad(x).dot(sys.drift(x));
      },
      off_unsafe(unsafe)));
  return run_families("strict_barrier", fams, grid);
}

CertificateReport check_robust_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                       const GridSpec& grid) {
  require_field_gradient(B, grid, "B");
  std::vector<InequalityFamily> fams;
  fams.push_back(dissipation(
      "robust_flow", "dB/dx (f + g v) <= 0 for all v in U", B, sys,
      [](const Vec&) { return 0.0; }, std::nullopt, nullptr));
  return run_families("robust_barrier", fams, grid);
}

CertificateReport check_issf_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                     const Region& unsafe, const Region& locality,
                                     const MonotoneFn& a1, const MonotoneFn& a2,
                                     const MonotoneFn& a3, const MonotoneFn& a4,
                                     const GridSpec& grid) {
  require_all({&a1, &a2, &a3, &a4}, FnClass::Kinf, "ISSf barrier");
  require_field_gradient(B, grid, "B");
  const auto off = off_unsafe(unsafe);
  std::vector<InequalityFamily> fams;
  fams.push_back(state_only(
      "Bn1_lower", "-alpha1(|x|_D) <= B(x) off D",
      [B, a1, unsafe](const Vec& x) { return B(x) + a1(distance_to_set(x, unsafe)); }, off));
  fams.push_back(state_only(
      "Bn1_upper", "B(x) <= -alpha2(|x|_D) off D",
      [B, a2, unsafe](const Vec& x) { return -a2(distance_to_set(x, unsafe)) - B(x); }, off));
  fams.push_back(dissipation(
      "Bn2", "dB/dx (f + g v) <= -alpha3(|x|_D) + alpha4(|v|) on X\\D", B, sys,
      [a3, unsafe](const Vec& x) { return a3(distance_to_set(x, unsafe)); }, a4,
      [off, locality](const Vec& x) { return contains(x, locality) && off(x); }));
  return run_families("issf_barrier", fams, grid);
}

CertificateReport check_merged_W(const ScalarField& W, const ControlAffineSystem& sys,
                                 const Region& unsafe, const Region& locality, double c,
                                 const MergedEnvelopes& env, const GridSpec& grid) {
  if (!(c > 0.0)) throw std::invalid_argument("check_merged_W: c must be positive");
  if (env.alphas.size() != 7) throw std::invalid_argument("check_merged_W: need alpha1..alpha7");
  std::vector<const MonotoneFn*> ptrs;
  for (const auto& a : env.alphas) ptrs.push_back(&a);
  require_all(ptrs, FnClass::Kinf, "merged W");
  require_field_gradient(W, grid, "W");
  const auto& a = env.alphas;
  const auto off = off_unsafe(unsafe);
  auto in_band = [off, locality](const Vec& x) { return contains(x, locality) && off(x); };
  std::vector<InequalityFamily> fams;
  fams.push_back(state_only(
      "Wn1_lower", "alpha1(|x|) <= W(x)",
      [W, a1 = a[0]](const Vec& x) { return W(x) - a1(x.norm()); }, nullptr));
  fams.push_back(state_only(
      "Wn1_upper", "W(x) <= alpha2(|x|)",
      [W, a2 = a[1]](const Vec& x) { return a2(x.norm()) - W(x); }, nullptr));
  fams.push_back(state_only(
      "Wn2_lower", "-alpha3(|x|_D) <= W(x) - c on X\\D",
      [W, c, a3 = a[2], unsafe](const Vec& x) {
        return W(x) - c + a3(distance_to_set(x, unsafe));
      },
      in_band));
  fams.push_back(state_only(
      "Wn2_upper", "W(x) - c <= -alpha4(|x|_D) on X\\D",
      [W, c, a4 = a[3], unsafe](const Vec& x) {
        return -a4(distance_to_set(x, unsafe)) - (W(x) - c);
      },
      in_band));
  fams.push_back(dissipation(
      "Wn3", "dW/dx (f + g v) <= -alpha5(|x|) - 1_X(x) alpha6(|x|_D) + alpha7(|v|)", W, sys,
      [a5 = a[4], a6 = a[5], unsafe, locality](const Vec& x) {
        double r = a5(x.norm());
        if (contains(x, locality)) r += a6(distance_to_set(x, unsafe));
        return r;
      },
      a[6], nullptr));
  auto rep = run_families("merged_W", fams, grid);
  rep.notes.push_back(fmt::format("c = {:.9g}", c));
  return rep;
}

}  // namespace issf
