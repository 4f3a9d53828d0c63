#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "issf/csv_export.hpp"
#include "issf/errors.hpp"
#include "issf/experiment.hpp"
#include "issf/plot_export.hpp"

using namespace issf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("issf_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentSpec small_spec() {
  auto s = bundled_spec("paper_sec4");
  s.grid.resolution = 61;
  s.t_end = 1.0;
  s.dt = 1e-2;
  s.initial_conditions.resize(2);
  return s;
}

template <typename Fn>
std::string spec_error_path(Fn&& fn) {
  try {
    fn();
  } catch (const SpecError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST(Spec, BundledRoundTrip) {
  for (const auto& name : bundled_spec_names()) {
    const auto s = bundled_spec(name);
    const auto back = ExperimentSpec::from_json(s.to_json());
    EXPECT_EQ(back, s) << name;
    EXPECT_EQ(back.to_json(), s.to_json());
  }
  EXPECT_THROW(bundled_spec("nope"), SpecError);
}

TEST(Spec, ExpressionSystemRoundTrip) {
  auto s = bundled_spec("paper_sec4");
  s.system = SystemDecl{"", 2, 1, {"x2", "-sin(x1)"}, {{"0"}, {"1"}}};
  s.unsafe = RegionDecl{"disk_union", {}, 0.0, {RegionDecl{"disk", {1, 0}, 0.5, {}, true},
                                                RegionDecl{"disk", {-1, 0}, 0.5, {}, true}}, true};
  s.locality = RegionDecl{"disk", {0, 0}, 3.0, {}, false};
  s.issf_locality.reset();
  s.robust_region.reset();
  s.disturbance = DisturbanceDecl{"sinusoid", {}, {0.5}, {2.0}, {0.1}, 0.0, 0, 0.1};
  s.controller = "none";
  s.iss_alpha1 = FnDecl{"poly_odd", {{"a", 1.0}, {"b", 0.5}}};
  s.iss_gamma = FnDecl{"linear", {{"c", 2.0}}};
  s.stages = {"simulate"};
  const auto back = ExperimentSpec::from_json(s.to_json());
  EXPECT_EQ(back, s);
  const auto m = build_model(back);
  EXPECT_EQ(m.plant.dim_u(), 1);
  EXPECT_NEAR(m.plant.drift(Vec{{0.3, 0.2}})(1), -std::sin(0.3), 1e-15);
}

TEST(Spec, UnknownFieldIsRejectedWithPath) {
  auto j = nlohmann::json::parse(bundled_spec("paper_sec4").to_json());
  j["gains"]["thetta"] = 0.5;
  EXPECT_EQ(spec_error_path([&] { ExperimentSpec::from_json(j.dump()); }), "gains.thetta");
}

TEST(Spec, WrongTypeIsRejectedWithPath) {
  auto j = nlohmann::json::parse(bundled_spec("paper_sec4").to_json());
  j["geometry"]["unsafe"]["radius"] = "two";
  EXPECT_EQ(spec_error_path([&] { ExperimentSpec::from_json(j.dump()); }), "geometry.unsafe.radius");
  j = nlohmann::json::parse(bundled_spec("paper_sec4").to_json());
  j["iss"]["gamma"] = {{"name", "exp"}};
  EXPECT_EQ(spec_error_path([&] { ExperimentSpec::from_json(j.dump()); }), "iss.gamma.name");
}

TEST(Spec, SyntaxErrorReportsLine) {
  const std::string text = "{\n  \"name\": \"x\",\n  \"system\": {,\n}\n";
  try {
    ExperimentSpec::from_json(text);
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Spec, UnsafeOutsideLocalityIsRejected) {
  auto s = small_spec();
  s.locality = RegionDecl{"disk", {5.5, 6.0}, 2.5, {}, true};
  EXPECT_EQ(spec_error_path([&] { build_model(s); }), "geometry");
}

TEST(Spec, ValidationNamesFields) {
  auto s = small_spec();
  s.theta = 1.5;
  EXPECT_EQ(spec_error_path([&] { build_model(s); }), "gains.theta");
  s = small_spec();
  s.stages = {"certify", "dance"};
  EXPECT_EQ(spec_error_path([&] { build_model(s); }), "stages[1]");
  s = small_spec();
  s.initial_conditions.push_back({1.0});
  EXPECT_EQ(spec_error_path([&] { build_model(s); }), "initial_conditions[2]");
  s = small_spec();
  s.lyapunov = "x1^2 +";
  EXPECT_EQ(spec_error_path([&] { build_model(s); }), "functions.V");
  s = small_spec();
  s.barrier = "4 - (x1-4)^2 - 2*(x2-6)^2";
  EXPECT_EQ(spec_error_path([&] { build_model(s); }), "functions.B");
}

TEST(Spec, LoadFromFileAndBundled) {
  const auto dir = scratch("load");
  fs::create_directories(dir);
  const auto s = small_spec();
  write_text_file(dir / "spec.json", s.to_json());
  EXPECT_EQ(load_spec((dir / "spec.json").string()), s);
  EXPECT_EQ(load_spec("bundled:paper_sec4_nominal"), bundled_spec("paper_sec4_nominal"));
  EXPECT_THROW(load_spec((dir / "missing.json").string()), SpecError);
}

TEST(Model, CatalogFactories) {
  EXPECT_DOUBLE_EQ(make_fn(FnDecl{"power", {{"p", 2.0}}})(3.0), 9.0);
  EXPECT_DOUBLE_EQ(make_fn(FnDecl{"poly_odd", {{"a", 1.0}, {"b", 1.0}}})(1.0), 2.0);
  EXPECT_THROW(make_fn(FnDecl{"linear", {}}), SpecError);
  EXPECT_THROW(make_fn(FnDecl{"linear", {{"c", -1.0}}}), SpecError);
  const auto r = make_region(RegionDecl{"disk", {4, 6}, 2, {}, true});
  EXPECT_DOUBLE_EQ(distance_to_set(Vec{{4.0, 9.0}}, r), 1.0);
  const auto f = make_field("x1*x2", 2, "f");
  EXPECT_TRUE(f.has_analytic_gradient());
  EXPECT_EQ(f.grad(Vec{{2.0, 3.0}}), (Vec{{3.0, 2.0}}));
}

TEST(Run, CertifyOnlyWritesNoTrajectories) {
  auto s = small_spec();
  s.stages = {"certify"};
  const auto dir = scratch("certify_only");
  const auto m = run_experiment(s, dir);
  ASSERT_EQ(m.stages.size(), 1u);
  EXPECT_TRUE(m.stages[0].ok) << m.stages[0].message;
  EXPECT_TRUE(fs::exists(dir / "certificates.json"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_EQ(e.path().filename().string().find("trajectory"), std::string::npos);
  }
  const auto j = nlohmann::json::parse(slurp(dir / "certificates.json"));
  std::vector<std::string> ids;
  for (const auto& r : j["reports"]) ids.push_back(r["condition_id"]);
  EXPECT_NE(std::find(ids.begin(), ids.end(), "merged_W"), ids.end());
}

TEST(Run, FullPipelineIsReproducible) {
  const auto s = small_spec();
  const auto dir_a = scratch("rep_a");
  const auto a = run_experiment(s, dir_a);
  const auto b = run_experiment(s, scratch("rep_b"));
  for (const auto& st : a.stages) EXPECT_TRUE(st.ok) << st.stage << ": " << st.message;
  EXPECT_EQ(a.digest(), b.digest());
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_EQ(a.files[i].name, b.files[i].name);
    EXPECT_EQ(a.files[i].hash, b.files[i].hash);
  }
  const auto header = slurp(dir_a / "trajectory_0.csv");
  EXPECT_EQ(header.substr(0, header.find('\n')), "t,x1,x2,u1,u2,dist_D,norm_x,in_X");
  auto other = s;
  other.disturbance.seed = 43;
  EXPECT_NE(run_experiment(other, scratch("rep_c")).digest(), a.digest());
}

TEST(Run, IssfStageNeedsGains) {
  auto s = small_spec();
  s.stages = {"simulate", "issf"};
  const auto m = run_experiment(s, scratch("issf_blocked"));
  ASSERT_EQ(m.stages.size(), 2u);
  EXPECT_TRUE(m.stages[0].ok);
  EXPECT_FALSE(m.stages[1].ok);
}

TEST(Run, NominalTrajectoriesReachTheOrigin) {
  auto s = bundled_spec("paper_sec4_nominal");
  const auto trajs = run_simulations(build_model(s));
  ASSERT_EQ(trajs.size(), 4u);
  for (const auto& tr : trajs) {
    EXPECT_GT(tr.min_dist_to_D(), 0.0);
    EXPECT_LT(tr.norm_x.back(), 1e-2);
  }
}

TEST(Plot, EmptySetGivesGeometryOnlyPortrait) {
  const auto m = build_model(small_spec());
  const auto dir = scratch("plot_empty");
  fs::create_directories(dir);
  const auto files = emit_plot_data(dir, {}, m.geometry, m.grid.bounds);
  EXPECT_NE(std::find(files.begin(), files.end(), "portrait.svg"), files.end());
  const auto svg = slurp(dir / "portrait.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
}

TEST(Plot, OneDimensionalSystemSkipsPortrait) {
  const auto geom = SafetyGeometry::make(Region::ball(Vec::Constant(1, 3.0), 1.0), Region::ball(Vec::Constant(1, 3.0), 2.0));
  const ControlAffineSystem sys(
      1, 1, [](const Vec& x) { return Vec(-x); }, [](const Vec&) { return Mat::Identity(1, 1); }, "x' = -x + u");
  const auto tr = integrate(sys, Vec::Constant(1, 6.0), DisturbanceSignal::zero(1), std::nullopt, 2.0, 1e-2, geom);
  const auto dir = scratch("plot_1d");
  fs::create_directories(dir);
  const auto files = emit_plot_data(dir, {tr}, geom, {{-1.0, 7.0}});
  EXPECT_EQ(std::find(files.begin(), files.end(), "portrait.svg"), files.end());
  EXPECT_NE(std::find(files.begin(), files.end(), "timeseries_0.svg"), files.end());
}

TEST(Csv, ResidualAndEnvelopeHeaders) {
  EXPECT_EQ(envelope_csv(SafetyEnvelope{{1.0}, {4.0}}), "k,s_star\n1,4\n");
  IssfEvaluation ev;
  ev.samples.push_back({0.5, 1.0, 0.25, 0.75, true});
  const auto csv = residual_csv(ev);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,lhs,rhs,residual,admissible_flag");
}
