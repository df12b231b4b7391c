#include <doctest.h>

#include "curvlab/io.hpp"
#include "curvlab/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace curvlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("curvlab_sc_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("scenario parsing") {
  const auto sc = parse_scenario("[scenario]\nkind = diffuse\nseed = 4\n# comment\n[space]\nkind = circle\nn = 8\n",
                                 "/base");
  CHECK(sc.kind == "diffuse");
  CHECK(sc.seed == 4);
  CHECK(sc.output == fs::path("/base/out"));
  CHECK(sc.section("space").at("n") == "8");
  CHECK(sc.section("run").empty());
  const auto inline_comments = parse_scenario("[scenario]\nkind = evi   ; flow check\n[run]\nT = 0.5 # end\n");
  CHECK(inline_comments.kind == "evi");
  CHECK(inline_comments.section("run").at("T") == "0.5");

  CHECK_THROWS_AS(parse_scenario("[scenario]\nkind = dance\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nseed = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nkind = evi\n[weird]\nx = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nkind = evi\n[run]\nsteps = 4\ndims = 2\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nkind = evi\nseed = -3\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario\nkind = evi\n"), ParseError);
}

TEST_CASE("entropy records") {
  CHECK(entropy_from_record({}).family() == EntropyFamily::linear);
  const auto p = entropy_from_record({{"family", "power"}, {"N", "3"}});
  CHECK(p.N() == 3.0);
  const auto r = entropy_from_record({{"family", "regularized"}, {"N", "2"}, {"eps", "0.01"}, {"M", "10"}});
  CHECK(r.regular());
  const auto rec = entropy_record(r);
  CHECK(parse_double(rec.at("eps")) == 0.01);
  CHECK(parse_double(rec.at("M")) == 10.0);
  CHECK(entropy_from_record(rec).regularity() == r.regularity());
  CHECK_THROWS_AS(entropy_from_record({{"family", "power"}, {"N", "0.5"}}), ParseError);
  CHECK_THROWS_AS(entropy_from_record({{"family", "cubic"}}), ParseError);
  CHECK_THROWS_AS(entropy_from_record({{"family", "linear"}, {"a", "2"}}), ParseError);
}

TEST_CASE("space records") {
  CHECK(space_from_record({{"kind", "circle"}, {"n", "12"}}).grid() == GridKind::circle);
  CHECK(space_from_record({{"kind", "erdos"}, {"n", "9"}, {"seed", "3"}, {"weights", "random"}}).n() == 9);
  CHECK_THROWS_AS(space_from_record({{"kind", "torus"}}), ParseError);
  CHECK_THROWS_AS(space_from_record({{"kind", "file"}}), ParseError);
  CHECK_THROWS_AS(space_from_record({{"kind", "circle"}, {"n", "2"}}), std::invalid_argument);
}

TEST_CASE("be-scan on two points reports the optimal curvature") {
  const auto dir = scratch("be");
  auto sc = parse_scenario("[scenario]\nkind = be-scan\n[space]\nkind = two-point\n[run]\ndims = inf\n", dir);
  const auto res = run_scenario(sc);
  REQUIRE(res.reports.size() == 1);
  CHECK(res.all_pass());
  CHECK(std::abs(res.reports[0].diagnostics.at("optimal_K") - 2.0) <= 1e-9);
  const auto back = reports_from_json(slurp(sc.output / "reports.json"));
  CHECK(back[0].diagnostics.at("optimal_K") == res.reports[0].diagnostics.at("optimal_K"));
  fs::remove_all(dir);
}

TEST_CASE("diffuse keeps the mass column constant") {
  const auto dir = scratch("diffuse");
  auto sc = parse_scenario(
      "[scenario]\nkind = diffuse\n[space]\nkind = circle\nn = 32\n[initial]\nrho0 = bump\nrho1 = random\n"
      "[run]\nT = 0.05\nsteps = 40\n",
      dir);
  const auto res = run_scenario(sc);
  CHECK(res.all_pass());
  std::ifstream in(sc.output / "mass.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,mass,entropy,fisher");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double mass = parse_double(line.substr(comma + 1, line.find(',', comma + 1) - comma - 1));
    CHECK(std::abs(mass - 1.0) <= 1e-10);
    ++rows;
  }
  CHECK(rows == 41);
  std::ifstream traj(sc.output / "trajectory.csv");
  CHECK(parse_trajectory_csv(traj).rows.size() == 41);
  fs::remove_all(dir);
}

TEST_CASE("outputs do not depend on the thread count") {
  const std::string text =
      "[scenario]\nkind = odelab\nseed = 5\n[run]\nsystem = ou\ndim = 3\nT = 0.5\nsteps = 200\nsamples = 50\n";
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ra = run_scenario(parse_scenario(text, a), 1);
  const auto rb = run_scenario(parse_scenario(text, b), 4);
  REQUIRE(ra.artifacts == rb.artifacts);
  for (const auto& name : ra.artifacts) CHECK(slurp(a / "out" / name) == slurp(b / "out" / name));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("failing checks still write their reports") {
  const auto dir = scratch("fail");
  auto sc = parse_scenario("[scenario]\nkind = be-scan\n[space]\nkind = two-point\n[run]\nK = 2.5\n", dir);
  const auto res = run_scenario(sc);
  CHECK_FALSE(res.all_pass());
  CHECK(fs::exists(sc.output / "reports.json"));
  CHECK(verdict_line(res.reports[0]).rfind("fail be_scan", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("thread limit honours the environment") {
  ::setenv("CURVLAB_THREADS", "3", 1);
  CHECK(thread_limit() == 3);
  ::setenv("CURVLAB_THREADS", "zero", 1);
  CHECK(thread_limit() >= 1);
  ::unsetenv("CURVLAB_THREADS");
}
