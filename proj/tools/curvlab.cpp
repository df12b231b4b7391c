#include "curvlab/entropy.hpp"
#include "curvlab/gamma2.hpp"
#include "curvlab/io.hpp"
#include "curvlab/odelab.hpp"
#include "curvlab/scenario.hpp"
#include "curvlab/transport.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <random>
#include <set>

using namespace curvlab;

namespace {

enum Exit { ok = 0, check_failed = 1, parse_failed = 2, numerical_failed = 3, io_failed = 4 };

/// key=value arguments into a record, rejecting keys outside `allowed`.
Section parse_params(const std::vector<std::string>& args, const std::set<std::string>& allowed) {
  Section rec;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("expected key=value, got '" + a + "'");
    const std::string key = a.substr(0, eq);
    if (!allowed.count(key)) throw ParseError("unknown parameter '" + key + "'");
    rec[key] = a.substr(eq + 1);
  }
  return rec;
}

Section subset(const Section& rec, const std::set<std::string>& keys) {
  Section out;
  for (const auto& [k, v] : rec)
    if (keys.count(k)) out[k] = v;
  return out;
}

double number(const Section& rec, const std::string& key, double fallback) {
  const auto it = rec.find(key);
  return it == rec.end() ? fallback : parse_double(it->second);
}

int integer(const Section& rec, const std::string& key, int fallback) {
  const auto it = rec.find(key);
  if (it == rec.end()) return fallback;
  const long long v = parse_int(it->second);
  if (v < 0 || v > 100000000) throw ParseError(key + ": out of range");
  return static_cast<int>(v);
}

const std::set<std::string> kSpaceKeys = {"n", "length", "p", "weights", "seed", "file"};

FiniteSpace space_param(const Section& rec) {
  Section s = subset(rec, kSpaceKeys);
  s["kind"] = rec.count("space") ? rec.at("space") : "circle";
  return space_from_record(s);
}

std::vector<CheckReport> check_be(const Section& rec) {
  const auto space = space_param(rec);
  const double N = number(rec, "N", kInf);
  const double kopt = optimal_curvature(space, N);
  auto r = to_check_report(be_check(space, number(rec, "K", kopt), N));
  r.diagnostics["optimal_K"] = kopt;
  return {r};
}

std::vector<CheckReport> check_mccann(const Section& rec) {
  const auto model = entropy_from_record(subset(rec, {"family", "N", "eps", "M"}));
  const double N = number(rec, "dim", model.N());
  const double rmax = number(rec, "rmax", 10.0);
  const int points = integer(rec, "points", 1000);
  if (points < 1 || !(rmax > 0)) throw ParseError("mccann: need points >= 1 and rmax > 0");
  std::vector<double> grid;
  for (int i = 1; i <= points; ++i) grid.push_back(rmax * i / points);
  return {mccann_check(model, N, grid)};
}

std::vector<CheckReport> check_ode(const Section& rec) {
  const auto sys = system_by_name(rec.count("system") ? rec.at("system") : "linear", integer(rec, "dim", 2));
  std::mt19937_64 rng(static_cast<std::uint64_t>(integer(rec, "seed", 0)));
  std::normal_distribution<double> g;
  auto draw = [&] {
    Vec v(sys.dim);
    for (int i = 0; i < sys.dim; ++i) v[i] = g(rng);
    return v;
  };
  std::vector<std::pair<Vec, Vec>> samples;
  for (int k = integer(rec, "samples", 200); k > 0; --k) {
    Vec x = draw();
    samples.emplace_back(x, draw());
  }
  const Vec x0 = draw(), x1 = draw();
  return {hamiltonian_monotonicity_check(sys, samples),
          cost_contraction_check(sys, x0, x1, number(rec, "T", 1.0), integer(rec, "steps", 1000))};
}

std::vector<CheckReport> check_w2(const Section& rec) {
  const auto space = space_param(rec);
  std::mt19937_64 rng(static_cast<std::uint64_t>(integer(rec, "seed", 0)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Field a(space.n()), b(space.n());
  for (int i = 0; i < space.n(); ++i) a[i] = u(rng);
  for (int i = 0; i < space.n(); ++i) b[i] = u(rng);
  const auto mu0 = normalized(space, a), mu1 = normalized(space, b);
  const auto fwd = w2_distance(space, mu0, mu1), bwd = w2_distance(space, mu1, mu0);
  CheckReport r;
  r.name = "w2_certificate";
  r.margin = -std::max({std::abs(fwd.coupling.duality_gap), -std::min(0.0, fwd.coupling.min_reduced_cost),
                        std::abs(fwd.distance - bwd.distance)});
  r.tolerance = 1e-9 * std::max(1.0, fwd.coupling.cost);
  r.holds = r.margin >= -r.tolerance;
  r.diagnostics["distance"] = fwd.distance;
  r.diagnostics["pivots"] = fwd.coupling.pivots;
  return {r};
}

int emit(const std::vector<CheckReport>& reports, const std::string& out) {
  for (const auto& r : reports) std::cout << verdict_line(r) << '\n';
  if (!out.empty()) write_file_atomic(out, reports_to_json(reports));
  for (const auto& r : reports)
    if (!r.holds) return check_failed;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature-dimension laboratory on finite metric measure spaces"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario config");
  std::string config, out_dir;
  run->add_option("config", config, "INI scenario file")->required();
  run->add_option("-o,--output", out_dir, "Override the output directory");

  auto* space = app.add_subcommand("space", "Space utilities");
  space->require_subcommand(1);
  auto* gen = space->add_subcommand("gen", "Write a generated space in graph text format");
  std::string gen_kind, gen_out;
  std::vector<std::string> gen_params;
  gen->add_option("kind", gen_kind, "two-point | path | circle | complete | erdos")->required();
  gen->add_option("params", gen_params, "key=value: n, length, p, weights, seed");
  gen->add_option("-o,--output", gen_out, "Output file (stdout if omitted)");

  auto* check = app.add_subcommand("check", "Run a single check");
  std::string check_kind, check_out;
  std::vector<std::string> check_params;
  check->add_option("kind", check_kind, "be | mccann | ode | w2")->required();
  check->add_option("params", check_params, "key=value parameters");
  check->add_option("-o,--output", check_out, "Write the reports as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : parse_failed;
  }

  try {
    if (*run) {
      Scenario sc = load_scenario(config);
      if (!out_dir.empty()) sc.output = out_dir;
      const auto result = run_scenario(sc, thread_limit());
      return emit(result.reports, "");
    }
    if (*gen) {
      auto rec = parse_params(gen_params, {"n", "length", "p", "weights", "seed"});
      rec["kind"] = gen_kind;
      if (gen_kind == "file") throw ParseError("space gen: kind must be a generator");
      const auto text = format_graph(space_from_record(rec));
      if (gen_out.empty())
        std::cout << text;
      else
        write_file_atomic(gen_out, text);
      return ok;
    }
    if (*check) {
      std::set<std::string> keys;
      std::vector<CheckReport> (*fn)(const Section&) = nullptr;
      if (check_kind == "be") {
        keys = kSpaceKeys;
        keys.insert({"space", "K", "N"});
        fn = check_be;
      } else if (check_kind == "mccann") {
        keys = {"family", "N", "eps", "M", "dim", "rmax", "points"};
        fn = check_mccann;
      } else if (check_kind == "ode") {
        keys = {"system", "dim", "samples", "seed", "T", "steps"};
        fn = check_ode;
      } else if (check_kind == "w2") {
        keys = kSpaceKeys;
        keys.insert("space");
        fn = check_w2;
      } else {
        throw ParseError("unknown check kind '" + check_kind + "'");
      }
      return emit(fn(parse_params(check_params, keys)), check_out);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_failed;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return parse_failed;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return parse_failed;
  } catch (const std::exception& e) {
    std::cerr << "I/O failure: " << e.what() << '\n';
    return io_failed;
  }
  return ok;
}
