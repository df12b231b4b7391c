#include "curvlab/scenario.hpp"

#include "curvlab/diffusion.hpp"
#include "curvlab/gamma2.hpp"
#include "curvlab/io.hpp"
#include "curvlab/linearized.hpp"
#include "curvlab/odelab.hpp"
#include "curvlab/transport.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace curvlab {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>>& section_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"kind", "seed", "output", "name"}},
      {"space", {"kind", "n", "length", "p", "weights", "seed", "file"}},
      {"entropy", {"family", "N", "eps", "M", "a"}},
      {"initial", {"rho0", "centre0", "width0", "amplitude0", "rho1", "centre1", "width1", "amplitude1"}},
      {"run", {}},
  };
  return keys;
}

const std::map<std::string, std::set<std::string>>& run_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"be-scan", {"dims", "K"}},
      {"diffuse", {"T", "steps"}},
      {"linearize", {"T", "steps", "K"}},
      {"transport", {"J"}},
      {"evi", {"K", "T", "steps", "J", "tol"}},
      {"contraction", {"K", "T", "steps", "tol"}},
      {"cdstar", {"K", "N", "J", "sigma", "tol"}},
      {"odelab", {"system", "dim", "x0", "x1", "w0", "phiT", "T", "steps", "samples", "M"}},
  };
  return keys;
}

const std::string* find(const Section& s, const std::string& key) {
  const auto it = s.find(key);
  return it == s.end() ? nullptr : &it->second;
}

double get_double(const Section& s, const std::string& key, double fallback) {
  const auto* v = find(s, key);
  if (!v) return fallback;
  try {
    return parse_double(*v);
  } catch (const ParseError& e) {
    throw ParseError(key + ": " + e.what());
  }
}

int get_int(const Section& s, const std::string& key, int fallback) {
  const auto* v = find(s, key);
  if (!v) return fallback;
  try {
    const long long x = parse_int(*v);
    if (x < 0 || x > 100000000) throw ParseError("out of range");
    return static_cast<int>(x);
  } catch (const ParseError& e) {
    throw ParseError(key + ": " + e.what());
  }
}

std::string get_string(const Section& s, const std::string& key, const std::string& fallback) {
  const auto* v = find(s, key);
  return v ? *v : fallback;
}

bool get_bool(const Section& s, const std::string& key, bool fallback) {
  const auto* v = find(s, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ParseError(key + ": expected a boolean");
}

std::vector<double> get_list(const Section& s, const std::string& key, std::vector<double> fallback) {
  const auto* v = find(s, key);
  if (!v) return fallback;
  std::vector<double> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const ParseError& e) {
      throw ParseError(key + ": " + e.what());
    }
  }
  if (out.empty()) throw ParseError(key + ": empty list");
  return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

/// Point coordinate in [0,1) used to place bumps; index order off grids.
double coordinate(const FiniteSpace& s, int i) {
  if (s.grid() == GridKind::path) return static_cast<double>(i) / (s.n() - 1);
  return static_cast<double>(i) / s.n();
}

Field profile(const FiniteSpace& s, const Section& rec, int which, std::mt19937_64& rng) {
  const std::string idx = std::to_string(which);
  const std::string kind = get_string(rec, "rho" + idx, which == 0 ? "bump" : "uniform");
  const int n = s.n();
  Field f(n);
  if (kind == "uniform") {
    f.setOnes();
  } else if (kind == "random") {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (int i = 0; i < n; ++i) f[i] = u(rng);
  } else if (kind == "bump") {
    const double c = get_double(rec, "centre" + idx, which == 0 ? 0.3 : 0.7);
    const double w = get_double(rec, "width" + idx, 0.1);
    const double a = get_double(rec, "amplitude" + idx, 1.0);
    if (!(w > 0)) throw ParseError("width" + idx + " must be positive");
    for (int i = 0; i < n; ++i) {
      double dx = std::abs(coordinate(s, i) - c);
      if (s.grid() == GridKind::circle) dx = std::min(dx, 1.0 - dx);
      f[i] = 0.05 + a * std::exp(-0.5 * dx * dx / (w * w));
    }
  } else if (kind == "sine") {
    const double a = get_double(rec, "amplitude" + idx, 0.5);
    for (int i = 0; i < n; ++i) f[i] = 1.0 + a * std::sin(2 * M_PI * coordinate(s, i));
  } else {
    throw ParseError("unknown density '" + kind + "'");
  }
  if (!(f.minCoeff() >= 0)) throw ParseError("density" + idx + " is negative");
  return normalized(s, f).values();
}

CheckReport tolerance_report(std::string name, double deviation, double tol) {
  CheckReport r;
  r.name = std::move(name);
  r.margin = -deviation;
  r.tolerance = tol;
  r.holds = deviation <= tol;
  return r;
}

/// Shared inputs of one scenario run.
struct Context {
  const Scenario& sc;
  FiniteSpace space;
  EntropyModel model;
  Field rho0, rho1;
  std::mt19937_64 rng;
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::function<CheckReport()>> checks;

  const Section& run() const { return sc.section("run"); }
};

void experiment_be_scan(Context& c) {
  const auto dims = get_list(c.run(), "dims", {kInf});
  const bool has_k = find(c.run(), "K") != nullptr;
  const double K = get_double(c.run(), "K", 0.0);
  for (const double N : dims) {
    c.checks.push_back([&space = c.space, N, K, has_k] {
      const double kopt = optimal_curvature(space, N);
      CheckReport r = to_check_report(be_check(space, has_k ? K : kopt, N), "be_scan N=" + format_double(N));
      r.diagnostics["optimal_K"] = kopt;
      return r;
    });
  }
  // Filled from the reports once the checks have run.
  c.files.emplace_back("be_scan.csv", "");
}

void experiment_diffuse(Context& c) {
  const double T = get_double(c.run(), "T", 0.1);
  const int steps = get_int(c.run(), "steps", 100);
  const auto traj = evolve(c.space, c.model, DensityField(c.space, c.rho0), T, steps);
  c.files.emplace_back("trajectory.csv", trajectory_csv(traj.times, traj.states));
  std::ostringstream mass;
  mass << "t,mass,entropy,fisher\n";
  double drift = 0.0;
  const double m0 = integrate(c.space, traj.states.front());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double mk = integrate(c.space, traj.states[k]);
    drift = std::max(drift, std::abs(mk - m0));
    mass << format_double(traj.times[k]) << ',' << format_double(mk) << ','
         << format_double(entropy_functional(c.space, c.model, traj.states[k])) << ','
         << format_double(fisher_information(c.space, traj.density(static_cast<int>(k)))) << '\n';
  }
  c.files.emplace_back("mass.csv", mass.str());
  c.checks.push_back([drift] { return tolerance_report("mass_conservation", drift, 1e-10); });
  c.checks.push_back([&c, T, steps] {
    return l1_contraction_check(c.space, c.model, DensityField(c.space, c.rho0),
                                DensityField(c.space, c.rho1), T, steps);
  });
  c.checks.push_back([traj] {
    const ConvexFunction W{[](double r) { return 0.5 * r * r; }, [](double r) { return r; }};
    return entropy_dissipation_report(traj, W);
  });
}

void experiment_linearize(Context& c) {
  const double T = get_double(c.run(), "T", 0.1);
  const int steps = get_int(c.run(), "steps", 100);
  const auto traj = evolve(c.space, c.model, DensityField(c.space, c.rho0), T, steps);
  std::normal_distribution<double> g;
  Field w0(c.space.n()), phiT(c.space.n());
  for (int i = 0; i < c.space.n(); ++i) w0[i] = g(c.rng);
  for (int i = 0; i < c.space.n(); ++i) phiT[i] = g(c.rng);
  w0.array() -= integrate(c.space, w0) / c.space.total_mass();
  const auto fwd = forward_linearized_solve(traj, w0);
  const auto bwd = backward_solve(traj, phiT);
  c.files.emplace_back("trajectory.csv", trajectory_csv(traj.times, traj.states));
  c.files.emplace_back("forward.csv", trajectory_csv(fwd.times, fwd.fields));
  c.files.emplace_back("backward.csv", trajectory_csv(bwd.times, bwd.fields));
  c.checks.push_back([&c, fwd, bwd] { return pairing_check(c.space, fwd, bwd); });
  if (find(c.run(), "K")) {
    const double Lambda = c.model.lambda(get_double(c.run(), "K", 0.0));
    c.checks.push_back([traj, w0, Lambda] { return dual_action_decay_check(traj, w0, Lambda); });
  }
}

void experiment_transport(Context& c) {
  const DensityField mu0(c.space, c.rho0), mu1(c.space, c.rho1);
  const auto w2 = std::make_shared<W2Result>(w2_distance(c.space, mu0, mu1));
  c.checks.push_back([w2] {
    CheckReport r;
    r.name = "w2_certificate";
    const double gap = std::abs(w2->coupling.duality_gap);
    const double reduced = std::min(0.0, w2->coupling.min_reduced_cost);
    r.margin = -std::max(gap, -reduced);
    r.tolerance = 1e-9 * std::max(1.0, w2->coupling.cost);
    r.holds = r.margin >= -r.tolerance;
    r.diagnostics["distance"] = w2->distance;
    r.diagnostics["pivots"] = w2->coupling.pivots;
    return r;
  });
  std::normal_distribution<double> g;
  Field phi(c.space.n());
  for (int i = 0; i < c.space.n(); ++i) phi[i] = g(c.rng);
  c.checks.push_back([&c, w2, phi, mu0, mu1] {
    const double bound = kantorovich_dual_bound(c.space, mu0, mu1, phi);
    CheckReport r;
    r.name = "kantorovich_bound";
    r.margin = 0.5 * w2->distance * w2->distance - bound;
    r.tolerance = 1e-10;
    r.holds = r.margin >= -r.tolerance;
    r.diagnostics["bound"] = bound;
    return r;
  });
  if (c.space.grid() != GridKind::none) {
    const int J = get_int(c.run(), "J", 16);
    const auto curve = curve_velocity(geodesic_1d(c.space, mu0, mu1, J));
    c.files.emplace_back("curve.csv", curve_csv(curve));
    c.checks.push_back([curve, &c] {
      return tolerance_report("time_reversal", std::abs(time_reversal_residual(curve, c.model)), 1e-10);
    });
    c.checks.push_back([curve, w2, &c] {
      const double quantile = w2_grid(c.space, DensityField(c.space, curve.densities.front()),
                                      DensityField(c.space, curve.densities.back()));
      auto r = tolerance_report("quantile_vs_lp", std::abs(quantile - w2->distance), 1e-9);
      r.diagnostics["constant_speed_defect"] = constant_speed_defect(curve);
      r.diagnostics["kinetic_action"] = kinetic_action(curve);
      return r;
    });
  }
}

void experiment_evi(Context& c) {
  const auto& r = c.run();
  const double K = get_double(r, "K", 0.0), T = get_double(r, "T", 0.05), tol = get_double(r, "tol", -1.0);
  const int steps = get_int(r, "steps", 20), J = get_int(r, "J", 16);
  c.checks.push_back([&c, K, T, tol, steps, J] {
    return evi_check(c.space, c.model, DensityField(c.space, c.rho0), DensityField(c.space, c.rho1), K, T,
                     steps, J, tol);
  });
}

void experiment_contraction(Context& c) {
  const auto& r = c.run();
  const double K = get_double(r, "K", 0.0), T = get_double(r, "T", 0.05), tol = get_double(r, "tol", -1.0);
  const int steps = get_int(r, "steps", 20);
  c.checks.push_back([&c, K, T, tol, steps] {
    return contraction_check(c.space, c.model, DensityField(c.space, c.rho0), DensityField(c.space, c.rho1),
                             K, T, steps, tol);
  });
}

void experiment_cdstar(Context& c) {
  const auto& r = c.run();
  const double K = get_double(r, "K", 0.0), tol = get_double(r, "tol", -1.0);
  const double N = get_double(r, "N", c.model.N());
  const int J = get_int(r, "J", 16);
  const bool sigma = get_bool(r, "sigma", false);
  const auto curve = curve_velocity(
      geodesic_1d(c.space, DensityField(c.space, c.rho0), DensityField(c.space, c.rho1), J));
  c.files.emplace_back("curve.csv", curve_csv(curve));
  c.checks.push_back([curve, K, N, sigma, tol] { return cdstar_convexity_check(curve, K, N, sigma, tol); });
}

void experiment_odelab(Context& c) {
  const auto& r = c.run();
  const auto sys = system_by_name(get_string(r, "system", "linear"), get_int(r, "dim", 2));
  const int d = sys.dim;
  auto vec = [&](const std::string& key, double fill) {
    const auto v = get_list(r, key, std::vector<double>(static_cast<std::size_t>(d), fill));
    if (static_cast<int>(v.size()) != d) throw ParseError(key + ": expected " + std::to_string(d) + " values");
    return to_vec(v);
  };
  const Vec x0 = vec("x0", 1.0), x1 = vec("x1", -0.5), w0 = vec("w0", 1.0), phiT = vec("phiT", 1.0);
  const double T = get_double(r, "T", 1.0);
  const int steps = get_int(r, "steps", 1000), samples = get_int(r, "samples", 200), M = get_int(r, "M", 64);
  const auto traj = integrate_system(sys, x0, w0, phiT, T, steps);
  std::vector<Field> rows;
  for (const auto& x : traj.x) rows.push_back(x);
  c.files.emplace_back("trajectory.csv", trajectory_csv(traj.times, rows));
  c.checks.push_back([traj] {
    double drift = 0.0;
    for (double p : traj.pairing) drift = std::max(drift, std::abs(p - traj.pairing.front()));
    return tolerance_report("ode_pairing", drift, 1e-12 * std::max(1.0, std::abs(traj.pairing.front())));
  });
  std::vector<std::pair<Vec, Vec>> pts;
  std::normal_distribution<double> g;
  for (int k = 0; k < samples; ++k) {
    Vec x(d), phi(d);
    for (int i = 0; i < d; ++i) x[i] = g(c.rng);
    for (int i = 0; i < d; ++i) phi[i] = g(c.rng);
    pts.emplace_back(x, phi);
  }
  c.checks.push_back([sys, pts] { return hamiltonian_monotonicity_check(sys, pts); });
  c.checks.push_back([sys, x0, x1, T, steps, M] { return cost_contraction_check(sys, x0, x1, T, steps, 1e-8, M); });
  if (sys.potential_mode())
    c.checks.push_back([sys, x0, x1, T, steps, M] {
      return convexity_contraction_check(sys, x0, x1, T, steps, 1e-8, M);
    });
}

std::vector<CheckReport> run_checks(const std::vector<std::function<CheckReport()>>& checks, int threads) {
  std::vector<CheckReport> out(checks.size());
  std::vector<std::exception_ptr> errors(checks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < checks.size();) {
      try {
        out[i] = checks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::max(1, std::min<int>(threads, static_cast<int>(checks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

const Section& Scenario::section(const std::string& name) const {
  static const Section empty;
  const auto it = sections.find(name);
  return it == sections.end() ? empty : it->second;
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"be-scan", "diffuse", "linearize", "transport",
                                                 "evi",     "contraction", "cdstar", "odelab"};
  return kinds;
}

Scenario parse_scenario(const std::string& text, const fs::path& base_dir) {
  std::string cleaned;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    // Trailing comments start at a ';' or '#' preceded by whitespace.
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.erase(i);
        break;
      }
    }
    cleaned += line;
    cleaned += '\n';
  }
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(cleaned);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  Scenario sc;
  sc.base_dir = base_dir;
  for (const auto& [name, child] : tree) {
    if (child.empty()) throw ParseError("config: key '" + name + "' outside a section");
    if (!section_keys().count(name)) throw ParseError("config: unknown section [" + name + "]");
    auto& sec = sc.sections[name];
    for (const auto& [key, value] : child) sec[key] = value.data();
  }
  const auto& head = sc.section("scenario");
  sc.kind = get_string(head, "kind", "");
  if (sc.kind.empty()) throw ParseError("config: [scenario] kind is required");
  const auto rk = run_keys().find(sc.kind);
  if (rk == run_keys().end()) throw ParseError("config: unknown experiment kind '" + sc.kind + "'");
  for (const auto& [name, sec] : sc.sections) {
    const auto& allowed = name == "run" ? rk->second : section_keys().at(name);
    for (const auto& [key, value] : sec)
      if (!allowed.count(key)) throw ParseError("config: unknown key '" + key + "' in [" + name + "]");
  }
  const auto* seed = find(head, "seed");
  if (seed) {
    const long long s = parse_int(*seed);
    if (s < 0) throw ParseError("config: seed must be nonnegative");
    sc.seed = static_cast<std::uint64_t>(s);
  }
  const fs::path out = get_string(head, "output", "out");
  sc.output = out.is_absolute() ? out : base_dir / out;
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

FiniteSpace space_from_record(const Section& rec, const fs::path& base_dir) {
  const std::string kind = get_string(rec, "kind", "circle");
  const int n = get_int(rec, "n", 32);
  const double length = get_double(rec, "length", 1.0);
  if (kind == "two-point") return two_point_space();
  if (kind == "path") return path_grid(n, length);
  if (kind == "circle") return circle_grid(n, length);
  if (kind == "complete") return complete_graph(n);
  if (kind == "erdos") {
    const std::string weights = get_string(rec, "weights", "unit");
    if (weights != "unit" && weights != "random") throw ParseError("space: weights must be unit or random");
    const auto seed = static_cast<std::uint64_t>(get_int(rec, "seed", 0));
    return erdos_renyi(n, get_double(rec, "p", 0.3), seed, weights == "random");
  }
  if (kind == "file") {
    const fs::path file = get_string(rec, "file", "");
    if (file.empty()) throw ParseError("space: file is required");
    return read_graph_file((file.is_absolute() ? file : base_dir / file).string());
  }
  throw ParseError("space: unknown kind '" + kind + "'");
}

EntropyModel entropy_from_record(const Section& rec) {
  const std::string family = get_string(rec, "family", "linear");
  EntropyModel model = EntropyModel::linear();
  if (family == "power" || family == "regularized") {
    const double N = get_double(rec, "N", kInf);
    if (!(N > 1)) throw ParseError("entropy: N must exceed 1");
    model = std::isinf(N) ? EntropyModel::linear() : EntropyModel::power(N);
  } else if (family != "linear") {
    throw ParseError("entropy: unknown family '" + family + "'");
  }
  if (family == "regularized") {
    const double eps = get_double(rec, "eps", 1e-3);
    if (!(eps > 0)) throw ParseError("entropy: eps must be positive");
    model = model.regularized(eps, get_double(rec, "M", kInf));
  }
  if (const auto* a = find(rec, "a")) {
    const double declared = parse_double(*a);
    if (!(declared >= 0) || declared > model.regularity() * (1 + 1e-12))
      throw ParseError("entropy: declared regularity a exceeds the model's");
  }
  return model;
}

Section entropy_record(const EntropyModel& model) {
  Section rec;
  rec["family"] = to_string(model.family());
  rec["N"] = format_double(model.N());
  rec["eps"] = format_double(model.eps());
  rec["M"] = format_double(model.M());
  rec["a"] = format_double(model.regularity());
  return rec;
}

bool ScenarioResult::all_pass() const {
  return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.holds; });
}

ScenarioResult run_scenario(const Scenario& sc, int threads) {
  Context c{sc, space_from_record(sc.section("space"), sc.base_dir), entropy_from_record(sc.section("entropy")),
            {}, {}, std::mt19937_64(sc.seed), {}, {}};
  if (sc.kind != "be-scan" && sc.kind != "odelab") {
    c.rho0 = profile(c.space, sc.section("initial"), 0, c.rng);
    c.rho1 = profile(c.space, sc.section("initial"), 1, c.rng);
  }
  const std::map<std::string, void (*)(Context&)> table = {
      {"be-scan", experiment_be_scan}, {"diffuse", experiment_diffuse},
      {"linearize", experiment_linearize}, {"transport", experiment_transport},
      {"evi", experiment_evi}, {"contraction", experiment_contraction},
      {"cdstar", experiment_cdstar}, {"odelab", experiment_odelab}};
  table.at(sc.kind)(c);

  ScenarioResult result;
  result.reports = run_checks(c.checks, threads);
  if (sc.kind == "be-scan") {
    std::ostringstream csv;
    csv << "N,optimal_K\n";
    for (const auto& r : result.reports)
      csv << format_double(r.diagnostics.at("N")) << ',' << format_double(r.diagnostics.at("optimal_K")) << '\n';
    c.files.back().second = csv.str();
  }
  for (const auto& [name, content] : c.files) {
    write_file_atomic((sc.output / name).string(), content);
    result.artifacts.push_back(name);
  }
  write_file_atomic((sc.output / "reports.json").string(), reports_to_json(result.reports));
  result.artifacts.push_back("reports.json");
  return result;
}

int thread_limit() {
  if (const char* env = std::getenv("CURVLAB_THREADS")) {
    try {
      const long long v = parse_int(env);
      if (v > 0) return static_cast<int>(std::min<long long>(v, 256));
    } catch (const ParseError&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string verdict_line(const CheckReport& report) {
  return std::string(report.verdict()) + ' ' + report.name + " margin=" + format_double(report.margin);
}

}  // namespace curvlab
