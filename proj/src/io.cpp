#include "curvlab/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

namespace curvlab {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t j = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

std::string where(int line) { return "line " + std::to_string(line) + ": "; }

int parse_index(std::string_view s, int line) {
  try {
    const long long v = parse_int(s);
    if (v < 0 || v >= static_cast<long long>(kMaxPoints)) throw ParseError("index out of range");
    return static_cast<int>(v);
  } catch (const ParseError& e) {
    throw ParseError(where(line) + e.what());
  }
}

double parse_value(std::string_view s, int line) {
  try {
    return parse_double(s);
  } catch (const ParseError& e) {
    throw ParseError(where(line) + e.what());
  }
}

void write_number(std::ostream& out, double x) {
  if (std::isfinite(x))
    out << format_double(x);
  else
    out << '"' << format_double(x) << '"';
}

void write_array(std::ostream& out, const std::vector<double>& v) {
  out << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    write_number(out, v[i]);
  }
  out << ']';
}

void write_string(std::ostream& out, const std::string& s) {
  out << nlohmann::json(s).dump();
}

double json_number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>());
  throw ParseError("expected a number");
}

std::vector<double> json_array(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("expected an array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(json_number(v));
  return out;
}

}  // namespace

double parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ParseError("empty number");
  std::string_view body = text;
  if (body.front() == '+') body.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size())
    throw ParseError("invalid number '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError("invalid integer '" + std::string(text) + "'");
  return v;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

FiniteSpace parse_graph(std::istream& in) {
  std::map<int, double> mass;
  struct Pair {
    int i, j;
    double v;
    int line;
  };
  std::vector<Pair> edges, dists;
  GridKind grid = GridKind::none;
  double grid_length = 0.0;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    auto tok = tokens(text);
    if (tok.empty()) continue;
    if (tok[0] == "node") {
      if (tok.size() < 3) throw ParseError(where(line) + "node needs an index and a mass");
      const int i = parse_index(tok[1], line);
      if (mass.count(i)) throw ParseError(where(line) + "duplicate node " + std::to_string(i));
      const double m = parse_value(tok[2], line);
      for (std::size_t k = 3; k < tok.size(); ++k) parse_value(tok[k], line);
      mass[i] = m;
    } else if (tok[0] == "dist") {
      if (tok.size() != 4) throw ParseError(where(line) + "dist needs i j d");
      dists.push_back({parse_index(tok[1], line), parse_index(tok[2], line), parse_value(tok[3], line), line});
    } else if (tok[0] == "grid") {
      if (tok.size() != 3) throw ParseError(where(line) + "grid needs a kind and a length");
      if (tok[1] == "path")
        grid = GridKind::path;
      else if (tok[1] == "circle")
        grid = GridKind::circle;
      else
        throw ParseError(where(line) + "unknown grid kind '" + std::string(tok[1]) + "'");
      grid_length = parse_value(tok[2], line);
    } else {
      if (tok[0] == "edge") tok.erase(tok.begin());
      if (tok.size() != 3) throw ParseError(where(line) + "edge needs i j w");
      edges.push_back({parse_index(tok[0], line), parse_index(tok[1], line), parse_value(tok[2], line), line});
    }
  }
  if (mass.empty()) throw ParseError("graph has no nodes");
  const int n = static_cast<int>(mass.size());
  if (mass.rbegin()->first != n - 1) throw ParseError("node indices must be 0..n-1");
  Eigen::VectorXd m(n);
  for (const auto& [i, v] : mass) m[i] = v;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges) {
    if (e.i >= n || e.j >= n) throw ParseError(where(e.line) + "edge refers to an unknown node");
    if (e.i == e.j) throw ParseError(where(e.line) + "self-loop");
    if (!(e.v >= 0) || !std::isfinite(e.v)) throw ParseError(where(e.line) + "conductance must be >= 0");
    if (w(e.i, e.j) != 0) throw ParseError(where(e.line) + "duplicate edge");
    w(e.i, e.j) = w(e.j, e.i) = e.v;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, nan);
  d.diagonal().setZero();
  for (const auto& e : dists) {
    if (e.i >= n || e.j >= n) throw ParseError(where(e.line) + "dist refers to an unknown node");
    if (!std::isnan(d(e.i, e.j)) && e.i != e.j) throw ParseError(where(e.line) + "duplicate dist");
    d(e.i, e.j) = d(e.j, e.i) = e.v;
  }
  const bool filled = d.hasNaN();
  if (filled) {
    // Given distances act as extra links of length d, i.e. conductance 1/d².
    Eigen::MatrixXd links = w;
    for (const auto& e : dists)
      if (e.i != e.j && e.v > 0) links(e.i, e.j) = links(e.j, e.i) = 1.0 / (e.v * e.v);
    const Eigen::MatrixXd sp = shortest_path_metric(links);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (std::isnan(d(i, j))) d(i, j) = sp(i, j);
  }
  FiniteSpace::Options opts;
  opts.metric_filled = filled;
  if (grid != GridKind::none) {
    opts.grid = grid;
    opts.length = grid_length;
    opts.spacing = grid == GridKind::circle ? grid_length / n : grid_length / (n - 1);
  }
  return FiniteSpace(std::move(m), std::move(d), std::move(w), opts);
}

FiniteSpace read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file '" + path + "'");
  return parse_graph(in);
}

std::string format_graph(const FiniteSpace& space) {
  std::ostringstream out;
  const int n = space.n();
  if (space.grid() != GridKind::none)
    out << "grid " << (space.grid() == GridKind::circle ? "circle" : "path") << ' '
        << format_double(space.length()) << '\n';
  for (int i = 0; i < n; ++i) out << "node " << i << ' ' << format_double(space.measure()[i]) << '\n';
  for (const auto& e : space.edges())
    out << e.x << ' ' << e.y << ' ' << format_double(e.w) << '\n';
  if (space.metric_filled()) {
    out << "# metric filled by shortest paths\n";
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        out << "dist " << i << ' ' << j << ' ' << format_double(space.metric()(i, j)) << '\n';
  }
  return out.str();
}

CheckReport to_check_report(const Gamma2Report& rep, const std::string& name) {
  CheckReport out;
  out.name = name;
  out.holds = rep.holds;
  out.margin = rep.margin;
  out.witness.assign(rep.witness.data(), rep.witness.data() + rep.witness.size());
  out.residuals = rep.point_margins;
  out.diagnostics["K"] = rep.K;
  out.diagnostics["N"] = rep.N;
  out.diagnostics["worst_point"] = rep.worst_point;
  return out;
}

std::string reports_to_json(const std::vector<CheckReport>& reports) {
  std::ostringstream out;
  out << '[';
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    if (k) out << ',';
    out << "\n  {\"name\":";
    write_string(out, r.name);
    out << ",\"verdict\":\"" << r.verdict() << "\",\"margin\":";
    write_number(out, r.margin);
    out << ",\"tolerance\":";
    write_number(out, r.tolerance);
    out << ",\"witness\":";
    write_array(out, r.witness);
    out << ",\"residuals\":";
    write_array(out, r.residuals);
    out << ",\"diagnostics\":{";
    bool first = true;
    for (const auto& [key, value] : r.diagnostics) {
      if (!first) out << ',';
      first = false;
      write_string(out, key);
      out << ':';
      write_number(out, value);
    }
    out << "}}";
  }
  out << (reports.empty() ? "]" : "\n]") << '\n';
  return out.str();
}

std::vector<CheckReport> reports_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("report document must be an array");
  std::vector<CheckReport> out;
  try {
    for (const auto& j : doc) {
      CheckReport r;
      r.name = j.at("name").get<std::string>();
      const auto verdict = j.at("verdict").get<std::string>();
      if (verdict != "pass" && verdict != "fail") throw ParseError("unknown verdict '" + verdict + "'");
      r.holds = verdict == "pass";
      r.margin = json_number(j.at("margin"));
      r.tolerance = json_number(j.at("tolerance"));
      r.witness = json_array(j.at("witness"));
      r.residuals = json_array(j.at("residuals"));
      for (const auto& [key, value] : j.at("diagnostics").items()) r.diagnostics[key] = json_number(value);
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return out;
}

std::string trajectory_csv(const std::vector<double>& times, const std::vector<Field>& rows) {
  if (times.size() != rows.size()) throw std::invalid_argument("trajectory_csv: size mismatch");
  std::ostringstream out;
  const Eigen::Index n = rows.empty() ? 0 : rows.front().size();
  out << 't';
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != n) throw std::invalid_argument("trajectory_csv: ragged rows");
    out << format_double(times[k]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(rows[k][i]);
    out << '\n';
  }
  return out.str();
}

CsvMatrix parse_trajectory_csv(std::istream& in) {
  CsvMatrix out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    const auto cells = split(raw, ',');
    if (out.header.empty()) {
      if (cells.front() != "t") throw ParseError(where(line) + "CSV header must start with 't'");
      for (auto c : cells) out.header.emplace_back(c);
      continue;
    }
    if (cells.size() != out.header.size()) throw ParseError(where(line) + "wrong number of columns");
    out.times.push_back(parse_value(cells[0], line));
    Field row(static_cast<Eigen::Index>(cells.size() - 1));
    for (std::size_t i = 1; i < cells.size(); ++i) row[static_cast<Eigen::Index>(i - 1)] = parse_value(cells[i], line);
    out.rows.push_back(std::move(row));
  }
  if (out.header.empty()) throw ParseError("empty CSV");
  return out;
}

std::string curve_csv(const MeasureCurve& curve) { return trajectory_csv(curve.times, curve.densities); }

MeasureCurve parse_curve_csv(const FiniteSpace& space, std::istream& in) {
  auto csv = parse_trajectory_csv(in);
  if (csv.header.size() != space.size() + 1) throw ParseError("curve width does not match the space");
  return make_curve(space, std::move(csv.times), std::move(csv.rows));
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename into '" + path + "': " + ec.message());
  }
}

}  // namespace curvlab
