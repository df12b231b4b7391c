#pragma once

#include "curvlab/gamma2.hpp"
#include "curvlab/report.hpp"
#include "curvlab/space.hpp"
#include "curvlab/transport.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace curvlab {

/// Malformed input text (graph files, CSV, JSON, scenario configs).
class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Locale-independent decimal parse; accepts inf, -inf and nan. Throws ParseError.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
/// Shortest text that round-trips: %.17g for finite values, "inf", "-inf", "nan" otherwise.
std::string format_double(double x);

/// Graph text format:
///   node i m_i [coord...]
///   i j w_ij            (or "edge i j w_ij")
///   dist i j d_ij       (optional; missing pairs are filled by shortest paths)
///   grid path|circle L  (optional tag for uniform 1-D grids)
/// Blank lines and text after '#' are ignored.
FiniteSpace parse_graph(std::istream& in);
FiniteSpace read_graph_file(const std::string& path);
/// Writes the node and edge blocks, plus dist lines unless the metric was filled.
std::string format_graph(const FiniteSpace& space);

/// BE scan outcome as a CheckReport: residuals are the per-point margins.
CheckReport to_check_report(const Gamma2Report& rep, const std::string& name = "be_check");

/// JSON array of reports with fixed key order:
/// name, verdict, margin, tolerance, witness, residuals, diagnostics (sorted keys).
/// Numbers use 17 significant digits; non-finite values are written as strings.
std::string reports_to_json(const std::vector<CheckReport>& reports);
std::vector<CheckReport> reports_from_json(const std::string& text);

/// CSV with header "t,x0,…,x{n−1}" and one row per time.
std::string trajectory_csv(const std::vector<double>& times, const std::vector<Field>& rows);

struct CsvMatrix {
  std::vector<std::string> header;
  std::vector<double> times;
  std::vector<Field> rows;
};
CsvMatrix parse_trajectory_csv(std::istream& in);

std::string curve_csv(const MeasureCurve& curve);
MeasureCurve parse_curve_csv(const FiniteSpace& space, std::istream& in);

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace curvlab
