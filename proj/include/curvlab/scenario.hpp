#pragma once

#include "curvlab/entropy.hpp"
#include "curvlab/report.hpp"
#include "curvlab/space.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace curvlab {

using Section = std::map<std::string, std::string>;

/// Parsed scenario config. Sections: [scenario], [space], [entropy], [initial], [run].
struct Scenario {
  std::string kind;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  std::filesystem::path base_dir;
  std::map<std::string, Section> sections;

  const Section& section(const std::string& name) const;
};

/// Experiment kinds accepted in [scenario] kind.
const std::vector<std::string>& experiment_kinds();

/// Parses INI text (';' or '#' comments, also trailing after whitespace). Unknown sections, keys or kinds raise ParseError.
/// Relative paths resolve against base_dir.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".");
Scenario load_scenario(const std::filesystem::path& path);

/// Space from a [space] record: kind = two-point | path | circle | complete | erdos | file.
FiniteSpace space_from_record(const Section& rec, const std::filesystem::path& base_dir = ".");
/// Model from an [entropy] record: family = linear | power | regularized with N, eps, M, a.
EntropyModel entropy_from_record(const Section& rec);
Section entropy_record(const EntropyModel& model);

struct ScenarioResult {
  std::vector<CheckReport> reports;
  /// Written files, relative to the output directory, in write order.
  std::vector<std::string> artifacts;

  bool all_pass() const;
};

/// Runs the experiment, writes its CSV files and reports.json atomically into the output
/// directory, and returns the reports. Checks run on up to `threads` workers; results and
/// files do not depend on the thread count.
ScenarioResult run_scenario(const Scenario& scenario, int threads = 1);

/// CURVLAB_THREADS if set to a positive integer, else the hardware concurrency (at least 1).
int thread_limit();

/// "pass name margin=…" line for console output.
std::string verdict_line(const CheckReport& report);

}  // namespace curvlab
