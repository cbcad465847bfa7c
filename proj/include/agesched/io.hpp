#pragma once

// File formats: policy and value tables as CSV (17 significant digits, so a
// table read back is bit-identical), solver/structure/simulation reports as
// JSON, and the per-epoch simulation trace.

#include "agesched/simulator.hpp"
#include "agesched/solver.hpp"
#include "agesched/structure.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace agesched {

/// Shortest-safe decimal for a double: %.17g.
std::string format_double(double v);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Columns: q (1-based), y_mid, z, tau_1..tau_b.
std::string policy_csv(const QuantizedPolicy& policy, const QuantizedStateSpace& grid);
/// Throws std::runtime_error on malformed input; the grid midpoints in the
/// file must match `grid`.
QuantizedPolicy parse_policy_csv(const std::string& text, const QuantizedStateSpace& grid);
QuantizedPolicy read_policy_csv(const std::filesystem::path& path,
                                const QuantizedStateSpace& grid);

/// Columns: q (1-based), y_mid, R.
std::string value_csv(const ValueFunction& value, const QuantizedStateSpace& grid);
std::vector<double> read_value_csv(const std::filesystem::path& path,
                                   const QuantizedStateSpace& grid);

/// Columns: n, y, z, x, L, area, W.
std::string trace_csv(const SimulationReport& report);

nlohmann::json to_json(const SolveDiagnostics& d);
nlohmann::json to_json(const StructureReport& r);
nlohmann::json to_json(const SimulationReport& r);

} // namespace agesched
