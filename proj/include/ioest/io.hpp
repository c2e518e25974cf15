#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ioest/simharness.hpp"
#include "ioest/statespace.hpp"

namespace ioest::io {

using Json = nlohmann::ordered_json;

/// System file layout:
///
///   {"domain": "discrete" | "continuous",
///    "A": [[...], ...], "G": ..., "C": ..., "H": ...,
///    "Q": ..., "R": ...,          (optional)
///    "metadata": {...}}           (optional, copied through)
///
/// Matrices are row-major nested arrays. An n x 0 or 0 x m matrix may be given
/// as {"rows": r, "cols": c}.
struct SystemFile {
  StateSpaceModel sys;
  Json metadata = Json::object();
};

/// Throws ParseError with a line/column or a key path in the message.
SystemFile parse_system(const std::string& text, const std::string& source = "<input>");
SystemFile load_system(const std::filesystem::path& path);

Json system_to_json(const StateSpaceModel& sys, const Json& metadata = Json::object());
void save_system(const std::filesystem::path& path, const StateSpaceModel& sys,
                 const Json& metadata = Json::object());

Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j, const std::string& where);

/// Scenario file: {"system": {...} | "system_file": "relative/path.json",
/// "d_model": {"kind": "white" | "ar" | "deterministic", "coeffs": [M, ...],
/// "cov": M, "sequence": [[...], ...]}, "horizon", "seed", "trials", "burn_in",
/// "x0_scale", "inner_x0_scale", "epsilon", "probe_time", "Q", "R"}.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source = "<input>");

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Comma separated values with one header row. An empty file is an empty table.
CsvTable parse_csv(const std::string& text, const std::string& source = "<input>");
CsvTable load_csv(const std::filesystem::path& path);

/// Numbers are written with %.17g.
std::string format_number(double v);
std::string to_csv(const CsvTable& table);
void save_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::vector<Vector> rows_as_vectors(const CsvTable& table);

/// Header names "<prefix>[0]", "<prefix>[1]", ...
std::vector<std::string> indexed_names(const std::string& prefix, int count);

}  // namespace ioest::io
