#include "ioest/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ioest::io {
namespace {

[[noreturn]] void fail(const std::string& source, const std::string& what) {
  throw Error(ErrorCode::ParseError, source + ": " + what);
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Convert the byte offset into line:column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(source, "line " + std::to_string(line) + " column " + std::to_string(col) + ": invalid JSON");
  }
}

double number_at(const Json& j, const std::string& where) {
  if (!j.is_number()) throw Error(ErrorCode::ParseError, where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::ParseError, where + ": number is not finite");
  return v;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& source) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if constexpr (std::is_same_v<T, double>) {
    return number_at(v, source + ": " + key);
  } else {
    if (!v.is_number_integer() && !v.is_number_unsigned()) fail(source, std::string(key) + ": expected an integer");
    return v.get<T>();
  }
}

}  // namespace

Json matrix_to_json(const Matrix& M) {
  if (M.rows() == 0 || M.cols() == 0) return Json{{"rows", M.rows()}, {"cols", M.cols()}};
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& where) {
  if (j.is_object()) {
    if (!j.contains("rows") || !j.contains("cols")) throw Error(ErrorCode::ParseError, where + ": expected rows and cols");
    const auto r = get_or<long long>(j, "rows", 0, where);
    const auto c = get_or<long long>(j, "cols", 0, where);
    if (r < 0 || c < 0 || (r > 0 && c > 0)) {
      throw Error(ErrorCode::ParseError, where + ": the {rows, cols} form is only for empty matrices");
    }
    return Matrix(r, c);
  }
  if (j.is_number()) return Matrix::Constant(1, 1, number_at(j, where));
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::ParseError, where + ": expected a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  if (cols == 0) throw Error(ErrorCode::ParseError, where + "[0]: expected a non-empty row array");
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::string row_where = where + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols) {
      throw Error(ErrorCode::ParseError, row_where + ": expected " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      M(i, k) = number_at(j[i][k], row_where + "[" + std::to_string(k) + "]");
    }
  }
  return M;
}

namespace {

SystemFile system_from_json(const Json& j, const std::string& source) {
  if (!j.is_object()) fail(source, "expected a JSON object");
  SystemFile f;
  const std::string dom = j.value("domain", std::string("discrete"));
  if (dom == "discrete" || dom == "z") {
    f.sys.domain = Domain::DiscreteZ;
  } else if (dom == "continuous" || dom == "s") {
    f.sys.domain = Domain::ContinuousS;
  } else {
    fail(source, "domain: expected \"discrete\" or \"continuous\"");
  }
  for (const char* key : {"A", "G", "C", "H"}) {
    if (!j.contains(key)) fail(source, std::string("missing matrix ") + key);
  }
  Matrix A = matrix_from_json(j.at("A"), source + ": A");
  Matrix G = matrix_from_json(j.at("G"), source + ": G");
  Matrix C = matrix_from_json(j.at("C"), source + ": C");
  Matrix H = matrix_from_json(j.at("H"), source + ": H");
  Matrix Q = j.contains("Q") ? matrix_from_json(j.at("Q"), source + ": Q") : Matrix();
  Matrix R = j.contains("R") ? matrix_from_json(j.at("R"), source + ": R") : Matrix();
  try {
    f.sys = StateSpaceModel(A, G, C, H, f.sys.domain, Q, R);
    f.sys.validate();
  } catch (const Error& e) {
    fail(source, e.what());
  }
  if (j.contains("metadata")) f.metadata = j.at("metadata");
  return f;
}

}  // namespace

SystemFile parse_system(const std::string& text, const std::string& source) {
  return system_from_json(parse_json(text, source), source);
}

SystemFile load_system(const std::filesystem::path& path) {
  return parse_system(read_text(path), path.string());
}

Json system_to_json(const StateSpaceModel& sys, const Json& metadata) {
  Json j;
  j["domain"] = sys.is_discrete() ? "discrete" : "continuous";
  j["A"] = matrix_to_json(sys.A);
  j["G"] = matrix_to_json(sys.G);
  j["C"] = matrix_to_json(sys.C);
  j["H"] = matrix_to_json(sys.H);
  j["Q"] = matrix_to_json(sys.Q_proc);
  j["R"] = matrix_to_json(sys.R_meas);
  j["metadata"] = metadata;
  return j;
}

void save_system(const std::filesystem::path& path, const StateSpaceModel& sys, const Json& metadata) {
  save_text(path, system_to_json(sys, metadata).dump(2) + "\n");
}

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source) {
  const Json j = parse_json(text, source);
  if (!j.is_object()) fail(source, "expected a JSON object");
  ScenarioConfig c;
  if (j.contains("system")) {
    c.plant = system_from_json(j.at("system"), source + ": system").sys;
  } else if (j.contains("system_file")) {
    if (!j.at("system_file").is_string()) fail(source, "system_file: expected a string");
    c.plant = load_system(base_dir / j.at("system_file").get<std::string>()).sys;
  } else {
    fail(source, "missing system or system_file");
  }
  const auto m = c.plant.m();
  if (j.contains("d_model")) {
    const Json& d = j.at("d_model");
    const std::string where = source + ": d_model";
    const std::string kind = d.value("kind", std::string("ar"));
    Matrix cov = d.contains("cov") ? matrix_from_json(d.at("cov"), where + ".cov") : Matrix();
    if (kind == "white") {
      c.d_model = InputModel::white(cov);
    } else if (kind == "ar") {
      std::vector<Matrix> coeffs;
      if (d.contains("coeffs")) {
        if (!d.at("coeffs").is_array()) fail(where, "coeffs: expected an array of matrices");
        for (std::size_t k = 0; k < d.at("coeffs").size(); ++k) {
          coeffs.push_back(matrix_from_json(d.at("coeffs")[k], where + ".coeffs[" + std::to_string(k) + "]"));
        }
      }
      c.d_model = InputModel::ar(coeffs, cov);
    } else if (kind == "deterministic" || kind == "zero") {
      std::vector<Vector> seq;
      if (d.contains("sequence")) {
        const Matrix S = matrix_from_json(d.at("sequence"), where + ".sequence");
        if (S.cols() != m) fail(where, "sequence rows must have m entries");
        for (Eigen::Index t = 0; t < S.rows(); ++t) seq.push_back(S.row(t).transpose());
      }
      c.d_model = InputModel::deterministic(seq);
    } else {
      fail(where, "kind: expected white, ar or deterministic");
    }
  }
  c.horizon = get_or<int>(j, "horizon", c.horizon, source);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, source);
  c.trials = get_or<int>(j, "trials", c.trials, source);
  c.burn_in = get_or<int>(j, "burn_in", c.burn_in, source);
  c.probe_time = get_or<int>(j, "probe_time", c.probe_time, source);
  c.x0_scale = get_or<double>(j, "x0_scale", c.x0_scale, source);
  c.inner_x0_scale = get_or<double>(j, "inner_x0_scale", c.inner_x0_scale, source);
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon, source);
  if (j.contains("Q")) c.Q = matrix_from_json(j.at("Q"), source + ": Q");
  if (j.contains("R")) c.R = matrix_from_json(j.at("R"), source + ": R");
  try {
    c.validate();
  } catch (const Error& e) {
    fail(source, e.what());
  }
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text(path), path.parent_path(), path.string());
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (!have_header) {
      t.header = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      fail(source, "line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[k], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cells[k].find_first_not_of(" \t", used) != std::string::npos) {
        fail(source, "line " + std::to_string(lineno) + " column " + std::to_string(k + 1) +
                         ": not a number");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable load_csv(const std::filesystem::path& path) {
  return parse_csv(read_text(path), path.string());
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (k) out += ',';
    out += table.header[k];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += format_number(row[k]);
    }
    out += '\n';
  }
  return out;
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  f << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ParseError, path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<Vector> rows_as_vectors(const CsvTable& table) {
  std::vector<Vector> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) out.push_back(Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size())));
  return out;
}

std::vector<std::string> indexed_names(const std::string& prefix, int count) {
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i) names.push_back(prefix + "[" + std::to_string(i) + "]");
  return names;
}

}  // namespace ioest::io
