#include "twr/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string_view>

namespace twr {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  // drop trailing blank lines
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto end = line.find(',', start);
    if (end == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, end - start)));
    start = end + 1;
  }
  return cells;
}

double parse_cell(std::string_view token, std::size_t line_no) {
  // from_chars rejects a leading '+'; accept it for hand-written files.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  // out of range: overflow is reported as non-finite below, underflow rounds like strtod
  if (ec == std::errc::result_out_of_range && ptr == last) {
    value = std::strtod(std::string(token).c_str(), nullptr);
    ec = std::errc();
  }
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw Error(ErrorCode::DimensionMismatch,
                "unparseable cell '" + std::string(token) + "' on line " + std::to_string(line_no));
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteValue,
                "non-finite cell '" + std::string(token) + "' on line " + std::to_string(line_no));
  }
  return value;
}

bool parse_positive(std::string_view token, long long& out) {
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && out > 0;
}

}  // namespace

DipoleGeometry::DipoleGeometry(std::vector<Point> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw Error(ErrorCode::InvalidArgument, "geometry needs at least one dipole");
  for (const auto& c : coords_) {
    for (double v : c) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "dipole coordinate");
    }
  }
}

DipoleComponent DipoleGeometry::component_of(std::size_t row) const {
  if (row >= n_rows()) {
    throw Error(ErrorCode::IndexOutOfRange, "row " + std::to_string(row) + " >= " + std::to_string(n_rows()));
  }
  return {row / 3, static_cast<Axis>(row % 3)};
}

ProblemInstance::ProblemInstance(Matrix x, Matrix y, DipoleGeometry geom, double rate_hz)
    : X(std::move(x)), Y(std::move(y)), geometry(std::move(geom)), sample_rate_hz(rate_hz) {
  if (X.rows() != Y.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.rows()) + " rows but Y has " +
                                                  std::to_string(Y.rows()));
  }
  if (static_cast<std::size_t>(X.cols()) != geometry.n_rows()) {
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.cols()) + " columns but geometry has " +
                                                  std::to_string(geometry.n_dipoles()) + " dipoles");
  }
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  }
  require_finite(X, "X");
  require_finite(Y, "Y");
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFiniteValue, what + " contains NaN or Inf");
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::DimensionMismatch, what + " is " + std::to_string(m.rows()) + "x" +
                                                  std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                                                  "x" + std::to_string(cols));
  }
}

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix must have at least one row and column");
  }
  const auto n_cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n_cols) throw Error(ErrorCode::DimensionMismatch, "ragged row " + std::to_string(i));
    for (std::size_t j = 0; j < n_cols; ++j) m(i, j) = rows[i][j];
  }
  require_finite(m, "matrix");
  return m;
}

std::string format_double(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, "cannot serialize non-finite value");
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoFailure, "to_chars failed");
  return std::string(buf, ptr);
}

Matrix parse_matrix(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::MalformedHeader, "empty matrix file");

  std::istringstream header{std::string(trim(lines.front()))};
  std::string r_tok, c_tok, extra;
  long long rows = 0, cols = 0;
  if (!(header >> r_tok >> c_tok) || (header >> extra) || !parse_positive(r_tok, rows) ||
      !parse_positive(c_tok, cols)) {
    throw Error(ErrorCode::MalformedHeader, "first line must be two positive integers, got '" +
                                                std::string(lines.front()) + "'");
  }

  const auto data_lines = lines.size() - 1;
  if (data_lines != static_cast<std::size_t>(rows)) {
    throw Error(ErrorCode::DimensionMismatch, "header declares " + std::to_string(rows) + " rows, found " +
                                                  std::to_string(data_lines));
  }
  Matrix m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    const auto cells = split_cells(lines[i + 1]);
    if (cells.size() != static_cast<std::size_t>(cols)) {
      throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(i) + " has " +
                                                    std::to_string(cells.size()) + " cells, expected " +
                                                    std::to_string(cols));
    }
    for (long long j = 0; j < cols; ++j) m(i, j) = parse_cell(cells[j], static_cast<std::size_t>(i + 2));
  }
  return m;
}

std::string format_matrix(const Matrix& m) {
  require_finite(m, "matrix");
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 24);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

DipoleGeometry parse_geometry(const std::string& text) {
  std::vector<DipoleGeometry::Point> coords;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != 3) {
      throw Error(ErrorCode::DimensionMismatch, "geometry line " + std::to_string(line_no) + " needs 3 values");
    }
    coords.push_back({parse_cell(cells[0], line_no), parse_cell(cells[1], line_no), parse_cell(cells[2], line_no)});
  }
  return DipoleGeometry(std::move(coords));
}

std::string format_geometry(const DipoleGeometry& geometry) {
  std::string out;
  for (const auto& c : geometry.coords()) {
    out += format_double(c[0]) + "," + format_double(c[1]) + "," + format_double(c[2]) + "\n";
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Matrix read_matrix(const std::filesystem::path& path) { return parse_matrix(read_text_file(path)); }

void write_matrix(const Matrix& m, const std::filesystem::path& path) { write_text_file(path, format_matrix(m)); }

DipoleGeometry read_geometry(const std::filesystem::path& path) { return parse_geometry(read_text_file(path)); }

void write_geometry(const DipoleGeometry& geometry, const std::filesystem::path& path) {
  write_text_file(path, format_geometry(geometry));
}

}  // namespace twr
