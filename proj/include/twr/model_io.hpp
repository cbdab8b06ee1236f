#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "twr/error.hpp"

namespace twr {

/// Dense column-major storage; the on-disk format is row-major text.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Axis { X = 0, Y = 1, Z = 2 };

struct DipoleComponent {
  std::size_t dipole;
  Axis axis;
};

/// Dipole positions. Row i of a source matrix belongs to dipole i/3, axis i%3.
class DipoleGeometry {
 public:
  using Point = std::array<double, 3>;

  explicit DipoleGeometry(std::vector<Point> coords);

  std::size_t n_dipoles() const noexcept { return coords_.size(); }
  std::size_t n_rows() const noexcept { return 3 * coords_.size(); }
  const std::vector<Point>& coords() const noexcept { return coords_; }
  const Point& coord(std::size_t dipole) const { return coords_.at(dipole); }

  DipoleComponent component_of(std::size_t row) const;
  static std::size_t row_of(std::size_t dipole, Axis axis) {
    return 3 * dipole + static_cast<std::size_t>(axis);
  }

 private:
  std::vector<Point> coords_;
};

struct ProblemInstance {
  Matrix X;  // n x p forward operator
  Matrix Y;  // n x s sensor data
  DipoleGeometry geometry;
  double sample_rate_hz;

  ProblemInstance(Matrix x, Matrix y, DipoleGeometry geom, double rate_hz);

  Eigen::Index n_sensors() const { return X.rows(); }
  Eigen::Index n_sources() const { return X.cols(); }
  Eigen::Index n_timepoints() const { return Y.cols(); }
};

/// Throws NonFiniteValue naming `what` if any entry is NaN or Inf.
void require_finite(const Matrix& m, const std::string& what);

/// Throws DimensionMismatch unless `m` is rows x cols.
void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what);

/// Builds a matrix from row vectors; rejects ragged or non-finite input.
Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows);

// Matrix text format: first line "rows cols", then one comma-separated row
// per line. Values use the shortest decimal that round-trips exactly.
Matrix parse_matrix(const std::string& text);
std::string format_matrix(const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const Matrix& m, const std::filesystem::path& path);

// Geometry format: one "x,y,z" line per dipole.
DipoleGeometry parse_geometry(const std::string& text);
std::string format_geometry(const DipoleGeometry& geometry);
DipoleGeometry read_geometry(const std::filesystem::path& path);
void write_geometry(const DipoleGeometry& geometry, const std::filesystem::path& path);

/// Shortest round-trip decimal for a finite double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace twr
