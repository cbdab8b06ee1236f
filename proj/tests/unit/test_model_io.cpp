#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>

#include "test_util.hpp"
#include "twr/model_io.hpp"

using namespace twr;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "twr_model_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected twr::Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(ModelIo, ParsesSimpleMatrix) {
  const Matrix m = parse_matrix("2 2\n1,2\n3,4\n");
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 2.0);
  EXPECT_EQ(m(1, 0), 3.0);
  EXPECT_EQ(m(1, 1), 4.0);
}

TEST(ModelIo, ParsesOneByOneZero) {
  const Matrix m = parse_matrix("1 1\n0\n");
  ASSERT_EQ(m.rows(), 1);
  ASSERT_EQ(m.cols(), 1);
  EXPECT_EQ(m(0, 0), 0.0);
}

TEST(ModelIo, FormatsShortestDecimal) {
  Matrix m(1, 2);
  m << 1.5, -2.0;
  EXPECT_EQ(format_matrix(m), "1 2\n1.5,-2\n");
}

TEST(ModelIo, FormatsZeroMatrixAsNineZeros) {
  const std::string text = format_matrix(Matrix::Zero(3, 3));
  EXPECT_EQ(text, "3 3\n0,0,0\n0,0,0\n0,0,0\n");
}

TEST(ModelIo, FileRoundTripIsBitExact) {
  std::mt19937_64 rng(42);
  const auto path = scratch("roundtrip.txt");
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = static_cast<Eigen::Index>(1 + rng() % 7);
    const auto cols = static_cast<Eigen::Index>(1 + rng() % 7);
    Matrix m = test::random_matrix(rows, cols, rng, std::pow(10.0, test::uniform(rng, -30, 30)));
    if (trial % 10 == 0) m(0, 0) = std::numeric_limits<double>::denorm_min();
    if (trial % 10 == 1) m(0, 0) = -0.0;
    write_matrix(m, path);
    const Matrix back = read_matrix(path);
    ASSERT_EQ(back.rows(), rows);
    ASSERT_EQ(back.cols(), cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        ASSERT_EQ(std::bit_cast<std::uint64_t>(back(i, j)), std::bit_cast<std::uint64_t>(m(i, j)))
            << "trial " << trial << " entry " << i << "," << j;
  }
}

TEST(ModelIo, RejectsMalformedHeader) {
  EXPECT_EQ(code_of([] { parse_matrix(""); }), ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([] { parse_matrix("2\n1,2\n"); }), ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([] { parse_matrix("0 2\n"); }), ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([] { parse_matrix("-1 2\n1,2\n"); }), ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([] { parse_matrix("a b\n1\n"); }), ErrorCode::MalformedHeader);
}

TEST(ModelIo, RejectsCellCountMismatch) {
  EXPECT_EQ(code_of([] { parse_matrix("2 2\n1,2\n3\n"); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { parse_matrix("2 2\n1,2\n"); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { parse_matrix("1 2\n1,2\n3,4\n"); }), ErrorCode::DimensionMismatch);
}

TEST(ModelIo, RejectsNonFiniteTokens) {
  EXPECT_EQ(code_of([] { parse_matrix("1 2\n1,nan\n"); }), ErrorCode::NonFiniteValue);
  EXPECT_EQ(code_of([] { parse_matrix("1 2\ninf,1\n"); }), ErrorCode::NonFiniteValue);
  EXPECT_EQ(code_of([] { parse_matrix("1 1\n1e999\n"); }), ErrorCode::NonFiniteValue);
}

TEST(ModelIo, WriteRejectsNonFinite) {
  Matrix m(1, 1);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { format_matrix(m); }), ErrorCode::NonFiniteValue);
}

TEST(ModelIo, MissingFileIsIoFailure) {
  EXPECT_EQ(code_of([] { read_matrix("/nonexistent/dir/m.txt"); }), ErrorCode::IoFailure);
  EXPECT_EQ(code_of([] { write_matrix(Matrix::Zero(1, 1), "/nonexistent/dir/m.txt"); }), ErrorCode::IoFailure);
}

TEST(ModelIo, GeometryRoundTripAndComponentMapping) {
  DipoleGeometry g({{0.0, 0.0, 0.0}, {1.0, -2.5, 3.25}, {0.1, 0.2, 0.3}});
  EXPECT_EQ(g.n_rows(), 9u);
  const DipoleGeometry back = parse_geometry(format_geometry(g));
  ASSERT_EQ(back.n_dipoles(), 3u);
  for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(back.coord(d), g.coord(d));

  // component_of is a bijection onto dipoles x axes and inverts row_of
  std::vector<int> seen(9, 0);
  for (std::size_t row = 0; row < g.n_rows(); ++row) {
    const auto c = g.component_of(row);
    EXPECT_EQ(c.dipole, row / 3);
    EXPECT_EQ(static_cast<std::size_t>(c.axis), row % 3);
    seen[DipoleGeometry::row_of(c.dipole, c.axis)]++;
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(code_of([&] { g.component_of(9); }), ErrorCode::IndexOutOfRange);
}

TEST(ModelIo, GeometryRejectsBadLines) {
  EXPECT_THROW(parse_geometry("1,2\n"), Error);
  EXPECT_THROW(parse_geometry("1,2,nan\n"), Error);
}

TEST(ModelIo, ProblemInstanceChecksShapes) {
  DipoleGeometry g({{0, 0, 0}, {1, 0, 0}});
  EXPECT_NO_THROW(ProblemInstance(Matrix::Zero(4, 6), Matrix::Zero(4, 5), g, 355.0));
  EXPECT_EQ(code_of([&] { ProblemInstance(Matrix::Zero(4, 6), Matrix::Zero(3, 5), g, 355.0); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { ProblemInstance(Matrix::Zero(4, 9), Matrix::Zero(4, 5), g, 355.0); }),
            ErrorCode::DimensionMismatch);
  EXPECT_THROW(ProblemInstance(Matrix::Zero(4, 6), Matrix::Zero(4, 5), g, 0.0), Error);
}

TEST(ModelIo, RequireFiniteNamesTheMatrix) {
  Matrix m = Matrix::Ones(2, 2);
  m(1, 1) = std::numeric_limits<double>::infinity();
  try {
    require_finite(m, "Y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
    EXPECT_NE(std::string(e.what()).find("Y"), std::string::npos);
  }
}
