#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"
#include "twr/simulate.hpp"
#include "twr/stage1.hpp"
#include "twr/tuning.hpp"

using namespace twr;
using test::random_matrix;

namespace {

ProblemInstance desk_instance(double snr_db, std::uint64_t noise_seed = 0) {
  ScenarioSpec spec = desk_scenario(noise_seed);
  spec.snr_db = snr_db;
  const Matrix X = random_forward_operator(spec.n_sensors, spec.n_sources(), spec.condition_number, spec.forward_seed);
  const Matrix B = build_truth(spec, X);
  const SensorData data = synthesize(X, B, spec.snr_db, spec.noise_seed);
  return ProblemInstance(X, data.Y, sphere_geometry(spec.n_dipoles), spec.sample_rate_hz);
}

}  // namespace

TEST(Folds, ArePartitionOfRows) {
  for (auto [n, K] : {std::pair<Eigen::Index, int>{20, 5}, {23, 5}, {7, 7}, {10, 3}}) {
    const auto folds = make_folds(n, K, 99);
    ASSERT_EQ(folds.size(), static_cast<std::size_t>(K));
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    std::size_t smallest = n, largest = 0;
    for (const auto& f : folds) {
      smallest = std::min(smallest, f.size());
      largest = std::max(largest, f.size());
      for (auto r : f) hits[static_cast<std::size_t>(r)]++;
    }
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_LE(largest - smallest, 1u);
  }
  EXPECT_EQ(make_folds(20, 5, 1), make_folds(20, 5, 1));
  EXPECT_NE(make_folds(20, 5, 1), make_folds(20, 5, 2));
}

TEST(Folds, TooManyFolds) {
  try {
    make_folds(3, 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FoldTooSmall);
  }
  CvSpec spec;
  spec.K = 25;
  EXPECT_THROW(spec.validate(20), Error);
}

TEST(CvSpec, DefaultGridIsTenEvenlySpacedValues) {
  const auto grid = CvSpec::default_mu1_grid();
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_EQ(grid.back(), 1.0);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] - grid[i - 1], 1.0 / 9.0, 1e-15);
  CvSpec bad;
  bad.mu1_grid = {0.5, 0.2};
  EXPECT_THROW(bad.validate(20), Error);
}

TEST(HatTrace, MatchesAssembledMatrix) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = static_cast<Eigen::Index>(3 + rng() % 20);
    const PenaltyOperator pen = second_diff_penalty(s);
    const double a_norm2 = std::pow(10.0, test::uniform(rng, -2.0, 2.0));
    const double mu2 = std::pow(10.0, test::uniform(rng, -3.0, 3.0));
    const Matrix S = pen.P() * (a_norm2 * Matrix::Identity(s, s) + mu2 * Matrix(pen.lambda().asDiagonal()))
                                   .inverse() * pen.P().transpose();
    const double assembled = S.trace();
    EXPECT_NEAR(hat_trace(a_norm2, mu2, pen.lambda()), assembled, 1e-10 * std::max(1.0, assembled)) << trial;
  }
}

TEST(Gcv, NonNegativeWhereDefined) {
  std::mt19937_64 rng(82);
  const Matrix B = random_matrix(12, 10, rng);
  const Matrix A = random_matrix(12, 4, rng);
  const PenaltyOperator pen = second_diff_penalty(10);
  for (GcvTrace tr : {GcvTrace::Normalized, GcvTrace::HatMatrix, GcvTrace::PerEntry}) {
    for (double mu2 : {1e-4, 1e-2, 1.0, 1e2, 1e4}) {
      const auto g = gcv_score(B, A, pen, mu2, tr);
      if (g.components_used > 0) {
        EXPECT_GE(g.value, 0.0);
        EXPECT_TRUE(std::isfinite(g.value));
      }
    }
  }
}

TEST(Gcv, SearchReturnsBestSampleAndSortedCurve) {
  std::mt19937_64 rng(83);
  const Matrix B = random_matrix(15, 12, rng);
  const DecompositionState st = twr_solve(B, second_diff_penalty(12), SolverOptions{.mu1 = 0.1, .mu2 = 1.0});
  GcvSpec spec;
  const GcvResult r = gcv_mu2(B, st.A, second_diff_penalty(12), spec);
  ASSERT_GE(r.samples.size(), 3u);
  EXPECT_GE(r.mu2_star, spec.mu2_lo);
  EXPECT_LE(r.mu2_star, spec.mu2_hi);
  for (std::size_t i = 1; i < r.samples.size(); ++i) EXPECT_LE(r.samples[i - 1].first, r.samples[i].first);
  for (const auto& [mu2, v] : r.samples) EXPECT_GE(v, r.gcv_star - 1e-12 * std::abs(r.gcv_star));
}

TEST(Gcv, ZeroAHasNoValidComponent) {
  const PenaltyOperator pen = second_diff_penalty(6);
  try {
    gcv_mu2(Matrix::Ones(4, 6), Matrix::Zero(4, 6), pen, GcvSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidComponent);
  }
  GcvSpec bad;
  bad.mu2_hi = bad.mu2_lo;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(KfoldCv, ScoresFiniteNonNegativeAndDeterministic) {
  std::mt19937_64 rng(84);
  const Matrix X = random_matrix(10, 18, rng);
  const Matrix Y = random_matrix(10, 8, rng);
  const PenaltyOperator pen = second_diff_penalty(8);
  CvSpec spec;
  spec.K = 5;
  spec.fold_seed = 3;
  const CvResult a = kfold_cv_mu1(X, Y, spec, 1.0, SolverOptions{}, pen);
  const CvResult b = kfold_cv_mu1(X, Y, spec, 1.0, SolverOptions{}, pen);
  ASSERT_EQ(a.scores.size(), spec.mu1_grid.size());
  EXPECT_EQ(a.cells.rows(), 5);
  EXPECT_EQ(a.cells.cols(), 10);
  for (double v : a.scores) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.mu1_star, b.mu1_star);
  // the selected point is minimal, ties go left
  for (std::size_t g = 0; g < a.scores.size(); ++g) {
    EXPECT_LE(a.scores[a.best_index], a.scores[g]);
    if (g < a.best_index) EXPECT_LT(a.scores[a.best_index], a.scores[g]);
  }
  EXPECT_EQ(a.mu1_star, spec.mu1_grid[a.best_index]);
}

TEST(KfoldCv, NoiselessSparseSmoothPrefersSomeSparsity) {
  // Without noise the raw estimate is small (entries ~0.1), so the useful
  // range of mu1 is well below the default [0, 1] grid.
  const ProblemInstance inst = desk_instance(std::numeric_limits<double>::infinity());
  CvSpec cv;
  cv.mu1_grid.clear();
  for (int i = 0; i < 10; ++i) cv.mu1_grid.push_back(0.05 * i / 9.0);
  const CvResult r = kfold_cv_mu1(inst, cv, 1.0, SolverOptions{});
  EXPECT_GT(r.mu1_star, 0.0);
  EXPECT_LE(r.scores[r.best_index], r.scores[0]);
}

TEST(AutoTune, ReportStructureAndDeterminism) {
  const ProblemInstance inst = desk_instance(5.0, 4);
  CvSpec cv;
  cv.mu1_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  const TuneResult a = auto_tune(inst, cv, GcvSpec{}, SolverOptions{}, 1);
  const auto& rep = a.report;
  ASSERT_TRUE(rep.contains("cv_scores"));
  std::size_t cells = 0;
  for (const auto& row : rep["cv_scores"]) cells += row.size();
  EXPECT_EQ(cells, static_cast<std::size_t>(cv.K) * cv.mu1_grid.size());
  EXPECT_GE(rep["gcv_samples"].size(), 3u);
  for (const char* key : {"mu1_grid", "mu1_star", "mu2_star", "warnings"}) EXPECT_TRUE(rep.contains(key)) << key;
  EXPECT_EQ(rep["mu1_star"].get<double>(), a.mu1_star);

  const TuneResult b = auto_tune(inst, cv, GcvSpec{}, SolverOptions{}, 1);
  EXPECT_EQ(a.report.dump(), b.report.dump());
}

TEST(AutoTune, OneWayModesSkipTheirStep) {
  const ProblemInstance inst = desk_instance(5.0, 5);
  CvSpec cv;
  cv.mu1_grid = {0.0, 0.5, 1.0};
  const TuneResult t = auto_tune(inst, cv, GcvSpec{}, SolverOptions{}, 1, Regularization::TemporalOnly);
  EXPECT_EQ(t.mu1_star, 0.0);
  EXPECT_TRUE(t.report["mu1_grid"].empty());
  const TuneResult s = auto_tune(inst, cv, GcvSpec{}, SolverOptions{}, 1, Regularization::SpatialOnly);
  EXPECT_EQ(s.mu2_star, 0.0);
  EXPECT_TRUE(s.gcv.samples.empty());
}
