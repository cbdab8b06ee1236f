#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "twr/metrics.hpp"
#include "twr/simulate.hpp"

using namespace twr;

namespace {

Matrix desk_forward(const ScenarioSpec& spec) {
  return random_forward_operator(spec.n_sensors, spec.n_sources(), spec.condition_number, spec.forward_seed);
}

ScenarioSpec single_source(std::size_t dipole, double peak_s) {
  ScenarioSpec spec = desk_scenario();
  spec.active_sets.resize(1);
  spec.active_sets[0].dipoles = {dipole};
  spec.active_sets[0].waveform.peak_time_s = peak_s;
  return spec;
}

}  // namespace

TEST(Waveform, ZeroPhaseVanishesAtPeak) {
  SourceWaveformSpec w{.freq_hz = 10.0, .peak_time_s = 0.03, .decay_s = 0.02, .amplitude = 2.0, .phase_rad = 0.0};
  EXPECT_EQ(sine_exponential(0.03, w), 0.0);
}

TEST(Waveform, DefaultPhasePeaksAtPeakTime) {
  SourceWaveformSpec w{.freq_hz = 10.0, .peak_time_s = 0.03, .decay_s = 0.02, .amplitude = 2.0};
  EXPECT_DOUBLE_EQ(sine_exponential(0.03, w), 2.0);
  for (double t = 0.0; t < 0.2; t += 0.001) EXPECT_LE(std::abs(sine_exponential(t, w)), 2.0 + 1e-15);
}

TEST(Waveform, ZeroAmplitudeIsSilent) {
  SourceWaveformSpec w{.amplitude = 0.0};
  for (double t = -1.0; t < 1.0; t += 0.01) EXPECT_EQ(sine_exponential(t, w), 0.0);
}

TEST(Waveform, EnvelopeDropsByEAfterOneDecayTime) {
  // with freq chosen so the carrier is at a crest at both points
  SourceWaveformSpec w{.freq_hz = 50.0, .peak_time_s = 0.1, .decay_s = 0.02, .amplitude = 1.5};
  const double at_peak = sine_exponential(0.1, w);
  const double later = sine_exponential(0.12, w);
  EXPECT_NEAR(at_peak / later, std::numbers::e, 1e-12 * std::numbers::e);
}

TEST(Truth, NoActiveSetsIsZero) {
  ScenarioSpec spec = desk_scenario();
  spec.active_sets.clear();
  const Matrix B = build_truth(spec, desk_forward(spec));
  EXPECT_EQ(B.norm(), 0.0);
}

TEST(Truth, AxisOrientationFillsOneRow) {
  ScenarioSpec spec = single_source(5, 0.03);
  spec.active_sets[0].orientation = {1.0, 0.0, 0.0};
  const Matrix B = build_truth(spec, desk_forward(spec));
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    if (i == 15) {
      EXPECT_GT(B.row(i).norm(), 0.0);
    } else {
      EXPECT_EQ(B.row(i).norm(), 0.0) << i;
    }
  }
}

TEST(Truth, RowsCarryOrientedWaveform) {
  const ScenarioSpec spec = desk_scenario();
  const Matrix B = build_truth(spec, desk_forward(spec));
  for (const auto& src : spec.active_sets) {
    for (auto d : src.dipoles) {
      for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t k = 0; k < spec.n_timepoints; ++k) {
          const double expected = src.orientation[axis] * sine_exponential(spec.time_of(k), src.waveform);
          EXPECT_EQ(B(static_cast<Eigen::Index>(3 * d + axis), static_cast<Eigen::Index>(k)), expected);
        }
      }
    }
  }
}

TEST(Truth, SparsityMatchesActiveCount) {
  const ScenarioSpec spec = desk_scenario();
  const Matrix B = build_truth(spec, desk_forward(spec));
  // both desk sources have all three components nonzero at every sample
  EXPECT_DOUBLE_EQ(sparsity_level(B), 1.0 - 3.0 * 2.0 / 120.0);
}

TEST(Truth, RejectsOutOfRangeDipole) {
  ScenarioSpec spec = single_source(40, 0.03);
  try {
    build_truth(spec, desk_forward(desk_scenario()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}

TEST(Synthesize, HitsTargetSnrExactly) {
  const ScenarioSpec spec = desk_scenario();
  const Matrix X = desk_forward(spec);
  const Matrix B = build_truth(spec, X);
  for (double snr : {-10.0, 0.0, 5.0, 20.0}) {
    const SensorData d = synthesize(X, B, snr, 17);
    const double ratio = (X * B).squaredNorm() / d.E.squaredNorm();
    const double target = std::pow(10.0, snr / 10.0);
    EXPECT_NEAR(ratio, target, 1e-12 * target);
    EXPECT_LE((d.Y - X * B - d.E).norm(), 1e-14 * d.Y.norm());
  }
}

TEST(Synthesize, InfiniteSnrIsNoiseless) {
  const ScenarioSpec spec = desk_scenario();
  const Matrix X = desk_forward(spec);
  const Matrix B = build_truth(spec, X);
  const SensorData d = synthesize(X, B, std::numeric_limits<double>::infinity(), 0);
  EXPECT_EQ(d.E.norm(), 0.0);
  EXPECT_EQ(d.Y, X * B);
}

TEST(Synthesize, SilentTruthWithFiniteSnr) {
  const Matrix X = Matrix::Ones(3, 6);
  try {
    synthesize(X, Matrix::Zero(6, 4), 5.0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SilentTruth);
  }
}

TEST(Synthesize, SeedDeterminism) {
  const ScenarioSpec spec = desk_scenario();
  const Matrix X = desk_forward(spec);
  const Matrix B = build_truth(spec, X);
  EXPECT_EQ(synthesize(X, B, 5.0, 3).Y, synthesize(X, B, 5.0, 3).Y);
  EXPECT_NE(synthesize(X, B, 5.0, 3).Y, synthesize(X, B, 5.0, 4).Y);
  EXPECT_EQ(desk_forward(spec), desk_forward(spec));
}

TEST(ForwardOperator, HasRequestedConditionNumber) {
  const Matrix X = random_forward_operator(20, 120, 10.0, 5);
  Eigen::JacobiSVD<Matrix> svd(X);
  const Vector d = svd.singularValues();
  EXPECT_NEAR(d(0), 1.0, 1e-10);
  EXPECT_NEAR(d(0) / d(19), 10.0, 1e-8);
  EXPECT_THROW(random_forward_operator(5, 4, 10.0, 0), Error);
}

TEST(Scenario, EnergyPeaksAtNearestSample) {
  for (double peak : {0.025, 0.058, 0.1}) {
    const ScenarioSpec spec = single_source(12, peak);
    const Matrix B = build_truth(spec, desk_forward(spec));
    const Matrix table = energy_table(B, sphere_geometry(spec.n_dipoles));
    Eigen::Index best = 0;
    table.colwise().squaredNorm().maxCoeff(&best);
    EXPECT_EQ(static_cast<std::size_t>(best), spec.nearest_sample(peak)) << peak;
  }
  const ScenarioSpec desk = desk_scenario();
  EXPECT_EQ(desk.nearest_sample(0.025), 9u);
  EXPECT_EQ(desk.nearest_sample(0.058), 21u);
  EXPECT_EQ(desk.nearest_sample(-1.0), 0u);
  EXPECT_EQ(desk.nearest_sample(100.0), 59u);
}

TEST(Scenario, JsonRoundTrip) {
  ScenarioSpec spec = desk_scenario(12);
  spec.snr_db = std::numeric_limits<double>::infinity();
  const nlohmann::json j = spec;
  const ScenarioSpec back = j.get<ScenarioSpec>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  EXPECT_TRUE(std::isinf(back.snr_db));
  EXPECT_EQ(back.active_sets.size(), 2u);
  EXPECT_EQ(back.active_sets[1].waveform.decay_s, 0.025);
}

TEST(Scenario, ValidationRejectsBadOrientationAndDuplicates) {
  ScenarioSpec spec = desk_scenario();
  spec.active_sets[0].orientation = {1.0, 1.0, 0.0};
  EXPECT_THROW(spec.validate(), Error);
  spec = desk_scenario();
  spec.active_sets[1].dipoles = {7};
  EXPECT_THROW(spec.validate(), Error);
  spec = desk_scenario();
  spec.active_sets[0].waveform.decay_s = 0.0;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Geometry, SphereLatticeIsUnitNorm) {
  const DipoleGeometry g = sphere_geometry(40);
  ASSERT_EQ(g.n_dipoles(), 40u);
  for (std::size_t d = 0; d < 40; ++d) {
    const auto c = g.coord(d);
    EXPECT_NEAR(std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]), 1.0, 1e-12);
  }
}
