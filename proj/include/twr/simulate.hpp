#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "json.hpp"

#include "twr/model_io.hpp"

namespace twr {

/// Damped sinusoid a * sin(2 pi f (t - t0) + phase) * exp(-|t - t0| / decay).
/// The envelope peaks at t0; the default phase of pi/2 puts the energy peak
/// there as well.
struct SourceWaveformSpec {
  double freq_hz = 10.0;
  double peak_time_s = 0.0;
  double decay_s = 0.02;
  double amplitude = 1.0;
  double phase_rad = std::numbers::pi / 2.0;

  void validate() const;
};

double sine_exponential(double t, const SourceWaveformSpec& spec);

/// A group of dipoles sharing one orientation and one time course.
struct ActiveSource {
  std::vector<std::size_t> dipoles;
  std::array<double, 3> orientation{1.0, 0.0, 0.0};
  SourceWaveformSpec waveform;
};

struct ScenarioSpec {
  std::size_t n_sensors = 20;
  std::size_t n_dipoles = 40;
  std::size_t n_timepoints = 60;
  double sample_rate_hz = 355.0;
  std::vector<ActiveSource> active_sets;
  double snr_db = 5.0;  // +infinity means noiseless
  std::uint64_t noise_seed = 0;
  // Synthetic forward operator (used when no X file is supplied).
  std::uint64_t forward_seed = 1;
  double condition_number = 10.0;

  void validate() const;
  std::size_t n_sources() const { return 3 * n_dipoles; }
  double time_of(std::size_t k) const { return static_cast<double>(k) / sample_rate_hz; }
  /// Sample index closest to time t (clamped to the recording).
  std::size_t nearest_sample(double t) const;
};

/// Reference desk-scale scenario: 20 sensors, 40 dipoles, 60 samples at
/// 355 Hz, two single-dipole sources peaking at 25 ms and 58 ms, 5 dB SNR.
ScenarioSpec desk_scenario(std::uint64_t noise_seed = 0);

struct SensorData {
  Matrix Y;
  Matrix E;
  double achieved_snr_db;
};

/// p x s truth; only rows of active dipoles are nonzero.
Matrix build_truth(const ScenarioSpec& spec, const Matrix& X);

/// Y = X B + E with E seeded i.i.d. Gaussian rescaled to hit snr_db exactly.
SensorData synthesize(const Matrix& X, const Matrix& B, double snr_db, std::uint64_t noise_seed);

/// Seeded Gaussian n x p matrix whose singular values are log-spaced
/// from 1 down to 1 / condition_number.
Matrix random_forward_operator(std::size_t n, std::size_t p, double condition_number, std::uint64_t seed);

/// Dipoles spread evenly on the unit sphere (Fibonacci lattice).
DipoleGeometry sphere_geometry(std::size_t n_dipoles);

void to_json(nlohmann::json& j, const SourceWaveformSpec& w);
void from_json(const nlohmann::json& j, SourceWaveformSpec& w);
void to_json(nlohmann::json& j, const ActiveSource& a);
void from_json(const nlohmann::json& j, ActiveSource& a);
void to_json(nlohmann::json& j, const ScenarioSpec& s);
void from_json(const nlohmann::json& j, ScenarioSpec& s);

}  // namespace twr
