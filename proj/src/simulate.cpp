#include "twr/simulate.hpp"

#include <cmath>
#include <random>
#include <set>

namespace twr {

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // fill row-major so the stream order matches the file layout
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

}  // namespace

void SourceWaveformSpec::validate() const {
  if (!(decay_s > 0.0) || !std::isfinite(decay_s)) throw Error(ErrorCode::InvalidArgument, "decay_s must be > 0");
  if (!(freq_hz > 0.0) || !std::isfinite(freq_hz)) throw Error(ErrorCode::InvalidArgument, "freq_hz must be > 0");
  if (!std::isfinite(amplitude) || !std::isfinite(peak_time_s) || !std::isfinite(phase_rad)) {
    throw Error(ErrorCode::InvalidArgument, "waveform parameters must be finite");
  }
}

double sine_exponential(double t, const SourceWaveformSpec& spec) {
  const double dt = t - spec.peak_time_s;
  return spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.freq_hz * dt + spec.phase_rad) *
         std::exp(-std::abs(dt) / spec.decay_s);
}

void ScenarioSpec::validate() const {
  if (n_sensors == 0 || n_dipoles == 0 || n_timepoints == 0) {
    throw Error(ErrorCode::InvalidArgument, "scenario dimensions must be positive");
  }
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw Error(ErrorCode::InvalidArgument, "sample_rate_hz must be positive");
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorCode::InvalidArgument, "snr_db must be a number or +infinity");
  }
  if (!(condition_number >= 1.0) || !std::isfinite(condition_number)) {
    throw Error(ErrorCode::InvalidArgument, "condition_number must be >= 1");
  }
  std::set<std::size_t> seen;
  for (const auto& src : active_sets) {
    src.waveform.validate();
    const auto& u = src.orientation;
    const double norm = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    if (std::abs(norm - 1.0) > 1e-10) throw Error(ErrorCode::InvalidArgument, "orientation must be a unit vector");
    for (auto d : src.dipoles) {
      if (d >= n_dipoles) {
        throw Error(ErrorCode::IndexOutOfRange, "active dipole " + std::to_string(d) + " >= " +
                                                    std::to_string(n_dipoles));
      }
      if (!seen.insert(d).second) throw Error(ErrorCode::InvalidArgument, "dipole " + std::to_string(d) + " is active twice");
    }
  }
}

std::size_t ScenarioSpec::nearest_sample(double t) const {
  const double k = std::round(t * sample_rate_hz);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), n_timepoints - 1);
}

ScenarioSpec desk_scenario(std::uint64_t noise_seed) {
  ScenarioSpec spec;
  spec.n_sensors = 20;
  spec.n_dipoles = 40;
  spec.n_timepoints = 60;
  spec.sample_rate_hz = 355.0;
  spec.snr_db = 5.0;
  spec.noise_seed = noise_seed;
  spec.forward_seed = 20110901;
  spec.condition_number = 3.0;

  ActiveSource left;
  left.dipoles = {7};
  left.orientation = {1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0};
  left.waveform = {.freq_hz = 12.0, .peak_time_s = 0.025, .decay_s = 0.015, .amplitude = 1.0};

  ActiveSource right;
  right.dipoles = {28};
  right.orientation = {2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0};
  right.waveform = {.freq_hz = 8.0, .peak_time_s = 0.058, .decay_s = 0.025, .amplitude = 1.0};

  spec.active_sets = {left, right};
  return spec;
}

Matrix build_truth(const ScenarioSpec& spec, const Matrix& X) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.n_sources());
  const auto s = static_cast<Eigen::Index>(spec.n_timepoints);
  if (X.cols() != p || X.rows() != static_cast<Eigen::Index>(spec.n_sensors)) {
    throw Error(ErrorCode::DimensionMismatch, "X does not match the scenario's sensor and dipole counts");
  }
  Matrix B = Matrix::Zero(p, s);
  for (const auto& src : spec.active_sets) {
    Vector w(s);
    for (Eigen::Index k = 0; k < s; ++k) w(k) = sine_exponential(spec.time_of(static_cast<std::size_t>(k)), src.waveform);
    for (auto d : src.dipoles) {
      for (int axis = 0; axis < 3; ++axis) {
        B.row(DipoleGeometry::row_of(d, static_cast<Axis>(axis))) = src.orientation[axis] * w.transpose();
      }
    }
  }
  return B;
}

SensorData synthesize(const Matrix& X, const Matrix& B, double snr_db, std::uint64_t noise_seed) {
  if (X.cols() != B.rows()) throw Error(ErrorCode::DimensionMismatch, "X columns must equal B rows");
  require_finite(X, "X");
  require_finite(B, "B");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorCode::InvalidArgument, "snr_db must be a number or +infinity");
  }
  Matrix signal = X * B;
  if (std::isinf(snr_db)) {
    return {signal, Matrix::Zero(signal.rows(), signal.cols()), snr_db};
  }
  const double signal_norm = signal.norm();
  if (signal_norm == 0.0) throw Error(ErrorCode::SilentTruth, "X B is zero; SNR is undefined");

  Matrix E = gaussian_matrix(signal.rows(), signal.cols(), noise_seed);
  // ||XB||^2 / ||E||^2 = 10^(snr/10)
  E *= signal_norm / (E.norm() * std::pow(10.0, snr_db / 20.0));
  const double achieved = 10.0 * std::log10(signal.squaredNorm() / E.squaredNorm());
  return {signal + E, std::move(E), achieved};
}

Matrix random_forward_operator(std::size_t n, std::size_t p, double condition_number, std::uint64_t seed) {
  if (n == 0 || n > p) throw Error(ErrorCode::InvalidArgument, "forward operator must satisfy 0 < n <= p");
  if (!(condition_number >= 1.0) || !std::isfinite(condition_number)) {
    throw Error(ErrorCode::InvalidArgument, "condition_number must be >= 1");
  }
  const Matrix raw = gaussian_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), seed);
  Eigen::BDCSVD<Matrix> svd(raw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sigma(static_cast<Eigen::Index>(n));
  const double log_kappa = std::log(condition_number);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    sigma(static_cast<Eigen::Index>(i)) = std::exp(-frac * log_kappa);
  }
  return svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
}

DipoleGeometry sphere_geometry(std::size_t n_dipoles) {
  std::vector<DipoleGeometry::Point> coords;
  coords.reserve(n_dipoles);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n_dipoles; ++i) {
    const double z = n_dipoles == 1 ? 0.0 : 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_dipoles);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double theta = golden * static_cast<double>(i);
    coords.push_back({r * std::cos(theta), r * std::sin(theta), z});
  }
  return DipoleGeometry(std::move(coords));
}

// JSON ---------------------------------------------------------------------

void to_json(nlohmann::json& j, const SourceWaveformSpec& w) {
  j = {{"kind", "sine_exponential"},
       {"freq_hz", w.freq_hz},
       {"peak_time_s", w.peak_time_s},
       {"decay_s", w.decay_s},
       {"amplitude", w.amplitude},
       {"phase_rad", w.phase_rad}};
}

void from_json(const nlohmann::json& j, SourceWaveformSpec& w) {
  if (j.contains("kind") && j.at("kind") != "sine_exponential") {
    throw Error(ErrorCode::InvalidArgument, "unsupported waveform kind " + j.at("kind").dump());
  }
  SourceWaveformSpec d;
  w.freq_hz = j.value("freq_hz", d.freq_hz);
  w.peak_time_s = j.value("peak_time_s", d.peak_time_s);
  w.decay_s = j.value("decay_s", d.decay_s);
  w.amplitude = j.value("amplitude", d.amplitude);
  w.phase_rad = j.value("phase_rad", d.phase_rad);
}

void to_json(nlohmann::json& j, const ActiveSource& a) {
  j = {{"dipoles", a.dipoles}, {"orientation", a.orientation}, {"waveform", a.waveform}};
}

void from_json(const nlohmann::json& j, ActiveSource& a) {
  a.dipoles = j.at("dipoles").get<std::vector<std::size_t>>();
  a.orientation = j.at("orientation").get<std::array<double, 3>>();
  a.waveform = j.at("waveform").get<SourceWaveformSpec>();
}

void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  j = {{"n_sensors", s.n_sensors},
       {"n_dipoles", s.n_dipoles},
       {"n_timepoints", s.n_timepoints},
       {"sample_rate_hz", s.sample_rate_hz},
       {"active_sets", s.active_sets},
       {"snr_db", std::isinf(s.snr_db) ? nlohmann::json(nullptr) : nlohmann::json(s.snr_db)},
       {"noise_seed", s.noise_seed},
       {"forward_seed", s.forward_seed},
       {"condition_number", s.condition_number}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  const ScenarioSpec d = desk_scenario();
  s.n_sensors = j.value("n_sensors", d.n_sensors);
  s.n_dipoles = j.value("n_dipoles", d.n_dipoles);
  s.n_timepoints = j.value("n_timepoints", d.n_timepoints);
  s.sample_rate_hz = j.value("sample_rate_hz", d.sample_rate_hz);
  s.active_sets = j.contains("active_sets") ? j.at("active_sets").get<std::vector<ActiveSource>>() : d.active_sets;
  if (j.contains("snr_db")) {
    s.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity() : j.at("snr_db").get<double>();
  } else {
    s.snr_db = d.snr_db;
  }
  s.noise_seed = j.value("noise_seed", d.noise_seed);
  s.forward_seed = j.value("forward_seed", d.forward_seed);
  s.condition_number = j.value("condition_number", d.condition_number);
}

}  // namespace twr
