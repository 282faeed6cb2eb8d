#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "engine/numerics.hpp"

namespace engine {

/// Raised when the sensor voltage reaches the supply rail.
struct SaturationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Resistive-divider calibration of one force sensor.
struct SensorCalibration {
  double v_in = 5.0;   // supply voltage
  double c1 = 1.0;
  double c2 = 0.0;
  double f_max = 8.896;  // sensor range in Newtons
};

/// M-channel force time series. Values are Newtons when raw, unitless in
/// [0,1] when normalized.
struct ForceTrace {
  double sample_rate = 0.0;  // Hz
  std::vector<std::string> channels;
  Matrix values;  // T x M, frame-major
  bool normalized = false;

  int frames() const { return static_cast<int>(values.rows()); }
  int channel_count() const { return static_cast<int>(values.cols()); }
};

/// Per-channel min/max captured from training data.
struct NormParams {
  Vector min;
  Vector max;
};

/// F = 4.448 * (C1 * v_out / (V_in - v_out) - C2), clamped to [0, f_max].
double volts_to_force(const SensorCalibration& cal, double v_out);

/// Second-order band-reject filter at f0 with quality q, applied forward
/// then backward per channel (zero phase). Unit DC gain.
ForceTrace notch_filter(const ForceTrace& trace, double f0, double q);

/// Min-max mapping to [0,1]. Without params, min/max come from this trace
/// (the training path). Constant channels map to 0.
std::pair<ForceTrace, NormParams> normalize(const ForceTrace& trace,
                                            const std::optional<NormParams>& params = std::nullopt);

ForceTrace denormalize(const ForceTrace& trace, const NormParams& params);

/// Raw force recording: calibration header plus per-frame sensor voltages.
struct ForceRecording {
  double sample_rate = 0.0;
  std::vector<std::string> channels;
  SensorCalibration calibration;
  Matrix volts;  // T x M

  /// Applies the calibration to every sample.
  ForceTrace to_forces() const;
};

void write_recording(const std::string& path, const ForceRecording& rec);
ForceRecording read_recording(const std::string& path);

}  // namespace engine
