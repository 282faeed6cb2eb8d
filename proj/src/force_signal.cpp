#include "engine/force_signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "engine/io.hpp"

namespace engine {

double volts_to_force(const SensorCalibration& cal, double v_out) {
  if (v_out < 0.0) throw std::invalid_argument("volts_to_force: negative voltage");
  if (v_out >= cal.v_in) {
    throw SaturationError("volts_to_force: v_out >= V_in (sensor overload)");
  }
  const double f = 4.448 * (cal.c1 * v_out / (cal.v_in - v_out) - cal.c2);
  return std::clamp(f, 0.0, cal.f_max);
}

namespace {

// RBJ-cookbook notch biquad, normalized so a0 = 1.
struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad notch(double f0, double q, double sample_rate) {
    const double w0 = 2.0 * std::numbers::pi * f0 / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    bq.b0 = 1.0 / a0;
    bq.b1 = -2.0 * std::cos(w0) / a0;
    bq.b2 = 1.0 / a0;
    bq.a1 = -2.0 * std::cos(w0) / a0;
    bq.a2 = (1.0 - alpha) / a0;
    return bq;
  }

  // Transposed direct form II, state primed to the constant-input steady
  // state of the first sample so a DC signal passes through unchanged.
  void apply(double* data, int n) const {
    const double x0 = data[0];
    const double gain_dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
    const double y0 = gain_dc * x0;
    double z2 = b2 * x0 - a2 * y0;
    double z1 = (b1 + b2) * x0 - (a1 + a2) * y0;
    for (int i = 0; i < n; ++i) {
      const double x = data[i];
      const double y = b0 * x + z1;
      z1 = b1 * x - a1 * y + z2;
      z2 = b2 * x - a2 * y;
      data[i] = y;
    }
  }
};

}  // namespace

ForceTrace notch_filter(const ForceTrace& trace, double f0, double q) {
  if (trace.sample_rate <= 0.0) {
    throw std::invalid_argument("notch_filter: sample rate not set");
  }
  if (!(f0 > 0.0 && f0 < trace.sample_rate / 2.0)) {
    throw std::invalid_argument("notch_filter: f0 outside (0, Nyquist)");
  }
  if (q <= 0.0) throw std::invalid_argument("notch_filter: q must be positive");

  const Biquad bq = Biquad::notch(f0, q, trace.sample_rate);
  ForceTrace out = trace;
  const int t = out.frames();
  std::vector<double> col(t);
  for (int ch = 0; ch < out.channel_count(); ++ch) {
    for (int i = 0; i < t; ++i) col[i] = out.values(i, ch);
    bq.apply(col.data(), t);
    std::reverse(col.begin(), col.end());
    bq.apply(col.data(), t);
    std::reverse(col.begin(), col.end());
    for (int i = 0; i < t; ++i) out.values(i, ch) = col[i];
  }
  return out;
}

std::pair<ForceTrace, NormParams> normalize(
    const ForceTrace& trace, const std::optional<NormParams>& params) {
  const int m = trace.channel_count();
  NormParams p;
  if (params) {
    if (params->min.size() != m) {
      throw std::invalid_argument("normalize: channel count mismatch");
    }
    p = *params;
  } else {
    p.min = trace.values.colwise().minCoeff();
    p.max = trace.values.colwise().maxCoeff();
  }
  ForceTrace out = trace;
  for (int ch = 0; ch < m; ++ch) {
    const double range = p.max[ch] - p.min[ch];
    if (range <= 0.0) {
      out.values.col(ch).setZero();
    } else {
      out.values.col(ch) = (trace.values.col(ch).array() - p.min[ch]) / range;
    }
  }
  out.normalized = true;
  return {std::move(out), std::move(p)};
}

ForceTrace denormalize(const ForceTrace& trace, const NormParams& params) {
  if (params.min.size() != trace.channel_count()) {
    throw std::invalid_argument("denormalize: channel count mismatch");
  }
  ForceTrace out = trace;
  for (int ch = 0; ch < trace.channel_count(); ++ch) {
    const double range = params.max[ch] - params.min[ch];
    out.values.col(ch) =
        (trace.values.col(ch).array() * range + params.min[ch]).matrix();
  }
  out.normalized = false;
  return out;
}

ForceTrace ForceRecording::to_forces() const {
  ForceTrace trace;
  trace.sample_rate = sample_rate;
  trace.channels = channels;
  trace.normalized = false;
  trace.values = Matrix(volts.rows(), volts.cols());
  for (Eigen::Index i = 0; i < volts.rows(); ++i) {
    for (Eigen::Index j = 0; j < volts.cols(); ++j) {
      trace.values(i, j) = volts_to_force(calibration, volts(i, j));
    }
  }
  return trace;
}

// Recording container: magic "FREC", version u32, sample_rate f64, M u32,
// M channel names, V_in/C1/C2/f_max f64, T u32, then T*M f32 volts
// frame-major.
void write_recording(const std::string& path, const ForceRecording& rec) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  io::write_magic(os, "FREC");
  io::write_u32(os, 1);
  io::write_f64(os, rec.sample_rate);
  io::write_u32(os, static_cast<std::uint32_t>(rec.channels.size()));
  for (const auto& name : rec.channels) io::write_string(os, name);
  io::write_f64(os, rec.calibration.v_in);
  io::write_f64(os, rec.calibration.c1);
  io::write_f64(os, rec.calibration.c2);
  io::write_f64(os, rec.calibration.f_max);
  io::write_u32(os, static_cast<std::uint32_t>(rec.volts.rows()));
  for (Eigen::Index i = 0; i < rec.volts.rows(); ++i) {
    for (Eigen::Index j = 0; j < rec.volts.cols(); ++j) {
      io::write_f32(os, static_cast<float>(rec.volts(i, j)));
    }
  }
  file.commit();
}

ForceRecording read_recording(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  io::expect_magic(is, "FREC", path);
  const auto version = io::read_u32(is, path + ": version");
  if (version != 1) throw FormatError(path + ": unsupported version");
  ForceRecording rec;
  rec.sample_rate = io::read_f64(is, path + ": sample_rate");
  const auto m = io::read_u32(is, path + ": channel count");
  for (std::uint32_t i = 0; i < m; ++i) {
    rec.channels.push_back(io::read_string(is, path + ": channel name"));
  }
  rec.calibration.v_in = io::read_f64(is, path + ": V_in");
  rec.calibration.c1 = io::read_f64(is, path + ": C1");
  rec.calibration.c2 = io::read_f64(is, path + ": C2");
  rec.calibration.f_max = io::read_f64(is, path + ": f_max");
  const auto t = io::read_u32(is, path + ": frame count");
  rec.volts = Matrix(t, m);
  for (std::uint32_t i = 0; i < t; ++i) {
    for (std::uint32_t j = 0; j < m; ++j) {
      rec.volts(i, j) = io::read_f32(is, path + ": sample");
    }
  }
  return rec;
}

}  // namespace engine
