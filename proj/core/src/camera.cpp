#include "rsdazzle/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rsdazzle {

CameraTimings::CameraTimings(double t_read, double t_exp, int rows_visible, int rows_hidden,
                             int cols)
    : t_read_us(t_read),
      t_exp_us(t_exp),
      n_rows_visible(rows_visible),
      n_rows_hidden(rows_hidden),
      n_cols(cols) {
  if (!(t_read_us > 0.0)) throw std::invalid_argument("CameraTimings: t_read_us must be > 0");
  if (!(t_exp_us > 0.0)) throw std::invalid_argument("CameraTimings: t_exp_us must be > 0");
  if (n_rows_visible < 1) throw std::invalid_argument("CameraTimings: n_rows_visible must be >= 1");
  if (n_rows_hidden < 0) throw std::invalid_argument("CameraTimings: n_rows_hidden must be >= 0");
  if (n_cols < 1) throw std::invalid_argument("CameraTimings: n_cols must be >= 1");
  if (t_exp_us < t_read_us)
    throw std::invalid_argument("CameraTimings: t_exp_us must be >= t_read_us");
}

double CameraTimings::frame_duration_us() const {
  return t_read_us * static_cast<double>(total_rows()) + t_exp_us;
}

int CameraTimings::rows_exposure_constant() const {
  return static_cast<int>(std::floor(t_exp_us / t_read_us));
}

int CameraTimings::pulse_slots() const { return total_rows() / rows_exposure_constant(); }

double CameraTimings::slot_aligned_instant_us(int slot) const {
  if (slot < 0 || slot >= pulse_slots())
    throw std::invalid_argument("slot_aligned_instant_us: slot " + std::to_string(slot) +
                                " out of range");
  const int r_n = rows_exposure_constant();
  // Start of the last row of the slot; all r_n rows are exposed then.
  return (static_cast<double>(slot + 1) * r_n - 1.0) * t_read_us;
}

std::vector<int> dazzled_rows(const CameraTimings& timings, const PulseEvent& pulse) {
  if (pulse.width_us < 0.0) throw std::invalid_argument("dazzled_rows: width_us must be >= 0");
  if (pulse.width_us == 0.0) return {};

  const double frame = timings.frame_duration_us();
  const int rows = timings.total_rows();
  if (pulse.width_us >= frame) {
    std::vector<int> all(rows);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

  double start = std::fmod(pulse.start_us, frame);
  if (start < 0.0) start += frame;
  const double end = start + pulse.width_us;  // < 2*frame

  std::vector<int> out;
  for (int i = 0; i < rows; ++i) {
    const double w0 = static_cast<double>(i) * timings.t_read_us;
    const double w1 = w0 + timings.t_exp_us;
    // Row windows live in [0, frame); the pulse can spill into the next frame
    // period, so test the window at both frame offsets.
    bool hit = false;
    for (int k = 0; k < 2 && !hit; ++k) {
      const double off = static_cast<double>(k) * frame;
      hit = std::max(start, w0 + off) < std::min(end, w1 + off);
    }
    if (hit) out.push_back(i);
  }
  return out;
}

int calibrate_rn(const Image& stripe_image) {
  if (stripe_image.height <= 0) throw std::invalid_argument("calibrate_rn: empty image");
  const double per_row = static_cast<double>(stripe_image.width) * stripe_image.channels;

  std::vector<int> run_lengths;
  int run = 0;
  for (int r = 0; r < stripe_image.height; ++r) {
    double sum = 0.0;
    for (int c = 0; c < stripe_image.width; ++c)
      for (int ch = 0; ch < stripe_image.channels; ++ch) sum += stripe_image.at(r, c, ch);
    const bool bright = (sum / per_row) > 0.9;
    if (bright) {
      ++run;
    } else if (run > 0) {
      run_lengths.push_back(run);
      run = 0;
    }
  }
  if (run > 0) run_lengths.push_back(run);

  if (run_lengths.empty())
    throw std::domain_error("calibrate_rn: no stripe (no row mean exceeds 0.9 of full scale)");

  std::sort(run_lengths.begin(), run_lengths.end());
  return run_lengths[(run_lengths.size() - 1) / 2];  // lower median
}

}  // namespace rsdazzle
