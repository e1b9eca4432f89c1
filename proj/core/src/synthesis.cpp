#include "rsdazzle/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rsdazzle {

int PulseTrain::pulse_count() const {
  int n = 0;
  for (auto v : activity) n += (v != 0);
  return n;
}

DazzlePattern::DazzlePattern(std::vector<double> row_values, int n_cols)
    : row_values_(std::move(row_values)), n_cols_(n_cols) {
  if (n_cols_ < 1) throw std::invalid_argument("DazzlePattern: n_cols must be >= 1");
  for (double v : row_values_)
    if (v < 0.0 || v > 1.0 || !std::isfinite(v))
      throw std::invalid_argument("DazzlePattern: row values must lie in [0,1]");
}

Image DazzlePattern::to_image() const {
  Image img(rows(), cols(), 1);
  for (int r = 0; r < rows(); ++r)
    for (int c = 0; c < cols(); ++c) img.at(r, c, 0) = row_values_[r];
  return img;
}

std::vector<std::uint8_t> expand_pulse_vector(const std::vector<std::uint8_t>& e_eff, int r_n) {
  if (r_n < 1) throw std::invalid_argument("expand_pulse_vector: r_n must be >= 1");
  std::vector<std::uint8_t> e_r;
  e_r.reserve(e_eff.size() * static_cast<size_t>(r_n));
  for (std::uint8_t v : e_eff)
    for (int k = 0; k < r_n; ++k) e_r.push_back(v ? 1 : 0);
  return e_r;
}

namespace {

template <typename T>
DazzlePattern pattern_from_rows_impl(const std::vector<T>& e_r, int m, int n_rows_visible) {
  if (m < 1) throw std::invalid_argument("pattern_from_rows: m must be >= 1");
  if (n_rows_visible < 1) throw std::invalid_argument("pattern_from_rows: need >= 1 visible row");
  std::vector<double> rows(static_cast<size_t>(n_rows_visible), 0.0);
  const size_t n = std::min(e_r.size(), rows.size());
  for (size_t i = 0; i < n; ++i) rows[i] = static_cast<double>(e_r[i]);
  return DazzlePattern(std::move(rows), m);
}

}  // namespace

DazzlePattern pattern_from_rows(const std::vector<std::uint8_t>& e_r, int m, int n_rows_visible) {
  return pattern_from_rows_impl(e_r, m, n_rows_visible);
}

DazzlePattern pattern_from_rows(const std::vector<double>& e_r, int m, int n_rows_visible) {
  return pattern_from_rows_impl(e_r, m, n_rows_visible);
}

std::vector<std::uint8_t> rotate_rows(const std::vector<std::uint8_t>& e_r, long long k) {
  if (e_r.empty()) return e_r;
  const long long n = static_cast<long long>(e_r.size());
  long long shift = k % n;
  if (shift < 0) shift += n;
  std::vector<std::uint8_t> out(e_r.size());
  for (long long i = 0; i < n; ++i) out[(i + shift) % n] = e_r[i];
  return out;
}

std::vector<std::uint8_t> shift_pattern(const std::vector<std::uint8_t>& e_r, double t0_us,
                                        double t_read_us) {
  if (!(t_read_us > 0.0)) throw std::invalid_argument("shift_pattern: t_read_us must be > 0");
  return rotate_rows(e_r, std::llround(t0_us / t_read_us));
}

Image compose(const Image& x, const DazzlePattern& delta, double strength) {
  if (delta.rows() != x.height || delta.cols() != x.width)
    throw std::invalid_argument("compose: pattern " + std::to_string(delta.rows()) + "x" +
                                std::to_string(delta.cols()) + " does not match image " +
                                std::to_string(x.height) + "x" + std::to_string(x.width));
  if (strength < 0.0 || strength > 1.0)
    throw std::invalid_argument("compose: strength must lie in [0,1]");
  Image out = x;
  for (int r = 0; r < x.height; ++r) {
    const double add = strength * delta.row_value(r);
    if (add == 0.0) continue;
    for (int c = 0; c < x.width; ++c)
      for (int ch = 0; ch < x.channels; ++ch) {
        double v = out.at(r, c, ch) + add;
        out.at(r, c, ch) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      }
  }
  return out;
}

double saturated_spot_diameter(double i0_w_m2, const SaturationModel& model) {
  if (i0_w_m2 < 0.0) throw std::domain_error("saturated_spot_diameter: negative irradiance");
  if (i0_w_m2 < model.i_sat_w_m2) return 0.0;
  return model.k_spot_px * std::cbrt(i0_w_m2 / model.i_sat_w_m2);
}

bool pulse_dazzles(const SaturationModel& model, double peak_irradiance_w_m2, double width_us,
                   double t_exp_us) {
  if (peak_irradiance_w_m2 < 0.0 || width_us < 0.0)
    throw std::domain_error("pulse_dazzles: negative input");
  if (!(t_exp_us > 0.0)) throw std::invalid_argument("pulse_dazzles: t_exp_us must be > 0");
  const double duty_in_exposure = std::min(width_us / t_exp_us, 1.0);
  const double avg = peak_irradiance_w_m2 * duty_in_exposure;
  return peak_irradiance_w_m2 >= model.peak_dazzle_threshold_w_m2 &&
         avg >= model.avg_dazzle_threshold_w_m2;
}

namespace {

void check_same_dims(const DazzlePattern& a, const DazzlePattern& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": pattern dimensions differ");
}

double agreement_shifted(const DazzlePattern& a, const DazzlePattern& b, int shift) {
  const int n = a.rows();
  int agree = 0;
  for (int r = 0; r < n; ++r) {
    const bool va = a.row_value((r - shift % n + n) % n) > 0.5;
    const bool vb = b.row_value(r) > 0.5;
    agree += (va == vb);
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

}  // namespace

double pattern_agreement(const DazzlePattern& a, const DazzlePattern& b) {
  check_same_dims(a, b, "pattern_agreement");
  return agreement_shifted(a, b, 0);
}

double pattern_match_score(const DazzlePattern& a, const DazzlePattern& b) {
  check_same_dims(a, b, "pattern_match_score");
  double best = 0.0;
  for (int s = 0; s < a.rows(); ++s) best = std::max(best, agreement_shifted(a, b, s));
  return best;
}

std::vector<std::vector<int>> slot_coverage(const CameraTimings& timings, double width_us) {
  if (width_us < 0.0) throw std::invalid_argument("slot_coverage: width_us must be >= 0");
  const int r_n = timings.rows_exposure_constant();
  const int slots = timings.pulse_slots();
  const int total = timings.total_rows();
  int extra = 0;
  if (width_us > timings.t_read_us)
    extra = static_cast<int>(std::ceil(width_us / timings.t_read_us)) - 1;
  const int span = std::min(r_n + extra, total);

  std::vector<std::vector<int>> cover(static_cast<size_t>(slots));
  for (int i = 0; i < slots; ++i) {
    cover[i].reserve(static_cast<size_t>(span));
    for (int j = 0; j < span; ++j) cover[i].push_back((i * r_n + j) % total);
  }
  return cover;
}

std::vector<std::uint8_t> slot_row_indicator(const CameraTimings& timings,
                                             const std::vector<std::uint8_t>& e_eff,
                                             double width_us) {
  const int slots = timings.pulse_slots();
  if (static_cast<int>(e_eff.size()) != slots)
    throw std::invalid_argument("slot_row_indicator: activity length " +
                                std::to_string(e_eff.size()) + " != pulse slots " +
                                std::to_string(slots));
  if (width_us == 0.0) return std::vector<std::uint8_t>(timings.total_rows(), 0);
  const auto cover = slot_coverage(timings, width_us);
  std::vector<std::uint8_t> rows(static_cast<size_t>(timings.total_rows()), 0);
  for (int i = 0; i < slots; ++i)
    if (e_eff[i])
      for (int r : cover[i]) rows[static_cast<size_t>(r)] = 1;
  return rows;
}

}  // namespace rsdazzle
