#pragma once

#include <cstdint>
#include <vector>

#include "rsdazzle/camera.hpp"
#include "rsdazzle/tensor.hpp"

namespace rsdazzle {

// Binary pulse activity over the frame's pulse slots plus the physical pulse
// width. Entry i fires one pulse during slot i's exposure phase.
struct PulseTrain {
  std::vector<std::uint8_t> activity;
  double width_us = 1.0;

  int pulse_count() const;
};

// Row-constant perturbation grid with values in [0,1]. Row constancy is
// structural: only one value per row is stored.
class DazzlePattern {
 public:
  DazzlePattern(std::vector<double> row_values, int n_cols);

  int rows() const { return static_cast<int>(row_values_.size()); }
  int cols() const { return n_cols_; }
  double at(int r, int) const { return row_values_[r]; }
  double row_value(int r) const { return row_values_[r]; }
  const std::vector<double>& row_values() const { return row_values_; }

  Image to_image() const;  // materialized grayscale grid

 private:
  std::vector<double> row_values_;
  int n_cols_;
};

// Saturated-spot model: scaling law constants plus the irradiance levels a
// pulse must reach to dazzle at all.
struct SaturationModel {
  double i_sat_w_m2 = 500.0;                  // saturation irradiance
  double k_spot_px = 1.0;                     // pixels per unit cube-root ratio
  double avg_dazzle_threshold_w_m2 = 500.0;   // minimum average irradiance per row exposure
  double peak_dazzle_threshold_w_m2 = 1.0;    // minimum peak irradiance for short pulses
};

// Replicates each activity entry r_n times consecutively (Kronecker product
// with the all-ones column).
std::vector<std::uint8_t> expand_pulse_vector(const std::vector<std::uint8_t>& e_eff, int r_n);

// Broadcasts row indicators across m columns and crops to the first
// n_rows_visible rows. Indicators beyond the end of e_r read as zero.
DazzlePattern pattern_from_rows(const std::vector<std::uint8_t>& e_r, int m, int n_rows_visible);
DazzlePattern pattern_from_rows(const std::vector<double>& e_r, int m, int n_rows_visible);

// Cyclic shift by round(t0/t_read) positions over the row cycle.
std::vector<std::uint8_t> shift_pattern(const std::vector<std::uint8_t>& e_r, double t0_us,
                                        double t_read_us);
std::vector<std::uint8_t> rotate_rows(const std::vector<std::uint8_t>& e_r, long long k);

// x' = clip(x + strength * delta, 0, 1), delta broadcast across channels.
Image compose(const Image& x, const DazzlePattern& delta, double strength = 1.0);

// k_spot * cbrt(i0/i_sat) above saturation, 0 below. i0 < 0 is a domain error.
double saturated_spot_diameter(double i0_w_m2, const SaturationModel& model);

// True when a pulse of the given peak irradiance and width can dazzle at all:
// the peak must clear the short-pulse floor and the average irradiance over
// one row exposure must clear the average floor.
bool pulse_dazzles(const SaturationModel& model, double peak_irradiance_w_m2, double width_us,
                   double t_exp_us);

// Fraction of agreeing entries after binarizing both patterns at 0.5, at
// fixed alignment.
double pattern_agreement(const DazzlePattern& a, const DazzlePattern& b);

// Maximum of pattern_agreement over all cyclic row shifts of `a`.
double pattern_match_score(const DazzlePattern& a, const DazzlePattern& b);

// Row indicator over the full (visible+hidden) cycle for a pulse train with
// physical width: slot i covers its r_n Kronecker rows plus ceil(w/t_read)-1
// trailing rows when the width exceeds one row readout.
std::vector<std::uint8_t> slot_row_indicator(const CameraTimings& timings,
                                             const std::vector<std::uint8_t>& e_eff,
                                             double width_us);

// Rows covered by each slot under the given pulse width, wrapped over the
// full row cycle. coverage[i] lists the rows slot i dazzles when active.
std::vector<std::vector<int>> slot_coverage(const CameraTimings& timings, double width_us);

}  // namespace rsdazzle
