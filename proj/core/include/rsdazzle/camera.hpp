#pragma once

#include <vector>

#include "rsdazzle/tensor.hpp"

namespace rsdazzle {

// Rolling-shutter scan timing. Row i integrates light over the half-open
// window [i*t_read, i*t_read + t_exp), wrapped cyclically modulo the frame
// duration; rows are indexed over visible and hidden rows together.
struct CameraTimings {
  double t_read_us;
  double t_exp_us;
  int n_rows_visible;
  int n_rows_hidden;
  int n_cols;

  CameraTimings(double t_read_us, double t_exp_us, int n_rows_visible, int n_rows_hidden,
                int n_cols);

  int total_rows() const { return n_rows_visible + n_rows_hidden; }

  double frame_duration_us() const;

  // Number of rows simultaneously exposed: floor(t_exp / t_read), >= 1.
  int rows_exposure_constant() const;

  // Number of pulse slots per frame: floor(total_rows / rows_exposure_constant).
  // Remainder rows at the bottom of the scan belong to no slot.
  int pulse_slots() const;

  // Instant at which every row of the given slot is simultaneously
  // mid-exposure; a sub-t_read pulse fired here dazzles exactly that slot.
  double slot_aligned_instant_us(int slot) const;
};

// A single light pulse in cyclic frame time.
struct PulseEvent {
  double start_us = 0.0;  // onset from frame scan start, taken modulo frame duration
  double width_us = 0.0;
};

// All row indices whose exposure window overlaps the pulse with nonzero
// measure, cyclically wrapped. Sorted ascending. Zero width gives the empty
// set; negative width is a usage error.
std::vector<int> dazzled_rows(const CameraTimings& timings, const PulseEvent& pulse);

// Estimates the rows exposure constant from a capture of a single sub-t_read
// pulse: rows whose mean exceeds 0.9 of full scale are stripe rows; returns
// the median run length (lower median on ties). Throws std::domain_error when
// no row crosses the threshold.
int calibrate_rn(const Image& stripe_image);

}  // namespace rsdazzle
