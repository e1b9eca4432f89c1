#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rsdazzle/attack.hpp"
#include "rsdazzle/camera.hpp"
#include "rsdazzle/dataset.hpp"
#include "rsdazzle/photopic.hpp"
#include "rsdazzle/synthesis.hpp"
#include "rsdazzle/train.hpp"

namespace rsdazzle {

// Flat key-value run configuration shared by every harness command. The same
// keys appear in config files and run manifests; re-running a command from
// its own manifest reproduces the outputs bit for bit.
struct Config {
  // camera
  double t_read_us = 30.0;
  double t_exp_us = 120.0;
  int n_rows_visible = 64;
  int n_rows_hidden = 0;
  int n_cols = 64;

  // photopic scene (SI units; e_sensor also accepted as mW/cm^2 via the
  // e_sensor_mw_cm2 key, exact factor 10 to W/m^2)
  double theta_deg = 5.0;
  double age_years = 25.0;
  double pigment = 1.0;
  double l_b_cd_m2 = 10.0;
  double e_sensor_w_m2 = 500.0;
  double lambda_nm = 650.0;
  double s_coeff;      // resolved from the built-in calibration by default
  double t_exponent;   // resolved from the built-in calibration by default
  double c_thr = 1.0;

  // saturation model
  double i_sat_w_m2 = 500.0;
  double k_spot_px = 1.0;
  double avg_dazzle_threshold_w_m2 = 500.0;
  double peak_dazzle_threshold_w_m2 = 1.0;

  // pulse train
  std::vector<int> pulse_slots;  // active slot indices
  double width_us = 1.0;
  double strength = 1.0;

  // photopic grids
  std::vector<double> theta_grid = {1, 2, 3, 4, 5, 7.5, 10, 12.5, 15, 20, 25, 30};
  std::vector<double> l_b_grid = {1, 3.16, 10, 31.6, 100};

  // dataset
  std::uint64_t dataset_seed = 7;
  int dataset_classes = 10;
  int image_size = 64;
  double fov_fraction = 0.4;
  int train_count = 480;
  int test_count = 200;

  // training
  std::uint64_t train_seed = 11;
  int epochs = 12;
  int batch_size = 16;
  double train_lr = 1e-3;
  double accuracy_bar = 0.95;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int hidden_units = 64;

  // attack
  double alpha = 12.0;
  double learning_rate = 0.05;
  int iterations = 300;
  int eot_samples = 16;
  double binarize_threshold = 0.5;
  int pulse_budget = 0;
  double loss_failure_threshold = 2.0;
  std::string sparsity_mode = "sum";  // sum | off

  // harness
  std::uint64_t seed = 1;
  std::string classifier = "bundled";  // bundled | exec:<command line>
  std::string weights;                 // path to a saved model
  std::string image;                   // input image path
  int label = -1;
  std::string sweep_axis = "duty_cycle";  // duty_cycle | pulse_width | fov_fraction
  std::vector<double> sweep_grid;
  int trials = 16;
  int sweep_images = 4;
  std::string shifts_mode = "random";  // random | exhaustive
  int shift_count = 16;
  int eval_images = 20;
  int attack_shots = 2;
  double session_timeout_s = 30.0;

  Config();

  // Applies one key. Unknown keys raise std::invalid_argument; manifest-only
  // keys (command, timestamp, digests, result_*, output_*) are ignored so a
  // manifest is a valid config.
  void set(const std::string& key, const std::string& value);

  void load_file(const std::filesystem::path& path);

  // Every configuration key with its current value, in fixed order, doubles
  // formatted to round-trip exactly.
  std::vector<std::pair<std::string, std::string>> items() const;

  CameraTimings camera() const;
  PhotopicScene scene() const;
  SaturationModel saturation() const;
  DatasetSpec dataset_spec() const;
  TrainConfig train_config() const;
  AttackConfig attack_config() const;
  PulseTrain pulse_train() const;  // validated against the camera geometry
};

// Manifest writing: ordered key-value lines "key = value" with a header
// comment. Timestamp is informational and excluded from reproducibility.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

std::string format_double(double v);       // shortest exact round-trip
std::string format_double9(double v);      // 9 significant digits for tables

}  // namespace rsdazzle
