#include "rsdazzle/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rsdazzle/version.hpp"

namespace rsdazzle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': bad number '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<int>(d);
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': bad integer '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': bad integer '" + v + "'");
  }
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_double(key, tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_int(key, tok));
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

bool ignorable_key(const std::string& key) {
  return key == "command" || key == "timestamp" || key == "tool_version" ||
         key.rfind("input_digest", 0) == 0 || key.rfind("output_", 0) == 0 ||
         key.rfind("result_", 0) == 0 || key.rfind("shot_", 0) == 0 ||
         key.rfind("clean_", 0) == 0;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

std::string format_double9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Config::Config() {
  const SceneScaling cal = default_calibration();
  s_coeff = cal.s_coeff;
  t_exponent = cal.t_exponent;
}

void Config::set(const std::string& key, const std::string& value) {
  if (ignorable_key(key)) return;
  if (key == "t_read_us") t_read_us = parse_double(key, value);
  else if (key == "t_exp_us") t_exp_us = parse_double(key, value);
  else if (key == "n_rows_visible") n_rows_visible = parse_int(key, value);
  else if (key == "n_rows_hidden") n_rows_hidden = parse_int(key, value);
  else if (key == "n_cols") n_cols = parse_int(key, value);
  else if (key == "theta_deg") theta_deg = parse_double(key, value);
  else if (key == "age_years") age_years = parse_double(key, value);
  else if (key == "pigment") pigment = parse_double(key, value);
  else if (key == "l_b_cd_m2") l_b_cd_m2 = parse_double(key, value);
  else if (key == "e_sensor_w_m2") e_sensor_w_m2 = parse_double(key, value);
  else if (key == "e_sensor_mw_cm2") e_sensor_w_m2 = 10.0 * parse_double(key, value);
  else if (key == "lambda_nm") lambda_nm = parse_double(key, value);
  else if (key == "s_coeff") s_coeff = parse_double(key, value);
  else if (key == "t_exponent") t_exponent = parse_double(key, value);
  else if (key == "c_thr") c_thr = parse_double(key, value);
  else if (key == "i_sat_w_m2") i_sat_w_m2 = parse_double(key, value);
  else if (key == "k_spot_px") k_spot_px = parse_double(key, value);
  else if (key == "avg_dazzle_threshold_w_m2") avg_dazzle_threshold_w_m2 = parse_double(key, value);
  else if (key == "peak_dazzle_threshold_w_m2") peak_dazzle_threshold_w_m2 = parse_double(key, value);
  else if (key == "pulse_slots") pulse_slots = parse_int_list(key, value);
  else if (key == "width_us") width_us = parse_double(key, value);
  else if (key == "strength") strength = parse_double(key, value);
  else if (key == "theta_grid") theta_grid = parse_double_list(key, value);
  else if (key == "l_b_grid") l_b_grid = parse_double_list(key, value);
  else if (key == "dataset_seed") dataset_seed = parse_u64(key, value);
  else if (key == "dataset_classes") dataset_classes = parse_int(key, value);
  else if (key == "image_size") image_size = parse_int(key, value);
  else if (key == "fov_fraction") fov_fraction = parse_double(key, value);
  else if (key == "train_count") train_count = parse_int(key, value);
  else if (key == "test_count") test_count = parse_int(key, value);
  else if (key == "train_seed") train_seed = parse_u64(key, value);
  else if (key == "epochs") epochs = parse_int(key, value);
  else if (key == "batch_size") batch_size = parse_int(key, value);
  else if (key == "train_lr") train_lr = parse_double(key, value);
  else if (key == "accuracy_bar") accuracy_bar = parse_double(key, value);
  else if (key == "conv1_channels") conv1_channels = parse_int(key, value);
  else if (key == "conv2_channels") conv2_channels = parse_int(key, value);
  else if (key == "hidden_units") hidden_units = parse_int(key, value);
  else if (key == "alpha") alpha = parse_double(key, value);
  else if (key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "iterations") iterations = parse_int(key, value);
  else if (key == "eot_samples") eot_samples = parse_int(key, value);
  else if (key == "binarize_threshold") binarize_threshold = parse_double(key, value);
  else if (key == "pulse_budget") pulse_budget = parse_int(key, value);
  else if (key == "loss_failure_threshold") loss_failure_threshold = parse_double(key, value);
  else if (key == "sparsity_mode") sparsity_mode = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "classifier") classifier = value;
  else if (key == "weights") weights = value;
  else if (key == "image") image = value;
  else if (key == "label") label = parse_int(key, value);
  else if (key == "sweep_axis") sweep_axis = value;
  else if (key == "sweep_grid") sweep_grid = parse_double_list(key, value);
  else if (key == "trials") trials = parse_int(key, value);
  else if (key == "sweep_images") sweep_images = parse_int(key, value);
  else if (key == "shifts_mode") shifts_mode = value;
  else if (key == "shift_count") shift_count = parse_int(key, value);
  else if (key == "eval_images") eval_images = parse_int(key, value);
  else if (key == "attack_shots") attack_shots = parse_int(key, value);
  else if (key == "session_timeout_s") session_timeout_s = parse_double(key, value);
  else
    throw std::invalid_argument("unknown config key '" + key + "'");
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::vector<std::pair<std::string, std::string>> Config::items() const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto d = [&](const char* k, double v) { kv.emplace_back(k, format_double(v)); };
  auto i = [&](const char* k, long long v) { kv.emplace_back(k, std::to_string(v)); };
  auto s = [&](const char* k, const std::string& v) { kv.emplace_back(k, v); };

  d("t_read_us", t_read_us);
  d("t_exp_us", t_exp_us);
  i("n_rows_visible", n_rows_visible);
  i("n_rows_hidden", n_rows_hidden);
  i("n_cols", n_cols);
  d("theta_deg", theta_deg);
  d("age_years", age_years);
  d("pigment", pigment);
  d("l_b_cd_m2", l_b_cd_m2);
  d("e_sensor_w_m2", e_sensor_w_m2);
  d("lambda_nm", lambda_nm);
  d("s_coeff", s_coeff);
  d("t_exponent", t_exponent);
  d("c_thr", c_thr);
  d("i_sat_w_m2", i_sat_w_m2);
  d("k_spot_px", k_spot_px);
  d("avg_dazzle_threshold_w_m2", avg_dazzle_threshold_w_m2);
  d("peak_dazzle_threshold_w_m2", peak_dazzle_threshold_w_m2);
  s("pulse_slots", join_ints(pulse_slots));
  d("width_us", width_us);
  d("strength", strength);
  s("theta_grid", join_doubles(theta_grid));
  s("l_b_grid", join_doubles(l_b_grid));
  i("dataset_seed", static_cast<long long>(dataset_seed));
  i("dataset_classes", dataset_classes);
  i("image_size", image_size);
  d("fov_fraction", fov_fraction);
  i("train_count", train_count);
  i("test_count", test_count);
  i("train_seed", static_cast<long long>(train_seed));
  i("epochs", epochs);
  i("batch_size", batch_size);
  d("train_lr", train_lr);
  d("accuracy_bar", accuracy_bar);
  i("conv1_channels", conv1_channels);
  i("conv2_channels", conv2_channels);
  i("hidden_units", hidden_units);
  d("alpha", alpha);
  d("learning_rate", learning_rate);
  i("iterations", iterations);
  i("eot_samples", eot_samples);
  d("binarize_threshold", binarize_threshold);
  i("pulse_budget", pulse_budget);
  d("loss_failure_threshold", loss_failure_threshold);
  s("sparsity_mode", sparsity_mode);
  i("seed", static_cast<long long>(seed));
  s("classifier", classifier);
  s("weights", weights);
  s("image", image);
  i("label", label);
  s("sweep_axis", sweep_axis);
  s("sweep_grid", join_doubles(sweep_grid));
  i("trials", trials);
  i("sweep_images", sweep_images);
  s("shifts_mode", shifts_mode);
  i("shift_count", shift_count);
  i("eval_images", eval_images);
  i("attack_shots", attack_shots);
  d("session_timeout_s", session_timeout_s);
  return kv;
}

CameraTimings Config::camera() const {
  return CameraTimings(t_read_us, t_exp_us, n_rows_visible, n_rows_hidden, n_cols);
}

PhotopicScene Config::scene() const {
  PhotopicScene s;
  s.theta_deg = theta_deg;
  s.age_years = age_years;
  s.pigment = pigment;
  s.l_b_cd_m2 = l_b_cd_m2;
  s.e_sensor_w_m2 = e_sensor_w_m2;
  s.lambda_nm = lambda_nm;
  s.s_coeff = s_coeff;
  s.t_exponent = t_exponent;
  const double c = c_thr;
  s.c_thr = [c](double) { return c; };
  return s;
}

SaturationModel Config::saturation() const {
  SaturationModel m;
  m.i_sat_w_m2 = i_sat_w_m2;
  m.k_spot_px = k_spot_px;
  m.avg_dazzle_threshold_w_m2 = avg_dazzle_threshold_w_m2;
  m.peak_dazzle_threshold_w_m2 = peak_dazzle_threshold_w_m2;
  return m;
}

DatasetSpec Config::dataset_spec() const {
  DatasetSpec spec;
  spec.seed = dataset_seed;
  spec.classes = dataset_classes;
  spec.image_size = image_size;
  spec.fov_fraction = fov_fraction;
  spec.train_count = train_count;
  spec.test_count = test_count;
  return spec;
}

TrainConfig Config::train_config() const {
  TrainConfig t;
  t.seed = train_seed;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = train_lr;
  t.accuracy_bar = accuracy_bar;
  t.conv1_channels = conv1_channels;
  t.conv2_channels = conv2_channels;
  t.hidden_units = hidden_units;
  return t;
}

AttackConfig Config::attack_config() const {
  AttackConfig a;
  a.alpha = alpha;
  a.learning_rate = learning_rate;
  a.iterations = iterations;
  a.eot_samples = eot_samples;
  a.binarize_threshold = binarize_threshold;
  a.seed = seed;
  a.pulse_budget = pulse_budget;
  a.loss_failure_threshold = loss_failure_threshold;
  a.width_us = width_us;
  if (sparsity_mode == "sum")
    a.sparsity_mode = SparsityMode::kSumActivations;
  else if (sparsity_mode == "off")
    a.sparsity_mode = SparsityMode::kNone;
  else
    throw std::invalid_argument("sparsity_mode must be 'sum' or 'off'");
  return a;
}

PulseTrain Config::pulse_train() const {
  const CameraTimings t = camera();
  const int slots = t.pulse_slots();
  PulseTrain train;
  train.width_us = width_us;
  train.activity.assign(static_cast<size_t>(slots), 0);
  for (int idx : pulse_slots) {
    if (idx < 0 || idx >= slots)
      throw std::invalid_argument("pulse_slots: index " + std::to_string(idx) +
                                  " outside [0, " + std::to_string(slots) + ")");
    train.activity[static_cast<size_t>(idx)] = 1;
  }
  return train;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path.string());
  f << "# rsdazzle run manifest\n";
  for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
  if (!f) throw std::runtime_error("short manifest write: " + path.string());
}

}  // namespace rsdazzle
