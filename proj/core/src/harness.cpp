#include "rsdazzle/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rsdazzle/attack.hpp"
#include "rsdazzle/digest.hpp"
#include "rsdazzle/errors.hpp"
#include "rsdazzle/external.hpp"
#include "rsdazzle/rng.hpp"
#include "rsdazzle/version.hpp"

namespace rsdazzle {

namespace fs = std::filesystem;

std::string CommandResult::value(const std::string& key) const {
  for (const auto& [k, v] : manifest)
    if (k == key) return v;
  throw std::runtime_error("manifest key not found: " + key);
}

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

Manifest begin_manifest(const Config& cfg, const std::string& command) {
  Manifest m;
  m.emplace_back("tool_version", kToolVersion);
  m.emplace_back("command", command);
  m.emplace_back("timestamp", timestamp_utc());
  for (auto& kv : cfg.items()) m.push_back(std::move(kv));
  return m;
}

void record_output(CommandResult& result, const std::string& name, const fs::path& path) {
  result.manifest.emplace_back("output_" + name, path.filename().string());
  result.manifest.emplace_back("output_digest_" + name, file_digest(path));
  result.outputs.push_back(path);
}

void finish(CommandResult& result, const Config&, const fs::path& out_dir,
            const std::string& command) {
  const fs::path mpath = out_dir / (command + "_manifest.txt");
  write_manifest(mpath, result.manifest);
  result.outputs.push_back(mpath);
}

fs::path prepare_out_dir(const fs::path& out_dir) {
  fs::create_directories(out_dir);
  return out_dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write: " + path.string());
  f << text;
  if (!f) throw std::runtime_error("short write: " + path.string());
}

std::string join_u8(const std::vector<std::uint8_t>& v, char sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += v[i] ? "1" : "0";
  }
  return out;
}

std::string active_slots_string(const std::vector<std::uint8_t>& activity) {
  std::string out;
  for (size_t i = 0; i < activity.size(); ++i)
    if (activity[i]) {
      if (!out.empty()) out += ",";
      out += std::to_string(i);
    }
  return out;
}

int argmax_label(const std::vector<double>& logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

// Wraps a trained CnnModel so ownership travels with the Classifier handle.
class OwnedCnn : public Classifier {
 public:
  explicit OwnedCnn(CnnModel model) : model_(std::move(model)) {}
  int num_classes() const override { return model_.num_classes(); }
  std::vector<double> logits(const Image& x) override { return model_.logits(x); }
  Tensor input_gradient(const Image& x, int label) override {
    return model_.input_gradient(x, label);
  }
  std::pair<double, Tensor> loss_and_input_gradient(const Image& x, int label) override {
    return model_.loss_and_input_gradient(x, label);
  }

 private:
  CnnModel model_;
};

std::unique_ptr<Classifier> bundled_classifier(const Config& cfg, const DatasetSpec& dataset) {
  if (!cfg.weights.empty()) return std::make_unique<OwnedCnn>(CnnModel::load(cfg.weights));
  TrainResult trained = train_bundled(dataset, cfg.train_config());
  return std::make_unique<OwnedCnn>(std::move(trained.model));
}

}  // namespace

std::uint64_t sweep_attack_seed(std::uint64_t base, int cell, int image) {
  CounterRng rng(base, "sweep-seed-" + std::to_string(cell) + "-" + std::to_string(image));
  return rng.next_u64();
}

namespace {

// The image key accepts either a PNM path or "dataset:<index>" to pull a
// sample straight from the synthetic dataset.
Image load_input_image(const Config& cfg, CommandResult& result, int* sample_label) {
  if (cfg.image.rfind("dataset:", 0) == 0) {
    const int index = std::stoi(cfg.image.substr(8));
    const Sample sample = render_sample(cfg.dataset_spec(), index);
    if (sample_label) *sample_label = sample.label;
    result.manifest.emplace_back("input_digest_image", digest_hex(pnm_bytes(sample.image)));
    return sample.image;
  }
  result.manifest.emplace_back("input_digest_image", file_digest(cfg.image));
  return read_pnm(cfg.image);
}

}  // namespace

std::unique_ptr<Classifier> make_classifier(const Config& cfg) {
  if (cfg.classifier == "bundled") return bundled_classifier(cfg, cfg.dataset_spec());
  if (cfg.classifier.rfind("exec:", 0) == 0) {
    const auto argv = split_command(cfg.classifier.substr(5));
    if (argv.empty()) throw std::invalid_argument("classifier: empty exec command");
    return std::make_unique<ExternalClassifier>(argv, cfg.session_timeout_s);
  }
  throw std::invalid_argument("classifier must be 'bundled' or 'exec:<command>'");
}

CommandResult run_pattern(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  const CameraTimings timings = cfg.camera();
  const PulseTrain train = cfg.pulse_train();

  CommandResult result;
  result.manifest = begin_manifest(cfg, "pattern");

  const DazzlePattern pattern = train_pattern(timings, train.activity, train.width_us, 0);
  const fs::path ppath = out_dir / "pattern.pgm";
  write_pnm(pattern.to_image(), ppath);

  result.manifest.emplace_back("result_pulse_count", std::to_string(train.pulse_count()));
  result.manifest.emplace_back(
      "result_duty_cycle",
      format_double(duty_cycle_of_train(train.pulse_count(), train.width_us,
                                        1e6 / timings.frame_duration_us())));
  result.manifest.emplace_back(
      "result_dazzle_feasible",
      pulse_dazzles(cfg.saturation(), cfg.e_sensor_w_m2, train.width_us, cfg.t_exp_us) ? "1" : "0");
  result.manifest.emplace_back(
      "result_spot_diameter_px",
      format_double(saturated_spot_diameter(cfg.e_sensor_w_m2, cfg.saturation())));

  if (!cfg.image.empty()) {
    const Image x = load_input_image(cfg, result, nullptr);
    const Image composed = compose(x, pattern, cfg.strength);
    const fs::path cpath = out_dir / (composed.channels == 1 ? "composed.pgm" : "composed.ppm");
    write_pnm(composed, cpath);
    record_output(result, "composed", cpath);
  }
  record_output(result, "pattern", ppath);
  finish(result, cfg, out_dir, "pattern");
  return result;
}

CommandResult run_photopic(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  const PhotopicScene scene = cfg.scene();
  const auto surface = threshold_surface(cfg.theta_grid, cfg.l_b_grid, scene);

  std::ostringstream csv;
  csv << "theta_deg,l_b_cd_m2,duty_cycle\n";
  for (const ThresholdCell& c : surface)
    csv << format_double9(c.theta_deg) << "," << format_double9(c.l_b_cd_m2) << ","
        << format_double9(c.duty_cycle) << "\n";

  CommandResult result;
  result.manifest = begin_manifest(cfg, "photopic");
  const fs::path tpath = out_dir / "thresholds.csv";
  write_text(tpath, csv.str());
  result.manifest.emplace_back("result_rows", std::to_string(surface.size()));
  record_output(result, "thresholds", tpath);
  finish(result, cfg, out_dir, "photopic");
  return result;
}

CommandResult run_train(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  const DatasetSpec dataset = cfg.dataset_spec();
  TrainResult trained = train_bundled(dataset, cfg.train_config());

  std::vector<std::string> labels(dataset_class_names().begin(),
                                  dataset_class_names().begin() + dataset.classes);
  const fs::path wpath = out_dir / "model.txt";
  trained.model.save(wpath, labels);

  CommandResult result;
  result.manifest = begin_manifest(cfg, "train");
  result.manifest.emplace_back("result_holdout_accuracy", format_double(trained.holdout_accuracy));
  result.manifest.emplace_back("result_reached_accuracy_bar", trained.reached_bar ? "1" : "0");
  result.manifest.emplace_back("result_final_train_loss", format_double(trained.final_train_loss));
  record_output(result, "model", wpath);
  finish(result, cfg, out_dir, "train");
  return result;
}

CommandResult run_attack(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  if (cfg.image.empty()) throw std::invalid_argument("attack: config key 'image' is required");

  const CameraTimings timings = cfg.camera();
  CommandResult result;
  result.manifest = begin_manifest(cfg, "attack");

  int label = cfg.label;
  const Image x = load_input_image(cfg, result, label < 0 ? &label : nullptr);
  if (label < 0) throw std::invalid_argument("attack: config key 'label' is required");
  std::unique_ptr<Classifier> model = make_classifier(cfg);
  if (label >= model->num_classes())
    throw std::invalid_argument("attack: label out of range for the classifier");
  result.manifest.emplace_back("result_true_label", std::to_string(label));

  // Unattacked control first.
  const auto clean_logits = model->logits(x);
  const auto clean_probs = softmax(clean_logits);
  result.manifest.emplace_back("clean_predicted", std::to_string(argmax_label(clean_logits)));
  result.manifest.emplace_back("clean_true_confidence", format_double(clean_probs[label]));

  AttackConfig attack_config = cfg.attack_config();
  const AttackResult attack = optimize(x, label, *model, timings, attack_config);

  result.manifest.emplace_back("result_pulse_slots", active_slots_string(attack.train.activity));
  result.manifest.emplace_back("result_pulse_count", std::to_string(attack.train.pulse_count()));
  result.manifest.emplace_back("result_width_us", format_double(attack.train.width_us));
  result.manifest.emplace_back("result_duty_cycle", format_double(attack.duty_cycle));
  result.manifest.emplace_back("result_mean_loss", format_double(attack.mean_loss));
  result.manifest.emplace_back("result_success_rate", format_double(attack.success_rate));
  const bool success = attack.has_pulses && attack.success_rate >= 0.5;
  result.manifest.emplace_back("result_success", success ? "true" : "false");
  result.manifest.emplace_back("result_per_shift_success",
                               join_u8(attack.per_shift_success, ';'));
  {
    std::string trace;
    for (size_t i = 0; i < attack.objective_trace.size(); ++i) {
      if (i) trace += ",";
      trace += format_double9(attack.objective_trace[i]);
    }
    result.manifest.emplace_back("result_loss_trace", trace);
  }

  // Render the attacked frame at distinct random exposure phases; the same
  // train lands at a different offset in each shot.
  const int slots = timings.pulse_slots();
  const int shots = std::min(cfg.attack_shots, slots);
  std::vector<int> order(static_cast<size_t>(slots));
  std::iota(order.begin(), order.end(), 0);
  CounterRng shot_rng(cfg.seed, "attack-shots");
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[shot_rng.uniform_index(i)]);

  for (int k = 0; k < shots; ++k) {
    const int shift = order[static_cast<size_t>(k)];
    const Image attacked =
        compose(x, train_pattern(timings, attack.train.activity, attack.train.width_us, shift));
    const auto lg = model->logits(attacked);
    const auto probs = softmax(lg);
    const std::string base = "shot_" + std::to_string(k + 1);
    const fs::path spath = out_dir / ("attacked_" + base + (x.channels == 1 ? ".pgm" : ".ppm"));
    write_pnm(attacked, spath);
    result.manifest.emplace_back(base + "_shift", std::to_string(shift));
    result.manifest.emplace_back(base + "_predicted", std::to_string(argmax_label(lg)));
    result.manifest.emplace_back(base + "_true_confidence", format_double(probs[label]));
    record_output(result, base, spath);
  }

  finish(result, cfg, out_dir, "attack");
  return result;
}

CommandResult run_evaluate(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  const CameraTimings timings = cfg.camera();
  const PulseTrain train = cfg.pulse_train();
  std::unique_ptr<Classifier> model = make_classifier(cfg);

  const DatasetSpec dataset = cfg.dataset_spec();
  if (cfg.eval_images < 1) throw std::invalid_argument("evaluate: eval_images must be >= 1");
  if (cfg.eval_images > dataset.test_count)
    throw std::invalid_argument("evaluate: eval_images exceeds the test split");

  const int slots = timings.pulse_slots();
  const bool exhaustive = cfg.shifts_mode == "exhaustive";
  if (!exhaustive && cfg.shifts_mode != "random")
    throw std::invalid_argument("shifts_mode must be 'random' or 'exhaustive'");

  // Patterns depend only on the shift; render each once.
  std::vector<DazzlePattern> patterns;
  patterns.reserve(static_cast<size_t>(slots));
  for (int j = 0; j < slots; ++j)
    patterns.push_back(train_pattern(timings, train.activity, train.width_us, j));

  std::vector<long> histogram(static_cast<size_t>(model->num_classes()), 0);
  long trials = 0, successes = 0;
  CounterRng shift_rng(cfg.seed, "evaluate-shifts");
  bool partial = false;
  std::string partial_error;

  try {
    for (int i = 0; i < cfg.eval_images; ++i) {
      const Sample sample = render_sample(dataset, dataset.train_count + i);
      const int n_shifts = exhaustive ? slots : cfg.shift_count;
      for (int t = 0; t < n_shifts; ++t) {
        const int shift = exhaustive ? t : static_cast<int>(shift_rng.uniform_index(slots));
        const Image attacked = compose(sample.image, patterns[static_cast<size_t>(shift)]);
        const int pred = argmax_label(model->logits(attacked));
        ++histogram[static_cast<size_t>(pred)];
        ++trials;
        successes += (pred != sample.label);
      }
    }
  } catch (const SessionError& e) {
    partial = true;
    partial_error = e.what();
  }

  std::ostringstream csv;
  csv << "predicted_label,count\n";
  for (size_t k = 0; k < histogram.size(); ++k) csv << k << "," << histogram[k] << "\n";

  CommandResult result;
  result.manifest = begin_manifest(cfg, "evaluate");
  result.manifest.emplace_back("result_trials", std::to_string(trials));
  result.manifest.emplace_back("result_successes", std::to_string(successes));
  result.manifest.emplace_back(
      "result_success_rate",
      format_double(trials > 0 ? static_cast<double>(successes) / trials : 0.0));
  {
    std::string hist;
    for (size_t k = 0; k < histogram.size(); ++k) {
      if (k) hist += ";";
      hist += std::to_string(histogram[k]);
    }
    result.manifest.emplace_back("result_histogram", hist);
  }
  if (partial) result.manifest.emplace_back("result_partial", "aborted: " + partial_error);

  const fs::path epath = out_dir / "evaluate.csv";
  write_text(epath, csv.str());
  record_output(result, "evaluate", epath);
  finish(result, cfg, out_dir, "evaluate");
  if (partial) throw SessionError("evaluate aborted with partial results: " + partial_error);
  return result;
}

namespace {

struct SweepCell {
  double value = 0.0;
  long trials = 0;
  long successes = 0;
  double mean_loss = 0.0;
  double max_loss = 0.0;
  double mean_duty_cycle = 0.0;
  std::vector<std::uint8_t> per_trial;
  std::string error;
};

}  // namespace

CommandResult run_sweep(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  if (cfg.sweep_grid.empty()) throw std::invalid_argument("sweep: sweep_grid is empty");
  if (cfg.trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  if (cfg.sweep_images < 1) throw std::invalid_argument("sweep: sweep_images must be >= 1");
  const bool axis_dc = cfg.sweep_axis == "duty_cycle";
  const bool axis_width = cfg.sweep_axis == "pulse_width";
  const bool axis_fov = cfg.sweep_axis == "fov_fraction";
  if (!axis_dc && !axis_width && !axis_fov)
    throw std::invalid_argument("sweep_axis must be duty_cycle, pulse_width or fov_fraction");
  const bool exhaustive = cfg.shifts_mode == "exhaustive";

  std::vector<double> grid = cfg.sweep_grid;
  std::sort(grid.begin(), grid.end());

  const CameraTimings timings = cfg.camera();
  const int slots = timings.pulse_slots();
  const double frame_us = timings.frame_duration_us();

  // One classifier for the whole sweep unless the dataset itself is swept.
  std::unique_ptr<Classifier> shared_model;
  if (!axis_fov || cfg.classifier != "bundled" || !cfg.weights.empty())
    shared_model = make_classifier(cfg);

  std::vector<SweepCell> cells;
  for (size_t cell_idx = 0; cell_idx < grid.size(); ++cell_idx) {
    SweepCell cell;
    cell.value = grid[cell_idx];
    try {
      DatasetSpec dataset = cfg.dataset_spec();
      AttackConfig attack_cfg = cfg.attack_config();
      if (axis_dc) {
        const int budget = std::max(
            1LL, std::llround(cell.value * frame_us / attack_cfg.width_us));
        attack_cfg.pulse_budget = static_cast<int>(std::min<long long>(budget, slots));
      } else if (axis_width) {
        attack_cfg.width_us = cell.value;
      } else {
        dataset.fov_fraction = cell.value;
      }

      std::unique_ptr<Classifier> cell_model_owner;
      Classifier* model = shared_model.get();
      if (!model) {
        Config cell_cfg = cfg;
        cell_cfg.fov_fraction = dataset.fov_fraction;
        cell_model_owner = make_classifier(cell_cfg);
        model = cell_model_owner.get();
      }

      const int n_images = std::min(cfg.sweep_images, dataset.test_count);
      if (n_images < 1) throw std::invalid_argument("sweep: dataset has no test images");
      std::vector<Sample> samples;
      std::vector<AttackResult> attacks;
      for (int i = 0; i < n_images; ++i) {
        samples.push_back(render_sample(dataset, dataset.train_count + i));
        AttackConfig per_image = attack_cfg;
        per_image.seed = sweep_attack_seed(cfg.seed, static_cast<int>(cell_idx), i);
        attacks.push_back(
            optimize(samples.back().image, samples.back().label, *model, timings, per_image));
        cell.mean_duty_cycle += attacks.back().duty_cycle;
      }
      cell.mean_duty_cycle /= n_images;

      CounterRng shift_rng(cfg.seed, "sweep-shifts-" + std::to_string(cell_idx));
      const long n_trials = exhaustive ? static_cast<long>(n_images) * slots : cfg.trials;
      double loss_sum = 0.0;
      for (long t = 0; t < n_trials; ++t) {
        const int img = static_cast<int>(t % n_images);
        const int shift = exhaustive ? static_cast<int>((t / n_images) % slots)
                                     : static_cast<int>(shift_rng.uniform_index(slots));
        const Image attacked = compose(
            samples[static_cast<size_t>(img)].image,
            train_pattern(timings, attacks[static_cast<size_t>(img)].train.activity,
                          attacks[static_cast<size_t>(img)].train.width_us, shift));
        const auto lg = model->logits(attacked);
        const int pred = argmax_label(lg);
        const double loss = cross_entropy_loss(lg, samples[static_cast<size_t>(img)].label);
        const bool success = pred != samples[static_cast<size_t>(img)].label;
        cell.per_trial.push_back(success ? 1 : 0);
        cell.successes += success;
        loss_sum += loss;
        cell.max_loss = std::max(cell.max_loss, loss);
      }
      cell.trials = n_trials;
      cell.mean_loss = n_trials > 0 ? loss_sum / static_cast<double>(n_trials) : 0.0;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }

  std::ostringstream csv;
  csv << "axis,value,trials,success_rate,mean_loss,max_loss,mean_duty_cycle,per_trial_success\n";
  for (const SweepCell& c : cells) {
    if (!c.error.empty()) continue;
    csv << cfg.sweep_axis << "," << format_double9(c.value) << "," << c.trials << ","
        << format_double9(c.trials ? static_cast<double>(c.successes) / c.trials : 0.0) << ","
        << format_double9(c.mean_loss) << "," << format_double9(c.max_loss) << ","
        << format_double9(c.mean_duty_cycle) << "," << join_u8(c.per_trial, '|') << "\n";
  }

  CommandResult result;
  result.manifest = begin_manifest(cfg, "sweep");
  for (size_t i = 0; i < cells.size(); ++i)
    if (!cells[i].error.empty())
      result.manifest.emplace_back("result_cell_error_" + std::to_string(i),
                                   format_double9(cells[i].value) + ": " + cells[i].error);
  result.manifest.emplace_back("result_cells", std::to_string(cells.size()));

  const fs::path spath = out_dir / "sweep.csv";
  write_text(spath, csv.str());
  record_output(result, "sweep", spath);
  finish(result, cfg, out_dir, "sweep");
  return result;
}

CommandResult run_calibrate_rn(const Config& cfg, const fs::path& out_dir_in) {
  const fs::path out_dir = prepare_out_dir(out_dir_in);
  if (cfg.image.empty()) throw std::invalid_argument("calibrate-rn: config key 'image' is required");
  const Image img = read_pnm(cfg.image);
  const int r_n = calibrate_rn(img);

  CommandResult result;
  result.manifest = begin_manifest(cfg, "calibrate-rn");
  result.manifest.emplace_back("input_digest_image", file_digest(cfg.image));
  result.manifest.emplace_back("result_r_n", std::to_string(r_n));
  finish(result, cfg, out_dir, "calibrate_rn");
  return result;
}

}  // namespace rsdazzle
