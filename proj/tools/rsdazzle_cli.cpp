#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsdazzle/errors.hpp"
#include "rsdazzle/harness.hpp"
#include "rsdazzle/version.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::string out_dir = ".";
  std::string classifier;
  std::string image;
  std::string weights;
  long long seed = -1;
  int label = -1;
  std::vector<std::string> overrides;  // key=value pairs
};

rsdazzle::Config build_config(const CliState& s) {
  rsdazzle::Config cfg;
  if (!s.config_path.empty()) cfg.load_file(s.config_path);
  for (const std::string& kv : s.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (s.seed >= 0) cfg.seed = static_cast<std::uint64_t>(s.seed);
  if (!s.classifier.empty()) cfg.classifier = s.classifier;
  if (!s.image.empty()) cfg.image = s.image;
  if (!s.weights.empty()) cfg.weights = s.weights;
  if (s.label >= 0) cfg.label = s.label;
  return cfg;
}

void add_common(CLI::App* sub, CliState& s) {
  sub->add_option("--config", s.config_path, "flat key-value config file");
  sub->add_option("--seed", s.seed, "run seed");
  sub->add_option("--out", s.out_dir, "output directory");
  sub->add_option("--classifier", s.classifier, "bundled or exec:<command line>");
  sub->add_option("--set", s.overrides, "override a config key (key=value, repeatable)");
}

void print_manifest_tail(const rsdazzle::CommandResult& r) {
  for (const auto& [k, v] : r.manifest)
    if (k.rfind("result_", 0) == 0 || k.rfind("clean_", 0) == 0 || k.rfind("shot_", 0) == 0) {
      if (k == "result_loss_trace") continue;  // long series, lives in the manifest file
      std::cout << k << " = " << v << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rolling-shutter dazzle pattern simulator and attack harness"};
  app.set_version_flag("--version", rsdazzle::kToolVersion);
  app.require_subcommand(1);

  CliState s;
  auto* pattern = app.add_subcommand("pattern", "render a dazzle pattern, optionally composed onto an image");
  add_common(pattern, s);
  pattern->add_option("--image", s.image, "input image (binary PGM/PPM)");

  auto* photopic = app.add_subcommand("photopic", "emit the duty-cycle visibility threshold table");
  add_common(photopic, s);

  auto* attack = app.add_subcommand("attack", "optimize a pulse train against a classifier");
  add_common(attack, s);
  attack->add_option("--image", s.image, "input image (binary PGM/PPM)");
  attack->add_option("--label", s.label, "true label of the input image");
  attack->add_option("--weights", s.weights, "bundled classifier weights file");

  auto* sweep = app.add_subcommand("sweep", "sweep duty cycle, pulse width or object scale");
  add_common(sweep, s);
  sweep->add_option("--weights", s.weights, "bundled classifier weights file");

  auto* evaluate = app.add_subcommand("evaluate", "classify a pulse train over images and shifts");
  add_common(evaluate, s);
  evaluate->add_option("--weights", s.weights, "bundled classifier weights file");

  auto* train = app.add_subcommand("train", "train the bundled classifier on the synthetic dataset");
  add_common(train, s);

  auto* calibrate = app.add_subcommand("calibrate-rn", "estimate the rows exposure constant from a stripe capture");
  add_common(calibrate, s);
  calibrate->add_option("--image", s.image, "stripe capture (binary PGM/PPM)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const rsdazzle::Config cfg = build_config(s);
    rsdazzle::CommandResult result;
    if (pattern->parsed()) {
      result = rsdazzle::run_pattern(cfg, s.out_dir);
    } else if (photopic->parsed()) {
      result = rsdazzle::run_photopic(cfg, s.out_dir);
    } else if (attack->parsed()) {
      result = rsdazzle::run_attack(cfg, s.out_dir);
    } else if (sweep->parsed()) {
      result = rsdazzle::run_sweep(cfg, s.out_dir);
    } else if (evaluate->parsed()) {
      result = rsdazzle::run_evaluate(cfg, s.out_dir);
    } else if (train->parsed()) {
      result = rsdazzle::run_train(cfg, s.out_dir);
      print_manifest_tail(result);
      for (const auto& p : result.outputs) std::cout << "wrote " << p.string() << "\n";
      if (result.value("result_reached_accuracy_bar") == "0") {
        std::cerr << "training failed: held-out accuracy "
                  << result.value("result_holdout_accuracy") << " below the configured bar\n";
        return 2;
      }
      return 0;
    } else if (calibrate->parsed()) {
      result = rsdazzle::run_calibrate_rn(cfg, s.out_dir);
    }
    print_manifest_tail(result);
    for (const auto& p : result.outputs) std::cout << "wrote " << p.string() << "\n";
    return 0;
  } catch (const rsdazzle::SessionError& e) {
    std::cerr << "classifier session error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
