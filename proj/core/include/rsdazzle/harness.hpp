#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rsdazzle/classifier.hpp"
#include "rsdazzle/config.hpp"

namespace rsdazzle {

// Everything a command produced: manifest entries in emission order plus the
// files written under the output directory (manifest last).
struct CommandResult {
  std::vector<std::pair<std::string, std::string>> manifest;
  std::vector<std::filesystem::path> outputs;

  std::string value(const std::string& key) const;  // throws if absent
};

// Builds the classifier named by config.classifier: "bundled" loads
// config.weights (or trains in memory when no weights path is set),
// "exec:<command>" attaches an external wire-protocol peer.
std::unique_ptr<Classifier> make_classifier(const Config& config);

// Per-(cell, image) attack seed used by run_sweep; exposed so the degenerate
// single-cell sweep can be cross-checked against a direct optimization.
std::uint64_t sweep_attack_seed(std::uint64_t base, int cell, int image);

CommandResult run_pattern(const Config& config, const std::filesystem::path& out_dir);
CommandResult run_photopic(const Config& config, const std::filesystem::path& out_dir);
CommandResult run_attack(const Config& config, const std::filesystem::path& out_dir);
CommandResult run_sweep(const Config& config, const std::filesystem::path& out_dir);
CommandResult run_evaluate(const Config& config, const std::filesystem::path& out_dir);
CommandResult run_train(const Config& config, const std::filesystem::path& out_dir);
CommandResult run_calibrate_rn(const Config& config, const std::filesystem::path& out_dir);

}  // namespace rsdazzle
