#pragma once

#include <cstdint>
#include <vector>

#include "rsdazzle/camera.hpp"
#include "rsdazzle/classifier.hpp"
#include "rsdazzle/synthesis.hpp"

namespace rsdazzle {

// Continuous stand-in for the binary pulse activity during optimization.
struct RelaxedPulseVector {
  std::vector<double> omega;
};

enum class SparsityMode {
  kSumActivations,  // differentiable stand-in for the active-pulse count
  kNone,            // pure loss maximization (useful with a pulse budget)
};

struct AttackConfig {
  double alpha = 12.0;           // loss-versus-sparsity tradeoff weight
  double learning_rate = 0.05;
  int iterations = 300;
  int eot_samples = 16;          // shift samples per optimization step
  double binarize_threshold = 0.5;
  std::uint64_t seed = 1;
  int pulse_budget = 0;          // > 0 keeps only the strongest activations
  double loss_failure_threshold = 2.0;  // pruning floor for the mean loss
  double width_us = 1.0;         // physical pulse width
  SparsityMode sparsity_mode = SparsityMode::kSumActivations;

  void validate() const;
};

struct AttackResult {
  PulseTrain train;
  std::vector<double> objective_trace;     // relaxed objective, one per iteration
  std::vector<std::uint8_t> per_shift_success;  // misclassified at each slot shift
  double mean_loss = 0.0;                  // mean cross entropy over all shifts
  double success_rate = 0.0;               // fraction of shifts misclassified
  double duty_cycle = 0.0;
  bool has_pulses = false;                 // false marks an attack failure
};

// tanh box relaxation: 0.5*(tanh(omega)+1), strictly inside (0,1).
double relax(double omega);
double relax_derivative(double omega);

// Sum of relaxed activations; equals the pulse count on binary input.
double sparsity_surrogate(const std::vector<double>& activations);

// relax applied elementwise, then the Kronecker row expansion and the crop
// to visible rows.
DazzlePattern relaxed_pattern(const RelaxedPulseVector& omega, int r_n, int m, int n_rows_visible);

// Relaxed objective at the given shift samples (slot indices): mean over
// shifts of [sparsity(relax(omega)) - alpha * loss(x composed with shifted
// delta)]. Lower is better for the optimizer.
double objective(const RelaxedPulseVector& omega, const Image& x, int label, Classifier& model,
                 const CameraTimings& timings, const AttackConfig& config,
                 const std::vector<int>& shift_samples);

// d objective / d omega for a single shift: the classifier input gradient
// summed over each slot's covered, unclipped pixels, chained through the
// relaxation derivative. Pixels pushed past 1 by the composition contribute
// nothing.
std::vector<double> chain_gradient(const RelaxedPulseVector& omega, const Image& x, int label,
                                   Classifier& model, const CameraTimings& timings,
                                   const AttackConfig& config, int shift);

// Full pipeline: Adam on omega with freshly sampled uniform shifts per step,
// binarization (top-k under a pulse budget, thresholding otherwise), greedy
// pruning that keeps the mean loss above the failure threshold, and a final
// evaluation over every slot shift. Deterministic given config.seed.
AttackResult optimize(const Image& x, int label, Classifier& model, const CameraTimings& timings,
                      const AttackConfig& config);

// Pattern of a binary train at a slot shift, cropped to the visible rows.
DazzlePattern train_pattern(const CameraTimings& timings, const std::vector<std::uint8_t>& e_eff,
                            double width_us, int shift);

// Predicted label at every slot shift.
std::vector<int> predictions_over_shifts(const Image& x, Classifier& model,
                                         const CameraTimings& timings,
                                         const std::vector<std::uint8_t>& e_eff, double width_us);

// Mean cross entropy of the true label over every slot shift.
double mean_eot_loss(const Image& x, int label, Classifier& model, const CameraTimings& timings,
                     const std::vector<std::uint8_t>& e_eff, double width_us);

}  // namespace rsdazzle
