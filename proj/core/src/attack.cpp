#include "rsdazzle/attack.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "rsdazzle/adam.hpp"
#include "rsdazzle/photopic.hpp"
#include "rsdazzle/rng.hpp"

namespace rsdazzle {

void AttackConfig::validate() const {
  if (alpha < 0.0) throw std::invalid_argument("AttackConfig: alpha must be >= 0");
  if (iterations < 1) throw std::invalid_argument("AttackConfig: iterations must be >= 1");
  if (eot_samples < 1) throw std::invalid_argument("AttackConfig: eot_samples must be >= 1");
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0))
    throw std::invalid_argument("AttackConfig: binarize_threshold must lie in (0,1)");
  if (pulse_budget < 0) throw std::invalid_argument("AttackConfig: pulse_budget must be >= 0");
  if (width_us <= 0.0) throw std::invalid_argument("AttackConfig: width_us must be > 0");
}

double relax(double omega) { return 0.5 * (std::tanh(omega) + 1.0); }

double relax_derivative(double omega) {
  const double t = std::tanh(omega);
  return 0.5 * (1.0 - t * t);
}

double sparsity_surrogate(const std::vector<double>& activations) {
  return std::accumulate(activations.begin(), activations.end(), 0.0);
}

DazzlePattern relaxed_pattern(const RelaxedPulseVector& omega, int r_n, int m, int n_rows_visible) {
  std::vector<double> e_r;
  e_r.reserve(omega.omega.size() * static_cast<size_t>(r_n));
  for (double w : omega.omega) {
    const double a = relax(w);
    for (int k = 0; k < r_n; ++k) e_r.push_back(a);
  }
  return pattern_from_rows(e_r, m, n_rows_visible);
}

namespace {

// Geometry shared by every shift: which rows each geometric slot covers, and
// which geometric slots cover each visible row.
struct SlotGeometry {
  int slots;
  int visible_rows;
  std::vector<std::vector<int>> rows_of_slot;     // full-cycle rows per slot
  std::vector<std::vector<int>> slots_of_row;     // geometric slots per visible row

  SlotGeometry(const CameraTimings& timings, double width_us)
      : slots(timings.pulse_slots()), visible_rows(timings.n_rows_visible) {
    rows_of_slot = slot_coverage(timings, width_us);
    slots_of_row.assign(static_cast<size_t>(visible_rows), {});
    for (int s = 0; s < slots; ++s)
      for (int r : rows_of_slot[s])
        if (r < visible_rows) slots_of_row[static_cast<size_t>(r)].push_back(s);
  }
};

// Row values of the relaxed pattern under a slot shift: the activity of
// logical slot i appears at geometric slot (i + shift) mod N. Overlapping
// coverage combines as a probabilistic union so binary input reproduces the
// plain set union.
std::vector<double> shifted_row_values(const SlotGeometry& geo, const std::vector<double>& act,
                                       int shift) {
  std::vector<double> rows(static_cast<size_t>(geo.visible_rows), 0.0);
  for (int r = 0; r < geo.visible_rows; ++r) {
    double off = 1.0;
    for (int s : geo.slots_of_row[static_cast<size_t>(r)]) {
      const int i = (s - shift % geo.slots + geo.slots) % geo.slots;
      off *= 1.0 - act[static_cast<size_t>(i)];
    }
    rows[static_cast<size_t>(r)] = 1.0 - off;
  }
  return rows;
}

Image compose_rows(const Image& x, const std::vector<double>& rows) {
  Image out = x;
  for (int r = 0; r < x.height; ++r) {
    const double add = rows[static_cast<size_t>(r)];
    if (add == 0.0) continue;
    for (int c = 0; c < x.width; ++c)
      for (int ch = 0; ch < x.channels; ++ch) {
        double v = out.at(r, c, ch) + add;
        out.at(r, c, ch) = v > 1.0 ? 1.0 : v;
      }
  }
  return out;
}

struct ShiftEval {
  double loss = 0.0;
  std::vector<double> dloss_dact;  // accumulated per logical slot
};

// Loss and its gradient with respect to the activations for one shift.
ShiftEval eval_shift(const SlotGeometry& geo, const std::vector<double>& act, const Image& x,
                     int label, Classifier& model, int shift) {
  const std::vector<double> rows = shifted_row_values(geo, act, shift);
  const Image attacked = compose_rows(x, rows);
  auto [loss, grad] = model.loss_and_input_gradient(attacked, label);

  ShiftEval out;
  out.loss = loss;
  out.dloss_dact.assign(act.size(), 0.0);
  for (int r = 0; r < geo.visible_rows; ++r) {
    const auto& covering = geo.slots_of_row[static_cast<size_t>(r)];
    if (covering.empty()) continue;
    const double add = rows[static_cast<size_t>(r)];
    if (add == 0.0) continue;

    // Sum the gradient over the row's unclipped pixels once; the clip kills
    // contributions where x + delta exceeded 1.
    double row_grad = 0.0;
    for (int c = 0; c < x.width; ++c)
      for (int ch = 0; ch < x.channels; ++ch)
        if (x.at(r, c, ch) + add <= 1.0) row_grad += grad.at(r, c, ch);
    if (row_grad == 0.0) continue;

    for (int s : covering) {
      const int i = (s - shift % geo.slots + geo.slots) % geo.slots;
      double partial = 1.0;
      for (int s2 : covering) {
        if (s2 == s) continue;
        const int i2 = (s2 - shift % geo.slots + geo.slots) % geo.slots;
        partial *= 1.0 - act[static_cast<size_t>(i2)];
      }
      out.dloss_dact[static_cast<size_t>(i)] += row_grad * partial;
    }
  }
  return out;
}

std::vector<double> activations_of(const RelaxedPulseVector& omega) {
  std::vector<double> act(omega.omega.size());
  for (size_t i = 0; i < act.size(); ++i) act[i] = relax(omega.omega[i]);
  return act;
}

void check_dims(const RelaxedPulseVector& omega, const SlotGeometry& geo, const Image& x) {
  if (static_cast<int>(omega.omega.size()) != geo.slots)
    throw std::invalid_argument("attack: omega length does not match the pulse slot count");
  if (x.height != geo.visible_rows)
    throw std::invalid_argument("attack: image height does not match visible rows");
}

// Evaluates the shifts concurrently, then reduces in slot order so the
// result does not depend on scheduling.
std::vector<ShiftEval> eval_shifts(const SlotGeometry& geo, const std::vector<double>& act,
                                   const Image& x, int label, Classifier& model,
                                   const std::vector<int>& shifts, bool parallel) {
  std::vector<ShiftEval> evals(shifts.size());
  if (!parallel || shifts.size() < 2) {
    for (size_t k = 0; k < shifts.size(); ++k)
      evals[k] = eval_shift(geo, act, x, label, model, shifts[k]);
    return evals;
  }
  std::vector<std::future<ShiftEval>> futures;
  futures.reserve(shifts.size());
  for (size_t k = 0; k < shifts.size(); ++k)
    futures.push_back(std::async(std::launch::async, [&, k] {
      return eval_shift(geo, act, x, label, model, shifts[k]);
    }));
  for (size_t k = 0; k < shifts.size(); ++k) evals[k] = futures[k].get();
  return evals;
}

}  // namespace

double objective(const RelaxedPulseVector& omega, const Image& x, int label, Classifier& model,
                 const CameraTimings& timings, const AttackConfig& config,
                 const std::vector<int>& shift_samples) {
  config.validate();
  if (shift_samples.empty()) throw std::invalid_argument("objective: shift sample set is empty");
  const SlotGeometry geo(timings, config.width_us);
  check_dims(omega, geo, x);
  const std::vector<double> act = activations_of(omega);

  double mean_loss = 0.0;
  for (int shift : shift_samples) {
    const std::vector<double> rows = shifted_row_values(geo, act, shift);
    mean_loss += cross_entropy_loss(model.logits(compose_rows(x, rows)), label);
  }
  mean_loss /= static_cast<double>(shift_samples.size());

  const double sparsity =
      config.sparsity_mode == SparsityMode::kSumActivations ? sparsity_surrogate(act) : 0.0;
  return sparsity - config.alpha * mean_loss;
}

std::vector<double> chain_gradient(const RelaxedPulseVector& omega, const Image& x, int label,
                                   Classifier& model, const CameraTimings& timings,
                                   const AttackConfig& config, int shift) {
  config.validate();
  const SlotGeometry geo(timings, config.width_us);
  check_dims(omega, geo, x);
  const std::vector<double> act = activations_of(omega);
  const ShiftEval ev = eval_shift(geo, act, x, label, model, shift);

  std::vector<double> grad(omega.omega.size());
  const double sparsity_term =
      config.sparsity_mode == SparsityMode::kSumActivations ? 1.0 : 0.0;
  for (size_t i = 0; i < grad.size(); ++i)
    grad[i] = relax_derivative(omega.omega[i]) *
              (sparsity_term - config.alpha * ev.dloss_dact[i]);
  return grad;
}

DazzlePattern train_pattern(const CameraTimings& timings, const std::vector<std::uint8_t>& e_eff,
                            double width_us, int shift) {
  const int slots = timings.pulse_slots();
  if (static_cast<int>(e_eff.size()) != slots)
    throw std::invalid_argument("train_pattern: activity length mismatch");
  std::vector<std::uint8_t> shifted(e_eff.size());
  for (int i = 0; i < slots; ++i)
    shifted[static_cast<size_t>((i + shift % slots + slots) % slots)] = e_eff[static_cast<size_t>(i)];
  const auto rows = slot_row_indicator(timings, shifted, width_us);
  return pattern_from_rows(rows, timings.n_cols, timings.n_rows_visible);
}

std::vector<int> predictions_over_shifts(const Image& x, Classifier& model,
                                         const CameraTimings& timings,
                                         const std::vector<std::uint8_t>& e_eff, double width_us) {
  const int slots = timings.pulse_slots();
  std::vector<int> preds(static_cast<size_t>(slots));
  for (int j = 0; j < slots; ++j) {
    const Image attacked = compose(x, train_pattern(timings, e_eff, width_us, j));
    const auto lg = model.logits(attacked);
    preds[static_cast<size_t>(j)] =
        static_cast<int>(std::max_element(lg.begin(), lg.end()) - lg.begin());
  }
  return preds;
}

double mean_eot_loss(const Image& x, int label, Classifier& model, const CameraTimings& timings,
                     const std::vector<std::uint8_t>& e_eff, double width_us) {
  const int slots = timings.pulse_slots();
  double sum = 0.0;
  for (int j = 0; j < slots; ++j) {
    const Image attacked = compose(x, train_pattern(timings, e_eff, width_us, j));
    sum += cross_entropy_loss(model.logits(attacked), label);
  }
  return sum / static_cast<double>(slots);
}

AttackResult optimize(const Image& x, int label, Classifier& model, const CameraTimings& timings,
                      const AttackConfig& config) {
  config.validate();
  const SlotGeometry geo(timings, config.width_us);
  const int slots = geo.slots;
  if (x.height != timings.n_rows_visible || x.width != timings.n_cols)
    throw std::invalid_argument("optimize: image does not match the camera geometry");
  if (label < 0 || label >= model.num_classes())
    throw std::invalid_argument("optimize: label out of range");

  RelaxedPulseVector omega;
  omega.omega.assign(static_cast<size_t>(slots), -2.0);
  CounterRng init_rng(config.seed, "omega-init");
  for (double& w : omega.omega) w += init_rng.uniform(-0.1, 0.1);

  AdamOptimizer adam(omega.omega.size(), config.learning_rate);
  CounterRng shift_rng(config.seed, "eot-shifts");
  const double sparsity_term =
      config.sparsity_mode == SparsityMode::kSumActivations ? 1.0 : 0.0;

  AttackResult result;
  result.objective_trace.reserve(static_cast<size_t>(config.iterations));

  std::vector<int> shifts(static_cast<size_t>(config.eot_samples));
  std::vector<double> grad(omega.omega.size());
  for (int it = 0; it < config.iterations; ++it) {
    for (int& s : shifts) s = static_cast<int>(shift_rng.uniform_index(slots));
    const std::vector<double> act = activations_of(omega);
    const auto evals = eval_shifts(geo, act, x, label, model, shifts, model.concurrent_safe());

    double mean_loss = 0.0;
    std::vector<double> mean_dact(omega.omega.size(), 0.0);
    for (const ShiftEval& ev : evals) {
      mean_loss += ev.loss;
      for (size_t i = 0; i < mean_dact.size(); ++i) mean_dact[i] += ev.dloss_dact[i];
    }
    const double inv = 1.0 / static_cast<double>(evals.size());
    mean_loss *= inv;
    for (double& v : mean_dact) v *= inv;

    result.objective_trace.push_back(
        (config.sparsity_mode == SparsityMode::kSumActivations ? sparsity_surrogate(act) : 0.0) -
        config.alpha * mean_loss);

    for (size_t i = 0; i < grad.size(); ++i)
      grad[i] = relax_derivative(omega.omega[i]) *
                (sparsity_term - config.alpha * mean_dact[i]);
    adam.step(omega.omega, grad);
  }

  // Binarize: top-k under a budget, plain thresholding otherwise.
  const std::vector<double> act = activations_of(omega);
  std::vector<std::uint8_t> e_eff(static_cast<size_t>(slots), 0);
  if (config.pulse_budget > 0) {
    std::vector<int> idx(static_cast<size_t>(slots));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return act[static_cast<size_t>(a)] > act[static_cast<size_t>(b)]; });
    for (int k = 0; k < std::min(config.pulse_budget, slots); ++k)
      e_eff[static_cast<size_t>(idx[static_cast<size_t>(k)])] = 1;
  } else {
    for (int i = 0; i < slots; ++i)
      if (act[static_cast<size_t>(i)] > config.binarize_threshold) e_eff[static_cast<size_t>(i)] = 1;
  }

  // Greedy pruning: drop the pulse whose removal keeps the mean loss highest,
  // as long as the loss stays at or above the failure threshold.
  auto loss_of = [&](const std::vector<std::uint8_t>& e) {
    return mean_eot_loss(x, label, model, timings, e, config.width_us);
  };
  bool pruned = true;
  while (pruned) {
    pruned = false;
    int best_slot = -1;
    double best_loss = -1.0;
    for (int i = 0; i < slots; ++i) {
      if (!e_eff[static_cast<size_t>(i)]) continue;
      std::vector<std::uint8_t> candidate = e_eff;
      candidate[static_cast<size_t>(i)] = 0;
      const double l = loss_of(candidate);
      if (l > best_loss) {
        best_loss = l;
        best_slot = i;
      }
    }
    if (best_slot >= 0 && best_loss >= config.loss_failure_threshold) {
      e_eff[static_cast<size_t>(best_slot)] = 0;
      pruned = true;
    }
  }

  result.train.activity = e_eff;
  result.train.width_us = config.width_us;
  result.has_pulses = result.train.pulse_count() > 0;
  result.mean_loss = loss_of(e_eff);

  const std::vector<int> preds =
      predictions_over_shifts(x, model, timings, e_eff, config.width_us);
  result.per_shift_success.resize(preds.size());
  int successes = 0;
  for (size_t j = 0; j < preds.size(); ++j) {
    result.per_shift_success[j] = preds[j] != label;
    successes += result.per_shift_success[j];
  }
  result.success_rate = static_cast<double>(successes) / static_cast<double>(preds.size());
  result.duty_cycle = duty_cycle_of_train(result.train.pulse_count(), config.width_us,
                                          1e6 / timings.frame_duration_us());
  return result;
}

}  // namespace rsdazzle
