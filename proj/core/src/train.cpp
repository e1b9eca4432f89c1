#include "rsdazzle/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsdazzle/adam.hpp"
#include "rsdazzle/rng.hpp"

namespace rsdazzle {

namespace {

void he_init(CnnModel& model, std::uint64_t seed) {
  const CnnArch& a = model.arch();
  auto& p = model.params();
  std::fill(p.begin(), p.end(), 0.0);

  CounterRng rng(seed, "weight-init");
  size_t off = 0;
  auto fill_conv = [&](int oc, int ic) {
    const double sd = std::sqrt(2.0 / (ic * 9.0));
    for (int i = 0; i < oc * ic * 9; ++i) p[off++] = rng.normal() * sd;
    off += static_cast<size_t>(oc);  // biases stay zero
  };
  fill_conv(a.conv1_channels, a.input_channels);
  fill_conv(a.conv2_channels, a.conv1_channels);

  const int q = a.input_size / 4;
  const int flat = q * q * a.conv2_channels;
  const double sd1 = std::sqrt(2.0 / flat);
  for (int i = 0; i < a.hidden_units * flat; ++i) p[off++] = rng.normal() * sd1;
  off += static_cast<size_t>(a.hidden_units);
  const double sd2 = std::sqrt(2.0 / a.hidden_units);
  for (int i = 0; i < a.classes * a.hidden_units; ++i) p[off++] = rng.normal() * sd2;
  off += static_cast<size_t>(a.classes);
}

}  // namespace

double holdout_accuracy(CnnModel& model, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  for (const Sample& s : samples) {
    const auto lg = model.logits(s.image);
    const int pred = static_cast<int>(std::max_element(lg.begin(), lg.end()) - lg.begin());
    correct += (pred == s.label);
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train_bundled(const DatasetSpec& dataset, const TrainConfig& config) {
  dataset.validate();
  if (config.epochs < 0) throw std::invalid_argument("train_bundled: negative epochs");
  if (config.batch_size < 1) throw std::invalid_argument("train_bundled: batch_size must be >= 1");

  CnnArch arch;
  arch.input_size = dataset.image_size;
  arch.input_channels = 3;
  arch.conv1_channels = config.conv1_channels;
  arch.conv2_channels = config.conv2_channels;
  arch.hidden_units = config.hidden_units;
  arch.classes = dataset.classes;

  CnnModel model(arch);
  he_init(model, config.seed);

  const std::vector<Sample> train = render_split(dataset, false);
  const std::vector<Sample> test = render_split(dataset, true);

  AdamOptimizer adam(model.params().size(), config.learning_rate);
  std::vector<double> grad(model.params().size(), 0.0);
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    CounterRng shuffle_rng(config.seed, "shuffle-epoch-" + std::to_string(epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    epoch_loss = 0.0;
    size_t pos = 0;
    while (pos < order.size()) {
      const size_t n = std::min<size_t>(config.batch_size, order.size() - pos);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (size_t k = 0; k < n; ++k) {
        const Sample& s = train[order[pos + k]];
        batch_loss += model.loss_and_param_gradient(s.image, s.label, grad);
      }
      for (double& g : grad) g /= static_cast<double>(n);
      adam.step(model.params(), grad);
      epoch_loss += batch_loss;
      pos += n;
    }
    if (!train.empty()) epoch_loss /= static_cast<double>(train.size());
  }

  TrainResult result{std::move(model), 0.0, false, epoch_loss};
  result.holdout_accuracy = holdout_accuracy(result.model, test);
  result.reached_bar = result.holdout_accuracy >= config.accuracy_bar;
  return result;
}

}  // namespace rsdazzle
