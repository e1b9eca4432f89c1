#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rsdazzle/tensor.hpp"

namespace rsdazzle {

// Differentiable image classifier: logits plus exact input gradients of the
// softmax cross-entropy loss. In-process models are pure and safe to call
// concurrently; external sessions serialize access per session.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int num_classes() const = 0;
  virtual std::vector<double> logits(const Image& x) = 0;
  // Exact reverse-mode gradient of cross_entropy_loss(logits(x), label)
  // with respect to x, shaped like x.
  virtual Tensor input_gradient(const Image& x, int label) = 0;
  // Loss and input gradient together; the default issues both calls.
  virtual std::pair<double, Tensor> loss_and_input_gradient(const Image& x, int label);
  // In-process models are pure; wire-protocol sessions are one request at a
  // time and must not be called concurrently.
  virtual bool concurrent_safe() const { return true; }
};

std::vector<double> softmax(const std::vector<double>& logits);

// -log softmax(logits)[label], computed with max-subtraction.
double cross_entropy_loss(const std::vector<double>& logits, int label);

// Flat linear model: logits = W x + b. Mostly a test and wire-protocol
// reference; shares no code with the CNN path.
class LinearModel : public Classifier {
 public:
  LinearModel(int input_h, int input_w, int input_c, int classes);

  int num_classes() const override { return classes_; }
  std::vector<double> logits(const Image& x) override;
  Tensor input_gradient(const Image& x, int label) override;

  double& weight(int k, int flat_index) { return w_[static_cast<size_t>(k) * inputs_ + flat_index]; }
  double& bias(int k) { return b_[k]; }
  int input_count() const { return inputs_; }
  int input_height() const { return h_; }
  int input_width() const { return w_in_; }
  int input_channels() const { return c_; }

 private:
  void check_shape(const Image& x) const;

  int h_, w_in_, c_, classes_, inputs_;
  std::vector<double> w_, b_;
};

// The deterministic linear model both ends of the wire protocol can
// reconstruct independently; used as the loopback reference peer.
LinearModel make_reference_linear(int h, int w, int c, int classes);

struct CnnArch {
  int input_size = 64;  // square input, must be divisible by 4
  int input_channels = 3;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int hidden_units = 64;
  int classes = 10;
};

// Bundled convolutional classifier: two 3x3 same-padding convolutions with
// ReLU and 2x2 max-pooling, then two fully connected layers. All parameters
// live in one flat vector so the optimizer and the serializer stay trivial.
class CnnModel : public Classifier {
 public:
  explicit CnnModel(const CnnArch& arch);

  int num_classes() const override { return arch_.classes; }
  std::vector<double> logits(const Image& x) override;
  Tensor input_gradient(const Image& x, int label) override;
  // Single forward plus backward pass instead of the two-call default.
  std::pair<double, Tensor> loss_and_input_gradient(const Image& x, int label) override;

  // Forward pass plus full backward pass; returns the loss and accumulates
  // parameter gradients into grad (same layout as params). Used by training.
  double loss_and_param_gradient(const Image& x, int label, std::vector<double>& grad);

  const CnnArch& arch() const { return arch_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void save(const std::filesystem::path& path, const std::vector<std::string>& labels) const;
  static CnnModel load(const std::filesystem::path& path, std::vector<std::string>* labels = nullptr);

 private:
  struct Activations;
  void forward(const Image& x, Activations& acts) const;
  Tensor backward_input(const Activations& acts, const std::vector<double>& dlogits) const;
  void check_shape(const Image& x) const;

  CnnArch arch_;
  std::vector<double> params_;
  // Offsets into params_: conv1 w/b, conv2 w/b, fc1 w/b, fc2 w/b.
  size_t c1w_, c1b_, c2w_, c2b_, f1w_, f1b_, f2w_, f2b_;
};

}  // namespace rsdazzle
