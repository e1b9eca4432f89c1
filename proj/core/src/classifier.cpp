#include "rsdazzle/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rsdazzle/rng.hpp"

namespace rsdazzle {

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double cross_entropy_loss(const std::vector<double>& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw std::invalid_argument("cross_entropy_loss: label out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return std::log(z) - (logits[label] - m);
}

std::pair<double, Tensor> Classifier::loss_and_input_gradient(const Image& x, int label) {
  const double loss = cross_entropy_loss(logits(x), label);
  return {loss, input_gradient(x, label)};
}

// ---------------------------------------------------------------- LinearModel

LinearModel::LinearModel(int input_h, int input_w, int input_c, int classes)
    : h_(input_h), w_in_(input_w), c_(input_c), classes_(classes), inputs_(input_h * input_w * input_c) {
  if (classes_ < 2) throw std::invalid_argument("LinearModel: need >= 2 classes");
  if (inputs_ <= 0) throw std::invalid_argument("LinearModel: empty input shape");
  w_.assign(static_cast<size_t>(classes_) * inputs_, 0.0);
  b_.assign(static_cast<size_t>(classes_), 0.0);
}

void LinearModel::check_shape(const Image& x) const {
  if (x.height != h_ || x.width != w_in_ || x.channels != c_)
    throw std::invalid_argument("LinearModel: input shape mismatch");
}

std::vector<double> LinearModel::logits(const Image& x) {
  check_shape(x);
  std::vector<double> out(static_cast<size_t>(classes_));
  for (int k = 0; k < classes_; ++k) {
    double acc = b_[k];
    const double* wk = &w_[static_cast<size_t>(k) * inputs_];
    for (int i = 0; i < inputs_; ++i) acc += wk[i] * x.data[i];
    out[k] = acc;
  }
  return out;
}

Tensor LinearModel::input_gradient(const Image& x, int label) {
  check_shape(x);
  if (label < 0 || label >= classes_)
    throw std::invalid_argument("LinearModel: label out of range");
  const std::vector<double> p = softmax(logits(x));
  Tensor g(h_, w_in_, c_);
  for (int k = 0; k < classes_; ++k) {
    const double coeff = p[k] - (k == label ? 1.0 : 0.0);
    const double* wk = &w_[static_cast<size_t>(k) * inputs_];
    for (int i = 0; i < inputs_; ++i) g.data[i] += coeff * wk[i];
  }
  return g;
}

LinearModel make_reference_linear(int h, int w, int c, int classes) {
  LinearModel model(h, w, c, classes);
  CounterRng rng(0x52534459u, "reference-linear");
  for (int k = 0; k < classes; ++k) {
    for (int i = 0; i < model.input_count(); ++i)
      model.weight(k, i) = rng.uniform(-0.01, 0.01);
    model.bias(k) = rng.uniform(-0.1, 0.1);
  }
  return model;
}

// -------------------------------------------------------------------- CnnModel

namespace {

struct Plane {
  int channels = 0, size = 0;
  std::vector<double> v;
  Plane() = default;
  Plane(int c, int s) : channels(c), size(s), v(static_cast<size_t>(c) * s * s, 0.0) {}
  double* ch(int c) { return &v[static_cast<size_t>(c) * size * size]; }
  const double* ch(int c) const { return &v[static_cast<size_t>(c) * size * size]; }
};

// 3x3 convolution, stride 1, zero padding 1 (same size).
void conv3x3(const Plane& in, Plane& out, const double* w, const double* b) {
  const int s = in.size;
  for (int oc = 0; oc < out.channels; ++oc) {
    double* o = out.ch(oc);
    std::fill(o, o + static_cast<size_t>(s) * s, b[oc]);
    for (int ic = 0; ic < in.channels; ++ic) {
      const double* src = in.ch(ic);
      const double* k = w + (static_cast<size_t>(oc) * in.channels + ic) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double kv = k[ky * 3 + kx];
          if (kv == 0.0) continue;
          const int y0 = std::max(0, 1 - ky), y1 = std::min(s, s + 1 - ky);
          const int x0 = std::max(0, 1 - kx), x1 = std::min(s, s + 1 - kx);
          for (int y = y0; y < y1; ++y) {
            const double* srow = src + static_cast<size_t>(y + ky - 1) * s + (x0 + kx - 1);
            double* orow = o + static_cast<size_t>(y) * s + x0;
            for (int x = x0; x < x1; ++x) *orow++ += kv * *srow++;
          }
        }
    }
  }
}

// Gradient with respect to the convolution input.
void conv3x3_backward_data(const Plane& dout, Plane& din, const double* w, int in_channels) {
  const int s = dout.size;
  din = Plane(in_channels, s);
  for (int oc = 0; oc < dout.channels; ++oc) {
    const double* dsrc = dout.ch(oc);
    for (int ic = 0; ic < in_channels; ++ic) {
      double* d = din.ch(ic);
      const double* k = w + (static_cast<size_t>(oc) * in_channels + ic) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double kv = k[ky * 3 + kx];
          if (kv == 0.0) continue;
          // din[y+ky-1][x+kx-1] += kv * dout[y][x]
          const int y0 = std::max(0, 1 - ky), y1 = std::min(s, s + 1 - ky);
          const int x0 = std::max(0, 1 - kx), x1 = std::min(s, s + 1 - kx);
          for (int y = y0; y < y1; ++y) {
            const double* drow = dsrc + static_cast<size_t>(y) * s + x0;
            double* trow = d + static_cast<size_t>(y + ky - 1) * s + (x0 + kx - 1);
            for (int x = x0; x < x1; ++x) *trow++ += kv * *drow++;
          }
        }
    }
  }
}

// Gradients with respect to weights and bias.
void conv3x3_backward_params(const Plane& in, const Plane& dout, double* dw, double* db) {
  const int s = in.size;
  for (int oc = 0; oc < dout.channels; ++oc) {
    const double* dsrc = dout.ch(oc);
    double acc = 0.0;
    for (size_t i = 0; i < static_cast<size_t>(s) * s; ++i) acc += dsrc[i];
    db[oc] += acc;
    for (int ic = 0; ic < in.channels; ++ic) {
      const double* src = in.ch(ic);
      double* k = dw + (static_cast<size_t>(oc) * in.channels + ic) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int y0 = std::max(0, 1 - ky), y1 = std::min(s, s + 1 - ky);
          const int x0 = std::max(0, 1 - kx), x1 = std::min(s, s + 1 - kx);
          double sum = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* srow = src + static_cast<size_t>(y + ky - 1) * s + (x0 + kx - 1);
            const double* drow = dsrc + static_cast<size_t>(y) * s + x0;
            for (int x = x0; x < x1; ++x) sum += *srow++ * *drow++;
          }
          k[ky * 3 + kx] += sum;
        }
    }
  }
}

void relu_forward(Plane& p) {
  for (double& v : p.v)
    if (v < 0.0) v = 0.0;
}

// mask = pre-activation values; zeroes grad where the unit was inactive.
void relu_backward(const Plane& pre, Plane& grad) {
  for (size_t i = 0; i < grad.v.size(); ++i)
    if (pre.v[i] <= 0.0) grad.v[i] = 0.0;
}

void maxpool2(const Plane& in, Plane& out, std::vector<int>& argmax) {
  const int s = in.size, half = s / 2;
  out = Plane(in.channels, half);
  argmax.assign(out.v.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    const double* src = in.ch(c);
    double* dst = out.ch(c);
    for (int y = 0; y < half; ++y)
      for (int x = 0; x < half; ++x) {
        int best = (2 * y) * s + 2 * x;
        double bv = src[best];
        const int cand[3] = {(2 * y) * s + 2 * x + 1, (2 * y + 1) * s + 2 * x,
                             (2 * y + 1) * s + 2 * x + 1};
        for (int idx : cand)
          if (src[idx] > bv) {
            bv = src[idx];
            best = idx;
          }
        dst[y * half + x] = bv;
        argmax[(static_cast<size_t>(c) * half + y) * half + x] = best;
      }
  }
}

void maxpool2_backward(const Plane& dout, Plane& din, const std::vector<int>& argmax, int in_size) {
  din = Plane(dout.channels, in_size);
  const int half = dout.size;
  for (int c = 0; c < dout.channels; ++c) {
    const double* dsrc = dout.ch(c);
    double* dst = din.ch(c);
    for (int y = 0; y < half; ++y)
      for (int x = 0; x < half; ++x)
        dst[argmax[(static_cast<size_t>(c) * half + y) * half + x]] += dsrc[y * half + x];
  }
}

Plane to_planar(const Image& x) {
  Plane p(x.channels, x.height);
  for (int c = 0; c < x.channels; ++c) {
    double* dst = p.ch(c);
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx) dst[y * x.width + xx] = x.at(y, xx, c);
  }
  return p;
}

Tensor to_interleaved(const Plane& p, int h, int w, int c) {
  Tensor t(h, w, c);
  for (int ch = 0; ch < c; ++ch) {
    const double* src = p.ch(ch);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(y, x, ch) = src[y * w + x];
  }
  return t;
}

}  // namespace

struct CnnModel::Activations {
  Plane input, a1, z1p, p1, a2, z2p, p2;
  std::vector<int> arg1, arg2;
  std::vector<double> flat, a3, h, logits;
};

CnnModel::CnnModel(const CnnArch& arch) : arch_(arch) {
  if (arch_.input_size <= 0 || arch_.input_size % 4 != 0)
    throw std::invalid_argument("CnnModel: input_size must be a positive multiple of 4");
  if (arch_.classes < 2) throw std::invalid_argument("CnnModel: need >= 2 classes");
  const int q = arch_.input_size / 4;
  const size_t n_c1w = static_cast<size_t>(arch_.conv1_channels) * arch_.input_channels * 9;
  const size_t n_c2w = static_cast<size_t>(arch_.conv2_channels) * arch_.conv1_channels * 9;
  const size_t flat = static_cast<size_t>(q) * q * arch_.conv2_channels;
  const size_t n_f1w = flat * arch_.hidden_units;
  const size_t n_f2w = static_cast<size_t>(arch_.hidden_units) * arch_.classes;

  c1w_ = 0;
  c1b_ = c1w_ + n_c1w;
  c2w_ = c1b_ + arch_.conv1_channels;
  c2b_ = c2w_ + n_c2w;
  f1w_ = c2b_ + arch_.conv2_channels;
  f1b_ = f1w_ + n_f1w;
  f2w_ = f1b_ + arch_.hidden_units;
  f2b_ = f2w_ + n_f2w;
  params_.assign(f2b_ + arch_.classes, 0.0);
}

void CnnModel::check_shape(const Image& x) const {
  if (x.height != arch_.input_size || x.width != arch_.input_size ||
      x.channels != arch_.input_channels)
    throw std::invalid_argument("CnnModel: input shape mismatch (want " +
                                std::to_string(arch_.input_size) + "x" +
                                std::to_string(arch_.input_size) + "x" +
                                std::to_string(arch_.input_channels) + ")");
}

void CnnModel::forward(const Image& x, Activations& acts) const {
  check_shape(x);
  const int s = arch_.input_size;
  const int half = s / 2, q = s / 4;
  const double* P = params_.data();

  acts.input = to_planar(x);
  acts.a1 = Plane(arch_.conv1_channels, s);
  conv3x3(acts.input, acts.a1, P + c1w_, P + c1b_);
  acts.z1p = acts.a1;
  relu_forward(acts.z1p);
  maxpool2(acts.z1p, acts.p1, acts.arg1);

  acts.a2 = Plane(arch_.conv2_channels, half);
  conv3x3(acts.p1, acts.a2, P + c2w_, P + c2b_);
  acts.z2p = acts.a2;
  relu_forward(acts.z2p);
  maxpool2(acts.z2p, acts.p2, acts.arg2);

  acts.flat = acts.p2.v;
  const size_t flat_n = acts.flat.size();
  acts.a3.assign(static_cast<size_t>(arch_.hidden_units), 0.0);
  for (int u = 0; u < arch_.hidden_units; ++u) {
    double acc = P[f1b_ + u];
    const double* w = P + f1w_ + static_cast<size_t>(u) * flat_n;
    for (size_t i = 0; i < flat_n; ++i) acc += w[i] * acts.flat[i];
    acts.a3[u] = acc;
  }
  acts.h = acts.a3;
  for (double& v : acts.h)
    if (v < 0.0) v = 0.0;

  acts.logits.assign(static_cast<size_t>(arch_.classes), 0.0);
  for (int k = 0; k < arch_.classes; ++k) {
    double acc = P[f2b_ + k];
    const double* w = P + f2w_ + static_cast<size_t>(k) * arch_.hidden_units;
    for (int u = 0; u < arch_.hidden_units; ++u) acc += w[u] * acts.h[u];
    acts.logits[k] = acc;
  }
  (void)q;
}

std::vector<double> CnnModel::logits(const Image& x) {
  Activations acts;
  forward(x, acts);
  return acts.logits;
}

Tensor CnnModel::backward_input(const Activations& acts, const std::vector<double>& dlogits) const {
  const int s = arch_.input_size;
  const int half = s / 2;
  const double* P = params_.data();
  const size_t flat_n = acts.flat.size();

  std::vector<double> dh(static_cast<size_t>(arch_.hidden_units), 0.0);
  for (int k = 0; k < arch_.classes; ++k) {
    const double d = dlogits[k];
    if (d == 0.0) continue;
    const double* w = P + f2w_ + static_cast<size_t>(k) * arch_.hidden_units;
    for (int u = 0; u < arch_.hidden_units; ++u) dh[u] += d * w[u];
  }
  for (int u = 0; u < arch_.hidden_units; ++u)
    if (acts.a3[u] <= 0.0) dh[u] = 0.0;

  std::vector<double> dflat(flat_n, 0.0);
  for (int u = 0; u < arch_.hidden_units; ++u) {
    const double d = dh[u];
    if (d == 0.0) continue;
    const double* w = P + f1w_ + static_cast<size_t>(u) * flat_n;
    for (size_t i = 0; i < flat_n; ++i) dflat[i] += d * w[i];
  }

  Plane dp2(arch_.conv2_channels, s / 4);
  dp2.v = dflat;
  Plane dz2;
  maxpool2_backward(dp2, dz2, acts.arg2, half);
  relu_backward(acts.a2, dz2);

  Plane dp1;
  conv3x3_backward_data(dz2, dp1, P + c2w_, arch_.conv1_channels);
  Plane dz1;
  maxpool2_backward(dp1, dz1, acts.arg1, s);
  relu_backward(acts.a1, dz1);

  Plane din;
  conv3x3_backward_data(dz1, din, P + c1w_, arch_.input_channels);
  return to_interleaved(din, s, s, arch_.input_channels);
}

Tensor CnnModel::input_gradient(const Image& x, int label) {
  if (label < 0 || label >= arch_.classes)
    throw std::invalid_argument("CnnModel: label out of range");
  Activations acts;
  forward(x, acts);
  std::vector<double> dlogits = softmax(acts.logits);
  dlogits[label] -= 1.0;
  return backward_input(acts, dlogits);
}

std::pair<double, Tensor> CnnModel::loss_and_input_gradient(const Image& x, int label) {
  if (label < 0 || label >= arch_.classes)
    throw std::invalid_argument("CnnModel: label out of range");
  Activations acts;
  forward(x, acts);
  const double loss = cross_entropy_loss(acts.logits, label);
  std::vector<double> dlogits = softmax(acts.logits);
  dlogits[label] -= 1.0;
  return {loss, backward_input(acts, dlogits)};
}

double CnnModel::loss_and_param_gradient(const Image& x, int label, std::vector<double>& grad) {
  if (label < 0 || label >= arch_.classes)
    throw std::invalid_argument("CnnModel: label out of range");
  if (grad.size() != params_.size()) throw std::invalid_argument("CnnModel: grad size mismatch");
  Activations acts;
  forward(x, acts);
  const double loss = cross_entropy_loss(acts.logits, label);

  std::vector<double> dlogits = softmax(acts.logits);
  dlogits[label] -= 1.0;

  const int s = arch_.input_size;
  const int half = s / 2;
  const double* P = params_.data();
  double* G = grad.data();
  const size_t flat_n = acts.flat.size();

  // fc2
  std::vector<double> dh(static_cast<size_t>(arch_.hidden_units), 0.0);
  for (int k = 0; k < arch_.classes; ++k) {
    const double d = dlogits[k];
    G[f2b_ + k] += d;
    const double* w = P + f2w_ + static_cast<size_t>(k) * arch_.hidden_units;
    double* gw = G + f2w_ + static_cast<size_t>(k) * arch_.hidden_units;
    for (int u = 0; u < arch_.hidden_units; ++u) {
      gw[u] += d * acts.h[u];
      dh[u] += d * w[u];
    }
  }
  for (int u = 0; u < arch_.hidden_units; ++u)
    if (acts.a3[u] <= 0.0) dh[u] = 0.0;

  // fc1
  std::vector<double> dflat(flat_n, 0.0);
  for (int u = 0; u < arch_.hidden_units; ++u) {
    const double d = dh[u];
    G[f1b_ + u] += d;
    const double* w = P + f1w_ + static_cast<size_t>(u) * flat_n;
    double* gw = G + f1w_ + static_cast<size_t>(u) * flat_n;
    if (d != 0.0)
      for (size_t i = 0; i < flat_n; ++i) {
        gw[i] += d * acts.flat[i];
        dflat[i] += d * w[i];
      }
  }

  Plane dp2(arch_.conv2_channels, s / 4);
  dp2.v = dflat;
  Plane dz2;
  maxpool2_backward(dp2, dz2, acts.arg2, half);
  relu_backward(acts.a2, dz2);
  conv3x3_backward_params(acts.p1, dz2, G + c2w_, G + c2b_);

  Plane dp1;
  conv3x3_backward_data(dz2, dp1, P + c2w_, arch_.conv1_channels);
  Plane dz1;
  maxpool2_backward(dp1, dz1, acts.arg1, s);
  relu_backward(acts.a1, dz1);
  conv3x3_backward_params(acts.input, dz1, G + c1w_, G + c1b_);

  return loss;
}

void CnnModel::save(const std::filesystem::path& path, const std::vector<std::string>& labels) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open weights file for writing: " + path.string());
  f << "rsdazzle-model v1\n";
  f << "arch " << arch_.input_size << " " << arch_.input_channels << " " << arch_.conv1_channels
    << " " << arch_.conv2_channels << " " << arch_.hidden_units << " " << arch_.classes << "\n";
  f << "labels";
  for (const auto& l : labels) f << " " << l;
  f << "\n";
  f << "params " << params_.size() << "\n";
  char buf[40];
  for (size_t i = 0; i < params_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", params_[i]);
    f << buf << ((i + 1) % 8 == 0 ? '\n' : ' ');
  }
  if (params_.size() % 8 != 0) f << "\n";
  if (!f) throw std::runtime_error("short write: " + path.string());
}

CnnModel CnnModel::load(const std::filesystem::path& path, std::vector<std::string>* labels) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open weights file: " + path.string());
  std::string line;
  std::getline(f, line);
  if (line != "rsdazzle-model v1")
    throw std::runtime_error("unrecognized weights header in " + path.string());

  std::string word;
  CnnArch arch;
  f >> word >> arch.input_size >> arch.input_channels >> arch.conv1_channels >>
      arch.conv2_channels >> arch.hidden_units >> arch.classes;
  if (word != "arch") throw std::runtime_error("bad weights file (arch) in " + path.string());

  std::getline(f, line);  // rest of arch line
  std::getline(f, line);  // labels line
  if (line.rfind("labels", 0) != 0)
    throw std::runtime_error("bad weights file (labels) in " + path.string());
  if (labels) {
    labels->clear();
    std::istringstream ls(line.substr(6));
    std::string tok;
    while (ls >> tok) labels->push_back(tok);
  }

  size_t count = 0;
  f >> word >> count;
  if (word != "params") throw std::runtime_error("bad weights file (params) in " + path.string());

  CnnModel model(arch);
  if (count != model.params_.size())
    throw std::runtime_error("weights count mismatch in " + path.string());
  for (size_t i = 0; i < count; ++i) {
    std::string tok;
    if (!(f >> tok)) throw std::runtime_error("truncated weights in " + path.string());
    model.params_[i] = std::strtod(tok.c_str(), nullptr);
  }
  return model;
}

}  // namespace rsdazzle
