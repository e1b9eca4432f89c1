#include "rsdazzle/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include "rsdazzle/rng.hpp"

namespace rsdazzle {

void DatasetSpec::validate() const {
  if (classes < 2 || classes > 10) throw std::invalid_argument("DatasetSpec: classes must be 2..10");
  if (image_size < 16 || image_size % 4 != 0)
    throw std::invalid_argument("DatasetSpec: image_size must be >= 16 and divisible by 4");
  if (!(fov_fraction > 0.0 && fov_fraction < 1.0))
    throw std::invalid_argument("DatasetSpec: fov_fraction must lie in (0,1)");
  if (train_count < 0 || test_count < 0)
    throw std::invalid_argument("DatasetSpec: negative split size");
}

const std::vector<std::string>& dataset_class_names() {
  static const std::vector<std::string> names = {"disk",  "square", "triangle", "ring",
                                                 "cross", "diamond", "star",     "frame",
                                                 "saltire", "crescent"};
  return names;
}

namespace {

struct Hsv {
  double h, s, v;
};

void hsv_to_rgb(const Hsv& in, double rgb[3]) {
  const double h = std::fmod(std::fmod(in.h, 360.0) + 360.0, 360.0) / 60.0;
  const int i = static_cast<int>(h);
  const double f = h - i;
  const double p = in.v * (1.0 - in.s);
  const double q = in.v * (1.0 - in.s * f);
  const double t = in.v * (1.0 - in.s * (1.0 - f));
  switch (i % 6) {
    case 0: rgb[0] = in.v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = in.v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = in.v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = in.v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = in.v; break;
    default: rgb[0] = in.v; rgb[1] = p; rgb[2] = q; break;
  }
}

// Smooth value-noise lattice evaluated with bilinear interpolation.
struct NoiseGrid {
  int n;
  std::vector<double> values;

  NoiseGrid(CounterRng& rng, int cells) : n(cells), values(static_cast<size_t>(cells) * cells) {
    for (double& v : values) v = rng.uniform01();
  }

  double at(double u, double v) const {  // u, v in [0,1]
    const double x = u * (n - 1), y = v * (n - 1);
    const int x0 = std::min(static_cast<int>(x), n - 2);
    const int y0 = std::min(static_cast<int>(y), n - 2);
    const double fx = x - x0, fy = y - y0;
    const double a = values[y0 * n + x0], b = values[y0 * n + x0 + 1];
    const double c = values[(y0 + 1) * n + x0], d = values[(y0 + 1) * n + x0 + 1];
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
  }
};

// Inside test for each shape in its local frame; coordinates are already
// rotated and normalized by the shape scale (unit nominal radius).
bool shape_inside(int shape, double x, double y) {
  const double ax = std::abs(x), ay = std::abs(y);
  switch (shape) {
    case 0:  // disk
      return x * x + y * y <= 1.0;
    case 1:  // square
      return ax <= 0.886 && ay <= 0.886;  // area-matched to the unit disk
    case 2: {  // upward triangle, area-matched
      const double s = 2.2;  // side
      const double h = s * 0.8660254037844386;
      const double yy = y + h / 3.0;  // centroid at origin
      if (yy < 0.0 || yy > h) return false;
      const double half = (1.0 - yy / h) * (s / 2.0);
      return ax <= half;
    }
    case 3:  // ring
      return x * x + y * y <= 1.44 && x * x + y * y >= 0.55;
    case 4:  // cross
      return (ax <= 0.34 && ay <= 1.05) || (ay <= 0.34 && ax <= 1.05);
    case 5:  // diamond (square rotated 45 degrees)
      return ax + ay <= 1.25;
    case 6: {  // four-point star
      const double r = std::sqrt(ax) + std::sqrt(ay);
      return r * r <= 1.55;
    }
    case 7:  // hollow square frame
      return (ax <= 1.05 && ay <= 1.05) && !(ax <= 0.62 && ay <= 0.62);
    case 8: {  // saltire: cross rotated 45 degrees
      const double rx = (x + y) * 0.7071067811865476;
      const double ry = (y - x) * 0.7071067811865476;
      return (std::abs(rx) <= 0.34 && std::abs(ry) <= 1.05) ||
             (std::abs(ry) <= 0.34 && std::abs(rx) <= 1.05);
    }
    default: {  // crescent: disk minus offset disk
      const double d2 = x * x + y * y;
      const double ox = x - 0.78, oy = y;
      return d2 <= 1.21 && ox * ox + oy * oy > 0.81;
    }
  }
}

// Approximate area of each unit shape, used to size it to the target field
// of view coverage.
double shape_unit_area(int shape) {
  switch (shape) {
    case 0: return 3.14159;
    case 1: return 3.14055;
    case 2: return 2.09577;
    case 3: return 2.79602;
    case 4: return 1.19680;
    case 5: return 3.12500;
    case 6: return 0.96050;
    case 7: return 2.87320;
    case 8: return 1.19680;
    default: return 1.76951;
  }
}

}  // namespace

Sample render_sample(const DatasetSpec& spec, int index) {
  spec.validate();
  if (index < 0) throw std::invalid_argument("render_sample: negative index");

  const int size = spec.image_size;
  const int label = index % spec.classes;
  CounterRng rng(spec.seed, "sample-" + std::to_string(index));

  // Background: two desaturated colors blended through smooth noise.
  double bg_a[3], bg_b[3];
  hsv_to_rgb({rng.uniform(0.0, 360.0), rng.uniform(0.05, 0.35), rng.uniform(0.2, 0.55)}, bg_a);
  hsv_to_rgb({rng.uniform(0.0, 360.0), rng.uniform(0.05, 0.35), rng.uniform(0.2, 0.55)}, bg_b);
  NoiseGrid coarse(rng, 5);
  NoiseGrid fine(rng, 11);

  // Object color keyed loosely to the class so color is a cue without
  // deciding the label on its own.
  double obj[3];
  hsv_to_rgb({label * 36.0 + rng.uniform(-40.0, 40.0), rng.uniform(0.6, 1.0),
              rng.uniform(0.7, 1.0)},
             obj);

  // Size from the coverage target, with mild jitter.
  const double target_area =
      spec.fov_fraction * size * size * rng.uniform(0.85, 1.18);
  const double scale = std::sqrt(target_area / shape_unit_area(label));
  const double angle = rng.uniform(-0.26, 0.26);  // ~15 degrees
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double max_jitter = std::max(0.0, size / 2.0 - scale * 0.8);
  const double cx = size / 2.0 + rng.uniform(-max_jitter, max_jitter) * 0.5;
  const double cy = size / 2.0 + rng.uniform(-max_jitter, max_jitter) * 0.5;

  Sample out{Image(size, size, 3), label};
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double u = (c + 0.5) / size, v = (r + 0.5) / size;
      const double mixw = coarse.at(u, v);
      double px[3];
      for (int ch = 0; ch < 3; ++ch) {
        px[ch] = bg_a[ch] * (1 - mixw) + bg_b[ch] * mixw;
        px[ch] += (fine.at(u, v) - 0.5) * 0.12;
      }

      // 2x2 supersampled object mask.
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double gx = c + 0.25 + 0.5 * sx - cx;
          const double gy = r + 0.25 + 0.5 * sy - cy;
          const double lx = (gx * ca + gy * sa) / scale;
          const double ly = (-gx * sa + gy * ca) / scale;
          if (shape_inside(label, lx, ly)) ++hits;
        }
      if (hits > 0) {
        const double w = hits / 4.0;
        for (int ch = 0; ch < 3; ++ch) px[ch] = px[ch] * (1 - w) + obj[ch] * w;
      }

      for (int ch = 0; ch < 3; ++ch)
        out.image.at(r, c, ch) = std::min(1.0, std::max(0.0, px[ch]));
    }
  }
  return out;
}

std::vector<Sample> render_split(const DatasetSpec& spec, bool test_split) {
  spec.validate();
  const int begin = test_split ? spec.train_count : 0;
  const int count = test_split ? spec.test_count : spec.train_count;
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(render_sample(spec, begin + i));
  return out;
}

}  // namespace rsdazzle
