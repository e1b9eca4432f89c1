#pragma once

#include <filesystem>
#include <vector>

namespace rsdazzle {

// Dense row-major (height, width, channel) grid of doubles. Images hold
// values in [0,1]; gradients reuse the same layout without the range
// contract. Range checks happen at the file I/O and composition boundaries.
struct Tensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, 0.0) {}

  double& at(int r, int c, int ch) { return data[(static_cast<size_t>(r) * width + c) * channels + ch]; }
  double at(int r, int c, int ch) const { return data[(static_cast<size_t>(r) * width + c) * channels + ch]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

using Image = Tensor;

// Binary portable pixmap/graymap I/O (P5 for 1 channel, P6 for 3), maxval
// 255, row-major. Values quantize as round(v*255) on write and v/255 on read.
void write_pnm(const Image& image, const std::filesystem::path& path);
Image read_pnm(const std::filesystem::path& path);

// Serialize an image to PNM bytes in memory (same encoding as write_pnm).
std::string pnm_bytes(const Image& image);

}  // namespace rsdazzle
