#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsdazzle/tensor.hpp"

namespace rsdazzle {

// Procedurally rendered shape dataset. Generation is a pure function of
// (seed, index): any sample can be re-rendered independently and splits are
// just index ranges.
struct DatasetSpec {
  std::uint64_t seed = 7;
  int classes = 10;
  int image_size = 64;
  double fov_fraction = 0.4;  // approximate fraction of the frame the object covers
  int train_count = 480;
  int test_count = 200;

  void validate() const;
};

const std::vector<std::string>& dataset_class_names();

struct Sample {
  Image image;
  int label;
};

// Renders sample `index`; labels cycle through the classes so every split is
// balanced. Train samples are indices [0, train_count), test samples
// [train_count, train_count + test_count).
Sample render_sample(const DatasetSpec& spec, int index);

std::vector<Sample> render_split(const DatasetSpec& spec, bool test_split);

}  // namespace rsdazzle
