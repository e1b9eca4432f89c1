#include "rsdazzle/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rsdazzle/digest.hpp"

namespace rsdazzle {

namespace {

std::uint8_t quantize(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

std::string pnm_bytes(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("pnm_bytes: channels must be 1 or 3");
  if (image.height <= 0 || image.width <= 0)
    throw std::invalid_argument("pnm_bytes: empty image");
  std::ostringstream out;
  out << (image.channels == 1 ? "P5" : "P6") << "\n"
      << image.width << " " << image.height << "\n255\n";
  std::string body;
  body.reserve(image.size());
  for (double v : image.data) body.push_back(static_cast<char>(quantize(v)));
  return out.str() + body;
}

void write_pnm(const Image& image, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  const std::string bytes = pnm_bytes(image);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write: " + path.string());
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image: " + path.string());
  const std::string magic = next_token(f);
  int channels = 0;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw std::runtime_error("unsupported PNM magic '" + magic + "' in " + path.string());
  const int width = std::stoi(next_token(f));
  const int height = std::stoi(next_token(f));
  const int maxval = std::stoi(next_token(f));
  if (width <= 0 || height <= 0) throw std::runtime_error("bad PNM dimensions in " + path.string());
  if (maxval != 255) throw std::runtime_error("only maxval 255 PNM supported: " + path.string());

  Image img(height, width, channels);
  std::vector<char> raw(img.size());
  f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size()))
    throw std::runtime_error("truncated PNM payload in " + path.string());
  for (size_t i = 0; i < raw.size(); ++i)
    img.data[i] = static_cast<unsigned char>(raw[i]) / 255.0;
  return img;
}

}  // namespace rsdazzle
