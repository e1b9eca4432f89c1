#include "rsdazzle/digest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rsdazzle {

std::uint64_t fnv1a64_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::string_view bytes) {
  static const char* hexd = "0123456789abcdef";
  std::uint64_t h = fnv1a64_bytes(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hexd[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for digest: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return digest_hex(ss.str());
}

}  // namespace rsdazzle
