#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace rsdazzle {

// FNV-1a over raw bytes; used for the reproducibility digests in run
// manifests (not a cryptographic hash).
std::uint64_t fnv1a64_bytes(std::string_view bytes);

std::string digest_hex(std::string_view bytes);

// Digest of a file's full contents. Throws std::runtime_error if unreadable.
std::string file_digest(const std::filesystem::path& path);

}  // namespace rsdazzle
