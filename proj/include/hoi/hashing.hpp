#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hoi {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 1469598103934665603ULL);
std::string hex64(uint64_t v);

// FNV-1a over file contents; throws if the file cannot be read.
std::string hash_file(const std::string& path);
std::string hash_bytes(const std::string& bytes);

}  // namespace hoi
