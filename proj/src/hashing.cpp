#include "hoi/hashing.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hoi {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
    uint64_t h = seed;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::string hash_bytes(const std::string& bytes) {
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

std::string hash_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("hash_file: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return hash_bytes(ss.str());
}

}  // namespace hoi
