#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hoi {

// Portable dense float32 array. On-disk layout, all little-endian:
//   magic "HPA1" | ndim u32 | dims[ndim] u32 | payload float32 row-major
struct Array {
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t numel() const {
        size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

void write_array(const std::string& path, const Array& a);
Array read_array(const std::string& path);

std::string array_to_bytes(const Array& a);
Array array_from_bytes(const std::string& bytes, size_t* offset = nullptr);

// Multi-tensor container for checkpoints: u32 count, then per entry
// u32 name_len | name | embedded HPA1 block.
struct NamedArray {
    std::string name;
    Array array;
};

void write_array_bundle(const std::string& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_array_bundle(const std::string& path);

}  // namespace hoi
