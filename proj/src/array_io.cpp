#include "hoi/array_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hoi {

namespace {

constexpr char kMagic[4] = {'H', 'P', 'A', '1'};

void put_u32(std::string& out, uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(b, 4);
}

uint32_t get_u32(const std::string& s, size_t& off) {
    if (off + 4 > s.size()) throw std::runtime_error("array: truncated header");
    uint32_t v = static_cast<uint8_t>(s[off]) | (static_cast<uint8_t>(s[off + 1]) << 8) |
                 (static_cast<uint8_t>(s[off + 2]) << 16) |
                 (static_cast<uint8_t>(s[off + 3]) << 24);
    off += 4;
    return v;
}

std::string read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("array: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_all(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("array: cannot write " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("array: write failed for " + path);
}

}  // namespace

std::string array_to_bytes(const Array& a) {
    if (a.dims.empty()) throw std::runtime_error("array: ndim must be >= 1");
    if (a.numel() != a.data.size())
        throw std::runtime_error("array: dims/payload mismatch on write");
    std::string out;
    out.reserve(8 + 4 * a.dims.size() + 4 * a.data.size());
    out.append(kMagic, 4);
    put_u32(out, static_cast<uint32_t>(a.dims.size()));
    for (uint32_t d : a.dims) put_u32(out, d);
    // float32 payload; this code assumes a little-endian host (x86/aarch64).
    size_t pos = out.size();
    out.resize(pos + 4 * a.data.size());
    std::memcpy(out.data() + pos, a.data.data(), 4 * a.data.size());
    return out;
}

Array array_from_bytes(const std::string& bytes, size_t* offset) {
    size_t off = offset ? *offset : 0;
    if (off + 4 > bytes.size() || std::memcmp(bytes.data() + off, kMagic, 4) != 0)
        throw std::runtime_error("array: bad magic");
    off += 4;
    uint32_t ndim = get_u32(bytes, off);
    if (ndim == 0 || ndim > 16) throw std::runtime_error("array: bad ndim");
    Array a;
    a.dims.resize(ndim);
    for (auto& d : a.dims) d = get_u32(bytes, off);
    size_t n = a.numel();
    if (off + 4 * n > bytes.size()) throw std::runtime_error("array: dims/payload mismatch");
    a.data.resize(n);
    std::memcpy(a.data.data(), bytes.data() + off, 4 * n);
    off += 4 * n;
    if (offset)
        *offset = off;
    else if (off != bytes.size())
        throw std::runtime_error("array: trailing bytes after payload");
    return a;
}

void write_array(const std::string& path, const Array& a) { write_all(path, array_to_bytes(a)); }

Array read_array(const std::string& path) { return array_from_bytes(read_all(path)); }

void write_array_bundle(const std::string& path, const std::vector<NamedArray>& arrays) {
    std::string out;
    put_u32(out, static_cast<uint32_t>(arrays.size()));
    for (const auto& na : arrays) {
        put_u32(out, static_cast<uint32_t>(na.name.size()));
        out += na.name;
        out += array_to_bytes(na.array);
    }
    write_all(path, out);
}

std::vector<NamedArray> read_array_bundle(const std::string& path) {
    std::string bytes = read_all(path);
    size_t off = 0;
    uint32_t count = get_u32(bytes, off);
    std::vector<NamedArray> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = get_u32(bytes, off);
        if (off + len > bytes.size()) throw std::runtime_error("array bundle: truncated name");
        NamedArray na;
        na.name = bytes.substr(off, len);
        off += len;
        na.array = array_from_bytes(bytes, &off);
        out.push_back(std::move(na));
    }
    if (off != bytes.size()) throw std::runtime_error("array bundle: trailing bytes");
    return out;
}

}  // namespace hoi
