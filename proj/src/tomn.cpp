#include "omnivid/tomn.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace omnivid {
namespace {

constexpr char kMagic[4] = {'T', 'O', 'M', 'N'};
constexpr uint16_t kVersionF32 = 1;
constexpr uint16_t kVersionU8 = 2;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::FILE* f, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}

void put_u32(std::FILE* f, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 4, f);
}

uint16_t get_u16(std::FILE* f) {
    unsigned char b[2];
    if (std::fread(b, 1, 2, f) != 2) throw std::runtime_error("tomn: truncated header");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("tomn: truncated header");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_header(std::FILE* f, uint16_t version, const std::vector<uint32_t>& dims) {
    std::fwrite(kMagic, 1, 4, f);
    put_u16(f, version);
    unsigned char rank = static_cast<unsigned char>(dims.size());
    std::fwrite(&rank, 1, 1, f);
    for (uint32_t d : dims) put_u32(f, d);
}

std::vector<uint32_t> read_header(std::FILE* f, const std::string& path, uint16_t want_version) {
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("tomn: bad magic in " + path);
    uint16_t version = get_u16(f);
    if (version != want_version)
        throw std::runtime_error("tomn: unexpected payload version " + std::to_string(version) +
                                 " in " + path);
    unsigned char rank;
    if (std::fread(&rank, 1, 1, f) != 1) throw std::runtime_error("tomn: truncated header in " + path);
    std::vector<uint32_t> dims(rank);
    for (auto& d : dims) d = get_u32(f);
    return dims;
}

FilePtr open_or_throw(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("tomn: cannot open " + path);
    return f;
}

}  // namespace

// Bulk payload reads/writes assume a little-endian host.
static_assert(std::endian::native == std::endian::little);

void tomn_write(const std::string& path, const Tensor<float>& t) {
    FilePtr f = open_or_throw(path, "wb");
    write_header(f.get(), kVersionF32, t.dims);
    if (!t.data.empty()) std::fwrite(t.data.data(), sizeof(float), t.data.size(), f.get());
}

void tomn_write_u8(const std::string& path, const Tensor<uint8_t>& t) {
    FilePtr f = open_or_throw(path, "wb");
    write_header(f.get(), kVersionU8, t.dims);
    if (!t.data.empty()) std::fwrite(t.data.data(), 1, t.data.size(), f.get());
}

Tensor<float> tomn_read(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    Tensor<float> t(read_header(f.get(), path, kVersionF32));
    if (!t.data.empty() &&
        std::fread(t.data.data(), sizeof(float), t.data.size(), f.get()) != t.data.size())
        throw std::runtime_error("tomn: truncated payload in " + path);
    return t;
}

Tensor<uint8_t> tomn_read_u8(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    Tensor<uint8_t> t(read_header(f.get(), path, kVersionU8));
    if (!t.data.empty() && std::fread(t.data.data(), 1, t.data.size(), f.get()) != t.data.size())
        throw std::runtime_error("tomn: truncated payload in " + path);
    return t;
}

}  // namespace omnivid
