#include "tubes/geometry/depth_map.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tubes::geometry {

namespace {
constexpr char kMagic[4] = {'D', 'P', 'T', 'H'};

void put_u32(std::string &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string &in, size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}
}  // namespace

DepthMap::DepthMap(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("DepthMap: non-positive size");
    values_.assign(static_cast<size_t>(width) * height, invalid_marker());
}

long DepthMap::valid_count() const {
    long n = 0;
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (valid(x, y)) ++n;
    return n;
}

std::string DepthMap::to_bytes() const {
    std::string out;
    out.reserve(12 + values_.size() * 4);
    out.append(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(width_));
    put_u32(out, static_cast<std::uint32_t>(height_));
    static_assert(sizeof(float) == 4);
    const size_t payload = values_.size() * 4;
    const size_t header = out.size();
    out.resize(header + payload);
    std::memcpy(out.data() + header, values_.data(), payload);
    return out;
}

DepthMap DepthMap::from_bytes(const std::string &bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("DepthMap: bad magic or truncated header");
    const std::uint32_t w = get_u32(bytes, 4);
    const std::uint32_t h = get_u32(bytes, 8);
    const size_t expected = 12 + static_cast<size_t>(w) * h * 4;
    if (bytes.size() != expected)
        throw std::runtime_error("DepthMap: payload size mismatch");
    DepthMap m(static_cast<int>(w), static_cast<int>(h));
    std::memcpy(m.values_.data(), bytes.data() + 12, static_cast<size_t>(w) * h * 4);
    return m;
}

void DepthMap::save(const std::string &path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("DepthMap: cannot open for writing: " + path);
    const std::string bytes = to_bytes();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("DepthMap: write failed: " + path);
}

DepthMap DepthMap::load(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("DepthMap: cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_bytes(ss.str());
}

}  // namespace tubes::geometry
