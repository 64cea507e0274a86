#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace tubes::geometry {

/// Per-pixel metric depth, row-major float32; NaN marks invalid pixels.
/// Binary file layout: "DPTH" magic, uint32 width, uint32 height
/// (little-endian), then width*height float32 values.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    float at(int x, int y) const { return values_[static_cast<size_t>(y) * width_ + x]; }
    void set(int x, int y, float v) { values_[static_cast<size_t>(y) * width_ + x] = v; }
    void set_invalid(int x, int y) { set(x, y, invalid_marker()); }

    bool valid(int x, int y) const {
        const float v = at(x, y);
        return std::isfinite(v) && v > 0.0f;
    }

    long valid_count() const;

    static constexpr float invalid_marker() { return std::numeric_limits<float>::quiet_NaN(); }

    void save(const std::string &path) const;
    static DepthMap load(const std::string &path);

    std::string to_bytes() const;
    static DepthMap from_bytes(const std::string &bytes);

    const std::vector<float> &values() const { return values_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

}  // namespace tubes::geometry
