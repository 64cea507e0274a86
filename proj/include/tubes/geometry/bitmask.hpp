#pragma once

#include <cstdint>
#include <vector>

namespace tubes::geometry {

/// Binary pixel mask, row-major, bit-packed in 64-bit words. Serialized as
/// run-length counts of alternating 0/1 runs starting with the 0-run.
class BitMask {
public:
    BitMask() = default;
    BitMask(int width, int height);

    static BitMask from_rle(int width, int height, const std::vector<int> &counts);
    std::vector<int> to_rle() const;

    static BitMask filled_rect(int width, int height, int x0, int y0, int x1, int y1);

    int width() const { return width_; }
    int height() const { return height_; }

    bool get(int x, int y) const {
        const size_t i = static_cast<size_t>(y) * width_ + x;
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void set(int x, int y, bool v = true) {
        const size_t i = static_cast<size_t>(y) * width_ + x;
        if (v)
            words_[i >> 6] |= std::uint64_t(1) << (i & 63);
        else
            words_[i >> 6] &= ~(std::uint64_t(1) << (i & 63));
    }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }

    long area() const;
    bool empty() const { return area() == 0; }

    /// Centroid of set pixels; returns false when the mask is empty.
    bool centroid(double &cx, double &cy) const;

    /// Tight bounding box [x0,y0,x1,y1] inclusive; false when empty.
    bool bounding_box(int &x0, int &y0, int &x1, int &y1) const;

    /// Dilation followed by erosion with a 3x3 box element.
    BitMask closed_3x3() const;

    BitMask translated(int dx, int dy) const;

    bool operator==(const BitMask &other) const {
        return width_ == other.width_ && height_ == other.height_ && words_ == other.words_;
    }

    const std::vector<std::uint64_t> &words() const { return words_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint64_t> words_;
};

/// |a&b| / |a|b|; 0 when both empty. Throws on dimension mismatch.
double mask_iou(const BitMask &a, const BitMask &b);

/// Intersection and union pixel counts in one pass.
void mask_overlap_counts(const BitMask &a, const BitMask &b, long &inter, long &uni);

}  // namespace tubes::geometry
