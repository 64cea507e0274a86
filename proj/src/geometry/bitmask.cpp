#include "tubes/geometry/bitmask.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace tubes::geometry {

BitMask::BitMask(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("BitMask: negative dimensions");
    const size_t bits = static_cast<size_t>(width) * height;
    words_.assign((bits + 63) / 64, 0);
}

BitMask BitMask::from_rle(int width, int height, const std::vector<int> &counts) {
    BitMask m(width, height);
    const size_t total = static_cast<size_t>(width) * height;
    size_t pos = 0;
    bool value = false;
    for (int run : counts) {
        if (run < 0) throw std::invalid_argument("BitMask: negative RLE run");
        if (pos + static_cast<size_t>(run) > total)
            throw std::invalid_argument("BitMask: RLE runs exceed mask size");
        if (value) {
            for (size_t i = pos; i < pos + static_cast<size_t>(run); ++i)
                m.words_[i >> 6] |= std::uint64_t(1) << (i & 63);
        }
        pos += static_cast<size_t>(run);
        value = !value;
    }
    if (pos != total) throw std::invalid_argument("BitMask: RLE runs do not cover mask");
    return m;
}

std::vector<int> BitMask::to_rle() const {
    std::vector<int> counts;
    const size_t total = static_cast<size_t>(width_) * height_;
    bool current = false;
    int run = 0;
    for (size_t i = 0; i < total; ++i) {
        const bool b = (words_[i >> 6] >> (i & 63)) & 1u;
        if (b == current) {
            ++run;
        } else {
            counts.push_back(run);
            current = b;
            run = 1;
        }
    }
    if (total > 0) counts.push_back(run);
    return counts;
}

BitMask BitMask::filled_rect(int width, int height, int x0, int y0, int x1, int y1) {
    BitMask m(width, height);
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width - 1);
    y1 = std::min(y1, height - 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.set(x, y);
    return m;
}

long BitMask::area() const {
    long n = 0;
    for (std::uint64_t w : words_) n += std::popcount(w);
    return n;
}

bool BitMask::centroid(double &cx, double &cy) const {
    long count = 0;
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (get(x, y)) {
                sx += x;
                sy += y;
                ++count;
            }
        }
    }
    if (count == 0) return false;
    cx = sx / count;
    cy = sy / count;
    return true;
}

bool BitMask::bounding_box(int &x0, int &y0, int &x1, int &y1) const {
    // Word-level scan: find the first and last set bits for the y-range,
    // then probe only the covered rows for the x-range.
    size_t first_word = words_.size(), last_word = 0;
    for (size_t w = 0; w < words_.size(); ++w) {
        if (words_[w]) {
            if (first_word == words_.size()) first_word = w;
            last_word = w;
        }
    }
    if (first_word == words_.size()) {
        x1 = y1 = -1;
        return false;
    }
    const size_t first_bit = first_word * 64 + std::countr_zero(words_[first_word]);
    const size_t last_bit = last_word * 64 + (63 - std::countl_zero(words_[last_word]));
    y0 = static_cast<int>(first_bit / static_cast<size_t>(width_));
    y1 = static_cast<int>(last_bit / static_cast<size_t>(width_));

    x0 = width_;
    x1 = -1;
    for (int y = y0; y <= y1; ++y) {
        const size_t row_begin = static_cast<size_t>(y) * width_;
        const size_t row_end = row_begin + static_cast<size_t>(width_);  // exclusive
        for (size_t w = row_begin >> 6; w <= (row_end - 1) >> 6; ++w) {
            std::uint64_t bits = words_[w];
            if (!bits) continue;
            const size_t base = w * 64;
            if (base < row_begin) bits &= ~std::uint64_t(0) << (row_begin - base);
            if (base + 64 > row_end) bits &= ~std::uint64_t(0) >> (base + 64 - row_end);
            if (!bits) continue;
            const int first_x = static_cast<int>(base + std::countr_zero(bits) - row_begin);
            const int last_x = static_cast<int>(base + 63 - std::countl_zero(bits) - row_begin);
            x0 = std::min(x0, first_x);
            x1 = std::max(x1, last_x);
        }
    }
    return x1 >= 0;
}

BitMask BitMask::closed_3x3() const {
    // Closing on a one-pixel padded canvas equals the infinite-canvas closing
    // cropped to the image, so border-adjacent content behaves like interior
    // content. Both passes only visit a margin around the bounding box.
    int bx0, by0, bx1, by1;
    if (!bounding_box(bx0, by0, bx1, by1)) return *this;

    const int pw = width_ + 2, ph = height_ + 2;
    BitMask padded(pw, ph);
    for (int y = by0; y <= by1; ++y)
        for (int x = bx0; x <= bx1; ++x)
            if (get(x, y)) padded.set(x + 1, y + 1);

    const int rx0 = bx0, ry0 = by0;          // = padded bbox - 1
    const int rx1 = bx1 + 2, ry1 = by1 + 2;  // = padded bbox + 1

    auto pass = [pw, ph](const BitMask &src, bool dilate, int x0, int y0, int x1, int y1) {
        BitMask dst(pw, ph);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                bool result = !dilate;
                for (int dy = -1; dy <= 1 && result != dilate; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        const bool v = src.in_bounds(nx, ny) ? src.get(nx, ny) : false;
                        if (v == dilate) {
                            result = dilate;
                            break;
                        }
                    }
                }
                dst.set(x, y, result);
            }
        }
        return dst;
    };
    const BitMask closed =
        pass(pass(padded, true, rx0, ry0, rx1, ry1), false, rx0, ry0, rx1, ry1);

    BitMask out(width_, height_);
    for (int y = std::max(ry0 - 1, 1); y <= std::min(ry1 + 1, ph - 2); ++y)
        for (int x = std::max(rx0 - 1, 1); x <= std::min(rx1 + 1, pw - 2); ++x)
            if (closed.get(x, y)) out.set(x - 1, y - 1);
    return out;
}

BitMask BitMask::translated(int dx, int dy) const {
    BitMask out(width_, height_);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!get(x, y)) continue;
            const int nx = x + dx, ny = y + dy;
            if (out.in_bounds(nx, ny)) out.set(nx, ny);
        }
    }
    return out;
}

void mask_overlap_counts(const BitMask &a, const BitMask &b, long &inter, long &uni) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("mask_overlap_counts: dimension mismatch");
    inter = 0;
    uni = 0;
    const auto &wa = a.words();
    const auto &wb = b.words();
    for (size_t i = 0; i < wa.size(); ++i) {
        inter += std::popcount(wa[i] & wb[i]);
        uni += std::popcount(wa[i] | wb[i]);
    }
}

double mask_iou(const BitMask &a, const BitMask &b) {
    long inter = 0, uni = 0;
    mask_overlap_counts(a, b, inter, uni);
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace tubes::geometry
