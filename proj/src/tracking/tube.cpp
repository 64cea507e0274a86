#include "tubes/tracking/tube.hpp"

#include <algorithm>

namespace tubes::tracking {

double tube_temporal_iou(const Tube &a, const Tube &b) {
    if (a.frames.empty() || b.frames.empty()) return 0.0;
    const int lo = std::min(a.start_frame(), b.start_frame());
    const int hi = std::max(a.end_frame(), b.end_frame());
    long inter_total = 0, union_total = 0;
    for (int t = lo; t <= hi; ++t) {
        const geometry::BitMask *ma = a.mask_at(t);
        const geometry::BitMask *mb = b.mask_at(t);
        if (ma && mb) {
            long inter = 0, uni = 0;
            geometry::mask_overlap_counts(*ma, *mb, inter, uni);
            inter_total += inter;
            union_total += uni;
        } else if (ma) {
            union_total += ma->area();
        } else if (mb) {
            union_total += mb->area();
        }
    }
    if (union_total == 0) return 0.0;
    return static_cast<double>(inter_total) / static_cast<double>(union_total);
}

}  // namespace tubes::tracking
