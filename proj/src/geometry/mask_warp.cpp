#include "tubes/geometry/mask_warp.hpp"

#include <cmath>
#include <stdexcept>

namespace tubes::geometry {

BitMask warp_mask(const BitMask &mask, const DepthMap &depth, const RigidMotion &ego,
                  const RigidMotion &obj_motion, const CameraIntrinsics &cam) {
    if (mask.width() != depth.width() || mask.height() != depth.height() ||
        mask.width() != cam.width || mask.height() != cam.height)
        throw std::invalid_argument("warp_mask: mask/depth/camera dimensions differ");

    const RigidMotion motion = ego.compose(obj_motion);

    BitMask splat(mask.width(), mask.height());
    int bx0, by0, bx1, by1;
    if (!mask.bounding_box(bx0, by0, bx1, by1)) return splat;

    bool any = false;
    for (int y = by0; y <= by1; ++y) {
        for (int x = bx0; x <= bx1; ++x) {
            if (!mask.get(x, y) || !depth.valid(x, y)) continue;
            const Eigen::Vector3d p =
                backproject({static_cast<double>(x), static_cast<double>(y)}, depth.at(x, y), cam);
            const Eigen::Vector3d moved = motion.apply(p);
            if (!(moved.z() > 0.0)) continue;
            const Eigen::Vector2d px = project(moved, cam);
            const int ix = static_cast<int>(std::lround(px.x()));
            const int iy = static_cast<int>(std::lround(px.y()));
            if (splat.in_bounds(ix, iy)) {
                splat.set(ix, iy);
                any = true;
            }
        }
    }
    if (!any) return splat;
    return splat.closed_3x3();
}

}  // namespace tubes::geometry
