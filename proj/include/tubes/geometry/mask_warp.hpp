#pragma once

#include "tubes/geometry/bitmask.hpp"
#include "tubes/geometry/camera.hpp"
#include "tubes/geometry/depth_map.hpp"
#include "tubes/geometry/rigid_motion.hpp"

namespace tubes::geometry {

/// Predicts where a mask lands in the next frame: backprojects every masked
/// pixel with valid depth, moves it by the object motion and then the camera
/// egomotion (both in the previous camera frame), reprojects and rasterizes.
/// Holes from divergent projection are filled by one 3x3 closing pass.
/// Pixels without valid depth contribute nothing; an all-invalid input yields
/// an empty mask.
BitMask warp_mask(const BitMask &mask, const DepthMap &depth, const RigidMotion &ego,
                  const RigidMotion &obj_motion, const CameraIntrinsics &cam);

}  // namespace tubes::geometry
