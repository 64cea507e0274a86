#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tubes/geometry/camera.hpp"
#include "tubes/geometry/rigid_motion.hpp"

namespace tubes::sceneflow {

/// One image feature observed in all four views of a stereo frame pair:
/// left/right camera at frames t-1 and t.
struct QuadMatch {
    int frame = 0;  // index t of the pair (t-1 -> t)
    Eigen::Vector2d left_prev;
    Eigen::Vector2d right_prev;
    Eigen::Vector2d left_cur;
    Eigen::Vector2d right_cur;

    double epipolar_residual_prev() const { return std::abs(left_prev.y() - right_prev.y()); }
    double epipolar_residual_cur() const { return std::abs(left_cur.y() - right_cur.y()); }
};

/// 3D displacement of one matched feature between consecutive frames, each
/// endpoint triangulated in its own camera frame. No egomotion compensation.
struct SceneFlowVector {
    Eigen::Vector3d point_prev;
    Eigen::Vector3d point_cur;
    Eigen::Vector3d flow;  // point_cur - point_prev
    Eigen::Vector2d pixel_prev;  // left-image location at t-1, kept for mask lookups
    Eigen::Vector2d pixel_cur;
};

struct FlowConfig {
    double epipolar_tol_px = 1.5;
    double cycle_tol_px = 2.0;
};

/// Keeps matches whose left-right rows agree within epipolar_tol in both
/// frames and whose cycle left_prev -> right_prev -> right_cur -> left_cur ->
/// left_prev closes within cycle_tol.
std::vector<QuadMatch> cyclic_filter(const std::vector<QuadMatch> &matches,
                                     double epipolar_tol_px, double cycle_tol_px);

/// Pixel displacement of the closing step of the match cycle.
double cycle_residual(const QuadMatch &m);

/// Rectified-stereo triangulation from the left pixel and disparity.
/// Returns nothing when the disparity is non-positive.
std::optional<Eigen::Vector3d> triangulate(const Eigen::Vector2d &px_left,
                                           const Eigen::Vector2d &px_right,
                                           const geometry::CameraIntrinsics &cam);

struct SceneFlowResult {
    std::vector<SceneFlowVector> flows;
    int dropped_non_triangulable = 0;
};

/// Triangulates each match in both frames; expects cyclically filtered input.
SceneFlowResult compute_scene_flow(const std::vector<QuadMatch> &matches,
                                   const geometry::CameraIntrinsics &cam);

struct EgomotionConfig {
    int max_iterations = 50;
    double step_tol = 1e-10;
    double mad_multiplier = 3.0;  // robustness pass residual cutoff
};

struct EgomotionResult {
    geometry::RigidMotion motion;  // maps frame-(t-1) camera coords to frame-t
    bool ok = false;
    int iterations = 0;
    double rms_px = 0.0;
    int matches_used = 0;
};

/// Gauss-Newton minimization of the reprojection error of frame-(t-1)
/// triangulated points into both frame-t images, with one refinement pass
/// after discarding residuals above mad_multiplier times the median.
EgomotionResult estimate_egomotion(const std::vector<QuadMatch> &matches,
                                   const geometry::CameraIntrinsics &cam,
                                   const geometry::RigidMotion &init,
                                   const EgomotionConfig &cfg = {});

}  // namespace tubes::sceneflow
