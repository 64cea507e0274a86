#pragma once

#include <cstdint>
#include <vector>

#include "tubes/geometry/camera.hpp"
#include "tubes/geometry/depth_map.hpp"
#include "tubes/geometry/rigid_motion.hpp"
#include "tubes/proposals/proposal.hpp"
#include "tubes/sceneflow/scene_flow.hpp"

namespace tubes::synth {

/// Explicit object placement for constructed scenarios. Coordinates are in
/// the world frame (= camera frame at t = 0, y pointing down).
struct ObjectInit {
    Eigen::Vector3d center;    // box center at t = 0
    Eigen::Vector3d velocity;  // m/frame, world frame (y component ignored)
    Eigen::Vector3d size;      // box extents (sx, sy, sz)
};

struct SceneConfig {
    std::uint64_t seed = 1;
    int frames = 100;

    geometry::CameraIntrinsics camera{160.0, 160.0, 128.0, 96.0, 0.5, 256, 192};
    double camera_height = 1.2;  // meters above the ground plane

    // Per-frame camera motion script.
    double ego_forward_speed = 0.0;  // m/frame along the camera's +z
    double ego_yaw_rate = 0.0;       // rad/frame around the camera's y axis

    // Random object population (ignored when explicit_objects is nonempty).
    int n_objects = 5;
    double object_size_min = 1.2;
    double object_size_max = 2.4;
    double object_height_min = 1.2;
    double object_height_max = 2.0;
    double speed_min = 0.02;  // m/frame
    double speed_max = 0.12;
    double spawn_z_min = 9.0;
    double spawn_z_max = 26.0;
    double spawn_x_frac = 0.45;  // |x| <= frac * z keeps objects in view
    std::vector<ObjectInit> explicit_objects;

    double trajectory_noise = 0.0;  // sigma of per-frame velocity perturbation (x and z)

    // Quad-match sampling.
    int matches_static = 160;
    int matches_per_object = 15;
    double match_noise_px = 0.0;
    double match_outlier_rate = 0.0;
    double outlier_min_dy_px = 10.0;  // corrupted points get at least this vertical offset

    // Proposal corruption. Clutter positions are uniform over the ground
    // sensing area, rejection-sampled into the visible frustum.
    int clutter_per_frame = 50;
    double clutter_z_min = 2.5;
    double clutter_z_max = 48.0;
    double clutter_x_abs = 40.0;
    double mask_jitter_px = 0.0;
    double drop_probability = 0.0;
    double true_objectness_min = 0.6;
    double true_objectness_max = 0.95;
    double clutter_objectness_min = 0.05;
    double clutter_objectness_max = 0.4;
    bool clutter_persistent = false;  // fixed ground positions, re-randomized masks
    int clutter_mask_min_px = 5;
    int clutter_mask_max_px = 14;
    double clutter_center_jitter_px = 2.0;
    int min_mask_pixels = 12;  // objects below this visible area emit no proposal

    void validate() const;
};

struct GtFrame {
    int frame = 0;
    geometry::BitMask mask;
    Eigen::Vector3d position_cam = Eigen::Vector3d::Zero();
    Eigen::Vector3d position_world = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity_world = Eigen::Vector3d::Zero();
};

struct GtTube {
    int id = 0;
    std::vector<GtFrame> frames;
};

struct Dataset {
    geometry::CameraIntrinsics camera;
    int frames = 0;
    std::vector<geometry::DepthMap> depth;          // per frame
    std::vector<geometry::RigidMotion> ego;         // ego[t]: cam_{t-1} -> cam_t; identity at 0
    std::vector<geometry::RigidMotion> world_from_cam;  // ground-truth poses
    std::vector<std::vector<sceneflow::QuadMatch>> matches;  // matches[t] for pair (t-1 -> t)
    std::vector<std::vector<bool>> match_is_outlier;         // generator labels
    std::vector<std::vector<proposals::FrameProposal>> proposal_frames;  // raw, un-localized
    std::vector<GtTube> gt_tubes;
};

/// Renders a box-world stereo scene: z-buffered masks and depth, scripted
/// egomotion, quad matches sampled from visible surfaces, and proposals
/// derived from the rendered masks plus clutter.
Dataset generate(const SceneConfig &config);

}  // namespace tubes::synth
