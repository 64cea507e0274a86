#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "tubes/geometry/bitmask.hpp"
#include "tubes/geometry/camera.hpp"
#include "tubes/geometry/depth_map.hpp"
#include "tubes/geometry/rigid_motion.hpp"
#include "tubes/sceneflow/scene_flow.hpp"

namespace tubes::proposals {

constexpr int kNumClasses = 81;  // 80 known classes + unknown

/// One per-frame object hypothesis: image mask plus scores from the proposal
/// network, extended with 3D state computed from depth and scene flow.
struct FrameProposal {
    int frame = 0;
    int index = 0;  // position within the frame's proposal list
    geometry::BitMask mask;
    double objectness = 0.0;
    std::vector<double> class_posterior;  // kNumClasses entries, sums to 1

    // Filled by localize(); camera frame of the proposal's own frame.
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // egomotion-compensated, m/frame
    Eigen::Vector3d size = Eigen::Vector3d::Zero();      // axis-aligned extents
    bool valid_3d = false;
    bool has_velocity = false;
};

struct LocalizeConfig {
    int min_points = 10;
    double size_percentile_low = 5.0;
    double size_percentile_high = 95.0;
};

struct Localization {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Zero();
    bool valid_3d = false;
    bool has_velocity = false;
    int depth_points = 0;
    int flow_points = 0;
};

/// Robust 3D state of a masked region: position as the component-wise median
/// of backprojected valid-depth pixels, size as the per-axis percentile
/// extent, velocity as the median of egomotion-compensated flow vectors whose
/// frame-(t-1) projection lies inside the mask. The flows are for the pair
/// departing from the proposal's frame; velocity is expressed in that frame's
/// camera coordinates.
Localization localize(const geometry::BitMask &mask, const geometry::DepthMap &depth,
                      const std::vector<sceneflow::SceneFlowVector> &flows,
                      const geometry::RigidMotion &ego, const geometry::CameraIntrinsics &cam,
                      const LocalizeConfig &cfg = {});

/// Applies localize() to a whole frame of proposals in place.
void localize_frame(std::vector<FrameProposal> &frame_proposals, const geometry::DepthMap &depth,
                    const std::vector<sceneflow::SceneFlowVector> &flows,
                    const geometry::RigidMotion &ego, const geometry::CameraIntrinsics &cam,
                    const LocalizeConfig &cfg = {});

double median(std::vector<double> values);
double percentile(std::vector<double> values, double pct);

}  // namespace tubes::proposals
