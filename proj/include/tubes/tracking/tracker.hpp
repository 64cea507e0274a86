#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "tubes/geometry/mask_warp.hpp"
#include "tubes/tracking/tube.hpp"

namespace tubes::tracking {

struct TrackingConfig {
    KalmanNoise noise;
    double gate_threshold = 11.344866730144373;  // chi-square 99% quantile, 3 dof
    double assoc_min = 0.05;
    int window = 15;
    int max_misses = 3;
    int min_length = 5;
    // A new tube must find support in each of its first backward steps while
    // its velocity is still wide open; one early miss rejects the seed.
    int min_init_support = 3;
    double seed_velocity_cov_inflation = 10.0;
    double seed_no_velocity_cov_inflation = 100.0;
};

/// Everything the tracker needs about one frame. `ego` maps the previous
/// frame's camera coordinates into this frame's; identity at frame 0 and on
/// egomotion failures (then ego_ok is false).
struct FrameContext {
    int frame = 0;
    std::vector<proposals::FrameProposal> proposals;  // already localized
    geometry::DepthMap depth;
    geometry::RigidMotion ego;
    bool ego_ok = true;
};

/// Frame-by-frame provider; load_frame is called once per index, ascending.
class SequenceSource {
public:
    virtual ~SequenceSource() = default;
    virtual geometry::CameraIntrinsics camera() const = 0;
    virtual int num_frames() const = 0;
    virtual FrameContext load_frame(int t) = 0;
};

/// A localized proposal lifted into the tracking (world) frame.
struct TrackObservation {
    int proposal_index = -1;
    const proposals::FrameProposal *proposal = nullptr;
    Eigen::Vector3d position_world = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity_world = Eigen::Vector3d::Zero();
    bool has_velocity = false;
};

/// Indices of observations within the gating ellipsoid of the predicted
/// position marginal.
std::vector<int> gate(const KalmanState &predicted, const std::vector<TrackObservation> &candidates,
                      double gate_threshold);

struct Association {
    int candidate = -1;  // index into the gated candidate list
    double joint = 0.0;  // IoU * exp(-0.5 * mahalanobis^2)
};

/// Picks the gated candidate maximizing mask IoU with the prediction times
/// the position likelihood; below assoc_min the result is empty (a miss).
/// Ties break on higher objectness, then lower proposal index.
std::optional<Association> associate(const KalmanState &predicted,
                                     const geometry::BitMask &predicted_mask,
                                     const std::vector<TrackObservation> &candidates,
                                     const std::vector<int> &gated, double assoc_min);

struct TrackingResult {
    std::vector<Tube> tubes;
    std::vector<geometry::RigidMotion> world_from_cam;  // per frame
    std::vector<bool> ego_ok;                           // per frame
};

/// Forward-backward tube enumeration over the whole sequence: every frame
/// extends live tubes (predict, mask warp, gate, associate, update) and seeds
/// a new tube from each unassociated proposal by bidirectional association
/// inside the temporal window. The output set intentionally contains
/// overlapping tubes; co-selection prunes them later.
TrackingResult enumerate_tubes(SequenceSource &source, const TrackingConfig &cfg);

/// One element of a tube's supporting chain.
struct ChainLink {
    int frame = 0;
    int proposal_index = 0;
};

/// Runs the forward filter over a fixed supporting chain, storing per-frame
/// predictions, mask predictions and posteriors. Used by the tracker after
/// the backward seeding pass and by tools that need scored tubes from known
/// associations. Inliers failing the gate on the forward pass degrade to
/// misses. Returns an empty tube when no inlier survives.
class TubeAssembler {
public:
    TubeAssembler(const geometry::CameraIntrinsics &camera, const TrackingConfig &cfg);

    /// Contexts must cover [chain.front().frame, chain.back().frame].
    Tube assemble(int id, const std::vector<ChainLink> &chain,
                  const std::vector<const FrameContext *> &contexts,
                  const std::vector<geometry::RigidMotion> &world_from_cam) const;

private:
    geometry::CameraIntrinsics camera_;
    TrackingConfig cfg_;
};

}  // namespace tubes::tracking
