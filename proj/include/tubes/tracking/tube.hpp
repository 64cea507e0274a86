#pragma once

#include <optional>
#include <vector>

#include "tubes/proposals/proposal.hpp"
#include "tubes/tracking/kalman.hpp"

namespace tubes::tracking {

/// Per-frame record of a tube: the filter states, the mask prediction, and
/// the supporting proposal when one was associated.
struct TubeFrame {
    int frame = 0;
    KalmanState predicted;       // pre-update state used for gating and scoring
    KalmanState posterior;       // equals predicted on miss frames
    bool has_prediction = false;  // false on the tube's seed frame
    bool has_predicted_mask = false;
    geometry::BitMask predicted_mask;
    bool has_inlier = false;
    proposals::FrameProposal inlier;            // copy, masks included
    Eigen::Vector3d obs_position_world = Eigen::Vector3d::Zero();
    Eigen::Vector3d obs_velocity_world = Eigen::Vector3d::Zero();
};

struct TubeScores {
    double motion = 0.0;
    double mask = 0.0;
    double objectness = 0.0;
    double total = 0.0;
};

/// One video-object hypothesis: an ordered run of frames with Kalman history,
/// mask predictions, and the supporting proposals.
struct Tube {
    int id = -1;
    std::vector<TubeFrame> frames;  // consecutive frame indices
    TubeScores scores;
    bool ego_fallback = false;  // some covered frame used identity egomotion

    int start_frame() const { return frames.empty() ? 0 : frames.front().frame; }
    int end_frame() const { return frames.empty() ? -1 : frames.back().frame; }

    const TubeFrame *frame_at(int t) const {
        if (frames.empty() || t < start_frame() || t > end_frame()) return nullptr;
        return &frames[static_cast<size_t>(t - start_frame())];
    }

    /// The tube's mask at a frame: the inlier mask when present, otherwise
    /// the prediction; nullptr outside the span or with nothing stored.
    const geometry::BitMask *mask_at(int t) const {
        const TubeFrame *f = frame_at(t);
        if (!f) return nullptr;
        if (f->has_inlier) return &f->inlier.mask;
        if (f->has_predicted_mask) return &f->predicted_mask;
        return nullptr;
    }

    int inlier_count() const {
        int n = 0;
        for (const auto &f : frames) n += f.has_inlier ? 1 : 0;
        return n;
    }
};

/// Spatio-temporal mask IoU of two tubes: summed per-frame intersections over
/// summed unions across all frames where either tube has a mask.
double tube_temporal_iou(const Tube &a, const Tube &b);

}  // namespace tubes::tracking
