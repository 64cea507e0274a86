#pragma once

#include <map>
#include <vector>

#include <Eigen/Core>

#include "tubes/geometry/bitmask.hpp"
#include "tubes/proposals/proposal.hpp"

namespace tubes::eval {

/// Neutral track representation for evaluation: per-frame masks and optional
/// camera-frame positions, plus a ranking score.
struct TrackFrame {
    geometry::BitMask mask;
    Eigen::Vector3d position_cam = Eigen::Vector3d::Zero();
    bool has_position = false;
};

struct Track {
    int id = 0;
    double score = 0.0;
    std::map<int, TrackFrame> frames;
};

using TrackSet = std::vector<Track>;

/// Min-cost assignment (Kuhn-Munkres, O(n^3)). Returns, for each row, the
/// assigned column or -1. Requires rows <= cols.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>> &cost);

struct FramePair {
    int frame;
    int gt_id;
    int pred_id;
    double iou;
};

struct MotResult {
    double mota = 0.0;
    long id_switches = 0;
    long false_positives = 0;
    long misses = 0;
    long matches = 0;
    long total_gt = 0;
    std::vector<FramePair> assignment_log;
};

/// CLEAR-MOT with persistent correspondences: matches surviving above the
/// IoU threshold carry over; the remainder is assigned per frame by maximum
/// total mask IoU.
MotResult clear_mot(const TrackSet &gt, const TrackSet &pred, double iou_threshold = 0.5);

struct RecallPoint {
    int budget;
    double recall;
};

/// Image-level recall: per frame, keep the top-k proposals by objectness; a
/// (gt track, frame) instance is recalled when any kept mask overlaps it with
/// IoU above the threshold.
std::vector<RecallPoint> proposal_recall_curve(
    const std::vector<std::vector<proposals::FrameProposal>> &proposal_frames, const TrackSet &gt,
    const std::vector<int> &budgets, double iou_threshold = 0.5);

/// Tube-level recall: keep the top-k tracks per sequence by score.
std::vector<RecallPoint> tube_recall_curve(const TrackSet &pred, const TrackSet &gt,
                                           const std::vector<int> &budgets,
                                           double iou_threshold = 0.5);

struct DistanceBin {
    double lo = 0.0;
    double hi = 0.0;
    long gt_count = 0;
    long matched = 0;
    double recall = 0.0;
    double mean_error = 0.0;
};

/// Buckets CLEAR-MOT matches by ground-truth camera distance; bins without
/// ground truth are omitted from the output.
std::vector<DistanceBin> loc_error_by_distance(const TrackSet &gt, const TrackSet &pred,
                                               const std::vector<double> &bin_edges,
                                               double iou_threshold = 0.5);

}  // namespace tubes::eval
