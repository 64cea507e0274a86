#pragma once

#include "tubes/tracking/tube.hpp"

namespace tubes::scoring {

struct ScoringConfig {
    double w1 = 1.0;  // motion
    double w2 = 1.0;  // mask consistency
    double w3 = 1.0;  // objectness
    double alpha = 20.0;    // mask null base value
    double beta = 10.0;     // objectness null base value
    double area_gp = 4000.0;  // sensing area, m^2 (80 x 50 ground plane)
    double iou_floor = 1e-4;
    double objectness_floor = 1e-4;

    void validate() const;
};

/// Log-likelihood ratio of the ground-plane positions under the Kalman
/// predictions against uniform clutter over the sensing area. Inlier frames
/// after the first contribute; misses and the first frame contribute zero.
double motion_score(const tracking::Tube &tube, const ScoringConfig &cfg);

/// Log-likelihood ratio of predicted-vs-observed mask IoU against a constant
/// null of 1/alpha.
double mask_score(const tracking::Tube &tube, const ScoringConfig &cfg);

/// Log-likelihood ratio of per-frame objectness against a constant null of
/// 1/beta, over all inlier frames.
double objectness_score(const tracking::Tube &tube, const ScoringConfig &cfg);

/// Weighted combination w1*motion + w2*mask + w3*objectness.
double tube_score(const tracking::Tube &tube, const ScoringConfig &cfg);

/// Computes all components and stores them on the tube.
void score_tube(tracking::Tube &tube, const ScoringConfig &cfg);

}  // namespace tubes::scoring
