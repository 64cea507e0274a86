#include "tubes/scoring/scoring.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace tubes::scoring {

void ScoringConfig::validate() const {
    if (!(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0 && w1 + w2 + w3 > 0.0))
        throw std::invalid_argument("ScoringConfig: weights must be nonnegative, sum positive");
    if (!(alpha > 1.0)) throw std::invalid_argument("ScoringConfig: alpha must exceed 1");
    if (!(beta > 1.0)) throw std::invalid_argument("ScoringConfig: beta must exceed 1");
    if (!(area_gp > 0.0)) throw std::invalid_argument("ScoringConfig: area_gp must be positive");
}

namespace {

/// Ground-plane (x, z) marginal of a 6D state.
void ground_plane_marginal(const tracking::KalmanState &state, Eigen::Vector2d &mean,
                           Eigen::Matrix2d &cov) {
    mean = {state.mean(0), state.mean(2)};
    cov << state.covariance(0, 0), state.covariance(0, 2),
           state.covariance(2, 0), state.covariance(2, 2);
}

}  // namespace

double motion_score(const tracking::Tube &tube, const ScoringConfig &cfg) {
    double score = 0.0;
    const double log_area = std::log(cfg.area_gp);
    for (const auto &f : tube.frames) {
        // The seed frame has no prediction and contributes nothing.
        if (!f.has_inlier || !f.has_prediction) continue;
        Eigen::Vector2d mean;
        Eigen::Matrix2d cov;
        ground_plane_marginal(f.predicted, mean, cov);
        const Eigen::LLT<Eigen::Matrix2d> llt(cov);
        if (llt.info() != Eigen::Success) continue;  // degenerate marginal, skip frame

        const Eigen::Vector2d obs(f.obs_position_world.x(), f.obs_position_world.z());
        const Eigen::Vector2d diff = obs - mean;
        const double d2 = diff.dot(llt.solve(diff));
        const double log_det = 2.0 * std::log(llt.matrixL().determinant());
        const double log_gauss = -std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * d2;
        score += log_gauss + log_area;
    }
    return score;
}

double mask_score(const tracking::Tube &tube, const ScoringConfig &cfg) {
    double score = 0.0;
    const double log_alpha = std::log(cfg.alpha);
    for (const auto &f : tube.frames) {
        if (!f.has_inlier || !f.has_predicted_mask) continue;
        const double iou =
            std::max(geometry::mask_iou(f.predicted_mask, f.inlier.mask), cfg.iou_floor);
        score += std::log(iou) + log_alpha;
    }
    return score;
}

double objectness_score(const tracking::Tube &tube, const ScoringConfig &cfg) {
    double score = 0.0;
    const double log_beta = std::log(cfg.beta);
    for (const auto &f : tube.frames) {
        if (!f.has_inlier) continue;
        score += std::log(std::max(f.inlier.objectness, cfg.objectness_floor)) + log_beta;
    }
    return score;
}

double tube_score(const tracking::Tube &tube, const ScoringConfig &cfg) {
    return cfg.w1 * motion_score(tube, cfg) + cfg.w2 * mask_score(tube, cfg) +
           cfg.w3 * objectness_score(tube, cfg);
}

void score_tube(tracking::Tube &tube, const ScoringConfig &cfg) {
    tube.scores.motion = motion_score(tube, cfg);
    tube.scores.mask = mask_score(tube, cfg);
    tube.scores.objectness = objectness_score(tube, cfg);
    tube.scores.total =
        cfg.w1 * tube.scores.motion + cfg.w2 * tube.scores.mask + cfg.w3 * tube.scores.objectness;
}

}  // namespace tubes::scoring
