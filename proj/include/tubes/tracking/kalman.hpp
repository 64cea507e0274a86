#pragma once

#include <Eigen/Core>

namespace tubes::tracking {

/// Constant-velocity state: 3D position and per-frame velocity.
struct KalmanState {
    Eigen::Matrix<double, 6, 1> mean = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Identity();

    Eigen::Vector3d position() const { return mean.head<3>(); }
    Eigen::Vector3d velocity() const { return mean.tail<3>(); }
    Eigen::Matrix3d position_covariance() const { return covariance.topLeftCorner<3, 3>(); }

    bool is_valid() const;  // symmetric within 1e-9 and positive-definite
};

struct KalmanNoise {
    double process_sigma_pos = 0.02;  // meters
    double process_sigma_vel = 0.03;  // meters/frame
    double obs_sigma_pos = 0.15;
    double obs_sigma_vel = 0.2;
};

/// One constant-velocity transition step with additive process noise.
KalmanState kf_predict(const KalmanState &state, const KalmanNoise &noise);

/// Linear-Gaussian update observing full position and velocity (Joseph form).
/// Returns false on a numerically non-positive-definite innovation.
bool kf_update(KalmanState &state, const Eigen::Matrix<double, 6, 1> &observation,
               const KalmanNoise &noise);

/// Position-only update for observations without a velocity estimate.
bool kf_update_position(KalmanState &state, const Eigen::Vector3d &observation,
                        const KalmanNoise &noise);

/// Squared Mahalanobis distance of a position under the state's position
/// marginal.
double position_mahalanobis2(const KalmanState &state, const Eigen::Vector3d &position);

}  // namespace tubes::tracking
