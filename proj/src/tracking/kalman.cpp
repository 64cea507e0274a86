#include "tubes/tracking/kalman.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace tubes::tracking {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

Mat6 transition() {
    Mat6 f = Mat6::Identity();
    f.topRightCorner<3, 3>() = Eigen::Matrix3d::Identity();  // dt = 1 frame
    return f;
}

Mat6 process_noise(const KalmanNoise &n) {
    Mat6 q = Mat6::Zero();
    q.topLeftCorner<3, 3>() = n.process_sigma_pos * n.process_sigma_pos * Eigen::Matrix3d::Identity();
    q.bottomRightCorner<3, 3>() =
        n.process_sigma_vel * n.process_sigma_vel * Eigen::Matrix3d::Identity();
    return q;
}

void symmetrize(Mat6 &m) { m = 0.5 * (m + m.transpose()).eval(); }

// Joseph-form update, generic in observation dimension.
template <int ObsDim>
bool joseph_update(KalmanState &state, const Eigen::Matrix<double, ObsDim, 6> &h,
                   const Eigen::Matrix<double, ObsDim, 1> &obs,
                   const Eigen::Matrix<double, ObsDim, ObsDim> &r) {
    const Eigen::Matrix<double, ObsDim, 1> innovation = obs - h * state.mean;
    const Eigen::Matrix<double, ObsDim, ObsDim> s = h * state.covariance * h.transpose() + r;
    const Eigen::LLT<Eigen::Matrix<double, ObsDim, ObsDim>> llt(s);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::Matrix<double, 6, ObsDim> gain =
        state.covariance * h.transpose() * llt.solve(Eigen::Matrix<double, ObsDim, ObsDim>::Identity());
    state.mean += gain * innovation;
    const Mat6 ikh = Mat6::Identity() - gain * h;
    state.covariance = ikh * state.covariance * ikh.transpose() + gain * r * gain.transpose();
    symmetrize(state.covariance);
    return true;
}

}  // namespace

bool KalmanState::is_valid() const {
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
    const Eigen::LLT<Mat6> llt(covariance);
    return llt.info() == Eigen::Success && mean.allFinite();
}

KalmanState kf_predict(const KalmanState &state, const KalmanNoise &noise) {
    const Mat6 f = transition();
    KalmanState out;
    out.mean = f * state.mean;
    out.covariance = f * state.covariance * f.transpose() + process_noise(noise);
    symmetrize(out.covariance);
    return out;
}

bool kf_update(KalmanState &state, const Vec6 &observation, const KalmanNoise &noise) {
    const Mat6 h = Mat6::Identity();
    Mat6 r = Mat6::Zero();
    r.topLeftCorner<3, 3>() = noise.obs_sigma_pos * noise.obs_sigma_pos * Eigen::Matrix3d::Identity();
    r.bottomRightCorner<3, 3>() =
        noise.obs_sigma_vel * noise.obs_sigma_vel * Eigen::Matrix3d::Identity();
    return joseph_update<6>(state, h, observation, r);
}

bool kf_update_position(KalmanState &state, const Eigen::Vector3d &observation,
                        const KalmanNoise &noise) {
    Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
    h.leftCols<3>() = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d r =
        noise.obs_sigma_pos * noise.obs_sigma_pos * Eigen::Matrix3d::Identity();
    return joseph_update<3>(state, h, observation, r);
}

double position_mahalanobis2(const KalmanState &state, const Eigen::Vector3d &position) {
    const Eigen::Vector3d diff = position - state.position();
    const Eigen::Matrix3d cov = state.position_covariance();
    return diff.dot(cov.llt().solve(diff));
}

}  // namespace tubes::tracking
