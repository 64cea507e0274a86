#include "tubes/sceneflow/scene_flow.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace tubes::sceneflow {

using geometry::CameraIntrinsics;
using geometry::RigidMotion;

double cycle_residual(const QuadMatch &m) {
    // Walk the cycle with the measured hops. Stereo hops keep the running y
    // (rectified constraint), temporal hops add the per-camera flow.
    Eigen::Vector2d p = m.left_prev;
    p = {m.right_prev.x(), p.y()};
    p += m.right_cur - m.right_prev;
    p = {m.left_cur.x(), p.y()};
    p += m.left_prev - m.left_cur;
    return (p - m.left_prev).norm();
}

std::vector<QuadMatch> cyclic_filter(const std::vector<QuadMatch> &matches,
                                     double epipolar_tol_px, double cycle_tol_px) {
    if (!(epipolar_tol_px > 0.0) || !(cycle_tol_px > 0.0))
        throw std::invalid_argument("cyclic_filter: tolerances must be positive");
    std::vector<QuadMatch> kept;
    kept.reserve(matches.size());
    for (const auto &m : matches) {
        if (m.epipolar_residual_prev() > epipolar_tol_px) continue;
        if (m.epipolar_residual_cur() > epipolar_tol_px) continue;
        if (cycle_residual(m) > cycle_tol_px) continue;
        kept.push_back(m);
    }
    return kept;
}

std::optional<Eigen::Vector3d> triangulate(const Eigen::Vector2d &px_left,
                                           const Eigen::Vector2d &px_right,
                                           const CameraIntrinsics &cam) {
    const double disparity = px_left.x() - px_right.x();
    if (!(disparity > 0.0)) return std::nullopt;
    const double z = cam.fx * cam.baseline / disparity;
    return geometry::backproject(px_left, z, cam);
}

SceneFlowResult compute_scene_flow(const std::vector<QuadMatch> &matches,
                                   const CameraIntrinsics &cam) {
    SceneFlowResult result;
    result.flows.reserve(matches.size());
    for (const auto &m : matches) {
        const auto prev = triangulate(m.left_prev, m.right_prev, cam);
        const auto cur = triangulate(m.left_cur, m.right_cur, cam);
        if (!prev || !cur) {
            ++result.dropped_non_triangulable;
            continue;
        }
        SceneFlowVector v;
        v.point_prev = *prev;
        v.point_cur = *cur;
        v.flow = *cur - *prev;
        v.pixel_prev = m.left_prev;
        v.pixel_cur = m.left_cur;
        result.flows.push_back(v);
    }
    return result;
}

namespace {

struct ReprojProblem {
    std::vector<Eigen::Vector3d> points_prev;
    std::vector<Eigen::Vector2d> obs_left;
    std::vector<Eigen::Vector2d> obs_right;
};

// Residual vector (4 per point) and Jacobian wrt a left-multiplied
// axis-angle/translation increment [w, dt].
void evaluate(const ReprojProblem &prob, const RigidMotion &motion, const CameraIntrinsics &cam,
              const std::vector<int> &active, Eigen::VectorXd &residuals, Eigen::MatrixXd *jac) {
    const int n = static_cast<int>(active.size());
    residuals.resize(4 * n);
    if (jac) jac->setZero(4 * n, 6);

    for (int k = 0; k < n; ++k) {
        const int i = active[k];
        const Eigen::Vector3d p = motion.apply(prob.points_prev[i]);
        const double z = std::max(p.z(), 1e-9);
        const double inv_z = 1.0 / z;

        const Eigen::Vector2d pred_left(cam.fx * p.x() * inv_z + cam.cx,
                                        cam.fy * p.y() * inv_z + cam.cy);
        const Eigen::Vector2d pred_right(cam.fx * (p.x() - cam.baseline) * inv_z + cam.cx,
                                         cam.fy * p.y() * inv_z + cam.cy);

        residuals.segment<2>(4 * k) = pred_left - prob.obs_left[i];
        residuals.segment<2>(4 * k + 2) = pred_right - prob.obs_right[i];

        if (!jac) continue;

        // d(pixel)/d(camera point)
        Eigen::Matrix<double, 2, 3> dl;
        dl << cam.fx * inv_z, 0.0, -cam.fx * p.x() * inv_z * inv_z,
              0.0, cam.fy * inv_z, -cam.fy * p.y() * inv_z * inv_z;
        Eigen::Matrix<double, 2, 3> dr = dl;
        dr(0, 2) = -cam.fx * (p.x() - cam.baseline) * inv_z * inv_z;

        // d(camera point)/d[w, dt] for p' = exp(w) p + dt
        Eigen::Matrix<double, 3, 6> dp;
        dp.leftCols<3>() = -geometry::skew(p);
        dp.rightCols<3>() = Eigen::Matrix3d::Identity();

        jac->block<2, 6>(4 * k, 0) = dl * dp;
        jac->block<2, 6>(4 * k + 2, 0) = dr * dp;
    }
}

struct GaussNewtonOutcome {
    RigidMotion motion;
    bool ok = false;
    int iterations = 0;
    double rms_px = 0.0;
};

GaussNewtonOutcome gauss_newton(const ReprojProblem &prob, const std::vector<int> &active,
                                RigidMotion motion, const CameraIntrinsics &cam,
                                const EgomotionConfig &cfg) {
    GaussNewtonOutcome out;
    Eigen::VectorXd r;
    Eigen::MatrixXd J;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        evaluate(prob, motion, cam, active, r, &J);
        const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
        const Eigen::Matrix<double, 6, 1> Jtr = J.transpose() * r;

        const Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(JtJ);
        if (!lu.isInvertible()) return out;
        const Eigen::Matrix<double, 6, 1> delta = lu.solve(-Jtr);
        if (!delta.allFinite()) return out;

        const Eigen::Matrix3d dR = geometry::axis_angle_to_rotation(delta.head<3>());
        motion.rotation = dR * motion.rotation;
        motion.translation = dR * motion.translation + delta.tail<3>();
        out.iterations = it + 1;

        if (delta.norm() < cfg.step_tol) break;
    }

    // Re-orthonormalize to shed accumulated drift from incremental updates.
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(motion.rotation,
                                                Eigen::ComputeFullU | Eigen::ComputeFullV);
    motion.rotation = svd.matrixU() * svd.matrixV().transpose();
    if (motion.rotation.determinant() < 0.0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) *= -1.0;
        motion.rotation = u * svd.matrixV().transpose();
    }

    evaluate(prob, motion, cam, active, r, nullptr);
    if (!r.allFinite()) return out;
    out.rms_px = std::sqrt(r.squaredNorm() / static_cast<double>(r.size() / 2));
    out.motion = motion;
    out.ok = true;
    return out;
}

bool points_non_collinear(const std::vector<Eigen::Vector3d> &pts) {
    if (pts.size() < 3) return false;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto &p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto &p : pts) cov += (p - mean) * (p - mean).transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Rank >= 2 means at least two significantly nonzero eigenvalues.
    const double scale = eig.eigenvalues().maxCoeff();
    if (!(scale > 0.0)) return false;
    return eig.eigenvalues()(1) > 1e-12 * scale;
}

}  // namespace

EgomotionResult estimate_egomotion(const std::vector<QuadMatch> &matches,
                                   const CameraIntrinsics &cam, const RigidMotion &init,
                                   const EgomotionConfig &cfg) {
    EgomotionResult result;
    result.motion = RigidMotion::identity();

    ReprojProblem prob;
    for (const auto &m : matches) {
        const auto p = triangulate(m.left_prev, m.right_prev, cam);
        if (!p) continue;
        prob.points_prev.push_back(*p);
        prob.obs_left.push_back(m.left_cur);
        prob.obs_right.push_back(m.right_cur);
    }
    if (prob.points_prev.size() < 3 || !points_non_collinear(prob.points_prev)) return result;

    std::vector<int> active(prob.points_prev.size());
    for (size_t i = 0; i < active.size(); ++i) active[i] = static_cast<int>(i);

    auto first = gauss_newton(prob, active, init, cam, cfg);
    if (!first.ok) return result;

    // One robustness pass: drop matches whose residual norm exceeds
    // mad_multiplier times the median, then refine.
    Eigen::VectorXd r;
    evaluate(prob, first.motion, cam, active, r, nullptr);
    std::vector<double> norms(active.size());
    for (size_t k = 0; k < active.size(); ++k) norms[k] = r.segment<4>(4 * k).norm();
    std::vector<double> sorted = norms;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double cutoff = cfg.mad_multiplier * median;

    std::vector<int> inliers;
    for (size_t k = 0; k < active.size(); ++k)
        if (norms[k] <= cutoff || median == 0.0) inliers.push_back(active[k]);

    auto refined = first;
    if (inliers.size() >= 3 && inliers.size() < active.size()) {
        auto second = gauss_newton(prob, inliers, first.motion, cam, cfg);
        if (second.ok) refined = second;
    } else {
        inliers = active;
    }

    result.motion = refined.motion;
    result.ok = true;
    result.iterations = first.iterations + refined.iterations;
    result.rms_px = refined.rms_px;
    result.matches_used = static_cast<int>(inliers.size());
    return result;
}

}  // namespace tubes::sceneflow
