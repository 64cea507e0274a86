#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace tubes::geometry {

/// Pinhole intrinsics of a rectified stereo rig. Pixel coordinates are
/// continuous, with integer values at pixel centers.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double baseline = 0.0;  // meters, left-to-right camera distance
    int width = 0;
    int height = 0;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
        if (!(baseline > 0.0))
            throw std::invalid_argument("CameraIntrinsics: baseline must be positive");
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("CameraIntrinsics: image size must be positive");
        if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
            throw std::invalid_argument("CameraIntrinsics: principal point outside image");
    }

    bool contains(const Eigen::Vector2d &px) const {
        return px.x() >= 0.0 && px.x() < width && px.y() >= 0.0 && px.y() < height;
    }
};

inline Eigen::Vector2d project(const Eigen::Vector3d &point, const CameraIntrinsics &cam) {
    if (!(point.z() > 0.0))
        throw std::domain_error("project: point has non-positive depth");
    return {cam.fx * point.x() / point.z() + cam.cx,
            cam.fy * point.y() / point.z() + cam.cy};
}

inline Eigen::Vector3d backproject(const Eigen::Vector2d &pixel, double depth,
                                   const CameraIntrinsics &cam) {
    if (!(depth > 0.0))
        throw std::domain_error("backproject: depth must be positive");
    return {(pixel.x() - cam.cx) / cam.fx * depth,
            (pixel.y() - cam.cy) / cam.fy * depth,
            depth};
}

/// Projection into the right camera of the rig (offset by -baseline along x).
inline Eigen::Vector2d project_right(const Eigen::Vector3d &point_in_left,
                                     const CameraIntrinsics &cam) {
    return project(Eigen::Vector3d(point_in_left.x() - cam.baseline, point_in_left.y(),
                                   point_in_left.z()),
                   cam);
}

}  // namespace tubes::geometry
