#include "tubes/proposals/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tubes::proposals {

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    const size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    if (values.size() % 2 == 1) return values[mid];
    const double hi = values[mid];
    const double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = static_cast<size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Localization localize(const geometry::BitMask &mask, const geometry::DepthMap &depth,
                      const std::vector<sceneflow::SceneFlowVector> &flows,
                      const geometry::RigidMotion &ego, const geometry::CameraIntrinsics &cam,
                      const LocalizeConfig &cfg) {
    if (mask.width() != depth.width() || mask.height() != depth.height())
        throw std::invalid_argument("localize: mask/depth dimensions differ");

    Localization out;

    int bx0, by0, bx1, by1;
    if (!mask.bounding_box(bx0, by0, bx1, by1)) return out;

    std::array<std::vector<double>, 3> coords;
    for (int y = by0; y <= by1; ++y) {
        for (int x = bx0; x <= bx1; ++x) {
            if (!mask.get(x, y) || !depth.valid(x, y)) continue;
            const Eigen::Vector3d p = geometry::backproject(
                {static_cast<double>(x), static_cast<double>(y)}, depth.at(x, y), cam);
            for (int c = 0; c < 3; ++c) coords[c].push_back(p[c]);
        }
    }
    out.depth_points = static_cast<int>(coords[0].size());
    if (out.depth_points < cfg.min_points) return out;

    for (int c = 0; c < 3; ++c) {
        out.position[c] = median(coords[c]);
        out.size[c] = percentile(coords[c], cfg.size_percentile_high) -
                      percentile(coords[c], cfg.size_percentile_low);
    }
    out.valid_3d = true;

    // Velocity from flow vectors anchored inside the mask. Compensation maps
    // the current endpoint back through the inverse egomotion so static
    // points yield zero; the result lives in this frame's camera coords.
    const geometry::RigidMotion ego_inv = ego.inverse();
    std::array<std::vector<double>, 3> vel;
    for (const auto &f : flows) {
        const int px = static_cast<int>(std::lround(f.pixel_prev.x()));
        const int py = static_cast<int>(std::lround(f.pixel_prev.y()));
        if (!mask.in_bounds(px, py) || !mask.get(px, py)) continue;
        const Eigen::Vector3d v = ego_inv.apply(f.point_cur) - f.point_prev;
        for (int c = 0; c < 3; ++c) vel[c].push_back(v[c]);
    }
    out.flow_points = static_cast<int>(vel[0].size());
    if (out.flow_points > 0) {
        for (int c = 0; c < 3; ++c) out.velocity[c] = median(vel[c]);
        out.has_velocity = true;
    }
    return out;
}

void localize_frame(std::vector<FrameProposal> &frame_proposals, const geometry::DepthMap &depth,
                    const std::vector<sceneflow::SceneFlowVector> &flows,
                    const geometry::RigidMotion &ego, const geometry::CameraIntrinsics &cam,
                    const LocalizeConfig &cfg) {
    for (auto &prop : frame_proposals) {
        const Localization loc = localize(prop.mask, depth, flows, ego, cam, cfg);
        prop.position = loc.position;
        prop.velocity = loc.velocity;
        prop.size = loc.size;
        prop.valid_3d = loc.valid_3d;
        prop.has_velocity = loc.has_velocity;
    }
}

}  // namespace tubes::proposals
