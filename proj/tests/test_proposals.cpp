#include <doctest.h>

#include "tubes/proposals/proposal.hpp"
#include "tubes/synth/keyed_rng.hpp"

using namespace tubes;
using geometry::BitMask;
using geometry::CameraIntrinsics;
using geometry::DepthMap;
using geometry::RigidMotion;
using proposals::LocalizeConfig;
using sceneflow::SceneFlowVector;
using synth::KeyedRng;

namespace {

const CameraIntrinsics kCam{160.0, 160.0, 128.0, 96.0, 0.5, 256, 192};

DepthMap uniform_depth(float z) {
    DepthMap d(kCam.width, kCam.height);
    for (int y = 0; y < kCam.height; ++y)
        for (int x = 0; x < kCam.width; ++x) d.set(x, y, z);
    return d;
}

SceneFlowVector flow_at(const Eigen::Vector3d &p_prev, const Eigen::Vector3d &p_cur,
                        const CameraIntrinsics &cam) {
    SceneFlowVector f;
    f.point_prev = p_prev;
    f.point_cur = p_cur;
    f.flow = p_cur - p_prev;
    f.pixel_prev = geometry::project(p_prev, cam);
    f.pixel_cur = geometry::project(p_cur, cam);
    return f;
}

}  // namespace

TEST_SUITE("proposals") {

TEST_CASE("median and percentile basics") {
    CHECK(proposals::median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(proposals::median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
    CHECK(proposals::percentile({0.0, 1.0, 2.0, 3.0, 4.0}, 50.0) == doctest::Approx(2.0));
    CHECK(proposals::percentile({0.0, 10.0}, 95.0) == doctest::Approx(9.5));
    CHECK_THROWS(proposals::median({}));
}

TEST_CASE("localize a fronto-parallel plane patch") {
    const DepthMap depth = uniform_depth(5.0f);
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 120, 90, 140, 110);
    const auto loc = proposals::localize(mask, depth, {}, RigidMotion::identity(), kCam);
    CHECK(loc.valid_3d);
    CHECK(loc.position.z() == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(!loc.has_velocity);
    CHECK(loc.velocity.norm() == 0.0);
    // Extent along z is zero on a fronto-parallel plane.
    CHECK(loc.size.z() == doctest::Approx(0.0));
    CHECK(loc.size.x() > 0.0);
}

TEST_CASE("localize: static object under camera motion cancels to zero velocity") {
    const DepthMap depth = uniform_depth(8.0f);
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 100, 80, 150, 120);

    RigidMotion ego;  // camera advances and yaws between the two frames
    ego.rotation = geometry::axis_angle_to_rotation({0.0, 0.01, 0.0});
    ego.translation = {0.05, 0.0, -0.7};

    std::vector<SceneFlowVector> flows;
    KeyedRng rng(1, 300);
    for (int i = 0; i < 40; ++i) {
        const Eigen::Vector2d px(rng.uniform(101.0, 149.0), rng.uniform(81.0, 119.0));
        const Eigen::Vector3d p = geometry::backproject(px, 8.0, kCam);
        flows.push_back(flow_at(p, ego.apply(p), kCam));
    }
    const auto loc = proposals::localize(mask, depth, flows, ego, kCam);
    CHECK(loc.has_velocity);
    CHECK(loc.velocity.norm() < 1e-6);
    CHECK(loc.flow_points == 40);
}

TEST_CASE("localize: moving object velocity is egomotion-compensated") {
    const DepthMap depth = uniform_depth(10.0f);
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 110, 85, 145, 115);
    const Eigen::Vector3d object_motion(0.3, 0.0, -0.1);  // in prev camera coords

    RigidMotion ego = RigidMotion::from_translation({0.0, 0.0, -0.5});
    std::vector<SceneFlowVector> flows;
    KeyedRng rng(2, 301);
    for (int i = 0; i < 30; ++i) {
        const Eigen::Vector2d px(rng.uniform(111.0, 144.0), rng.uniform(86.0, 114.0));
        const Eigen::Vector3d p = geometry::backproject(px, 10.0, kCam);
        flows.push_back(flow_at(p, ego.apply(p + object_motion), kCam));
    }
    const auto loc = proposals::localize(mask, depth, flows, ego, kCam);
    CHECK(loc.has_velocity);
    CHECK((loc.velocity - object_motion).norm() < 1e-6);
}

TEST_CASE("localize: no valid depth means no 3D state") {
    const DepthMap depth(kCam.width, kCam.height);  // all invalid
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 10, 10, 40, 40);
    const auto loc = proposals::localize(mask, depth, {}, RigidMotion::identity(), kCam);
    CHECK(!loc.valid_3d);
    CHECK(loc.depth_points == 0);
}

TEST_CASE("localize: below min_points is not valid") {
    DepthMap depth(kCam.width, kCam.height);
    for (int i = 0; i < 5; ++i) depth.set(20 + i, 20, 4.0f);
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 15, 15, 40, 40);
    LocalizeConfig cfg;
    cfg.min_points = 10;
    const auto loc = proposals::localize(mask, depth, {}, RigidMotion::identity(), kCam, cfg);
    CHECK(!loc.valid_3d);
    CHECK(loc.depth_points == 5);
}

TEST_CASE("median position resists 40% outlier depths") {
    KeyedRng rng(3, 302);
    DepthMap depth = uniform_depth(6.0f);
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 90, 70, 160, 130);

    const auto clean = proposals::localize(mask, depth, {}, RigidMotion::identity(), kCam);
    REQUIRE(clean.valid_3d);

    // Corrupt 40% of masked depths by a factor of 10.
    for (int y = 70; y <= 130; ++y)
        for (int x = 90; x <= 160; ++x)
            if (rng.bernoulli(0.4)) depth.set(x, y, 60.0f);

    const auto noisy = proposals::localize(mask, depth, {}, RigidMotion::identity(), kCam);
    REQUIRE(noisy.valid_3d);
    const double tolerance = std::max(clean.size.maxCoeff(), 1.0) / 10.0;
    CHECK((noisy.position - clean.position).norm() < tolerance);
}

TEST_CASE("velocity equivariance under axis-aligned frame changes") {
    // 90-degree yaw plus translation: component-wise medians commute with
    // axis permutations, so compensated velocity transforms exactly.
    const DepthMap depth = uniform_depth(9.0f);
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 100, 80, 150, 120);

    RigidMotion g;
    g.rotation = geometry::axis_angle_to_rotation({0.0, std::numbers::pi / 2.0, 0.0});
    g.translation = {0.4, 0.0, -1.0};

    RigidMotion ego = RigidMotion::from_translation({0.1, 0.0, -0.4});
    const Eigen::Vector3d object_motion(0.2, 0.0, 0.05);

    std::vector<SceneFlowVector> flows, flows_g;
    KeyedRng rng(4, 303);
    for (int i = 0; i < 25; ++i) {
        const Eigen::Vector2d px(rng.uniform(101.0, 149.0), rng.uniform(81.0, 119.0));
        const Eigen::Vector3d p = geometry::backproject(px, 9.0, kCam);
        const Eigen::Vector3d cur = ego.apply(p + object_motion);
        flows.push_back(flow_at(p, cur, kCam));
        // Transformed scenario: both endpoints and the egomotion conjugated.
        SceneFlowVector fg = flows.back();
        fg.point_prev = g.apply(p);
        fg.point_cur = g.apply(cur);
        fg.flow = fg.point_cur - fg.point_prev;
        flows_g.push_back(fg);
    }
    const RigidMotion ego_g = g.compose(ego).compose(g.inverse());

    const auto loc = proposals::localize(mask, depth, flows, ego, kCam);
    const auto loc_g = proposals::localize(mask, depth, flows_g, ego_g, kCam);
    REQUIRE(loc.has_velocity);
    REQUIRE(loc_g.has_velocity);
    CHECK((loc_g.velocity - g.rotation * loc.velocity).norm() < 1e-9);
}

}  // TEST_SUITE
