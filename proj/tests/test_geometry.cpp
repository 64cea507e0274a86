#include <doctest.h>

#include <cmath>

#include "tubes/geometry/camera.hpp"
#include "tubes/geometry/depth_map.hpp"
#include "tubes/geometry/mask_warp.hpp"
#include "tubes/synth/keyed_rng.hpp"

using namespace tubes;
using geometry::BitMask;
using geometry::CameraIntrinsics;
using geometry::DepthMap;
using geometry::RigidMotion;
using synth::KeyedRng;

namespace {

const CameraIntrinsics kCam{160.0, 160.0, 128.0, 96.0, 0.5, 256, 192};

RigidMotion random_motion(KeyedRng &rng, double angle_scale, double trans_scale) {
    RigidMotion m;
    const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    m.rotation = geometry::axis_angle_to_rotation(axis.normalized() * rng.uniform(0.0, angle_scale));
    m.translation = {rng.normal(0.0, trans_scale), rng.normal(0.0, trans_scale),
                     rng.normal(0.0, trans_scale)};
    return m;
}

/// a within one pixel of b: each mask contained in the other's 1px dilation.
bool masks_within_1px(const BitMask &a, const BitMask &b) {
    auto contained_in_dilation = [](const BitMask &inner, const BitMask &outer) {
        for (int y = 0; y < inner.height(); ++y) {
            for (int x = 0; x < inner.width(); ++x) {
                if (!inner.get(x, y)) continue;
                bool near = false;
                for (int dy = -1; dy <= 1 && !near; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        if (outer.in_bounds(x + dx, y + dy) && outer.get(x + dx, y + dy)) {
                            near = true;
                            break;
                        }
                if (!near) return false;
            }
        }
        return true;
    };
    return contained_in_dilation(a, b) && contained_in_dilation(b, a);
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("project on the optical axis and off-axis") {
    CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0, 0.1, 10, 10};
    const Eigen::Vector2d px = geometry::project({0.0, 0.0, 1.0}, unit);
    CHECK(px.x() == doctest::Approx(0.0));
    CHECK(px.y() == doctest::Approx(0.0));

    CameraIntrinsics c2{100.0, 100.0, 50.0, 50.0, 0.1, 200, 200};
    CHECK(geometry::project({2.0, 0.0, 2.0}, c2).x() == doctest::Approx(150.0));
}

TEST_CASE("project rejects non-positive depth") {
    CHECK_THROWS_AS(geometry::project({0.0, 0.0, 0.0}, kCam), std::domain_error);
    CHECK_THROWS_AS(geometry::project({0.0, 0.0, -2.0}, kCam), std::domain_error);
    CHECK_THROWS_AS(geometry::backproject({1.0, 1.0}, 0.0, kCam), std::domain_error);
}

TEST_CASE("backproject trivial points") {
    const Eigen::Vector3d p = geometry::backproject({kCam.cx, kCam.cy}, 3.5, kCam);
    CHECK(p.x() == doctest::Approx(0.0));
    CHECK(p.y() == doctest::Approx(0.0));
    CHECK(p.z() == doctest::Approx(3.5));

    const Eigen::Vector3d q = geometry::backproject({kCam.cx + kCam.fx, kCam.cy}, 1.0, kCam);
    CHECK(q.x() == doctest::Approx(1.0));
    CHECK(q.y() == doctest::Approx(0.0));
}

TEST_CASE("project/backproject round trips to 1e-9") {
    KeyedRng rng(7, 100);
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Vector3d p(rng.uniform(-20.0, 20.0), rng.uniform(-5.0, 5.0),
                                rng.uniform(0.5, 60.0));
        const Eigen::Vector3d back = geometry::backproject(geometry::project(p, kCam), p.z(), kCam);
        CHECK((back - p).norm() < 1e-9);

        const Eigen::Vector2d px(rng.uniform(0.0, kCam.width - 1.0),
                                 rng.uniform(0.0, kCam.height - 1.0));
        const double d = rng.uniform(0.5, 60.0);
        const Eigen::Vector2d forth = geometry::project(geometry::backproject(px, d, kCam), kCam);
        CHECK((forth - px).norm() < 1e-9);
    }
}

TEST_CASE("rigid motion composition and inverse") {
    KeyedRng rng(11, 101);
    for (int i = 0; i < 200; ++i) {
        const RigidMotion a = random_motion(rng, 1.0, 2.0);
        const RigidMotion b = random_motion(rng, 1.0, 2.0);
        CHECK(a.is_orthonormal());

        const RigidMotion id = a.compose(a.inverse());
        CHECK((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(id.translation.norm() < 1e-9);

        const Eigen::Vector3d p(rng.normal(), rng.normal(), rng.normal());
        CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-9);
    }
}

TEST_CASE("RLE round trip is bit-exact") {
    KeyedRng rng(13, 102);
    for (int i = 0; i < 100; ++i) {
        BitMask m(37, 23);
        const int n = rng.uniform_int(0, 200);
        for (int k = 0; k < n; ++k) m.set(rng.uniform_int(0, 36), rng.uniform_int(0, 22));
        const auto counts = m.to_rle();
        long total = 0;
        for (int c : counts) total += c;
        CHECK(total == 37 * 23);
        CHECK(BitMask::from_rle(37, 23, counts) == m);
    }
    CHECK(BitMask(5, 4).to_rle() == std::vector<int>{20});
    const BitMask full = BitMask::filled_rect(5, 4, 0, 0, 4, 3);
    CHECK(full.to_rle() == std::vector<int>{0, 20});
}

TEST_CASE("RLE validation rejects malformed runs") {
    CHECK_THROWS(BitMask::from_rle(4, 4, {15}));
    CHECK_THROWS(BitMask::from_rle(4, 4, {17}));
    CHECK_THROWS(BitMask::from_rle(4, 4, {-1, 17}));
}

TEST_CASE("mask_iou basic values") {
    const BitMask a = BitMask::filled_rect(10, 10, 0, 0, 4, 9);  // left half
    const BitMask b = BitMask::filled_rect(10, 10, 0, 0, 9, 9);  // full
    CHECK(geometry::mask_iou(a, b) == doctest::Approx(0.5));
    CHECK(geometry::mask_iou(a, a) == doctest::Approx(1.0));

    const BitMask c = BitMask::filled_rect(10, 10, 5, 0, 9, 9);
    CHECK(geometry::mask_iou(a, c) == doctest::Approx(0.0));
    CHECK(geometry::mask_iou(BitMask(10, 10), BitMask(10, 10)) == 0.0);
    CHECK_THROWS_AS(geometry::mask_iou(a, BitMask(9, 10)), std::invalid_argument);
}

TEST_CASE("mask_iou symmetry and identity under RLE round trip") {
    KeyedRng rng(17, 103);
    for (int i = 0; i < 50; ++i) {
        const BitMask a = BitMask::filled_rect(32, 32, rng.uniform_int(0, 15), rng.uniform_int(0, 15),
                                               rng.uniform_int(16, 31), rng.uniform_int(16, 31));
        const BitMask b = BitMask::filled_rect(32, 32, rng.uniform_int(0, 15), rng.uniform_int(0, 15),
                                               rng.uniform_int(16, 31), rng.uniform_int(16, 31));
        CHECK(geometry::mask_iou(a, b) == geometry::mask_iou(b, a));
        const BitMask a2 = BitMask::from_rle(32, 32, a.to_rle());
        CHECK(geometry::mask_iou(a, a2) == 1.0);
        if (!(a == b)) CHECK(geometry::mask_iou(a, b) < 1.0);
    }
}

TEST_CASE("warp_mask identity equals input restricted to valid depth") {
    KeyedRng rng(19, 104);
    for (int i = 0; i < 20; ++i) {
        const int x0 = rng.uniform_int(5, 100), y0 = rng.uniform_int(5, 80);
        const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, x0, y0,
                                                  x0 + rng.uniform_int(6, 60),
                                                  y0 + rng.uniform_int(6, 50));
        DepthMap depth(kCam.width, kCam.height);
        for (int y = 0; y < kCam.height; ++y)
            for (int x = 0; x < kCam.width; ++x) depth.set(x, y, 8.0f);

        const BitMask out = geometry::warp_mask(mask, depth, RigidMotion::identity(),
                                                RigidMotion::identity(), kCam);
        CHECK(out == mask);
        CHECK(geometry::mask_iou(out, mask) == 1.0);

        // Punch a 4x4 invalid-depth hole; the identity warp must drop exactly it.
        DepthMap holey = depth;
        BitMask expected = mask;
        const int hx = x0 + 2, hy = y0 + 2;
        for (int dy = 0; dy < 4; ++dy) {
            for (int dx = 0; dx < 4; ++dx) {
                holey.set_invalid(hx + dx, hy + dy);
                if (expected.in_bounds(hx + dx, hy + dy)) expected.set(hx + dx, hy + dy, false);
            }
        }
        const BitMask out2 = geometry::warp_mask(mask, holey, RigidMotion::identity(),
                                                 RigidMotion::identity(), kCam);
        CHECK(out2 == expected);
    }
}

TEST_CASE("warp_mask zero valid pixels yields an empty mask") {
    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 10, 10, 20, 20);
    const DepthMap depth(kCam.width, kCam.height);  // all invalid
    const BitMask out =
        geometry::warp_mask(mask, depth, RigidMotion::identity(), RigidMotion::identity(), kCam);
    CHECK(out.area() == 0);
}

TEST_CASE("warp_mask scales under camera motion toward a wall") {
    const double wall_z = 10.0, advance = 2.0;
    DepthMap depth(kCam.width, kCam.height);
    for (int y = 0; y < kCam.height; ++y)
        for (int x = 0; x < kCam.width; ++x) depth.set(x, y, static_cast<float>(wall_z));

    const int half_w = 20, half_h = 14;
    const int cx = static_cast<int>(kCam.cx), cy = static_cast<int>(kCam.cy);
    const BitMask mask =
        BitMask::filled_rect(kCam.width, kCam.height, cx - half_w, cy - half_h, cx + half_w, cy + half_h);

    // Points ahead move closer: p_new = p_old - (0,0,advance).
    const RigidMotion ego = RigidMotion::from_translation({0.0, 0.0, -advance});
    const BitMask out = geometry::warp_mask(mask, depth, ego, RigidMotion::identity(), kCam);

    const double scale = wall_z / (wall_z - advance);
    double ocx, ocy;
    REQUIRE(out.centroid(ocx, ocy));
    CHECK(std::abs(ocx - kCam.cx) < 1.0);
    CHECK(std::abs(ocy - kCam.cy) < 1.0);

    int bx0, by0, bx1, by1;
    REQUIRE(out.bounding_box(bx0, by0, bx1, by1));
    CHECK(std::abs((bx1 - bx0) / 2.0 - half_w * scale) < 2.0);
    CHECK(std::abs((by1 - by0) / 2.0 - half_h * scale) < 2.0);
}

TEST_CASE("warp_mask equivariance under composed motions on a wall") {
    const double wall_z = 12.0;
    DepthMap depth0(kCam.width, kCam.height);
    for (int y = 0; y < kCam.height; ++y)
        for (int x = 0; x < kCam.width; ++x) depth0.set(x, y, static_cast<float>(wall_z));

    const BitMask mask = BitMask::filled_rect(kCam.width, kCam.height, 100, 70, 160, 120);

    const RigidMotion m1 = RigidMotion::from_translation({0.0, 0.0, -1.5});
    const RigidMotion m2 = RigidMotion::from_translation({0.3, 0.0, -1.0});

    const BitMask combined =
        geometry::warp_mask(mask, depth0, m2.compose(m1), RigidMotion::identity(), kCam);

    const BitMask step1 = geometry::warp_mask(mask, depth0, m1, RigidMotion::identity(), kCam);
    DepthMap depth1(kCam.width, kCam.height);
    for (int y = 0; y < kCam.height; ++y)
        for (int x = 0; x < kCam.width; ++x)
            depth1.set(x, y, static_cast<float>(wall_z + m1.translation.z()));
    const BitMask step2 = geometry::warp_mask(step1, depth1, m2, RigidMotion::identity(), kCam);

    CHECK(masks_within_1px(combined, step2));
}

TEST_CASE("depth map serialization round trip") {
    DepthMap d(7, 5);
    d.set(0, 0, 1.25f);
    d.set(6, 4, 1e-3f);
    d.set(3, 2, 123.5f);
    const DepthMap back = DepthMap::from_bytes(d.to_bytes());
    CHECK(back.width() == 7);
    CHECK(back.height() == 5);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 7; ++x) {
            if (d.valid(x, y)) {
                CHECK(back.at(x, y) == d.at(x, y));
            } else {
                CHECK(!back.valid(x, y));
            }
        }
    }
    CHECK(d.valid_count() == 3);
    CHECK_THROWS(DepthMap::from_bytes("XXXX"));
    CHECK_THROWS(DepthMap::from_bytes(d.to_bytes().substr(0, 14)));
}

TEST_CASE("camera intrinsics validation") {
    CameraIntrinsics bad = kCam;
    bad.fx = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = kCam;
    bad.baseline = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = kCam;
    bad.cx = 500.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_NOTHROW(kCam.validate());
}

}  // TEST_SUITE
