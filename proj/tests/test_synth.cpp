#include <doctest.h>

#include "tubes/io/formats.hpp"
#include "tubes/sceneflow/scene_flow.hpp"
#include "tubes/synth/generator.hpp"

using namespace tubes;
using synth::Dataset;
using synth::SceneConfig;

namespace {

SceneConfig small_config() {
    SceneConfig cfg;
    cfg.seed = 5;
    cfg.frames = 12;
    cfg.camera = {120.0, 120.0, 96.0, 72.0, 0.5, 192, 144};
    cfg.n_objects = 2;
    cfg.clutter_per_frame = 4;
    cfg.matches_static = 60;
    cfg.matches_per_object = 8;
    return cfg;
}

std::string dataset_fingerprint(const Dataset &d) {
    std::string s;
    for (const auto &frame : d.proposal_frames)
        for (const auto &p : frame) s += io::proposal_to_json(p).dump();
    for (const auto &frame : d.matches)
        for (const auto &m : frame) s += io::match_to_json(m).dump();
    for (const auto &depth : d.depth) s += depth.to_bytes();
    return io::fnv1a_hex(s);
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("identical configs generate byte-identical datasets") {
    SceneConfig cfg = small_config();
    cfg.mask_jitter_px = 0.6;
    cfg.match_noise_px = 0.2;
    cfg.drop_probability = 0.05;
    cfg.trajectory_noise = 0.01;
    const Dataset a = synth::generate(cfg);
    const Dataset b = synth::generate(cfg);
    CHECK(dataset_fingerprint(a) == dataset_fingerprint(b));

    SceneConfig other = cfg;
    other.seed = 6;
    CHECK(dataset_fingerprint(synth::generate(other)) != dataset_fingerprint(a));
}

TEST_CASE("noiseless proposals match the rendered ground truth exactly") {
    SceneConfig cfg = small_config();
    cfg.n_objects = 1;
    cfg.clutter_per_frame = 0;
    const Dataset data = synth::generate(cfg);
    REQUIRE(data.gt_tubes.size() == 1);

    for (const auto &gf : data.gt_tubes[0].frames) {
        const auto &props = data.proposal_frames[static_cast<size_t>(gf.frame)];
        REQUIRE(props.size() == 1);
        CHECK(props[0].mask == gf.mask);
    }
}

TEST_CASE("masked pixels always carry the surface depth") {
    const Dataset data = synth::generate(small_config());
    for (const auto &tube : data.gt_tubes) {
        for (const auto &gf : tube.frames) {
            const auto &depth = data.depth[static_cast<size_t>(gf.frame)];
            int checked = 0;
            for (int y = 0; y < gf.mask.height(); ++y) {
                for (int x = 0; x < gf.mask.width(); ++x) {
                    if (!gf.mask.get(x, y)) continue;
                    REQUIRE(depth.valid(x, y));
                    ++checked;
                }
            }
            CHECK(checked >= 12);
        }
    }
}

TEST_CASE("occlusion reduces the farther object's visible area") {
    SceneConfig cfg = small_config();
    cfg.frames = 30;
    cfg.clutter_per_frame = 0;
    cfg.explicit_objects = {
        {{-3.0, 1.2 - 0.8, 10.0}, {0.25, 0.0, 0.0}, {1.6, 1.6, 1.6}},  // near, crossing
        {{0.0, 1.2 - 0.9, 18.0}, {0.0, 0.0, 0.0}, {1.8, 1.8, 1.8}},    // far, static
    };
    const Dataset data = synth::generate(cfg);
    REQUIRE(data.gt_tubes.size() == 2);

    const auto &far_tube = data.gt_tubes[1];
    long max_area = 0, min_area = 1 << 30;
    for (const auto &gf : far_tube.frames) {
        const long area = gf.mask.area();
        max_area = std::max(max_area, area);
        min_area = std::min(min_area, area);
    }
    CHECK(min_area < max_area / 2);  // the crossing eats at least half at peak

    // z-buffer consistency: where the far object is masked, depth must match
    // its surface, never the near object's.
    for (const auto &gf : far_tube.frames) {
        const auto &depth = data.depth[static_cast<size_t>(gf.frame)];
        for (int y = 0; y < gf.mask.height(); ++y)
            for (int x = 0; x < gf.mask.width(); ++x)
                if (gf.mask.get(x, y)) CHECK(depth.at(x, y) > 15.0f);
    }
}

TEST_CASE("ground-truth egomotion cancels static scene flow") {
    SceneConfig cfg = small_config();
    cfg.n_objects = 0;
    cfg.clutter_per_frame = 0;
    cfg.ego_forward_speed = 0.4;
    cfg.ego_yaw_rate = 0.004;
    cfg.frames = 8;
    const Dataset data = synth::generate(cfg);

    for (int t = 1; t < data.frames; ++t) {
        const auto filtered = sceneflow::cyclic_filter(data.matches[static_cast<size_t>(t)], 1.5, 2.0);
        CHECK(filtered.size() == data.matches[static_cast<size_t>(t)].size());
        const auto flows = sceneflow::compute_scene_flow(filtered, data.camera);
        const auto ego_inv = data.ego[static_cast<size_t>(t)].inverse();
        for (const auto &f : flows.flows)
            CHECK((ego_inv.apply(f.point_cur) - f.point_prev).norm() < 1e-6);
    }
}

TEST_CASE("labeled outliers are exactly the cyclic-filter rejects") {
    SceneConfig cfg = small_config();
    cfg.n_objects = 0;
    cfg.matches_static = 120;
    cfg.match_outlier_rate = 0.2;
    cfg.frames = 6;
    const Dataset data = synth::generate(cfg);

    for (int t = 1; t < data.frames; ++t) {
        const auto &quads = data.matches[static_cast<size_t>(t)];
        const auto &labels = data.match_is_outlier[static_cast<size_t>(t)];
        REQUIRE(quads.size() == labels.size());
        int corrupted = 0;
        for (size_t k = 0; k < quads.size(); ++k) {
            const bool rejected = quads[k].epipolar_residual_prev() > 1.5 ||
                                  quads[k].epipolar_residual_cur() > 1.5 ||
                                  sceneflow::cycle_residual(quads[k]) > 2.0;
            CHECK(rejected == labels[k]);
            corrupted += labels[k] ? 1 : 0;
        }
        CHECK(corrupted > 0);
    }
}

TEST_CASE("objects behind the camera are rejected") {
    SceneConfig cfg = small_config();
    cfg.explicit_objects = {{{0.0, 0.5, -5.0}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}};
    CHECK_THROWS_AS(synth::generate(cfg), std::invalid_argument);
}

TEST_CASE("persistent clutter stays put, transient clutter moves") {
    SceneConfig cfg = small_config();
    cfg.n_objects = 0;
    cfg.clutter_per_frame = 6;
    cfg.frames = 6;

    cfg.clutter_persistent = true;
    const Dataset persistent = synth::generate(cfg);
    // Compare clutter mask centers across frames: persistent mode keeps the
    // underlying ground point fixed (mask jitter of a couple px remains).
    double cx0, cy0, cx1, cy1;
    REQUIRE(persistent.proposal_frames[0][0].mask.centroid(cx0, cy0));
    REQUIRE(persistent.proposal_frames[3][0].mask.centroid(cx1, cy1));
    CHECK(std::abs(cx0 - cx1) < 8.0);
    CHECK(std::abs(cy0 - cy1) < 8.0);
}

TEST_CASE("gt velocity matches the trajectory differences") {
    SceneConfig cfg = small_config();
    cfg.n_objects = 1;
    cfg.clutter_per_frame = 0;
    cfg.explicit_objects = {{{0.0, 0.4, 12.0}, {0.1, 0.0, 0.05}, {1.6, 1.6, 1.6}}};
    const Dataset data = synth::generate(cfg);
    const auto &frames = data.gt_tubes[0].frames;
    for (size_t k = 0; k + 1 < frames.size(); ++k) {
        if (frames[k + 1].frame != frames[k].frame + 1) continue;
        CHECK((frames[k].velocity_world -
               (frames[k + 1].position_world - frames[k].position_world)).norm() < 1e-12);
    }
}

}  // TEST_SUITE
