#include "tubes/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tubes/synth/keyed_rng.hpp"

namespace tubes::synth {

using geometry::BitMask;
using geometry::CameraIntrinsics;
using geometry::DepthMap;
using geometry::RigidMotion;

namespace {

// RNG stream ids.
enum Stream : std::uint64_t {
    kObjectInit = 1,
    kTrajectory = 2,
    kMatchStatic = 3,
    kMatchObject = 4,
    kMatchNoise = 5,
    kMatchOutlier = 6,
    kProposal = 7,
    kClutterPosition = 8,
    kClutterMask = 9,
    kPosterior = 10,
};

constexpr int kGroundId = -1;
constexpr int kSkyId = -2;

struct Box {
    Eigen::Vector3d center;  // world
    Eigen::Vector3d size;
};

struct RenderedFrame {
    std::vector<int> id;  // per pixel: object index, kGroundId or kSkyId
    DepthMap depth;
};

/// Slab intersection; s is in units of the unnormalized direction, which has
/// z = 1 in camera coordinates so s equals camera-frame depth.
bool ray_box(const Eigen::Vector3d &origin, const Eigen::Vector3d &dir, const Box &box,
             double &s_hit) {
    const Eigen::Vector3d lo = box.center - 0.5 * box.size;
    const Eigen::Vector3d hi = box.center + 0.5 * box.size;
    double smin = 1e-6, smax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double inv = 1.0 / dir[a];  // IEEE inf handles dir[a] == 0
        double t1 = (lo[a] - origin[a]) * inv;
        double t2 = (hi[a] - origin[a]) * inv;
        if (t1 > t2) std::swap(t1, t2);
        smin = std::max(smin, t1);
        smax = std::min(smax, t2);
        if (smin > smax) return false;
    }
    s_hit = smin;
    return true;
}

RenderedFrame render(const CameraIntrinsics &cam, const RigidMotion &world_from_cam,
                     const std::vector<Box> &boxes, double ground_y) {
    RenderedFrame out{std::vector<int>(static_cast<size_t>(cam.width) * cam.height, kSkyId),
                      DepthMap(cam.width, cam.height)};
    const Eigen::Vector3d origin = world_from_cam.translation;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Eigen::Vector3d dir_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
            const Eigen::Vector3d dir = world_from_cam.rotation * dir_cam;

            double best_s = std::numeric_limits<double>::infinity();
            int best_id = kSkyId;

            if (dir.y() > 1e-12) {
                const double s = (ground_y - origin.y()) / dir.y();
                if (s > 1e-6) {
                    best_s = s;
                    best_id = kGroundId;
                }
            }
            for (size_t b = 0; b < boxes.size(); ++b) {
                double s = 0.0;
                if (ray_box(origin, dir, boxes[b], s) && s < best_s) {
                    best_s = s;
                    best_id = static_cast<int>(b);
                }
            }
            if (best_id != kSkyId) {
                out.id[static_cast<size_t>(y) * cam.width + x] = best_id;
                out.depth.set(x, y, static_cast<float>(best_s));
            }
        }
    }
    return out;
}

std::vector<double> random_posterior(KeyedRng &rng, int peak_class, double peak_mass) {
    std::vector<double> posterior(proposals::kNumClasses, 0.0);
    if (peak_class >= 0) {
        posterior.assign(proposals::kNumClasses, (1.0 - peak_mass) / (proposals::kNumClasses - 1));
        posterior[static_cast<size_t>(peak_class)] = peak_mass;
    } else {
        double sum = 0.0;
        for (auto &p : posterior) {
            p = -std::log(1.0 - rng.uniform());
            sum += p;
        }
        for (auto &p : posterior) p /= sum;
    }
    return posterior;
}

}  // namespace

void SceneConfig::validate() const {
    camera.validate();
    if (frames <= 0) throw std::invalid_argument("SceneConfig: frames must be positive");
    if (n_objects < 0 || clutter_per_frame < 0)
        throw std::invalid_argument("SceneConfig: negative counts");
    if (!(camera_height > 0.0))
        throw std::invalid_argument("SceneConfig: camera must sit above the ground");
}

Dataset generate(const SceneConfig &config) {
    config.validate();
    const CameraIntrinsics &cam = config.camera;
    const double ground_y = config.camera_height;

    Dataset data;
    data.camera = cam;
    data.frames = config.frames;

    // ---- Object population --------------------------------------------
    std::vector<ObjectInit> objects = config.explicit_objects;
    if (objects.empty()) {
        for (int i = 0; i < config.n_objects; ++i) {
            KeyedRng rng(config.seed, kObjectInit, static_cast<std::uint64_t>(i));
            ObjectInit obj;
            for (int attempt = 0; attempt < 32; ++attempt) {
                const double z = rng.uniform(config.spawn_z_min, config.spawn_z_max);
                const double x = rng.uniform(-config.spawn_x_frac * z, config.spawn_x_frac * z);
                const double sx = rng.uniform(config.object_size_min, config.object_size_max);
                const double sy = rng.uniform(config.object_height_min, config.object_height_max);
                const double sz = rng.uniform(config.object_size_min, config.object_size_max);
                obj.center = {x, ground_y - sy / 2.0, z};
                obj.size = {sx, sy, sz};
                bool clear = true;
                for (int j = 0; j < i; ++j) {
                    const Eigen::Vector3d d = objects[static_cast<size_t>(j)].center - obj.center;
                    if (std::hypot(d.x(), d.z()) < 3.0) clear = false;
                }
                if (clear) break;
            }
            const double speed = rng.uniform(config.speed_min, config.speed_max);
            const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
            obj.velocity = {speed * std::cos(heading), 0.0, speed * std::sin(heading)};
            objects.push_back(obj);
        }
    }
    for (const auto &obj : objects) {
        if (!(obj.center.z() > 0.0))
            throw std::invalid_argument("SceneConfig: object behind the camera at t=0");
    }
    const int n_objects = static_cast<int>(objects.size());

    // Trajectories: constant velocity plus optional per-frame perturbation.
    std::vector<std::vector<Eigen::Vector3d>> centers(static_cast<size_t>(n_objects));
    for (int i = 0; i < n_objects; ++i) {
        Eigen::Vector3d pos = objects[static_cast<size_t>(i)].center;
        centers[static_cast<size_t>(i)].push_back(pos);
        for (int t = 1; t < config.frames; ++t) {
            Eigen::Vector3d v = objects[static_cast<size_t>(i)].velocity;
            if (config.trajectory_noise > 0.0) {
                KeyedRng rng(config.seed, kTrajectory, static_cast<std::uint64_t>(i),
                             static_cast<std::uint64_t>(t));
                v.x() += rng.normal(0.0, config.trajectory_noise);
                v.z() += rng.normal(0.0, config.trajectory_noise);
            }
            pos += v;
            centers[static_cast<size_t>(i)].push_back(pos);
        }
    }

    // ---- Camera poses ---------------------------------------------------
    data.world_from_cam.resize(static_cast<size_t>(config.frames));
    data.ego.resize(static_cast<size_t>(config.frames));
    data.world_from_cam[0] = RigidMotion::identity();
    data.ego[0] = RigidMotion::identity();
    for (int t = 1; t < config.frames; ++t) {
        RigidMotion step;  // new camera frame expressed in the previous one
        step.rotation = geometry::axis_angle_to_rotation({0.0, config.ego_yaw_rate, 0.0});
        step.translation = {0.0, 0.0, config.ego_forward_speed};
        data.world_from_cam[static_cast<size_t>(t)] =
            data.world_from_cam[static_cast<size_t>(t - 1)].compose(step);
        data.ego[static_cast<size_t>(t)] = step.inverse();
    }

    // ---- Render ---------------------------------------------------------
    std::vector<RenderedFrame> rendered;
    rendered.reserve(static_cast<size_t>(config.frames));
    for (int t = 0; t < config.frames; ++t) {
        std::vector<Box> boxes;
        boxes.reserve(static_cast<size_t>(n_objects));
        for (int i = 0; i < n_objects; ++i)
            boxes.push_back({centers[static_cast<size_t>(i)][static_cast<size_t>(t)],
                             objects[static_cast<size_t>(i)].size});
        rendered.push_back(render(cam, data.world_from_cam[static_cast<size_t>(t)], boxes, ground_y));
        data.depth.push_back(rendered.back().depth);
    }

    // ---- Ground-truth tubes ----------------------------------------------
    data.gt_tubes.resize(static_cast<size_t>(n_objects));
    for (int i = 0; i < n_objects; ++i) data.gt_tubes[static_cast<size_t>(i)].id = i;
    for (int t = 0; t < config.frames; ++t) {
        const RigidMotion cam_from_world = data.world_from_cam[static_cast<size_t>(t)].inverse();
        for (int i = 0; i < n_objects; ++i) {
            BitMask mask(cam.width, cam.height);
            long area = 0;
            for (int y = 0; y < cam.height; ++y) {
                for (int x = 0; x < cam.width; ++x) {
                    if (rendered[static_cast<size_t>(t)].id[static_cast<size_t>(y) * cam.width + x] == i) {
                        mask.set(x, y);
                        ++area;
                    }
                }
            }
            if (area < config.min_mask_pixels) continue;
            GtFrame gf;
            gf.frame = t;
            gf.mask = std::move(mask);
            gf.position_world = centers[static_cast<size_t>(i)][static_cast<size_t>(t)];
            gf.position_cam = cam_from_world.apply(gf.position_world);
            const int t_next = std::min(t + 1, config.frames - 1);
            const int t_base = t_next == t ? t - 1 : t;
            gf.velocity_world = centers[static_cast<size_t>(i)][static_cast<size_t>(t_next)] -
                                centers[static_cast<size_t>(i)][static_cast<size_t>(t_base < 0 ? 0 : t_base)];
            data.gt_tubes[static_cast<size_t>(i)].frames.push_back(std::move(gf));
        }
    }

    // ---- Quad matches -----------------------------------------------------
    data.matches.resize(static_cast<size_t>(config.frames));
    data.match_is_outlier.resize(static_cast<size_t>(config.frames));
    for (int t = 1; t < config.frames; ++t) {
        const RigidMotion &pose_prev = data.world_from_cam[static_cast<size_t>(t - 1)];
        const RigidMotion &pose_cur = data.world_from_cam[static_cast<size_t>(t)];
        const RigidMotion prev_cam_from_world = pose_prev.inverse();
        const RigidMotion cur_cam_from_world = pose_cur.inverse();
        const RenderedFrame &prev_frame = rendered[static_cast<size_t>(t - 1)];

        auto emit_match = [&](const Eigen::Vector3d &world_prev, const Eigen::Vector3d &world_cur,
                              std::uint64_t stream, std::uint64_t entity) {
            const Eigen::Vector3d p_prev = prev_cam_from_world.apply(world_prev);
            const Eigen::Vector3d p_cur = cur_cam_from_world.apply(world_cur);
            if (!(p_prev.z() > 0.3) || !(p_cur.z() > 0.3)) return;

            sceneflow::QuadMatch q;
            q.frame = t;
            q.left_prev = geometry::project(p_prev, cam);
            q.right_prev = geometry::project_right(p_prev, cam);
            q.left_cur = geometry::project(p_cur, cam);
            q.right_cur = geometry::project_right(p_cur, cam);
            for (const auto *px : {&q.left_prev, &q.right_prev, &q.left_cur, &q.right_cur})
                if (!cam.contains(*px)) return;

            if (config.match_noise_px > 0.0) {
                KeyedRng noise(config.seed, kMatchNoise, entity ^ (stream << 32),
                               static_cast<std::uint64_t>(t));
                for (auto *px : {&q.left_prev, &q.right_prev, &q.left_cur, &q.right_cur}) {
                    px->x() += noise.normal(0.0, config.match_noise_px);
                    px->y() += noise.normal(0.0, config.match_noise_px);
                }
            }

            bool outlier = false;
            if (config.match_outlier_rate > 0.0) {
                KeyedRng orng(config.seed, kMatchOutlier, entity ^ (stream << 32),
                              static_cast<std::uint64_t>(t));
                if (orng.bernoulli(config.match_outlier_rate)) {
                    outlier = true;
                    Eigen::Vector2d *targets[4] = {&q.left_prev, &q.right_prev, &q.left_cur,
                                                   &q.right_cur};
                    Eigen::Vector2d *victim = targets[orng.uniform_int(0, 3)];
                    // Displace toward the image center so corruption survives
                    // the bounds check.
                    const double dy_sign = victim->y() < cam.height / 2.0 ? 1.0 : -1.0;
                    victim->x() += orng.normal(0.0, 12.0);
                    victim->y() += dy_sign * (config.outlier_min_dy_px + std::abs(orng.normal(0.0, 8.0)));
                }
            }
            for (const auto *px : {&q.left_prev, &q.right_prev, &q.left_cur, &q.right_cur})
                if (!cam.contains(*px)) return;  // noise or corruption left the image
            data.matches[static_cast<size_t>(t)].push_back(q);
            data.match_is_outlier[static_cast<size_t>(t)].push_back(outlier);
        };

        // Static structure: points sampled from ground pixels of frame t-1.
        for (int k = 0; k < config.matches_static; ++k) {
            KeyedRng rng(config.seed, kMatchStatic, static_cast<std::uint64_t>(k),
                         static_cast<std::uint64_t>(t));
            Eigen::Vector3d world_point = Eigen::Vector3d::Zero();
            bool found = false;
            for (int attempt = 0; attempt < 16 && !found; ++attempt) {
                const int x = rng.uniform_int(0, cam.width - 1);
                const int y = rng.uniform_int(0, cam.height - 1);
                if (prev_frame.id[static_cast<size_t>(y) * cam.width + x] != kGroundId) continue;
                const Eigen::Vector3d p_cam = geometry::backproject(
                    {static_cast<double>(x), static_cast<double>(y)}, prev_frame.depth.at(x, y), cam);
                world_point = pose_prev.apply(p_cam);
                found = true;
            }
            if (found) emit_match(world_point, world_point, kMatchStatic, static_cast<std::uint64_t>(k));
        }

        // Object surface points move with the object between the two frames.
        for (int i = 0; i < n_objects; ++i) {
            const Eigen::Vector3d motion = centers[static_cast<size_t>(i)][static_cast<size_t>(t)] -
                                           centers[static_cast<size_t>(i)][static_cast<size_t>(t - 1)];
            for (int k = 0; k < config.matches_per_object; ++k) {
                KeyedRng rng(config.seed, kMatchObject,
                             static_cast<std::uint64_t>(i) * 10007ull + static_cast<std::uint64_t>(k),
                             static_cast<std::uint64_t>(t));
                bool found = false;
                Eigen::Vector3d world_point = Eigen::Vector3d::Zero();
                for (int attempt = 0; attempt < 24 && !found; ++attempt) {
                    const int x = rng.uniform_int(0, cam.width - 1);
                    const int y = rng.uniform_int(0, cam.height - 1);
                    if (prev_frame.id[static_cast<size_t>(y) * cam.width + x] != i) continue;
                    const Eigen::Vector3d p_cam = geometry::backproject(
                        {static_cast<double>(x), static_cast<double>(y)}, prev_frame.depth.at(x, y),
                        cam);
                    world_point = pose_prev.apply(p_cam);
                    found = true;
                }
                if (found)
                    emit_match(world_point, world_point + motion, kMatchObject,
                               static_cast<std::uint64_t>(i) * 10007ull + static_cast<std::uint64_t>(k));
            }
        }
    }

    // ---- Proposals --------------------------------------------------------
    data.proposal_frames.resize(static_cast<size_t>(config.frames));
    for (int t = 0; t < config.frames; ++t) {
        auto &frame_props = data.proposal_frames[static_cast<size_t>(t)];

        for (int i = 0; i < n_objects; ++i) {
            const GtTube &gt = data.gt_tubes[static_cast<size_t>(i)];
            const auto it = std::find_if(gt.frames.begin(), gt.frames.end(),
                                         [t](const GtFrame &f) { return f.frame == t; });
            if (it == gt.frames.end()) continue;

            KeyedRng rng(config.seed, kProposal, static_cast<std::uint64_t>(i),
                         static_cast<std::uint64_t>(t));
            if (config.drop_probability > 0.0 && rng.bernoulli(config.drop_probability)) continue;

            proposals::FrameProposal prop;
            prop.frame = t;
            prop.mask = it->mask;
            if (config.mask_jitter_px > 0.0) {
                const int dx = static_cast<int>(std::lround(rng.normal(0.0, config.mask_jitter_px)));
                const int dy = static_cast<int>(std::lround(rng.normal(0.0, config.mask_jitter_px)));
                if (dx != 0 || dy != 0) prop.mask = prop.mask.translated(dx, dy);
            }
            prop.objectness = rng.uniform(config.true_objectness_min, config.true_objectness_max);
            KeyedRng prng(config.seed, kPosterior, static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(t));
            prop.class_posterior = random_posterior(prng, i % 80, prng.uniform(0.5, 0.9));
            frame_props.push_back(std::move(prop));
        }

        for (int j = 0; j < config.clutter_per_frame; ++j) {
            const std::uint64_t entity = 1000000ull + static_cast<std::uint64_t>(j);
            KeyedRng pos_rng(config.seed, kClutterPosition, entity,
                             config.clutter_persistent ? 0ull : static_cast<std::uint64_t>(t));
            Eigen::Vector2d center_px;
            bool visible = false;
            for (int attempt = 0; attempt < 24 && !visible; ++attempt) {
                const double z = pos_rng.uniform(config.clutter_z_min, config.clutter_z_max);
                const double x = pos_rng.uniform(-config.clutter_x_abs, config.clutter_x_abs);
                const Eigen::Vector3d ground_point(x, ground_y, z);
                const Eigen::Vector3d p_cam =
                    data.world_from_cam[static_cast<size_t>(t)].inverse().apply(ground_point);
                if (!(p_cam.z() > 1.0)) continue;
                center_px = geometry::project(p_cam, cam);
                if (!cam.contains(center_px)) continue;
                // Ground-plane clutter: the sampled point must actually be
                // visible ground, not the surface of an object.
                const int px = static_cast<int>(std::lround(center_px.x()));
                const int py = static_cast<int>(std::lround(center_px.y()));
                visible = rendered[static_cast<size_t>(t)]
                              .id[static_cast<size_t>(py) * cam.width + px] == kGroundId;
            }
            if (!visible) continue;

            KeyedRng mask_rng(config.seed, kClutterMask, entity, static_cast<std::uint64_t>(t));
            const int half_w = mask_rng.uniform_int(config.clutter_mask_min_px, config.clutter_mask_max_px) / 2;
            const int half_h = mask_rng.uniform_int(config.clutter_mask_min_px, config.clutter_mask_max_px) / 2;
            const int jitter = static_cast<int>(config.clutter_center_jitter_px);
            const int cx_px = static_cast<int>(std::lround(center_px.x())) +
                              (jitter > 0 ? mask_rng.uniform_int(-jitter, jitter) : 0);
            const int cy_px = static_cast<int>(std::lround(center_px.y())) +
                              (jitter > 0 ? mask_rng.uniform_int(-jitter, jitter) : 0);

            BitMask mask = BitMask::filled_rect(cam.width, cam.height, cx_px - half_w, cy_px - half_h,
                                                cx_px + half_w, cy_px + half_h);
            if (mask.area() < 1) continue;

            proposals::FrameProposal prop;
            prop.frame = t;
            prop.mask = std::move(mask);
            prop.objectness =
                mask_rng.uniform(config.clutter_objectness_min, config.clutter_objectness_max);
            KeyedRng prng(config.seed, kPosterior, entity, static_cast<std::uint64_t>(t));
            prop.class_posterior = random_posterior(prng, -1, 0.0);
            frame_props.push_back(std::move(prop));
        }

        for (size_t k = 0; k < frame_props.size(); ++k)
            frame_props[k].index = static_cast<int>(k);
    }

    return data;
}

}  // namespace tubes::synth
