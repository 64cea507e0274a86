#include "tubes/tracking/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tubes::tracking {

using geometry::BitMask;
using geometry::CameraIntrinsics;
using geometry::RigidMotion;

std::vector<int> gate(const KalmanState &predicted, const std::vector<TrackObservation> &candidates,
                      double gate_threshold) {
    std::vector<int> kept;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (position_mahalanobis2(predicted, candidates[i].position_world) <= gate_threshold)
            kept.push_back(static_cast<int>(i));
    }
    return kept;
}

std::optional<Association> associate(const KalmanState &predicted,
                                     const geometry::BitMask &predicted_mask,
                                     const std::vector<TrackObservation> &candidates,
                                     const std::vector<int> &gated, double assoc_min) {
    std::optional<Association> best;
    double best_objectness = -1.0;
    for (int idx : gated) {
        const TrackObservation &cand = candidates[idx];
        const double d2 = position_mahalanobis2(predicted, cand.position_world);
        const double iou = geometry::mask_iou(predicted_mask, cand.proposal->mask);
        const double joint = iou * std::exp(-0.5 * d2);
        if (joint < assoc_min) continue;
        const double objectness = cand.proposal->objectness;
        const bool better =
            !best || joint > best->joint ||
            (joint == best->joint &&
             (objectness > best_objectness ||
              (objectness == best_objectness && cand.proposal_index < candidates[best->candidate].proposal_index)));
        if (better) {
            best = Association{idx, joint};
            best_objectness = objectness;
        }
    }
    return best;
}

namespace {

struct WindowEntry {
    FrameContext ctx;
    std::vector<TrackObservation> observations;  // valid_3d proposals only
};

/// Keeps the last few frames addressable by absolute frame index.
class ContextWindow {
public:
    void push(WindowEntry &&entry, int capacity) {
        entries_.push_back(std::move(entry));
        while (static_cast<int>(entries_.size()) > capacity) {
            entries_.pop_front();
            ++first_;
        }
    }
    const WindowEntry *get(int frame) const {
        if (frame < first_ || frame >= first_ + static_cast<int>(entries_.size())) return nullptr;
        return &entries_[static_cast<size_t>(frame - first_)];
    }
    WindowEntry &back() { return entries_.back(); }

private:
    std::deque<WindowEntry> entries_;
    int first_ = 0;
};

struct LiveTube {
    int id = -1;
    std::vector<TubeFrame> frames;
    KalmanState state;  // posterior at frames.back()
    int miss_streak = 0;
    bool ego_fallback = false;
};

KalmanState seed_state(const TrackObservation &obs, const TrackingConfig &cfg) {
    KalmanState s;
    s.mean.head<3>() = obs.position_world;
    s.mean.tail<3>() = obs.has_velocity ? obs.velocity_world : Eigen::Vector3d::Zero();
    const double pos_var = cfg.noise.obs_sigma_pos * cfg.noise.obs_sigma_pos;
    const double vel_inflation =
        obs.has_velocity ? cfg.seed_velocity_cov_inflation : cfg.seed_no_velocity_cov_inflation;
    const double vel_var = vel_inflation * cfg.noise.obs_sigma_vel * cfg.noise.obs_sigma_vel;
    s.covariance.setZero();
    s.covariance.topLeftCorner<3, 3>() = pos_var * Eigen::Matrix3d::Identity();
    s.covariance.bottomRightCorner<3, 3>() = vel_var * Eigen::Matrix3d::Identity();
    return s;
}

TrackObservation lift_observation(const proposals::FrameProposal &prop, int index,
                                  const RigidMotion &world_from_cam) {
    TrackObservation obs;
    obs.proposal_index = index;
    obs.proposal = &prop;
    obs.position_world = world_from_cam.apply(prop.position);
    obs.velocity_world = world_from_cam.rotation * prop.velocity;
    obs.has_velocity = prop.has_velocity;
    return obs;
}

bool apply_update(KalmanState &state, const TrackObservation &obs, const KalmanNoise &noise) {
    if (obs.has_velocity) {
        Eigen::Matrix<double, 6, 1> z;
        z.head<3>() = obs.position_world;
        z.tail<3>() = obs.velocity_world;
        return kf_update(state, z, noise);
    }
    return kf_update_position(state, obs.position_world, noise);
}

/// Mask prediction for the step prev_frame -> prev_frame+1. The object moves
/// by the given world-frame velocity, expressed in the previous camera frame;
/// `ego` maps the previous camera frame into the target one.
BitMask predict_mask_step(const BitMask &source_mask, const geometry::DepthMap &source_depth,
                          const RigidMotion &ego, const Eigen::Vector3d &velocity_world,
                          const RigidMotion &world_from_source_cam, const CameraIntrinsics &cam) {
    const Eigen::Vector3d v_cam = world_from_source_cam.rotation.transpose() * velocity_world;
    return geometry::warp_mask(source_mask, source_depth, ego,
                               RigidMotion::from_translation(v_cam), cam);
}

void finalize_tube(LiveTube &&lt, const TrackingConfig &cfg, std::vector<Tube> &done) {
    while (!lt.frames.empty() && !lt.frames.back().has_inlier) lt.frames.pop_back();
    int inliers = 0;
    for (const auto &f : lt.frames) inliers += f.has_inlier ? 1 : 0;
    if (inliers < cfg.min_length) return;
    Tube tube;
    tube.id = lt.id;
    tube.frames = std::move(lt.frames);
    tube.ego_fallback = lt.ego_fallback;
    done.push_back(std::move(tube));
}

}  // namespace

TubeAssembler::TubeAssembler(const CameraIntrinsics &camera, const TrackingConfig &cfg)
    : camera_(camera), cfg_(cfg) {}

Tube TubeAssembler::assemble(int id, const std::vector<ChainLink> &chain,
                             const std::vector<const FrameContext *> &contexts,
                             const std::vector<RigidMotion> &world_from_cam) const {
    Tube tube;
    tube.id = id;
    if (chain.empty()) return tube;

    const int n = chain.front().frame;
    const int m = chain.back().frame;
    auto ctx_at = [&](int frame) -> const FrameContext & {
        return *contexts[static_cast<size_t>(frame - n)];
    };

    size_t link = 0;
    KalmanState state;
    for (int t = n; t <= m; ++t) {
        const FrameContext &ctx = ctx_at(t);
        if (!ctx.ego_ok) tube.ego_fallback = true;

        TubeFrame tf;
        tf.frame = t;

        const bool has_link = link < chain.size() && chain[link].frame == t;
        const TrackObservation obs =
            has_link ? lift_observation(ctx.proposals[static_cast<size_t>(chain[link].proposal_index)],
                                        chain[link].proposal_index, world_from_cam[static_cast<size_t>(t)])
                     : TrackObservation{};

        if (t == n) {
            // First frame initializes the filter; there is no prediction yet.
            state = seed_state(obs, cfg_);
            tf.predicted = state;
            tf.posterior = state;
            tf.has_inlier = true;
            tf.inlier = *obs.proposal;
            tf.obs_position_world = obs.position_world;
            tf.obs_velocity_world = obs.velocity_world;
            tube.frames.push_back(std::move(tf));
            ++link;
            continue;
        }

        const KalmanState predicted = kf_predict(state, cfg_.noise);
        tf.predicted = predicted;
        tf.has_prediction = true;

        const BitMask *source = tube.mask_at(t - 1);
        if (source) {
            tf.predicted_mask =
                predict_mask_step(*source, ctx_at(t - 1).depth, ctx.ego, predicted.velocity(),
                                  world_from_cam[static_cast<size_t>(t - 1)], camera_);
            tf.has_predicted_mask = true;
        }

        bool accepted = false;
        if (has_link &&
            position_mahalanobis2(predicted, obs.position_world) <= cfg_.gate_threshold) {
            KalmanState posterior = predicted;
            if (apply_update(posterior, obs, cfg_.noise)) {
                state = posterior;
                tf.posterior = posterior;
                tf.has_inlier = true;
                tf.inlier = *obs.proposal;
                tf.obs_position_world = obs.position_world;
                tf.obs_velocity_world = obs.velocity_world;
                accepted = true;
            }
        }
        if (!accepted) {
            state = predicted;
            tf.posterior = predicted;
        }
        if (has_link) ++link;
        tube.frames.push_back(std::move(tf));
    }
    return tube;
}

namespace {

/// Walks backward from a seed observation, associating proposals in past
/// frames with the time-reversed motion model. Returns the supporting chain
/// in ascending frame order (the seed is the last link).
std::vector<ChainLink> backward_chain(const TrackObservation &seed, int seed_frame,
                                      const ContextWindow &window,
                                      const std::vector<RigidMotion> &world_from_cam,
                                      std::set<std::pair<int, int>> &claimed,
                                      const CameraIntrinsics &cam, const TrackingConfig &cfg) {
    std::vector<ChainLink> chain{{seed_frame, seed.proposal_index}};

    KalmanState state = seed_state(seed, cfg);
    state.mean.tail<3>() *= -1.0;  // time reversal

    BitMask source_mask = seed.proposal->mask;
    int source_frame = seed_frame;
    int misses = 0;
    const int lowest = std::max(0, seed_frame - cfg.window + 1);
    // Consecutive support required while the seed velocity is still wide.
    const int init_until = seed_frame - std::min(cfg.min_init_support - 1, seed_frame);

    for (int t = seed_frame - 1; t >= lowest; --t) {
        const WindowEntry *cur = window.get(t);
        const WindowEntry *next = window.get(t + 1);
        if (!cur || !next) break;

        state = kf_predict(state, cfg.noise);
        // Chained prediction: after a miss the source is the warped mask.
        const BitMask pred_mask =
            predict_mask_step(source_mask, next->ctx.depth, next->ctx.ego.inverse(),
                              state.velocity(), world_from_cam[static_cast<size_t>(t + 1)], cam);

        std::vector<int> gated = gate(state, cur->observations, cfg.gate_threshold);
        gated.erase(std::remove_if(gated.begin(), gated.end(),
                                   [&](int idx) {
                                       return claimed.count(
                                           {t, cur->observations[idx].proposal_index});
                                   }),
                    gated.end());

        const auto assoc = associate(state, pred_mask, cur->observations, gated, cfg.assoc_min);
        if (assoc) {
            TrackObservation obs = cur->observations[static_cast<size_t>(assoc->candidate)];
            obs.velocity_world *= -1.0;  // observed velocity in reversed time
            if (apply_update(state, obs, cfg.noise)) {
                chain.push_back({t, obs.proposal_index});
                claimed.insert({t, obs.proposal_index});
                source_mask = obs.proposal->mask;
                source_frame = t;
                misses = 0;
                continue;
            }
        }
        if (t >= init_until) {
            // Missed during initialization: reject the seed and release its claims.
            for (const auto &link : chain)
                if (link.frame != seed_frame) claimed.erase({link.frame, link.proposal_index});
            return {};
        }
        source_mask = pred_mask;
        ++misses;
        if (misses > cfg.max_misses) break;
    }
    (void)source_frame;
    std::reverse(chain.begin(), chain.end());
    return chain;
}

}  // namespace

TrackingResult enumerate_tubes(SequenceSource &source, const TrackingConfig &cfg) {
    const CameraIntrinsics cam = source.camera();
    const int total = source.num_frames();

    TrackingResult result;
    result.world_from_cam.reserve(static_cast<size_t>(total));
    result.ego_ok.reserve(static_cast<size_t>(total));

    ContextWindow window;
    std::vector<LiveTube> live;
    std::vector<Tube> done;
    int next_id = 0;

    const TubeAssembler assembler(cam, cfg);

    for (int t = 0; t < total; ++t) {
        FrameContext ctx = source.load_frame(t);
        ctx.frame = t;

        RigidMotion pose = RigidMotion::identity();
        if (t > 0) pose = result.world_from_cam.back().compose(ctx.ego.inverse());
        result.world_from_cam.push_back(pose);
        result.ego_ok.push_back(ctx.ego_ok);

        window.push(WindowEntry{std::move(ctx), {}}, cfg.window + 1);
        WindowEntry &entry = window.back();
        for (size_t i = 0; i < entry.ctx.proposals.size(); ++i) {
            const auto &prop = entry.ctx.proposals[i];
            if (!prop.valid_3d) continue;
            entry.observations.push_back(lift_observation(prop, static_cast<int>(i), pose));
        }

        // ---- Extend live tubes ----------------------------------------
        struct Claim {
            size_t tube_pos;
            int obs_idx;
            double joint;
        };
        std::vector<Claim> claims;
        std::vector<KalmanState> predicted(live.size());
        std::vector<BitMask> pred_masks(live.size());
        const WindowEntry *prev = window.get(t - 1);

        for (size_t h = 0; h < live.size(); ++h) {
            LiveTube &tube = live[h];
            if (!entry.ctx.ego_ok) tube.ego_fallback = true;
            predicted[h] = kf_predict(tube.state, cfg.noise);

            const BitMask *src = nullptr;
            if (!tube.frames.empty()) {
                const TubeFrame &last = tube.frames.back();
                src = last.has_inlier ? &last.inlier.mask
                                      : (last.has_predicted_mask ? &last.predicted_mask : nullptr);
            }
            if (src && prev) {
                pred_masks[h] = predict_mask_step(
                    *src, prev->ctx.depth, entry.ctx.ego, predicted[h].velocity(),
                    result.world_from_cam[static_cast<size_t>(t - 1)], cam);
            } else {
                pred_masks[h] = BitMask(cam.width, cam.height);
            }

            const std::vector<int> gated = gate(predicted[h], entry.observations, cfg.gate_threshold);
            for (int idx : gated) {
                const TrackObservation &cand = entry.observations[static_cast<size_t>(idx)];
                const double d2 = position_mahalanobis2(predicted[h], cand.position_world);
                const double iou = geometry::mask_iou(pred_masks[h], cand.proposal->mask);
                const double joint = iou * std::exp(-0.5 * d2);
                if (joint >= cfg.assoc_min) claims.push_back({h, idx, joint});
            }
        }

        // Contested proposals go to the highest joint probability; losers
        // fall through to their next-best candidate.
        std::stable_sort(claims.begin(), claims.end(), [&](const Claim &a, const Claim &b) {
            if (a.joint != b.joint) return a.joint > b.joint;
            if (a.tube_pos != b.tube_pos) return live[a.tube_pos].id < live[b.tube_pos].id;
            return a.obs_idx < b.obs_idx;
        });
        std::vector<int> tube_assignment(live.size(), -1);
        std::vector<char> obs_taken(entry.observations.size(), 0);
        for (const Claim &c : claims) {
            if (tube_assignment[c.tube_pos] >= 0 || obs_taken[static_cast<size_t>(c.obs_idx)]) continue;
            tube_assignment[c.tube_pos] = c.obs_idx;
            obs_taken[static_cast<size_t>(c.obs_idx)] = 1;
        }

        std::vector<LiveTube> survivors;
        survivors.reserve(live.size());
        std::set<std::pair<int, int>> claimed_this_step;
        for (size_t h = 0; h < live.size(); ++h) {
            LiveTube &tube = live[h];
            TubeFrame tf;
            tf.frame = t;
            tf.predicted = predicted[h];
            tf.has_prediction = true;
            tf.predicted_mask = std::move(pred_masks[h]);
            tf.has_predicted_mask = true;

            if (tube_assignment[h] >= 0) {
                const TrackObservation &obs =
                    entry.observations[static_cast<size_t>(tube_assignment[h])];
                KalmanState posterior = predicted[h];
                if (apply_update(posterior, obs, cfg.noise)) {
                    tube.state = posterior;
                    tf.posterior = posterior;
                    tf.has_inlier = true;
                    tf.inlier = *obs.proposal;
                    tf.obs_position_world = obs.position_world;
                    tf.obs_velocity_world = obs.velocity_world;
                    tube.miss_streak = 0;
                    claimed_this_step.insert({t, obs.proposal_index});
                }
            }
            if (!tf.has_inlier) {
                tube.state = predicted[h];
                tf.posterior = predicted[h];
                ++tube.miss_streak;
            }
            tube.frames.push_back(std::move(tf));

            if (tube.miss_streak > cfg.max_misses)
                finalize_tube(std::move(tube), cfg, done);
            else
                survivors.push_back(std::move(tube));
        }
        live = std::move(survivors);

        // ---- Seed new tubes from unassociated proposals ----------------
        for (const TrackObservation &obs : entry.observations) {
            if (claimed_this_step.count({t, obs.proposal_index})) continue;

            const std::vector<ChainLink> chain = backward_chain(
                obs, t, window, result.world_from_cam, claimed_this_step, cam, cfg);
            if (chain.empty()) continue;  // rejected during initialization

            std::vector<const FrameContext *> contexts;
            for (int f = chain.front().frame; f <= chain.back().frame; ++f)
                contexts.push_back(&window.get(f)->ctx);

            Tube assembled = assembler.assemble(next_id, chain, contexts, result.world_from_cam);
            if (assembled.inlier_count() == 0) continue;
            ++next_id;

            LiveTube lt;
            lt.id = assembled.id;
            lt.ego_fallback = assembled.ego_fallback;
            lt.state = assembled.frames.back().posterior;
            int trailing = 0;
            for (auto it = assembled.frames.rbegin(); it != assembled.frames.rend() && !it->has_inlier;
                 ++it)
                ++trailing;
            lt.miss_streak = trailing;
            lt.frames = std::move(assembled.frames);
            live.push_back(std::move(lt));
        }
    }

    for (auto &tube : live) finalize_tube(std::move(tube), cfg, done);

    std::sort(done.begin(), done.end(), [](const Tube &a, const Tube &b) { return a.id < b.id; });
    result.tubes = std::move(done);
    return result;
}

}  // namespace tubes::tracking
