#include "tubes/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <stdexcept>

namespace tubes::pipeline {

using io::json;

json config_to_json(const PipelineConfig &cfg) {
    return {
        {"flow",
         {{"epipolar_tol_px", cfg.flow.epipolar_tol_px}, {"cycle_tol_px", cfg.flow.cycle_tol_px}}},
        {"egomotion",
         {{"max_iterations", cfg.egomotion.max_iterations},
          {"step_tol", cfg.egomotion.step_tol},
          {"mad_multiplier", cfg.egomotion.mad_multiplier}}},
        {"localize", {{"min_points", cfg.localize.min_points}}},
        {"tracking",
         {{"process_sigma_pos", cfg.tracking.noise.process_sigma_pos},
          {"process_sigma_vel", cfg.tracking.noise.process_sigma_vel},
          {"obs_sigma_pos", cfg.tracking.noise.obs_sigma_pos},
          {"obs_sigma_vel", cfg.tracking.noise.obs_sigma_vel},
          {"gate_threshold", cfg.tracking.gate_threshold},
          {"assoc_min", cfg.tracking.assoc_min},
          {"window", cfg.tracking.window},
          {"max_misses", cfg.tracking.max_misses},
          {"min_length", cfg.tracking.min_length},
          {"seed_velocity_cov_inflation", cfg.tracking.seed_velocity_cov_inflation},
          {"seed_no_velocity_cov_inflation", cfg.tracking.seed_no_velocity_cov_inflation}}},
        {"scoring",
         {{"w1", cfg.scoring.w1},
          {"w2", cfg.scoring.w2},
          {"w3", cfg.scoring.w3},
          {"alpha", cfg.scoring.alpha},
          {"beta", cfg.scoring.beta},
          {"area_gp", cfg.scoring.area_gp},
          {"iou_floor", cfg.scoring.iou_floor},
          {"objectness_floor", cfg.scoring.objectness_floor}}},
        {"coselect",
         {{"eps1", cfg.coselect.eps1},
          {"eps2", cfg.coselect.eps2},
          {"batch_len", cfg.coselect.batch_len},
          {"node_budget", cfg.coselect.node_budget}}},
        {"seed", cfg.seed}};
}

PipelineConfig config_from_json(const json &j) {
    PipelineConfig cfg;
    if (j.contains("flow")) {
        cfg.flow.epipolar_tol_px = j["flow"].value("epipolar_tol_px", cfg.flow.epipolar_tol_px);
        cfg.flow.cycle_tol_px = j["flow"].value("cycle_tol_px", cfg.flow.cycle_tol_px);
    }
    if (j.contains("egomotion")) {
        const auto &e = j["egomotion"];
        cfg.egomotion.max_iterations = e.value("max_iterations", cfg.egomotion.max_iterations);
        cfg.egomotion.step_tol = e.value("step_tol", cfg.egomotion.step_tol);
        cfg.egomotion.mad_multiplier = e.value("mad_multiplier", cfg.egomotion.mad_multiplier);
    }
    if (j.contains("localize"))
        cfg.localize.min_points = j["localize"].value("min_points", cfg.localize.min_points);
    if (j.contains("tracking")) {
        const auto &t = j["tracking"];
        cfg.tracking.noise.process_sigma_pos =
            t.value("process_sigma_pos", cfg.tracking.noise.process_sigma_pos);
        cfg.tracking.noise.process_sigma_vel =
            t.value("process_sigma_vel", cfg.tracking.noise.process_sigma_vel);
        cfg.tracking.noise.obs_sigma_pos = t.value("obs_sigma_pos", cfg.tracking.noise.obs_sigma_pos);
        cfg.tracking.noise.obs_sigma_vel = t.value("obs_sigma_vel", cfg.tracking.noise.obs_sigma_vel);
        cfg.tracking.gate_threshold = t.value("gate_threshold", cfg.tracking.gate_threshold);
        cfg.tracking.assoc_min = t.value("assoc_min", cfg.tracking.assoc_min);
        cfg.tracking.window = t.value("window", cfg.tracking.window);
        cfg.tracking.max_misses = t.value("max_misses", cfg.tracking.max_misses);
        cfg.tracking.min_length = t.value("min_length", cfg.tracking.min_length);
        cfg.tracking.seed_velocity_cov_inflation =
            t.value("seed_velocity_cov_inflation", cfg.tracking.seed_velocity_cov_inflation);
        cfg.tracking.seed_no_velocity_cov_inflation =
            t.value("seed_no_velocity_cov_inflation", cfg.tracking.seed_no_velocity_cov_inflation);
    }
    if (j.contains("scoring")) {
        const auto &s = j["scoring"];
        cfg.scoring.w1 = s.value("w1", cfg.scoring.w1);
        cfg.scoring.w2 = s.value("w2", cfg.scoring.w2);
        cfg.scoring.w3 = s.value("w3", cfg.scoring.w3);
        cfg.scoring.alpha = s.value("alpha", cfg.scoring.alpha);
        cfg.scoring.beta = s.value("beta", cfg.scoring.beta);
        cfg.scoring.area_gp = s.value("area_gp", cfg.scoring.area_gp);
        cfg.scoring.iou_floor = s.value("iou_floor", cfg.scoring.iou_floor);
        cfg.scoring.objectness_floor = s.value("objectness_floor", cfg.scoring.objectness_floor);
    }
    if (j.contains("coselect")) {
        const auto &c = j["coselect"];
        cfg.coselect.eps1 = c.value("eps1", cfg.coselect.eps1);
        cfg.coselect.eps2 = c.value("eps2", cfg.coselect.eps2);
        cfg.coselect.batch_len = c.value("batch_len", cfg.coselect.batch_len);
        cfg.coselect.node_budget = c.value("node_budget", cfg.coselect.node_budget);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.scoring.validate();
    return cfg;
}

DatasetSource::DatasetSource(const synth::Dataset &data, const PipelineConfig &cfg, bool use_gt_ego)
    : data_(data), cfg_(cfg) {
    ego_used_.resize(static_cast<size_t>(data_.frames), geometry::RigidMotion::identity());
    flows_.resize(static_cast<size_t>(data_.frames));

    for (int t = 1; t < data_.frames; ++t) {
        const auto filtered = sceneflow::cyclic_filter(data_.matches[static_cast<size_t>(t)],
                                                       cfg_.flow.epipolar_tol_px,
                                                       cfg_.flow.cycle_tol_px);
        io::EgoRecord rec;
        rec.frame = t;
        if (use_gt_ego) {
            rec.motion = data_.ego[static_cast<size_t>(t)];
            rec.ok = true;
        } else {
            const auto est = sceneflow::estimate_egomotion(
                filtered, data_.camera, geometry::RigidMotion::identity(), cfg_.egomotion);
            rec.ok = est.ok;
            rec.motion = est.ok ? est.motion : geometry::RigidMotion::identity();
            rec.rms_px = est.rms_px;
            rec.matches_used = est.matches_used;
        }
        ego_records_.push_back(rec);
        ego_used_[static_cast<size_t>(t)] = rec.motion;
        flows_[static_cast<size_t>(t)] = sceneflow::compute_scene_flow(filtered, data_.camera).flows;
    }
}

tracking::FrameContext DatasetSource::load_frame(int t) {
    tracking::FrameContext ctx;
    ctx.frame = t;
    ctx.depth = data_.depth[static_cast<size_t>(t)];
    ctx.ego = ego_used_[static_cast<size_t>(t)];
    ctx.ego_ok = t == 0 || ego_records_[static_cast<size_t>(t - 1)].ok;
    ctx.proposals = data_.proposal_frames[static_cast<size_t>(t)];

    // Localization uses the flow pair departing this frame (t -> t+1).
    static const std::vector<sceneflow::SceneFlowVector> kNoFlows;
    const auto &flows =
        (t + 1 < data_.frames) ? flows_[static_cast<size_t>(t + 1)] : kNoFlows;
    const geometry::RigidMotion ego_next =
        (t + 1 < data_.frames) ? ego_used_[static_cast<size_t>(t + 1)] : geometry::RigidMotion::identity();
    proposals::localize_frame(ctx.proposals, ctx.depth, flows, ego_next, data_.camera, cfg_.localize);
    return ctx;
}

std::string depth_frame_path(const std::string &depth_dir, int frame) {
    char name[32];
    std::snprintf(name, sizeof(name), "depth_%06d.dpt", frame);
    return depth_dir + "/" + name;
}

FileSource::FileSource(const std::string &proposals_path, const std::string &depth_dir,
                       const std::string &ego_path, const std::string &flow_path,
                       const geometry::CameraIntrinsics &cam, const PipelineConfig &cfg)
    : cam_(cam), cfg_(cfg), depth_dir_(depth_dir) {
    proposal_frames_ = io::load_proposals(proposals_path);
    flows_by_frame_ = io::load_flows(flow_path);

    const auto ego_records = io::load_ego(ego_path);
    int max_frame = static_cast<int>(proposal_frames_.size()) - 1;
    for (const auto &r : ego_records) max_frame = std::max(max_frame, r.frame);
    num_frames_ = max_frame + 1;

    ego_by_frame_.resize(static_cast<size_t>(num_frames_));
    for (auto &r : ego_by_frame_) r.ok = false;  // frames without a record fall back to identity
    for (const auto &r : ego_records) {
        if (r.frame <= 0 || r.frame >= num_frames_)
            throw std::runtime_error("egomotion record frame out of range");
        ego_by_frame_[static_cast<size_t>(r.frame)] = r;
    }
    if (flows_by_frame_.size() < static_cast<size_t>(num_frames_) + 1)
        flows_by_frame_.resize(static_cast<size_t>(num_frames_) + 1);
    proposal_frames_.resize(static_cast<size_t>(num_frames_));
}

tracking::FrameContext FileSource::load_frame(int t) {
    tracking::FrameContext ctx;
    ctx.frame = t;
    ctx.depth = geometry::DepthMap::load(depth_frame_path(depth_dir_, t));
    if (ctx.depth.width() != cam_.width || ctx.depth.height() != cam_.height)
        throw std::runtime_error("depth dimensions do not match calibration");
    if (t == 0) {
        ctx.ego = geometry::RigidMotion::identity();
        ctx.ego_ok = true;
    } else {
        ctx.ego = ego_by_frame_[static_cast<size_t>(t)].motion;
        ctx.ego_ok = ego_by_frame_[static_cast<size_t>(t)].ok;
    }
    ctx.proposals = proposal_frames_[static_cast<size_t>(t)];

    const auto &flows = flows_by_frame_[static_cast<size_t>(t) + 1];
    const geometry::RigidMotion ego_next = (t + 1 < num_frames_)
                                               ? ego_by_frame_[static_cast<size_t>(t + 1)].motion
                                               : geometry::RigidMotion::identity();
    proposals::localize_frame(ctx.proposals, ctx.depth, flows, ego_next, cam_, cfg_.localize);
    return ctx;
}

PipelineOutput run_pipeline(tracking::SequenceSource &source, const PipelineConfig &cfg) {
    PipelineOutput out;
    out.tracking = tracking::enumerate_tubes(source, cfg.tracking);
    for (auto &tube : out.tracking.tubes) scoring::score_tube(tube, cfg.scoring);
    out.coselection = coselect::coselect_batches(out.tracking.tubes, cfg.coselect);
    out.selected_ids = out.coselection.selected_ids;
    return out;
}

}  // namespace tubes::pipeline
