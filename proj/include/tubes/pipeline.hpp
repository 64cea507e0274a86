#pragma once

#include <cstdint>
#include <string>

#include "tubes/coselect/selection.hpp"
#include "tubes/io/formats.hpp"
#include "tubes/proposals/proposal.hpp"
#include "tubes/scoring/scoring.hpp"
#include "tubes/sceneflow/scene_flow.hpp"
#include "tubes/synth/generator.hpp"
#include "tubes/tracking/tracker.hpp"

namespace tubes::pipeline {

/// Every knob of the pipeline in one serializable bag. Defaults match the
/// documented per-module defaults; a run embeds its config in the manifest.
struct PipelineConfig {
    sceneflow::FlowConfig flow;
    sceneflow::EgomotionConfig egomotion;
    proposals::LocalizeConfig localize;
    tracking::TrackingConfig tracking;
    scoring::ScoringConfig scoring;
    coselect::SelectConfig coselect;
    std::uint64_t seed = 0;
};

io::json config_to_json(const PipelineConfig &cfg);
PipelineConfig config_from_json(const io::json &j);

/// In-memory source over a synthetic dataset. Egomotion is estimated from
/// the quad matches unless use_gt_ego is set; scene flow and localization are
/// computed per frame on demand.
class DatasetSource : public tracking::SequenceSource {
public:
    DatasetSource(const synth::Dataset &data, const PipelineConfig &cfg, bool use_gt_ego = false);

    geometry::CameraIntrinsics camera() const override { return data_.camera; }
    int num_frames() const override { return data_.frames; }
    tracking::FrameContext load_frame(int t) override;

    const std::vector<io::EgoRecord> &ego_records() const { return ego_records_; }
    const std::vector<std::vector<sceneflow::SceneFlowVector>> &flows() const { return flows_; }

private:
    const synth::Dataset &data_;
    PipelineConfig cfg_;
    std::vector<io::EgoRecord> ego_records_;  // per pair index t >= 1
    std::vector<geometry::RigidMotion> ego_used_;  // identity at 0 and on failure
    std::vector<std::vector<sceneflow::SceneFlowVector>> flows_;
};

/// File-backed source streaming proposals, depth, egomotion and flow files
/// frame by frame; requires frame-sorted JSONL inputs.
class FileSource : public tracking::SequenceSource {
public:
    FileSource(const std::string &proposals_path, const std::string &depth_dir,
               const std::string &ego_path, const std::string &flow_path,
               const geometry::CameraIntrinsics &cam, const PipelineConfig &cfg);

    geometry::CameraIntrinsics camera() const override { return cam_; }
    int num_frames() const override { return num_frames_; }
    tracking::FrameContext load_frame(int t) override;

private:
    geometry::CameraIntrinsics cam_;
    PipelineConfig cfg_;
    int num_frames_ = 0;
    std::string depth_dir_;
    std::vector<std::vector<proposals::FrameProposal>> proposal_frames_;
    std::vector<io::EgoRecord> ego_by_frame_;
    std::vector<std::vector<sceneflow::SceneFlowVector>> flows_by_frame_;
};

std::string depth_frame_path(const std::string &depth_dir, int frame);

struct PipelineOutput {
    tracking::TrackingResult tracking;
    coselect::CoselectResult coselection;
    std::vector<int> selected_ids;
};

/// Full pass: enumerate tubes, score them, co-select per batch.
PipelineOutput run_pipeline(tracking::SequenceSource &source, const PipelineConfig &cfg);

}  // namespace tubes::pipeline
