#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tubes/pipeline.hpp"

namespace tubes::cli {

// Exit codes shared by all commands.
constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericalError = 3;

struct SynthCmd {
    std::string config_path;  // SceneConfig JSON
    std::string out_dir;
    bool force = false;
};
int cmd_synth(const SynthCmd &args);

struct FlowCmd {
    std::string matches_path;
    std::string calib_path;
    std::string out_dir;
    std::string config_path;  // optional PipelineConfig JSON
};
int cmd_flow(const FlowCmd &args);

struct TubesCmd {
    std::string proposals_path;
    std::string depth_dir;
    std::string ego_path;
    std::string flow_path;
    std::string calib_path;
    std::string config_path;  // optional
    std::string out_dir;
    bool keep_all = false;        // emit unselected tubes too
    bool dump_problems = false;   // write per-batch selection instances
};
int cmd_tubes(const TubesCmd &args);

struct EvalCmd {
    std::string gt_path;
    std::string tubes_path;
    std::string out_dir;
    double iou_threshold = 0.5;
};
int cmd_eval(const EvalCmd &args);

struct TuneCmd {
    std::vector<std::string> dataset_dirs;  // synth-layout directories with gt_tubes.json
    int budget = 20;
    std::uint64_t seed = 1;
    std::string out_config;
};
int cmd_tune(const TuneCmd &args);

struct ValidateCmd {
    std::string dataset_dir;
};
int cmd_validate(const ValidateCmd &args);

/// Reads a synth-layout dataset directory back into memory. Egomotion and
/// poses are left for estimation.
synth::Dataset load_dataset_dir(const std::string &dir);

io::json scene_config_to_json(const synth::SceneConfig &cfg);
synth::SceneConfig scene_config_from_json(const io::json &j);

/// Writes the standard dataset layout; shared by cmd_synth and tests.
void write_dataset(const synth::Dataset &data, const std::string &out_dir);

}  // namespace tubes::cli
