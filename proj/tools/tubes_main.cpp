#include <CLI11.hpp>

#include "tubes/cli/commands.hpp"

int main(int argc, char **argv) {
    CLI::App app{"4D video-object tube proposals from stereo"};
    app.require_subcommand(1);

    tubes::cli::SynthCmd synth_args;
    auto *synth = app.add_subcommand("synth", "Generate a synthetic stereo dataset");
    synth->add_option("--config", synth_args.config_path, "Scene config JSON")->required();
    synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
    synth->add_flag("--force", synth_args.force, "Overwrite an existing dataset");

    tubes::cli::FlowCmd flow_args;
    auto *flow = app.add_subcommand("flow", "Estimate egomotion and sparse scene flow");
    flow->add_option("--matches", flow_args.matches_path, "Quad match JSONL")->required();
    flow->add_option("--calib", flow_args.calib_path, "Calibration JSON")->required();
    flow->add_option("--out", flow_args.out_dir, "Output directory")->required();
    flow->add_option("--config", flow_args.config_path, "Pipeline config JSON");

    tubes::cli::TubesCmd tubes_args;
    auto *tubes = app.add_subcommand("tubes", "Generate, score and co-select video tubes");
    tubes->add_option("--proposals", tubes_args.proposals_path, "Proposal JSONL")->required();
    tubes->add_option("--depth", tubes_args.depth_dir, "Depth file directory")->required();
    tubes->add_option("--ego", tubes_args.ego_path, "Egomotion JSONL")->required();
    tubes->add_option("--flow", tubes_args.flow_path, "Scene flow JSONL")->required();
    tubes->add_option("--calib", tubes_args.calib_path, "Calibration JSON")->required();
    tubes->add_option("--config", tubes_args.config_path, "Pipeline config JSON");
    tubes->add_option("--out", tubes_args.out_dir, "Output directory")->required();
    tubes->add_flag("--all", tubes_args.keep_all, "Emit unselected tubes too");
    tubes->add_flag("--dump-problems", tubes_args.dump_problems,
                    "Write per-batch selection instances");

    tubes::cli::EvalCmd eval_args;
    auto *eval = app.add_subcommand("eval", "CLEAR-MOT, recall and localization metrics");
    eval->add_option("--gt", eval_args.gt_path, "Ground-truth tube JSON")->required();
    eval->add_option("--tubes", eval_args.tubes_path, "Predicted tube JSON")->required();
    eval->add_option("--out", eval_args.out_dir, "Output directory")->required();
    eval->add_option("--iou", eval_args.iou_threshold, "Match IoU threshold");

    tubes::cli::TuneCmd tune_args;
    auto *tune = app.add_subcommand("tune", "Random-search scoring/selection parameters");
    tune->add_option("--dataset", tune_args.dataset_dirs, "Validation dataset directories")
        ->required();
    tune->add_option("--budget", tune_args.budget, "Number of candidates");
    tune->add_option("--seed", tune_args.seed, "Search seed");
    tune->add_option("--out", tune_args.out_config, "Tuned config output path")->required();

    tubes::cli::ValidateCmd validate_args;
    auto *validate = app.add_subcommand("validate", "Check a dataset directory");
    validate->add_option("--dataset", validate_args.dataset_dir, "Dataset directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tubes::cli::kUsageError;
    }

    if (synth->parsed()) return tubes::cli::cmd_synth(synth_args);
    if (flow->parsed()) return tubes::cli::cmd_flow(flow_args);
    if (tubes->parsed()) return tubes::cli::cmd_tubes(tubes_args);
    if (eval->parsed()) return tubes::cli::cmd_eval(eval_args);
    if (tune->parsed()) return tubes::cli::cmd_tune(tune_args);
    if (validate->parsed()) return tubes::cli::cmd_validate(validate_args);
    return tubes::cli::kUsageError;
}
