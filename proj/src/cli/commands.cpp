#include "tubes/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "tubes/synth/keyed_rng.hpp"

namespace tubes::cli {

namespace fs = std::filesystem;
using io::json;
using pipeline::PipelineConfig;

namespace {

json load_json_file(const std::string &path) { return json::parse(io::read_file(path)); }

PipelineConfig load_pipeline_config(const std::string &path) {
    if (path.empty()) return {};
    return pipeline::config_from_json(load_json_file(path));
}

eval::TrackSet tracks_from_pipeline(const pipeline::PipelineOutput &out,
                                    const geometry::CameraIntrinsics &cam) {
    const json j = io::tubes_to_json(out.tracking, out.selected_ids, cam, /*selected_only=*/true);
    return io::tracks_from_tube_json(j);
}

}  // namespace

json scene_config_to_json(const synth::SceneConfig &cfg) {
    json j = {{"seed", cfg.seed},
              {"frames", cfg.frames},
              {"camera", io::camera_to_json(cfg.camera)},
              {"camera_height", cfg.camera_height},
              {"ego_forward_speed", cfg.ego_forward_speed},
              {"ego_yaw_rate", cfg.ego_yaw_rate},
              {"n_objects", cfg.n_objects},
              {"object_size_min", cfg.object_size_min},
              {"object_size_max", cfg.object_size_max},
              {"object_height_min", cfg.object_height_min},
              {"object_height_max", cfg.object_height_max},
              {"speed_min", cfg.speed_min},
              {"speed_max", cfg.speed_max},
              {"spawn_z_min", cfg.spawn_z_min},
              {"spawn_z_max", cfg.spawn_z_max},
              {"spawn_x_frac", cfg.spawn_x_frac},
              {"trajectory_noise", cfg.trajectory_noise},
              {"matches_static", cfg.matches_static},
              {"matches_per_object", cfg.matches_per_object},
              {"match_noise_px", cfg.match_noise_px},
              {"match_outlier_rate", cfg.match_outlier_rate},
              {"clutter_per_frame", cfg.clutter_per_frame},
              {"clutter_z_min", cfg.clutter_z_min},
              {"clutter_z_max", cfg.clutter_z_max},
              {"clutter_x_abs", cfg.clutter_x_abs},
              {"mask_jitter_px", cfg.mask_jitter_px},
              {"drop_probability", cfg.drop_probability},
              {"true_objectness_min", cfg.true_objectness_min},
              {"true_objectness_max", cfg.true_objectness_max},
              {"clutter_objectness_min", cfg.clutter_objectness_min},
              {"clutter_objectness_max", cfg.clutter_objectness_max},
              {"clutter_persistent", cfg.clutter_persistent},
              {"min_mask_pixels", cfg.min_mask_pixels}};
    if (!cfg.explicit_objects.empty()) {
        json objs = json::array();
        for (const auto &o : cfg.explicit_objects) {
            objs.push_back({{"center", {o.center.x(), o.center.y(), o.center.z()}},
                            {"velocity", {o.velocity.x(), o.velocity.y(), o.velocity.z()}},
                            {"size", {o.size.x(), o.size.y(), o.size.z()}}});
        }
        j["objects"] = std::move(objs);
    }
    return j;
}

synth::SceneConfig scene_config_from_json(const json &j) {
    synth::SceneConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.frames = j.value("frames", cfg.frames);
    if (j.contains("camera")) cfg.camera = io::camera_from_json(j["camera"]);
    cfg.camera_height = j.value("camera_height", cfg.camera_height);
    cfg.ego_forward_speed = j.value("ego_forward_speed", cfg.ego_forward_speed);
    cfg.ego_yaw_rate = j.value("ego_yaw_rate", cfg.ego_yaw_rate);
    cfg.n_objects = j.value("n_objects", cfg.n_objects);
    cfg.object_size_min = j.value("object_size_min", cfg.object_size_min);
    cfg.object_size_max = j.value("object_size_max", cfg.object_size_max);
    cfg.object_height_min = j.value("object_height_min", cfg.object_height_min);
    cfg.object_height_max = j.value("object_height_max", cfg.object_height_max);
    cfg.speed_min = j.value("speed_min", cfg.speed_min);
    cfg.speed_max = j.value("speed_max", cfg.speed_max);
    cfg.spawn_z_min = j.value("spawn_z_min", cfg.spawn_z_min);
    cfg.spawn_z_max = j.value("spawn_z_max", cfg.spawn_z_max);
    cfg.spawn_x_frac = j.value("spawn_x_frac", cfg.spawn_x_frac);
    cfg.trajectory_noise = j.value("trajectory_noise", cfg.trajectory_noise);
    cfg.matches_static = j.value("matches_static", cfg.matches_static);
    cfg.matches_per_object = j.value("matches_per_object", cfg.matches_per_object);
    cfg.match_noise_px = j.value("match_noise_px", cfg.match_noise_px);
    cfg.match_outlier_rate = j.value("match_outlier_rate", cfg.match_outlier_rate);
    cfg.clutter_per_frame = j.value("clutter_per_frame", cfg.clutter_per_frame);
    cfg.clutter_z_min = j.value("clutter_z_min", cfg.clutter_z_min);
    cfg.clutter_z_max = j.value("clutter_z_max", cfg.clutter_z_max);
    cfg.clutter_x_abs = j.value("clutter_x_abs", cfg.clutter_x_abs);
    cfg.mask_jitter_px = j.value("mask_jitter_px", cfg.mask_jitter_px);
    cfg.drop_probability = j.value("drop_probability", cfg.drop_probability);
    cfg.true_objectness_min = j.value("true_objectness_min", cfg.true_objectness_min);
    cfg.true_objectness_max = j.value("true_objectness_max", cfg.true_objectness_max);
    cfg.clutter_objectness_min = j.value("clutter_objectness_min", cfg.clutter_objectness_min);
    cfg.clutter_objectness_max = j.value("clutter_objectness_max", cfg.clutter_objectness_max);
    cfg.clutter_persistent = j.value("clutter_persistent", cfg.clutter_persistent);
    cfg.min_mask_pixels = j.value("min_mask_pixels", cfg.min_mask_pixels);
    if (j.contains("objects")) {
        for (const auto &jo : j["objects"]) {
            synth::ObjectInit o;
            const auto c = jo.at("center").get<std::vector<double>>();
            const auto v = jo.at("velocity").get<std::vector<double>>();
            const auto s = jo.at("size").get<std::vector<double>>();
            o.center = {c.at(0), c.at(1), c.at(2)};
            o.velocity = {v.at(0), v.at(1), v.at(2)};
            o.size = {s.at(0), s.at(1), s.at(2)};
            cfg.explicit_objects.push_back(o);
        }
    }
    return cfg;
}

void write_dataset(const synth::Dataset &data, const std::string &out_dir) {
    fs::create_directories(fs::path(out_dir) / "depth");
    io::write_file(out_dir + "/calib.json", io::camera_to_json(data.camera).dump(2) + "\n");
    io::save_proposals(out_dir + "/proposals.jsonl", data.proposal_frames);
    io::save_matches(out_dir + "/matches.jsonl", data.matches);
    for (int t = 0; t < data.frames; ++t)
        data.depth[static_cast<size_t>(t)].save(pipeline::depth_frame_path(out_dir + "/depth", t));
    io::write_file(out_dir + "/gt_tubes.json",
                   io::gt_tubes_to_json(data.gt_tubes, data.camera).dump() + "\n");

    std::vector<io::EgoRecord> gt_ego;
    for (int t = 1; t < data.frames; ++t)
        gt_ego.push_back({t, data.ego[static_cast<size_t>(t)], true, 0.0, 0});
    io::save_ego(out_dir + "/ego_gt.jsonl", gt_ego);
}

synth::Dataset load_dataset_dir(const std::string &dir) {
    synth::Dataset data;
    data.camera = io::camera_from_json(load_json_file(dir + "/calib.json"));
    data.proposal_frames = io::load_proposals(dir + "/proposals.jsonl");
    data.matches = io::load_matches(dir + "/matches.jsonl");

    int frames = static_cast<int>(std::max(data.proposal_frames.size(), data.matches.size()));
    while (io::file_exists(pipeline::depth_frame_path(dir + "/depth", frames))) ++frames;
    data.frames = frames;
    data.proposal_frames.resize(static_cast<size_t>(frames));
    data.matches.resize(static_cast<size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        const std::string path = pipeline::depth_frame_path(dir + "/depth", t);
        if (!io::file_exists(path)) throw std::runtime_error("missing depth file: " + path);
        data.depth.push_back(geometry::DepthMap::load(path));
    }

    data.ego.assign(static_cast<size_t>(frames), geometry::RigidMotion::identity());
    if (io::file_exists(dir + "/ego_gt.jsonl")) {
        for (const auto &r : io::load_ego(dir + "/ego_gt.jsonl")) {
            if (r.frame >= 1 && r.frame < frames) data.ego[static_cast<size_t>(r.frame)] = r.motion;
        }
    }
    if (io::file_exists(dir + "/gt_tubes.json"))
        data.gt_tubes = io::gt_tubes_from_json(load_json_file(dir + "/gt_tubes.json"));
    return data;
}

int cmd_synth(const SynthCmd &args) {
    if (args.config_path.empty() || args.out_dir.empty()) {
        std::cerr << "synth: config and output directory are required\n";
        return kUsageError;
    }
    if (!io::file_exists(args.config_path)) {
        std::cerr << "synth: missing config: " << args.config_path << "\n";
        return kUsageError;
    }
    if (io::file_exists(args.out_dir + "/manifest.json") && !args.force) {
        std::cerr << "synth: " << args.out_dir << " already holds a dataset (use --force)\n";
        return kUsageError;
    }
    try {
        const json config_json = load_json_file(args.config_path);
        const synth::SceneConfig config = scene_config_from_json(config_json);
        const synth::Dataset data = synth::generate(config);
        write_dataset(data, args.out_dir);

        const std::vector<std::string> outputs = {
            args.out_dir + "/calib.json", args.out_dir + "/proposals.jsonl",
            args.out_dir + "/matches.jsonl", args.out_dir + "/gt_tubes.json",
            args.out_dir + "/ego_gt.jsonl"};
        const json manifest =
            io::make_manifest("synth", scene_config_to_json(config), {args.config_path}, outputs);
        io::write_file(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::invalid_argument &e) {
        std::cerr << "synth: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception &e) {
        std::cerr << "synth: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}

int cmd_flow(const FlowCmd &args) {
    if (args.matches_path.empty() || args.calib_path.empty() || args.out_dir.empty()) {
        std::cerr << "flow: matches, calibration and output directory are required\n";
        return kUsageError;
    }
    try {
        const PipelineConfig cfg = load_pipeline_config(args.config_path);
        const auto cam = io::camera_from_json(load_json_file(args.calib_path));
        const auto matches = io::load_matches(args.matches_path);

        std::vector<io::EgoRecord> ego_records;
        std::vector<std::vector<sceneflow::SceneFlowVector>> flows(matches.size());
        for (size_t t = 1; t < matches.size(); ++t) {
            const auto filtered = sceneflow::cyclic_filter(matches[t], cfg.flow.epipolar_tol_px,
                                                           cfg.flow.cycle_tol_px);
            const auto est = sceneflow::estimate_egomotion(
                filtered, cam, geometry::RigidMotion::identity(), cfg.egomotion);
            io::EgoRecord rec;
            rec.frame = static_cast<int>(t);
            rec.ok = est.ok;
            rec.motion = est.ok ? est.motion : geometry::RigidMotion::identity();
            rec.rms_px = est.rms_px;
            rec.matches_used = est.matches_used;
            ego_records.push_back(rec);
            flows[t] = sceneflow::compute_scene_flow(filtered, cam).flows;
        }

        io::save_ego(args.out_dir + "/ego.jsonl", ego_records);
        io::save_flows(args.out_dir + "/flow.jsonl", flows);
        const json manifest = io::make_manifest("flow", pipeline::config_to_json(cfg),
                                                {args.matches_path, args.calib_path},
                                                {args.out_dir + "/ego.jsonl", args.out_dir + "/flow.jsonl"});
        io::write_file(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception &e) {
        std::cerr << "flow: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}

int cmd_tubes(const TubesCmd &args) {
    if (args.proposals_path.empty() || args.depth_dir.empty() || args.ego_path.empty() ||
        args.flow_path.empty() || args.calib_path.empty() || args.out_dir.empty()) {
        std::cerr << "tubes: proposals, depth, ego, flow, calib and output are required\n";
        return kUsageError;
    }
    try {
        const PipelineConfig cfg = load_pipeline_config(args.config_path);
        const auto cam = io::camera_from_json(load_json_file(args.calib_path));
        pipeline::FileSource source(args.proposals_path, args.depth_dir, args.ego_path,
                                    args.flow_path, cam, cfg);
        const pipeline::PipelineOutput out = pipeline::run_pipeline(source, cfg);

        const json tubes_json =
            io::tubes_to_json(out.tracking, out.selected_ids, cam, !args.keep_all);
        io::write_file(args.out_dir + "/tubes.json", tubes_json.dump() + "\n");

        if (args.dump_problems) {
            json batches = json::array();
            for (const auto &b : out.coselection.batches) {
                batches.push_back({{"batch_start", b.batch_start},
                                   {"batch_end", b.batch_end},
                                   {"tube_ids", b.tube_ids},
                                   {"selection", b.selection},
                                   {"energy", b.energy},
                                   {"budget_exhausted", b.budget_exhausted}});
            }
            io::write_file(args.out_dir + "/selection_batches.json", batches.dump(2) + "\n");
        }

        const json manifest = io::make_manifest(
            "tubes", pipeline::config_to_json(cfg),
            {args.proposals_path, args.ego_path, args.flow_path, args.calib_path},
            {args.out_dir + "/tubes.json"});
        io::write_file(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::runtime_error &e) {
        std::cerr << "tubes: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception &e) {
        std::cerr << "tubes: " << e.what() << "\n";
        return kNumericalError;
    }
    return kOk;
}

int cmd_eval(const EvalCmd &args) {
    if (args.gt_path.empty() || args.tubes_path.empty() || args.out_dir.empty()) {
        std::cerr << "eval: gt, tubes and output directory are required\n";
        return kUsageError;
    }
    try {
        const eval::TrackSet gt = io::tracks_from_gt_json(load_json_file(args.gt_path));
        const eval::TrackSet pred = io::tracks_from_tube_json(load_json_file(args.tubes_path));

        const eval::MotResult mot = eval::clear_mot(gt, pred, args.iou_threshold);

        std::vector<int> budgets;
        for (int k = 1; k <= 64; k *= 2) budgets.push_back(k);
        const auto recall = eval::tube_recall_curve(pred, gt, budgets, args.iou_threshold);

        const std::vector<double> edges = {0.0, 10.0, 20.0, 30.0, 40.0, 60.0};
        const auto bins = eval::loc_error_by_distance(gt, pred, edges, args.iou_threshold);

        json summary = {{"mota", mot.mota},
                        {"id_switches", mot.id_switches},
                        {"false_positives", mot.false_positives},
                        {"misses", mot.misses},
                        {"matches", mot.matches},
                        {"total_gt", mot.total_gt}};
        io::write_file(args.out_dir + "/metrics.json", summary.dump(2) + "\n");

        std::ostringstream rc;
        rc << "budget,recall\n";
        for (const auto &p : recall) rc << p.budget << "," << p.recall << "\n";
        io::write_file(args.out_dir + "/recall_tubes.csv", rc.str());

        std::ostringstream lc;
        lc << "bin_lo,bin_hi,gt_count,matched,recall,mean_error_m\n";
        for (const auto &b : bins)
            lc << b.lo << "," << b.hi << "," << b.gt_count << "," << b.matched << "," << b.recall
               << "," << b.mean_error << "\n";
        io::write_file(args.out_dir + "/loc_error.csv", lc.str());

        const json manifest = io::make_manifest(
            "eval", {{"iou_threshold", args.iou_threshold}}, {args.gt_path, args.tubes_path},
            {args.out_dir + "/metrics.json", args.out_dir + "/recall_tubes.csv",
             args.out_dir + "/loc_error.csv"});
        io::write_file(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception &e) {
        std::cerr << "eval: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}

namespace {

double evaluate_config(const std::vector<synth::Dataset> &datasets,
                       const std::vector<eval::TrackSet> &gt_sets, const PipelineConfig &cfg) {
    double mota_sum = 0.0;
    for (size_t d = 0; d < datasets.size(); ++d) {
        pipeline::DatasetSource source(datasets[d], cfg);
        const pipeline::PipelineOutput out = pipeline::run_pipeline(source, cfg);
        const eval::TrackSet pred = tracks_from_pipeline(out, datasets[d].camera);
        mota_sum += eval::clear_mot(gt_sets[d], pred).mota;
    }
    return mota_sum / static_cast<double>(datasets.size());
}

}  // namespace

int cmd_tune(const TuneCmd &args) {
    if (args.dataset_dirs.empty() || args.out_config.empty() || args.budget < 1) {
        std::cerr << "tune: dataset dirs, positive budget and output config are required\n";
        return kUsageError;
    }
    try {
        std::vector<synth::Dataset> datasets;
        std::vector<eval::TrackSet> gt_sets;
        for (const auto &dir : args.dataset_dirs) {
            datasets.push_back(load_dataset_dir(dir));
            if (datasets.back().gt_tubes.empty())
                throw std::runtime_error("tune: dataset has no ground truth: " + dir);
            gt_sets.push_back(io::tracks_from_gt_json(
                json::parse(io::read_file(dir + "/gt_tubes.json"))));
        }

        PipelineConfig best;
        double best_mota = evaluate_config(datasets, gt_sets, best);
        std::cout << "tune: candidate 0 (defaults) mean MOTA " << best_mota << "\n";

        for (int k = 1; k < args.budget; ++k) {
            synth::KeyedRng rng(args.seed, /*stream=*/42, static_cast<std::uint64_t>(k));
            PipelineConfig cand;
            cand.scoring.w1 = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
            cand.scoring.w2 = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
            cand.scoring.w3 = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
            cand.scoring.alpha = rng.uniform(2.0, 50.0);
            cand.scoring.beta = rng.uniform(2.0, 30.0);
            cand.coselect.eps1 = rng.uniform(0.0, 20.0);
            cand.coselect.eps2 = rng.uniform(1.0, 80.0);
            const double mota = evaluate_config(datasets, gt_sets, cand);
            std::cout << "tune: candidate " << k << " mean MOTA " << mota << "\n";
            if (mota > best_mota) {
                best_mota = mota;
                best = cand;
            }
        }

        json out = pipeline::config_to_json(best);
        out["tuned_mean_mota"] = best_mota;
        io::write_file(args.out_config, out.dump(2) + "\n");
        std::cout << "tune: best mean MOTA " << best_mota << "\n";
    } catch (const std::exception &e) {
        std::cerr << "tune: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}

int cmd_validate(const ValidateCmd &args) {
    if (args.dataset_dir.empty()) {
        std::cerr << "validate: dataset directory is required\n";
        return kUsageError;
    }
    try {
        const synth::Dataset data = load_dataset_dir(args.dataset_dir);
        if (data.frames == 0) throw std::runtime_error("dataset has no frames");
        for (int t = 0; t < data.frames; ++t) {
            const auto &depth = data.depth[static_cast<size_t>(t)];
            if (depth.width() != data.camera.width || depth.height() != data.camera.height)
                throw std::runtime_error("depth dimensions mismatch at frame " + std::to_string(t));
            for (const auto &p : data.proposal_frames[static_cast<size_t>(t)]) {
                if (p.mask.width() != data.camera.width || p.mask.height() != data.camera.height)
                    throw std::runtime_error("proposal mask dimensions mismatch at frame " +
                                             std::to_string(t));
            }
            for (const auto &m : data.matches[static_cast<size_t>(t)]) {
                for (const auto &px : {m.left_prev, m.right_prev, m.left_cur, m.right_cur}) {
                    if (!data.camera.contains(px))
                        throw std::runtime_error("match pixel out of bounds at frame " +
                                                 std::to_string(t));
                }
            }
        }
        std::cout << "validate: ok (" << data.frames << " frames)\n";
    } catch (const std::exception &e) {
        std::cerr << "validate: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}

}  // namespace tubes::cli
