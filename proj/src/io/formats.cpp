#include "tubes/io/formats.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tubes::io {

namespace {

std::vector<double> vec3_to_std(const Eigen::Vector3d &v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d vec3_from_json(const json &j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2_from_json(const json &j) {
    if (!j.is_array() || j.size() != 2) throw std::runtime_error("expected 2-vector");
    return {j[0].get<double>(), j[1].get<double>()};
}

json vec2_to_json(const Eigen::Vector2d &v) { return json::array({v.x(), v.y()}); }

/// Applies fn to every line; rethrows with the 1-based line number.
void for_each_line(const std::string &path, const std::function<void(const json &)> &fn) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            fn(json::parse(line));
        } catch (const std::exception &e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

json camera_to_json(const geometry::CameraIntrinsics &cam) {
    return {{"fx", cam.fx},   {"fy", cam.fy},           {"cx", cam.cx},
            {"cy", cam.cy},   {"baseline", cam.baseline}, {"width", cam.width},
            {"height", cam.height}};
}

geometry::CameraIntrinsics camera_from_json(const json &j) {
    geometry::CameraIntrinsics cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.baseline = j.at("baseline").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.validate();
    return cam;
}

json mask_to_json(const geometry::BitMask &mask) {
    return {{"width", mask.width()}, {"height", mask.height()}, {"counts", mask.to_rle()}};
}

geometry::BitMask mask_from_json(const json &j) {
    return geometry::BitMask::from_rle(j.at("width").get<int>(), j.at("height").get<int>(),
                                       j.at("counts").get<std::vector<int>>());
}

json motion_to_json(const geometry::RigidMotion &motion) {
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r[static_cast<size_t>(3 * i + k)] = motion.rotation(i, k);
    return {{"rotation", r}, {"translation", vec3_to_std(motion.translation)}};
}

geometry::RigidMotion motion_from_json(const json &j) {
    geometry::RigidMotion m;
    const auto r = j.at("rotation").get<std::vector<double>>();
    if (r.size() != 9) throw std::runtime_error("rotation must have 9 entries");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) m.rotation(i, k) = r[static_cast<size_t>(3 * i + k)];
    m.translation = vec3_from_json(j.at("translation"));
    if (!m.is_orthonormal(1e-6)) throw std::runtime_error("rotation not orthonormal");
    return m;
}

json proposal_to_json(const proposals::FrameProposal &p) {
    return {{"frame", p.frame},
            {"width", p.mask.width()},
            {"height", p.mask.height()},
            {"rle_mask", p.mask.to_rle()},
            {"objectness", p.objectness},
            {"class_posterior", p.class_posterior}};
}

proposals::FrameProposal proposal_from_json(const json &j) {
    proposals::FrameProposal p;
    p.frame = j.at("frame").get<int>();
    if (p.frame < 0) throw std::runtime_error("negative frame index");
    p.mask = geometry::BitMask::from_rle(j.at("width").get<int>(), j.at("height").get<int>(),
                                         j.at("rle_mask").get<std::vector<int>>());
    p.objectness = j.at("objectness").get<double>();
    if (!(p.objectness >= 0.0 && p.objectness <= 1.0))
        throw std::runtime_error("objectness outside [0, 1]");
    p.class_posterior = j.at("class_posterior").get<std::vector<double>>();
    if (p.class_posterior.size() != proposals::kNumClasses)
        throw std::runtime_error("class_posterior must have 81 entries");
    double sum = 0.0;
    for (double c : p.class_posterior) {
        if (c < 0.0) throw std::runtime_error("negative class posterior entry");
        sum += c;
    }
    if (std::abs(sum - 1.0) > 1e-3) throw std::runtime_error("class_posterior not normalized");
    return p;
}

void save_proposals(const std::string &path,
                    const std::vector<std::vector<proposals::FrameProposal>> &frames) {
    std::ostringstream out;
    for (const auto &frame : frames)
        for (const auto &p : frame) out << proposal_to_json(p).dump() << "\n";
    write_file(path, out.str());
}

std::vector<std::vector<proposals::FrameProposal>> load_proposals(const std::string &path) {
    std::vector<std::vector<proposals::FrameProposal>> frames;
    for_each_line(path, [&](const json &j) {
        proposals::FrameProposal p = proposal_from_json(j);
        if (static_cast<size_t>(p.frame) >= frames.size())
            frames.resize(static_cast<size_t>(p.frame) + 1);
        p.index = static_cast<int>(frames[static_cast<size_t>(p.frame)].size());
        frames[static_cast<size_t>(p.frame)].push_back(std::move(p));
    });
    return frames;
}

json match_to_json(const sceneflow::QuadMatch &m) {
    return {{"frame", m.frame},
            {"lp", vec2_to_json(m.left_prev)},
            {"rp", vec2_to_json(m.right_prev)},
            {"lc", vec2_to_json(m.left_cur)},
            {"rc", vec2_to_json(m.right_cur)}};
}

sceneflow::QuadMatch match_from_json(const json &j) {
    sceneflow::QuadMatch m;
    m.frame = j.at("frame").get<int>();
    if (m.frame <= 0) throw std::runtime_error("match frame must be >= 1");
    m.left_prev = vec2_from_json(j.at("lp"));
    m.right_prev = vec2_from_json(j.at("rp"));
    m.left_cur = vec2_from_json(j.at("lc"));
    m.right_cur = vec2_from_json(j.at("rc"));
    return m;
}

void save_matches(const std::string &path,
                  const std::vector<std::vector<sceneflow::QuadMatch>> &matches) {
    std::ostringstream out;
    for (const auto &frame : matches)
        for (const auto &m : frame) out << match_to_json(m).dump() << "\n";
    write_file(path, out.str());
}

std::vector<std::vector<sceneflow::QuadMatch>> load_matches(const std::string &path) {
    std::vector<std::vector<sceneflow::QuadMatch>> matches;
    for_each_line(path, [&](const json &j) {
        sceneflow::QuadMatch m = match_from_json(j);
        if (static_cast<size_t>(m.frame) >= matches.size())
            matches.resize(static_cast<size_t>(m.frame) + 1);
        matches[static_cast<size_t>(m.frame)].push_back(m);
    });
    return matches;
}

void save_ego(const std::string &path, const std::vector<EgoRecord> &records) {
    std::ostringstream out;
    for (const auto &r : records) {
        json j = motion_to_json(r.motion);
        j["frame"] = r.frame;
        j["ok"] = r.ok;
        j["rms_px"] = r.rms_px;
        j["matches_used"] = r.matches_used;
        out << j.dump() << "\n";
    }
    write_file(path, out.str());
}

std::vector<EgoRecord> load_ego(const std::string &path) {
    std::vector<EgoRecord> records;
    for_each_line(path, [&](const json &j) {
        EgoRecord r;
        r.frame = j.at("frame").get<int>();
        r.motion = motion_from_json(j);
        r.ok = j.at("ok").get<bool>();
        r.rms_px = j.at("rms_px").get<double>();
        r.matches_used = j.at("matches_used").get<int>();
        records.push_back(r);
    });
    return records;
}

void save_flows(const std::string &path,
                const std::vector<std::vector<sceneflow::SceneFlowVector>> &flows) {
    std::ostringstream out;
    for (size_t t = 0; t < flows.size(); ++t) {
        for (const auto &f : flows[t]) {
            const json j = {{"frame", static_cast<int>(t)},
                            {"prev", vec3_to_std(f.point_prev)},
                            {"cur", vec3_to_std(f.point_cur)},
                            {"px_prev", vec2_to_json(f.pixel_prev)},
                            {"px_cur", vec2_to_json(f.pixel_cur)}};
            out << j.dump() << "\n";
        }
    }
    write_file(path, out.str());
}

std::vector<std::vector<sceneflow::SceneFlowVector>> load_flows(const std::string &path) {
    std::vector<std::vector<sceneflow::SceneFlowVector>> flows;
    for_each_line(path, [&](const json &j) {
        const int frame = j.at("frame").get<int>();
        if (frame < 0) throw std::runtime_error("negative frame index");
        sceneflow::SceneFlowVector v;
        v.point_prev = vec3_from_json(j.at("prev"));
        v.point_cur = vec3_from_json(j.at("cur"));
        v.flow = v.point_cur - v.point_prev;
        v.pixel_prev = vec2_from_json(j.at("px_prev"));
        v.pixel_cur = vec2_from_json(j.at("px_cur"));
        if (static_cast<size_t>(frame) >= flows.size()) flows.resize(static_cast<size_t>(frame) + 1);
        flows[static_cast<size_t>(frame)].push_back(v);
    });
    return flows;
}

json tubes_to_json(const tracking::TrackingResult &result, const std::vector<int> &selected,
                   const geometry::CameraIntrinsics &cam, bool selected_only) {
    std::set<int> selected_set(selected.begin(), selected.end());

    json out;
    out["camera"] = camera_to_json(cam);
    out["num_frames"] = static_cast<int>(result.world_from_cam.size());
    out["tubes"] = json::array();

    for (const auto &tube : result.tubes) {
        const bool is_selected = selected_set.count(tube.id) > 0;
        if (selected_only && !is_selected) continue;

        json jt;
        jt["id"] = tube.id;
        jt["start"] = tube.start_frame();
        jt["end"] = tube.end_frame();
        jt["selected"] = is_selected;
        jt["ego_fallback"] = tube.ego_fallback;
        jt["scores"] = {{"motion", tube.scores.motion},
                        {"mask", tube.scores.mask},
                        {"objectness", tube.scores.objectness},
                        {"total", tube.scores.total}};
        jt["frames"] = json::array();
        for (const auto &f : tube.frames) {
            const geometry::RigidMotion cam_from_world =
                result.world_from_cam[static_cast<size_t>(f.frame)].inverse();
            const Eigen::Vector3d pos_cam = cam_from_world.apply(f.posterior.position());
            const Eigen::Vector3d vel_cam = cam_from_world.rotation * f.posterior.velocity();
            const geometry::BitMask *mask = tube.mask_at(f.frame);

            json jf;
            jf["frame"] = f.frame;
            jf["inlier"] = f.has_inlier;
            jf["mask"] = mask ? mask_to_json(*mask) : json();
            jf["position_cam"] = vec3_to_std(pos_cam);
            jf["velocity_cam"] = vec3_to_std(vel_cam);
            if (f.has_inlier) jf["objectness"] = f.inlier.objectness;
            jt["frames"].push_back(std::move(jf));
        }
        out["tubes"].push_back(std::move(jt));
    }
    return out;
}

eval::TrackSet tracks_from_tube_json(const json &j, bool include_unselected) {
    eval::TrackSet tracks;
    for (const auto &jt : j.at("tubes")) {
        if (!include_unselected && !jt.at("selected").get<bool>()) continue;
        eval::Track track;
        track.id = jt.at("id").get<int>();
        track.score = jt.at("scores").at("total").get<double>();
        for (const auto &jf : jt.at("frames")) {
            if (jf.at("mask").is_null()) continue;
            eval::TrackFrame tf;
            tf.mask = mask_from_json(jf.at("mask"));
            tf.position_cam = vec3_from_json(jf.at("position_cam"));
            tf.has_position = true;
            track.frames[jf.at("frame").get<int>()] = std::move(tf);
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

json gt_tubes_to_json(const std::vector<synth::GtTube> &gt, const geometry::CameraIntrinsics &cam) {
    json out;
    out["camera"] = camera_to_json(cam);
    out["gt"] = true;
    out["tubes"] = json::array();
    for (const auto &tube : gt) {
        json jt;
        jt["id"] = tube.id;
        jt["frames"] = json::array();
        for (const auto &f : tube.frames) {
            jt["frames"].push_back({{"frame", f.frame},
                                    {"mask", mask_to_json(f.mask)},
                                    {"position_cam", vec3_to_std(f.position_cam)},
                                    {"position_world", vec3_to_std(f.position_world)},
                                    {"velocity_world", vec3_to_std(f.velocity_world)}});
        }
        out["tubes"].push_back(std::move(jt));
    }
    return out;
}

eval::TrackSet tracks_from_gt_json(const json &j) {
    eval::TrackSet tracks;
    for (const auto &jt : j.at("tubes")) {
        eval::Track track;
        track.id = jt.at("id").get<int>();
        for (const auto &jf : jt.at("frames")) {
            eval::TrackFrame tf;
            tf.mask = mask_from_json(jf.at("mask"));
            tf.position_cam = vec3_from_json(jf.at("position_cam"));
            tf.has_position = true;
            track.frames[jf.at("frame").get<int>()] = std::move(tf);
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

std::vector<synth::GtTube> gt_tubes_from_json(const json &j) {
    std::vector<synth::GtTube> tubes;
    for (const auto &jt : j.at("tubes")) {
        synth::GtTube tube;
        tube.id = jt.at("id").get<int>();
        for (const auto &jf : jt.at("frames")) {
            synth::GtFrame f;
            f.frame = jf.at("frame").get<int>();
            f.mask = mask_from_json(jf.at("mask"));
            f.position_cam = vec3_from_json(jf.at("position_cam"));
            f.position_world = vec3_from_json(jf.at("position_world"));
            f.velocity_world = vec3_from_json(jf.at("velocity_world"));
            tube.frames.push_back(std::move(f));
        }
        tubes.push_back(std::move(tube));
    }
    return tubes;
}

std::string read_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string &path, const std::string &content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

bool file_exists(const std::string &path) { return std::filesystem::exists(path); }

std::string fnv1a_hex(const std::string &bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json make_manifest(const std::string &command, const json &config,
                   const std::vector<std::string> &input_paths,
                   const std::vector<std::string> &output_paths) {
    json inputs = json::object();
    for (const auto &p : input_paths)
        inputs[std::filesystem::path(p).filename().string()] = fnv1a_hex(read_file(p));
    json outputs = json::object();
    for (const auto &p : output_paths)
        outputs[std::filesystem::path(p).filename().string()] = fnv1a_hex(read_file(p));
    return {{"command", command},
            {"version", "0.1.0"},
            {"config", config},
            {"inputs", inputs},
            {"outputs", outputs}};
}

}  // namespace tubes::io
