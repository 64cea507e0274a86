#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tubes/eval/metrics.hpp"
#include "tubes/geometry/bitmask.hpp"
#include "tubes/geometry/camera.hpp"
#include "tubes/proposals/proposal.hpp"
#include "tubes/sceneflow/scene_flow.hpp"
#include "tubes/synth/generator.hpp"
#include "tubes/tracking/tracker.hpp"

namespace tubes::io {

using nlohmann::json;

// ---- Primitive conversions ------------------------------------------------

json camera_to_json(const geometry::CameraIntrinsics &cam);
geometry::CameraIntrinsics camera_from_json(const json &j);

json mask_to_json(const geometry::BitMask &mask);
geometry::BitMask mask_from_json(const json &j);

json motion_to_json(const geometry::RigidMotion &motion);
geometry::RigidMotion motion_from_json(const json &j);

// ---- Proposals (JSON-lines, one proposal per line) -------------------------

json proposal_to_json(const proposals::FrameProposal &p);
proposals::FrameProposal proposal_from_json(const json &j);

void save_proposals(const std::string &path,
                    const std::vector<std::vector<proposals::FrameProposal>> &frames);

/// Returns per-frame proposal lists indexed 0..max_frame. Throws with the
/// offending line number on malformed records; a posterior off by more than
/// 1e-3 or an out-of-range objectness is a hard error.
std::vector<std::vector<proposals::FrameProposal>> load_proposals(const std::string &path);

// ---- Quad matches (JSON-lines) ---------------------------------------------

json match_to_json(const sceneflow::QuadMatch &m);
sceneflow::QuadMatch match_from_json(const json &j);

void save_matches(const std::string &path,
                  const std::vector<std::vector<sceneflow::QuadMatch>> &matches);
std::vector<std::vector<sceneflow::QuadMatch>> load_matches(const std::string &path);

// ---- Egomotion and scene flow (JSON-lines, written by the flow command) ----

struct EgoRecord {
    int frame = 0;  // pair (frame-1 -> frame)
    geometry::RigidMotion motion;
    bool ok = true;
    double rms_px = 0.0;
    int matches_used = 0;
};

void save_ego(const std::string &path, const std::vector<EgoRecord> &records);
std::vector<EgoRecord> load_ego(const std::string &path);

void save_flows(const std::string &path,
                const std::vector<std::vector<sceneflow::SceneFlowVector>> &flows);
std::vector<std::vector<sceneflow::SceneFlowVector>> load_flows(const std::string &path);

// ---- Tubes ------------------------------------------------------------------

/// Serializes tubes with per-frame masks and camera-frame state. `selected`
/// holds ids retained by co-selection.
json tubes_to_json(const tracking::TrackingResult &result, const std::vector<int> &selected,
                   const geometry::CameraIntrinsics &cam, bool selected_only);

/// Evaluation view of a tube file (selected tubes only unless all = true).
eval::TrackSet tracks_from_tube_json(const json &j, bool include_unselected = false);

json gt_tubes_to_json(const std::vector<synth::GtTube> &gt, const geometry::CameraIntrinsics &cam);
eval::TrackSet tracks_from_gt_json(const json &j);
std::vector<synth::GtTube> gt_tubes_from_json(const json &j);

// ---- Files -------------------------------------------------------------------

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &content);
bool file_exists(const std::string &path);

/// FNV-1a 64-bit content hash, hex-encoded.
std::string fnv1a_hex(const std::string &bytes);

/// Run manifest: config plus input/output content hashes. No timestamps, so
/// reruns with identical inputs produce identical manifests.
json make_manifest(const std::string &command, const json &config,
                   const std::vector<std::string> &input_paths,
                   const std::vector<std::string> &output_paths);

}  // namespace tubes::io
