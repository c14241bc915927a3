#pragma once

#include <filesystem>
#include <string>
#include <vector>

// vendored nlohmann/json single header
#include <json.hpp>

#include "manipulant/control.hpp"
#include "manipulant/manipulability.hpp"
#include "manipulant/mocap.hpp"
#include "manipulant/profile.hpp"

namespace manipulant {

using json = nlohmann::json;

// SPD matrices serialize as {dim, upper_triangular_row_major}; covariance
// tensors as {dim, matricized} in sym_vec ordering.
json spd_to_json(const SpdMatrix& m);
SpdMatrix spd_from_json(const json& j);
json covariance_to_json(const SpdCovariance& c);
SpdCovariance covariance_from_json(const json& j);

json pose_to_json(const Pose& p);
Pose pose_from_json(const json& j);

/// 64-bit FNV-1a over raw bytes, rendered as "fnv1a64:<hex>".
std::string content_hash(const std::string& bytes);
std::string content_hash_of_files(const std::vector<std::filesystem::path>& files);

/// Robot description files: {name, joints: [{axis, offset}], base_pose,
/// end_offset, rest_config?, task_rows?}.
struct RobotDescription {
    KinematicChain chain;
    JointConfig rest_config;
    std::vector<int> task_rows;
};
RobotDescription load_robot(const std::filesystem::path& file);
json robot_to_json(const KinematicChain& chain, const JointConfig& rest_config,
                   const std::vector<int>& task_rows);

/// Trial files: JSON-lines, header {participant_id, task, sample_rate,
/// anthropometry}, then one frame per line {t, lw_pos, lw_quat, rw_pos,
/// rw_quat, label}. `label` may be a single string or an array of annotator
/// labels (fused by majority, ties dropped). Optional neck_pos anchors the
/// neck frame in the world.
void write_trial(const std::filesystem::path& file, const TrialRecording& trial,
                 const json& generator = json());
TrialRecording read_trial(const std::filesystem::path& file);

/// One analyzed ellipsoid: normalized time, provenance indices, frame tag.
struct EllipsoidRecord {
    double t = 0.0;
    double u = 0.0;
    int trial = 0;
    int timestep = 0;
    std::string action;
    std::string frame_tag;
    std::string kind;  // "velocity" | "force"
    SpdMatrix spd;
};

void write_ellipsoids(const std::filesystem::path& file,
                      const std::vector<EllipsoidRecord>& records, const json& provenance,
                      const std::string& task);
std::vector<EllipsoidRecord> read_ellipsoids(const std::filesystem::path& file);

/// Header object of a JSONL artifact (the line carrying "artifact").
json read_jsonl_header(const std::filesystem::path& file);

void write_profile(const std::filesystem::path& file, const ManipulabilityProfile& profile,
                   const json& provenance);
ManipulabilityProfile read_profile(const std::filesystem::path& file);

void write_gmm(const std::filesystem::path& file, const SpdGmm& gmm, const json& provenance);
SpdGmm read_gmm(const std::filesystem::path& file);

/// Profile documents accepted by the tracker: an spd_gmm (retrieval), a
/// manipulability_profile (geodesic interpolation between timestep means),
/// or {type: "constant", spd: ...}.
ProfileSource load_profile_source(const std::filesystem::path& file);

/// Run logs: JSON-lines, header then one step per line
/// {t, q, x, spd_distance, pos_error, mode}.
void write_run_log(const std::filesystem::path& file, const TrackingLog& log,
                   const json& provenance);
TrackingLog read_run_log(const std::filesystem::path& file);

}  // namespace manipulant
