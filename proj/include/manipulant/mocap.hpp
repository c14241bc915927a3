#pragma once

#include <Eigen/Geometry>
#include <optional>
#include <string>
#include <vector>

#include "manipulant/kinematics.hpp"

namespace manipulant {

enum class Task { SL, SM, SH, C5, C10, custom };
enum class Action { Re, Pi, Ca, Pl, Fm, Sc, Rl };

std::string to_string(Task t);
std::string to_string(Action a);
Task task_from_string(const std::string& s);
Action action_from_string(const std::string& s);

/// Actions analyzed for a task, in the order the task sequence visits them.
std::vector<Action> task_action_sequence(Task t);

/// Fixed geometry of the recorded activities (meters, kilograms).
struct TaskMetadata {
    double screw_height_low = 0.60;
    double screw_height_mid = 1.15;
    double screw_height_high = 1.75;
    double screw_table_height = 0.75;
    double carry_table_height = 0.55;
    double load_c5_kg = 5.0;
    double load_c10_kg = 10.0;
    double shelf_height_c5 = 0.20;
    double shelf_height_c10 = 1.10;

    double screw_height(Task t) const;
    double shelf_height(Task t) const;
};

/// Per-participant segment lengths and frame offsets. Wrist poses in trial
/// files are expressed in the neck frame; shoulder frames are the neck frame
/// translated by (0, +-shoulder_width, -shoulder_drop).
struct Anthropometry {
    double upper_arm_length = 0.30;
    double forearm_length = 0.25;
    double hand_length = 0.10;
    double shoulder_width = 0.20;
    double shoulder_drop = 0.05;
    double neck_height = 1.50;  // nominal standing height of the neck frame

    Eigen::Vector3d shoulder_offset(bool left) const {
        return {0.0, left ? shoulder_width : -shoulder_width, -shoulder_drop};
    }
    double min_reach() const { return std::abs(upper_arm_length - forearm_length); }
    AnthropomorphicArm arm(bool left) const {
        AnthropomorphicArm a;
        a.upper_arm_length = upper_arm_length;
        a.forearm_length = forearm_length;
        a.hand_length = hand_length;
        return a;
    }
};

/// One capture frame. Wrist poses are in the neck frame. `label` is the
/// majority action label; empty when annotators tied. `neck_world` anchors
/// the neck frame in the world when known (synthetic trials record it).
struct Frame {
    double t = 0.0;
    Pose left_wrist = Pose::Identity();
    Pose right_wrist = Pose::Identity();
    std::string label;
    std::optional<Eigen::Vector3d> neck_world;
    std::optional<Eigen::VectorXd> joints_left;
    std::optional<Eigen::VectorXd> joints_right;
};

struct TrialRecording {
    std::string participant_id;
    Task task = Task::custom;
    double sample_rate = 60.0;
    Anthropometry anthropometry;
    std::vector<Frame> frames;

    /// Strictly increasing timestamps, nonempty, orthonormal rotations.
    void validate() const;
};

/// Half-open frame-index range of one maximal run of `action`.
struct ActionSegment {
    Action action;
    int begin = 0;
    int end = 0;  // exclusive
};

struct SegmentationResult {
    std::vector<ActionSegment> segments;       // disjoint, sorted by begin
    std::vector<Action> missing;               // requested but absent
    int tie_frames = 0;                        // unlabeled (annotator tie) frames
};

/// Maximal contiguous runs of the requested labels, temporal order. Actions
/// absent from the trial are reported in `missing`, not fatal.
SegmentationResult segment_actions(const TrialRecording& trial,
                                   const std::vector<Action>& action_subset);

struct SampledSegment {
    ActionSegment segment;
    std::vector<int> frame_indices;  // frames_per_action entries, endpoints included
    bool repeated = false;           // segment shorter than frames_per_action
};

/// Equally spaced frame indices per segment, endpoints included. Segments
/// shorter than frames_per_action repeat nearest indices and are flagged.
std::vector<SampledSegment> subsample_segments(const std::vector<ActionSegment>& segments,
                                               int frames_per_action);

/// Majority vote over annotator labels; empty string on a tie.
std::string fuse_annotator_labels(const std::vector<std::string>& labels);

struct SynthOptions {
    double sample_rate = 60.0;
    double noise_level = 1.0;  // 0 = exactly on the waypoints
};

/// Deterministic synthetic trial: a wrist-pose trajectory through the task's
/// waypoints with labeled action phases. Identical seeds give identical
/// trials.
TrialRecording synth_trial(Task task, unsigned long long participant_seed,
                           const SynthOptions& opts = {});

}  // namespace manipulant
