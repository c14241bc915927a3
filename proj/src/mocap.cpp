#include "manipulant/mocap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace manipulant {

std::string to_string(Task t) {
    switch (t) {
        case Task::SL: return "SL";
        case Task::SM: return "SM";
        case Task::SH: return "SH";
        case Task::C5: return "C5";
        case Task::C10: return "C10";
        case Task::custom: return "custom";
    }
    return "custom";
}

std::string to_string(Action a) {
    switch (a) {
        case Action::Re: return "Re";
        case Action::Pi: return "Pi";
        case Action::Ca: return "Ca";
        case Action::Pl: return "Pl";
        case Action::Fm: return "Fm";
        case Action::Sc: return "Sc";
        case Action::Rl: return "Rl";
    }
    return "Re";
}

Task task_from_string(const std::string& s) {
    for (Task t : {Task::SL, Task::SM, Task::SH, Task::C5, Task::C10, Task::custom}) {
        if (to_string(t) == s) return t;
    }
    throw ParseError("unknown task '" + s + "'");
}

Action action_from_string(const std::string& s) {
    for (Action a : {Action::Re, Action::Pi, Action::Ca, Action::Pl, Action::Fm, Action::Sc,
                     Action::Rl}) {
        if (to_string(a) == s) return a;
    }
    throw ParseError("unknown action label '" + s + "'");
}

std::vector<Action> task_action_sequence(Task t) {
    switch (t) {
        case Task::SL:
        case Task::SM:
        case Task::SH:
            return {Action::Re, Action::Pi, Action::Ca, Action::Pl, Action::Fm, Action::Sc,
                    Action::Rl};
        case Task::C5:
        case Task::C10:
            return {Action::Pi, Action::Ca, Action::Pl};
        case Task::custom:
            return {Action::Re, Action::Pi, Action::Ca, Action::Pl, Action::Fm, Action::Sc,
                    Action::Rl};
    }
    return {};
}

double TaskMetadata::screw_height(Task t) const {
    switch (t) {
        case Task::SL: return screw_height_low;
        case Task::SM: return screw_height_mid;
        case Task::SH: return screw_height_high;
        default: throw Error("screw_height: not a screwing task");
    }
}

double TaskMetadata::shelf_height(Task t) const {
    switch (t) {
        case Task::C5: return shelf_height_c5;
        case Task::C10: return shelf_height_c10;
        default: throw Error("shelf_height: not a carrying task");
    }
}

void TrialRecording::validate() const {
    if (frames.empty()) throw Error("TrialRecording: no frames");
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Frame& f = frames[i];
        if (!(f.t > prev)) {
            std::ostringstream os;
            os << "TrialRecording: timestamps not strictly increasing at frame " << i;
            throw Error(os.str());
        }
        prev = f.t;
        for (const Pose* pose : {&f.left_wrist, &f.right_wrist}) {
            const Eigen::Matrix3d r = pose->linear();
            if ((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-8) {
                std::ostringstream os;
                os << "TrialRecording: non-orthonormal wrist rotation at frame " << i;
                throw Error(os.str());
            }
        }
    }
}

SegmentationResult segment_actions(const TrialRecording& trial,
                                   const std::vector<Action>& action_subset) {
    SegmentationResult out;
    std::map<std::string, Action> wanted;
    for (Action a : action_subset) wanted[to_string(a)] = a;

    std::vector<bool> seen(7, false);
    int run_begin = -1;
    std::string run_label;
    auto close_run = [&](int end) {
        if (run_begin >= 0) {
            const Action a = wanted.at(run_label);
            out.segments.push_back({a, run_begin, end});
            seen[static_cast<int>(a)] = true;
        }
        run_begin = -1;
        run_label.clear();
    };

    for (int i = 0; i < static_cast<int>(trial.frames.size()); ++i) {
        const std::string& label = trial.frames[i].label;
        if (label.empty()) ++out.tie_frames;
        const bool in_subset = !label.empty() && wanted.count(label) > 0;
        if (run_begin >= 0 && (!in_subset || label != run_label)) close_run(i);
        if (in_subset && run_begin < 0) {
            run_begin = i;
            run_label = label;
        }
    }
    close_run(static_cast<int>(trial.frames.size()));

    for (Action a : action_subset) {
        if (!seen[static_cast<int>(a)]) out.missing.push_back(a);
    }
    return out;
}

std::vector<SampledSegment> subsample_segments(const std::vector<ActionSegment>& segments,
                                               int frames_per_action) {
    if (frames_per_action < 2) {
        throw Error("subsample_segments: frames_per_action must be >= 2");
    }
    std::vector<SampledSegment> out;
    out.reserve(segments.size());
    for (const ActionSegment& seg : segments) {
        const int len = seg.end - seg.begin;
        if (len <= 0) throw Error("subsample_segments: empty segment");
        SampledSegment s;
        s.segment = seg;
        s.repeated = len < frames_per_action;
        for (int j = 0; j < frames_per_action; ++j) {
            const double pos =
                static_cast<double>(j) * (len - 1) / static_cast<double>(frames_per_action - 1);
            s.frame_indices.push_back(seg.begin + static_cast<int>(std::llround(pos)));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string fuse_annotator_labels(const std::vector<std::string>& labels) {
    std::map<std::string, int> counts;
    for (const std::string& l : labels) ++counts[l];
    std::string best;
    int best_count = 0;
    bool tie = false;
    for (const auto& [label, count] : counts) {
        if (count > best_count) {
            best = label;
            best_count = count;
            tie = false;
        } else if (count == best_count) {
            tie = true;
        }
    }
    return tie ? std::string() : best;
}

// --------------------------------------------------------------------------
// Synthetic trial generation

namespace {

struct Rng {
    std::mt19937_64 g;
    explicit Rng(unsigned long long seed) : g(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(g() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
};

double min_jerk(double tau) {
    tau = std::clamp(tau, 0.0, 1.0);
    return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
}

Eigen::Quaterniond quat_from_fingers_palm(const Eigen::Vector3d& f, const Eigen::Vector3d& p) {
    Eigen::Matrix3d r;
    r.col(0) = f.normalized();
    r.col(2) = (p - p.dot(r.col(0)) * r.col(0)).normalized();
    r.col(1) = r.col(2).cross(r.col(0));
    return Eigen::Quaterniond(r);
}

struct PhaseEnd {
    Action action;
    double duration;                // nominal seconds
    Eigen::Vector3d rw, lw;         // wrist positions at phase end, neck frame
    Eigen::Quaterniond rq, lq;      // wrist orientations at phase end
    double neck_z;                  // world neck height at phase end
    bool screw_wiggle = false;      // rotation oscillation during the phase
    bool fine_wiggle = false;       // small position circle during the phase
};

struct PhasePlan {
    Eigen::Vector3d rw0, lw0;
    Eigen::Quaterniond rq0, lq0;
    double neck_z0;
    std::vector<PhaseEnd> phases;
    bool shared_noise = false;  // carrying: both wrists get the same noise
};

Eigen::Vector3d mirror_y(const Eigen::Vector3d& v) { return {v.x(), -v.y(), v.z()}; }

// Rest posture: arm slightly off vertical at ~98.5% extension.
Eigen::Vector3d rest_wrist(const Anthropometry& an, bool left) {
    const double reach = an.upper_arm_length + an.forearm_length;
    Eigen::Vector3d dir(0.10, -0.05, -0.99);
    if (left) dir = mirror_y(dir);
    return an.shoulder_offset(left) + 0.9855 * reach * dir.normalized();
}

PhasePlan screw_plan(Task task, const Anthropometry& an, const TaskMetadata& meta) {
    PhasePlan plan;
    plan.rw0 = rest_wrist(an, false);
    plan.lw0 = rest_wrist(an, true);
    plan.rq0 = quat_from_fingers_palm({0, 0, -1}, {0, 1, 0});
    plan.lq0 = quat_from_fingers_palm({0, 0, -1}, {0, -1, 0});
    plan.neck_z0 = an.neck_height;

    const double h_screw = meta.screw_height(task);
    // neck height while screwing: stand when the screw is high, crouch when low
    const double neck_sc = std::clamp(h_screw + 0.30, 0.95, an.neck_height);
    const double z_sc = h_screw - neck_sc;  // screw height in the neck frame
    const double neck_pick = 1.12;

    const Eigen::Quaterniond palm_down = quat_from_fingers_palm({1, 0, 0}, {0, 0, -1});
    const Eigen::Quaterniond grip_r = quat_from_fingers_palm({1, 0, 0}, {0, 1, 0});
    const Eigen::Quaterniond grip_l = quat_from_fingers_palm({1, 0, 0}, {0, -1, 0});

    const Eigen::Vector3d table_r(0.34, -0.18, -0.32);
    const Eigen::Vector3d lift_r(0.34, -0.18, -0.27);
    const Eigen::Vector3d carry_r(0.30, -0.12, -0.25);
    const Eigen::Vector3d screw_r(0.35, -0.15, z_sc);
    // the left hand holds the bolt next to the screw
    const Eigen::Vector3d screw_l = mirror_y(screw_r) + Eigen::Vector3d(-0.02, -0.04, 0.0);

    plan.phases = {
        {Action::Re, 1.5, table_r, mirror_y(table_r), palm_down, palm_down, neck_pick},
        {Action::Pi, 1.0, lift_r, mirror_y(lift_r), grip_r, grip_l, neck_pick},
        {Action::Ca, 2.0, carry_r, mirror_y(carry_r), grip_r, grip_l, neck_sc},
        {Action::Pl, 1.2, screw_r, screw_l, grip_r, grip_l, neck_sc},
        {Action::Fm, 1.2, screw_r, screw_l, grip_r, grip_l, neck_sc, false, true},
        {Action::Sc, 2.5, screw_r, screw_l, grip_r, grip_l, neck_sc, true, false},
        {Action::Rl, 1.5, plan.rw0, plan.lw0, plan.rq0, plan.lq0, an.neck_height},
    };
    return plan;
}

PhasePlan carry_plan(Task task, const Anthropometry& an, const TaskMetadata& meta) {
    PhasePlan plan;
    plan.shared_noise = true;
    plan.rw0 = rest_wrist(an, false);
    plan.lw0 = rest_wrist(an, true);
    plan.rq0 = quat_from_fingers_palm({0, 0, -1}, {0, 1, 0});
    plan.lq0 = quat_from_fingers_palm({0, 0, -1}, {0, -1, 0});
    plan.neck_z0 = an.neck_height;

    const double shelf = meta.shelf_height(task);
    const double neck_pick = 0.95;                            // squat at the 0.55 m table
    const double neck_place = std::clamp(shelf + 0.45, 0.65, an.neck_height);
    const double load_half_width = 0.20;

    // load-center waypoints in the neck frame; wrists grip at +-half width
    const Eigen::Vector3d pick_c(0.30, 0.0, meta.carry_table_height + 0.03 - neck_pick);
    const Eigen::Vector3d carry_c(0.30, 0.0, -0.33);
    const Eigen::Vector3d place_c(0.27, 0.0, shelf + 0.04 - neck_place);
    const Eigen::Vector3d grip(0.0, load_half_width, 0.0);

    const Eigen::Quaterniond grip_r = quat_from_fingers_palm({1, 0, 0}, {0, 1, 0});
    const Eigen::Quaterniond grip_l = quat_from_fingers_palm({1, 0, 0}, {0, -1, 0});

    plan.phases = {
        {Action::Re, 1.2, pick_c - grip, pick_c + grip, grip_r, grip_l, neck_pick},
        {Action::Pi, 1.0, pick_c - grip + Eigen::Vector3d(0, 0, 0.05),
         pick_c + grip + Eigen::Vector3d(0, 0, 0.05), grip_r, grip_l, neck_pick},
        {Action::Ca, 2.5, carry_c - grip, carry_c + grip, grip_r, grip_l, an.neck_height},
        {Action::Pl, 1.3, place_c - grip, place_c + grip, grip_r, grip_l, neck_place},
        {Action::Rl, 1.2, plan.rw0, plan.lw0, plan.rq0, plan.lq0, an.neck_height},
    };
    return plan;
}

// Smooth low-frequency noise: a small sum of seeded sinusoids per coordinate.
class SmoothNoise {
public:
    SmoothNoise(Rng& rng, double amplitude, int terms = 3) {
        for (int i = 0; i < terms; ++i) {
            amp_.push_back(amplitude * rng.uniform(0.3, 1.0));
            freq_.push_back(2.0 * M_PI * rng.uniform(0.2, 1.2));
            phase_.push_back(rng.uniform(0.0, 2.0 * M_PI));
        }
    }
    double operator()(double t) const {
        double v = 0.0;
        for (std::size_t i = 0; i < amp_.size(); ++i)
            v += amp_[i] * std::sin(freq_[i] * t + phase_[i]);
        return v;
    }

private:
    std::vector<double> amp_, freq_, phase_;
};

struct WristNoise {
    std::vector<SmoothNoise> pos;  // 3 coordinates
    std::vector<SmoothNoise> rot;  // 3 small-angle components
    WristNoise(Rng& rng, double level)
        : pos{SmoothNoise(rng, 0.006 * level), SmoothNoise(rng, 0.006 * level),
              SmoothNoise(rng, 0.006 * level)},
          rot{SmoothNoise(rng, 0.03 * level), SmoothNoise(rng, 0.03 * level),
              SmoothNoise(rng, 0.03 * level)} {}
    Eigen::Vector3d position(double t) const { return {pos[0](t), pos[1](t), pos[2](t)}; }
    Eigen::Quaterniond rotation(double t) const {
        const Eigen::Vector3d w(rot[0](t), rot[1](t), rot[2](t));
        const double angle = w.norm();
        if (angle < 1e-12) return Eigen::Quaterniond::Identity();
        return Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
    }
};

}  // namespace

TrialRecording synth_trial(Task task, unsigned long long participant_seed,
                           const SynthOptions& opts) {
    if (task == Task::custom) throw Error("synth_trial: 'custom' has no waypoint plan");
    Rng rng(participant_seed * 0x9e3779b97f4a7c15ULL + static_cast<unsigned long long>(task));

    TrialRecording trial;
    trial.task = task;
    trial.sample_rate = opts.sample_rate;
    {
        std::ostringstream os;
        os << "synth-" << participant_seed;
        trial.participant_id = os.str();
    }
    // per-participant anthropometry variation, +-4%
    trial.anthropometry.upper_arm_length *= rng.uniform(0.96, 1.04);
    trial.anthropometry.forearm_length *= rng.uniform(0.96, 1.04);
    const Anthropometry& an = trial.anthropometry;

    const TaskMetadata meta;
    const bool carrying = task == Task::C5 || task == Task::C10;
    PhasePlan plan = carrying ? carry_plan(task, an, meta) : screw_plan(task, an, meta);

    // per-trial duration jitter
    std::vector<double> durations;
    double total = 0.0;
    for (const PhaseEnd& ph : plan.phases) {
        durations.push_back(ph.duration * rng.uniform(0.85, 1.15));
        total += durations.back();
    }

    WristNoise noise_r(rng, opts.noise_level);
    WristNoise noise_l(rng, opts.noise_level);
    const WristNoise& noise_left = plan.shared_noise ? noise_r : noise_l;

    const double reach_cap =
        0.995 * (an.upper_arm_length + an.forearm_length);
    auto clamp_reach = [&](Eigen::Vector3d w, bool left) {
        const Eigen::Vector3d s = an.shoulder_offset(left);
        const Eigen::Vector3d rel = w - s;
        const double d = rel.norm();
        return d > reach_cap ? Eigen::Vector3d(s + rel * (reach_cap / d)) : w;
    };

    const int n_frames = static_cast<int>(std::floor(total * opts.sample_rate));
    const double dt = 1.0 / opts.sample_rate;
    trial.frames.reserve(n_frames);

    for (int k = 0; k < n_frames; ++k) {
        const double t = k * dt;
        // locate the phase
        double t0 = 0.0;
        std::size_t pi = 0;
        while (pi + 1 < plan.phases.size() && t >= t0 + durations[pi]) {
            t0 += durations[pi];
            ++pi;
        }
        const PhaseEnd& ph = plan.phases[pi];
        const double tau = std::clamp((t - t0) / durations[pi], 0.0, 1.0);
        const double s = min_jerk(tau);

        const Eigen::Vector3d rw_a = pi == 0 ? plan.rw0 : plan.phases[pi - 1].rw;
        const Eigen::Vector3d lw_a = pi == 0 ? plan.lw0 : plan.phases[pi - 1].lw;
        const Eigen::Quaterniond rq_a = pi == 0 ? plan.rq0 : plan.phases[pi - 1].rq;
        const Eigen::Quaterniond lq_a = pi == 0 ? plan.lq0 : plan.phases[pi - 1].lq;
        const double neck_a = pi == 0 ? plan.neck_z0 : plan.phases[pi - 1].neck_z;

        Eigen::Vector3d rw = rw_a + s * (ph.rw - rw_a);
        Eigen::Vector3d lw = lw_a + s * (ph.lw - lw_a);
        Eigen::Quaterniond rq = rq_a.slerp(s, ph.rq);
        Eigen::Quaterniond lq = lq_a.slerp(s, ph.lq);
        const double neck_z = neck_a + s * (ph.neck_z - neck_a);

        if (ph.fine_wiggle) {
            const double w = 2.0 * M_PI * 1.5 * (t - t0);
            const Eigen::Vector3d circle(0.0, 0.010 * std::sin(w), 0.010 * (1 - std::cos(w)));
            rw += std::sin(M_PI * tau) * circle;
            lw += std::sin(M_PI * tau) * circle;
        }
        if (ph.screw_wiggle) {
            const double angle = 0.6 * std::sin(2.0 * M_PI * 2.0 * (t - t0));
            const Eigen::Quaterniond turn(
                Eigen::AngleAxisd(std::sin(M_PI * tau) * angle, Eigen::Vector3d::UnitX()));
            rq = rq * turn;
            lq = lq * turn.conjugate();
        }

        rw = clamp_reach(rw + noise_r.position(t), false);
        lw = clamp_reach(lw + noise_left.position(t), true);
        rq = noise_r.rotation(t) * rq;
        lq = noise_left.rotation(t) * lq;

        Frame frame;
        frame.t = t;
        frame.right_wrist = Eigen::Translation3d(rw) * rq;
        frame.left_wrist = Eigen::Translation3d(lw) * lq;
        frame.label = to_string(ph.action);
        frame.neck_world = Eigen::Vector3d(0.12 * t, 0.0, neck_z);
        trial.frames.push_back(std::move(frame));
    }
    trial.validate();
    return trial;
}

}  // namespace manipulant
