#include "manipulant/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "manipulant/report.hpp"
#include "manipulant/serialization.hpp"

namespace manipulant {

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kNumericalError = 2;

std::vector<std::filesystem::path> list_trial_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ParseError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ParseError("no trials in " + dir.string());
    return files;
}

// Bounded-worker parallel map with a deterministic merge order.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

struct TrialAnalysis {
    std::vector<EllipsoidRecord> records;  // timestep order
    std::string error;                     // nonempty on failure
};

// Longest run per action, first on ties; empty when the action is absent.
std::optional<ActionSegment> pick_segment(const std::vector<ActionSegment>& segments,
                                          Action action) {
    std::optional<ActionSegment> best;
    for (const ActionSegment& s : segments) {
        if (s.action != action) continue;
        if (!best || (s.end - s.begin) > (best->end - best->begin)) best = s;
    }
    return best;
}

TrialAnalysis analyze_trial(const TrialRecording& trial, int trial_idx,
                            const std::vector<Action>& actions, const PipelineConfig& cfg) {
    TrialAnalysis out;
    try {
        const SegmentationResult seg = segment_actions(trial, actions);
        const int k = cfg.frames_per_action;
        const int m = static_cast<int>(actions.size());
        const Anthropometry& an = trial.anthropometry;

        for (int j = 0; j < m; ++j) {
            const std::optional<ActionSegment> segment = pick_segment(seg.segments, actions[j]);
            if (!segment) {
                throw Error("action " + to_string(actions[j]) + " absent from trial");
            }
            const auto sampled = subsample_segments({*segment}, k);
            for (int s = 0; s < k; ++s) {
                const Frame& frame = trial.frames[sampled[0].frame_indices[s]];
                const double u = (j + static_cast<double>(s) / (k - 1)) / m;

                ManipulabilityEllipsoid ell;
                if (cfg.arm == "dual") {
                    AnthropomorphicArm left = an.arm(true);
                    AnthropomorphicArm right = an.arm(false);
                    const Pose wl = Eigen::Translation3d(-an.shoulder_offset(true)) *
                                    trial.frames[sampled[0].frame_indices[s]].left_wrist;
                    const Pose wr = Eigen::Translation3d(-an.shoulder_offset(false)) *
                                    frame.right_wrist;
                    const JointConfig ql = arm_triangle_to_joints(
                        left, wrist_pose_to_arm_triangle(left, wl, cfg.swivel_hint));
                    const JointConfig qr = arm_triangle_to_joints(
                        right, wrist_pose_to_arm_triangle(right, wr, -cfg.swivel_hint));
                    // chains anchored at the shoulders so everything lives in
                    // the neck frame; the object sits between the wrists
                    left.shoulder_frame = Eigen::Translation3d(an.shoulder_offset(true)) *
                                          Eigen::Quaterniond::Identity();
                    right.shoulder_frame = Eigen::Translation3d(an.shoulder_offset(false)) *
                                           Eigen::Quaterniond::Identity();
                    DualArmSystem sys{left.chain(), right.chain(), GraspModel{}};
                    const Eigen::Vector3d pl = frame.left_wrist.translation();
                    const Eigen::Vector3d pr = frame.right_wrist.translation();
                    sys.grasp.object_frame.translation() = 0.5 * (pl + pr);
                    sys.grasp.left_contact = pl - sys.grasp.object_frame.translation();
                    sys.grasp.right_contact = pr - sys.grasp.object_frame.translation();
                    ell = dual_arm_velocity_manipulability(sys, ql, qr, 1e-3, "neck");
                } else {
                    const bool is_left = cfg.arm == "left";
                    const AnthropomorphicArm arm_model = an.arm(is_left);
                    const auto& precomputed = is_left ? frame.joints_left : frame.joints_right;
                    JointConfig q;
                    if (precomputed && precomputed->size() == 7) {
                        q = *precomputed;
                    } else {
                        const Pose wrist = Eigen::Translation3d(-an.shoulder_offset(is_left)) *
                                           (is_left ? frame.left_wrist : frame.right_wrist);
                        q = arm_triangle_to_joints(
                            arm_model,
                            wrist_pose_to_arm_triangle(arm_model, wrist, cfg.swivel_hint));
                    }
                    const KinematicChain chain = arm_model.chain();
                    const Eigen::MatrixXd jac = cfg.jacobian == "full"
                                                    ? jacobian(chain, q)
                                                    : positional_jacobian(chain, q);
                    ell = velocity_manipulability(jac, "shoulder_" + cfg.arm);
                }
                if (cfg.kind == "force") ell = force_manipulability(ell);

                out.records.push_back(EllipsoidRecord{frame.t, u, trial_idx, j * k + s,
                                                      to_string(actions[j]), ell.frame, cfg.kind,
                                                      ell.spd()});
            }
        }
    } catch (const std::exception& e) {
        out.error = e.what();
        out.records.clear();
    }
    return out;
}

json provenance_json(const PipelineConfig& cfg,
                     const std::vector<std::filesystem::path>& inputs) {
    return json{{"config", cfg.to_json()}, {"input_hash", content_hash_of_files(inputs)}};
}

std::vector<Action> resolve_actions(const PipelineConfig& cfg, Task task) {
    if (cfg.actions.empty()) return task_action_sequence(task);
    std::vector<Action> actions;
    for (const std::string& s : cfg.actions) actions.push_back(action_from_string(s));
    return actions;
}

}  // namespace

int cmd_synth(const SynthArgs& args) {
    const Task task = task_from_string(args.task);
    SynthOptions opts;
    opts.noise_level = args.noise;
    opts.sample_rate = args.sample_rate;
    const auto generator = [&](unsigned long long seed) {
        return json{{"task", args.task},
                    {"seed", seed},
                    {"noise_level", args.noise},
                    {"sample_rate", args.sample_rate}};
    };
    if (args.count == 1) {
        write_trial(args.out, synth_trial(task, args.seed, opts), generator(args.seed));
        std::cout << "wrote " << args.out.string() << "\n";
        return kOk;
    }
    std::filesystem::create_directories(args.out);
    for (int i = 0; i < args.count; ++i) {
        std::ostringstream name;
        name << "trial_" << std::setw(3) << std::setfill('0') << i + 1 << ".jsonl";
        write_trial(args.out / name.str(), synth_trial(task, args.seed + i, opts),
                    generator(args.seed + i));
    }
    std::cout << "wrote " << args.count << " trials to " << args.out.string() << "\n";
    return kOk;
}

int cmd_ingest(const std::filesystem::path& dir) {
    const auto files = list_trial_files(dir);
    for (const auto& file : files) {
        const TrialRecording trial = read_trial(file);
        const SegmentationResult seg =
            segment_actions(trial, task_action_sequence(trial.task));
        std::cout << file.filename().string() << ": participant " << trial.participant_id
                  << ", task " << to_string(trial.task) << ", " << trial.frames.size()
                  << " frames, " << seg.segments.size() << " action segments";
        if (seg.tie_frames > 0) std::cout << ", " << seg.tie_frames << " tie frames dropped";
        if (!seg.missing.empty()) {
            std::cout << ", missing:";
            for (Action a : seg.missing) std::cout << " " << to_string(a);
        }
        std::cout << "\n";
    }
    std::cout << files.size() << " trial(s) ok\n";
    return kOk;
}

int cmd_analyze(const AnalyzeArgs& args) {
    const auto files = list_trial_files(args.dir);
    std::vector<TrialRecording> trials(files.size(), TrialRecording{});
    std::vector<std::string> read_errors(files.size());
    parallel_for(static_cast<int>(files.size()), args.cfg.workers, [&](int i) {
        try {
            trials[i] = read_trial(files[i]);
        } catch (const std::exception& e) {
            read_errors[i] = e.what();
        }
    });

    Task task = Task::custom;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (read_errors[i].empty()) {
            task = trials[i].task;
            break;
        }
    }
    const std::vector<Action> actions = resolve_actions(args.cfg, task);

    std::vector<TrialAnalysis> analyses(trials.size());
    parallel_for(static_cast<int>(trials.size()), args.cfg.workers, [&](int i) {
        if (!read_errors[i].empty()) {
            analyses[i].error = read_errors[i];
            return;
        }
        analyses[i] = analyze_trial(trials[i], i, actions, args.cfg);
    });

    const int n_timesteps = static_cast<int>(actions.size()) * args.cfg.frames_per_action;
    std::vector<std::vector<SpdMatrix>> timestep_major(n_timesteps);
    std::vector<double> u(n_timesteps, 0.0);
    std::vector<EllipsoidRecord> records;
    int ok_trials = 0;
    for (std::size_t i = 0; i < analyses.size(); ++i) {
        if (!analyses[i].error.empty()) {
            std::cerr << "trial " << files[i].filename().string() << " skipped: "
                      << analyses[i].error << "\n";
            continue;
        }
        ++ok_trials;
        for (const EllipsoidRecord& r : analyses[i].records) {
            timestep_major[r.timestep].push_back(r.spd);
            u[r.timestep] = r.u;
            records.push_back(r);
        }
    }
    std::cout << ok_trials << "/" << files.size() << " trials analyzed\n";
    if (ok_trials == 0) {
        std::cerr << "error: all trials failed\n";
        return kNumericalError;
    }
    if (ok_trials == 1) {
        std::cerr << "error: inter-trial statistics need at least 2 successful trials\n";
        return kNumericalError;
    }

    const json prov = provenance_json(args.cfg, files);
    write_ellipsoids(args.out_dir / "ellipsoids.jsonl", records, prov, to_string(task));
    // full-Jacobian ellipsoids mix translational and angular units with a
    // large eigenvalue spread; the mean iteration floors above the default
    // absolute tolerance there
    FrechetOptions mean_opts;
    if (args.cfg.jacobian == "full") {
        mean_opts.tol = 1e-8;
        mean_opts.max_iter = 200;
    }
    const ManipulabilityProfile profile = build_profile(timestep_major, u, mean_opts);
    write_profile(args.out_dir / "profile.json", profile, prov);
    write_profile_indices_csv(args.out_dir / "indices.csv", profile, prov);
    std::cout << "wrote " << (args.out_dir / "ellipsoids.jsonl").string() << ", "
              << (args.out_dir / "profile.json").string() << ", "
              << (args.out_dir / "indices.csv").string() << "\n";
    return kOk;
}

namespace {

// K defaults to 5 for screwing profiles and 3 for carrying ones.
int default_components(const std::filesystem::path& ellipsoids_file) {
    try {
        const json header = read_jsonl_header(ellipsoids_file);
        const std::string task = header.value("task", "");
        if (task == "C5" || task == "C10") return 3;
    } catch (const std::exception&) {
    }
    return 5;
}

}  // namespace

int cmd_learn(const LearnArgs& args) {
    const std::vector<EllipsoidRecord> records = read_ellipsoids(args.input);
    std::vector<GmmDatum> data;
    for (const EllipsoidRecord& r : records) {
        if (!args.actions.empty() &&
            std::find(args.actions.begin(), args.actions.end(), r.action) ==
                args.actions.end()) {
            continue;
        }
        data.push_back(GmmDatum{r.u, r.spd});
    }
    if (data.empty()) throw ParseError("no ellipsoids selected from " + args.input.string());

    GmmFitOptions opts;
    opts.max_em_iter = args.cfg.max_em_iter;
    opts.tol = args.cfg.em_tol;
    opts.cov_reg = args.cfg.cov_reg;
    opts.seed = args.cfg.seed;
    const int k = args.cfg.components.value_or(default_components(args.input));
    const GmmFitResult fit = fit_gmm(data, k, opts);

    json prov = provenance_json(args.cfg, {args.input});
    prov["log_likelihood"] = fit.log_likelihood;
    write_gmm(args.out, fit.model, prov);
    std::cout << "fitted " << k << " components on " << data.size()
              << " ellipsoids, final log-likelihood " << fit.log_likelihood.back() << "\n";
    return kOk;
}

int cmd_track(const TrackArgs& args) {
    const RobotDescription robot = load_robot(args.robot);
    const ProfileSource source = load_profile_source(args.profile);

    ControllerConfig ctrl;
    ctrl.k_m_scale = args.cfg.k_m;
    ctrl.k_x_scale = args.cfg.k_x;
    ctrl.dt = args.cfg.dt;
    ctrl.damping = args.cfg.damping;
    ctrl.divergence_factor = args.cfg.divergence_factor;
    ctrl.task_rows = robot.task_rows;
    const PriorityMode first = priority_mode_from_string(args.cfg.initial_mode);
    const PriorityMode second = first == PriorityMode::manipulability_first
                                    ? PriorityMode::position_first
                                    : PriorityMode::manipulability_first;
    ctrl.schedule = {{0.0, first}};
    if (args.cfg.switch_time > 0.0 && args.cfg.switch_time < args.cfg.duration) {
        ctrl.schedule.push_back({args.cfg.switch_time, second});
    }

    JointConfig q0 = robot.rest_config;
    if (args.cfg.q0) {
        if (static_cast<int>(args.cfg.q0->size()) != robot.chain.dof()) {
            throw ParseError("controller.q0 length does not match the robot");
        }
        q0 = Eigen::Map<const Eigen::VectorXd>(args.cfg.q0->data(), robot.chain.dof());
    }
    Eigen::VectorXd target_x;
    if (args.cfg.target_position) {
        if (args.cfg.target_position->size() != ctrl.task_rows.size()) {
            throw ParseError("controller.target_position length does not match task rows");
        }
        target_x = Eigen::Map<const Eigen::VectorXd>(args.cfg.target_position->data(),
                                                     args.cfg.target_position->size());
    } else {
        target_x = task_kinematics(robot.chain, q0, ctrl.task_rows).position;
    }

    const double duration = args.cfg.duration;
    const ProfileSource timed = [&source, duration](double t) { return source(t / duration); };
    const TrackingLog log = run_tracking(robot.chain, q0, timed, target_x, ctrl, duration);

    const json prov = provenance_json(args.cfg, {args.robot, args.profile});
    write_run_log(args.out, log, prov);
    if (log.diverged) {
        std::cerr << "error: " << log.divergence_message << "\n"
                  << "diagnostic trace: " << args.out.string() << "\n";
        return kNumericalError;
    }
    std::cout << "tracked for " << duration << " s, final manipulability distance "
              << log.steps.back().spd_dist << ", final position error "
              << log.steps.back().pos_error << "\nwrote " << args.out.string() << "\n";
    return kOk;
}

int cmd_report(const ReportArgs& args) {
    const TrackingLog log = read_run_log(args.input);
    if (log.steps.empty()) throw ParseError("run log has no steps: " + args.input.string());
    const json prov = provenance_json(args.cfg, {args.input});
    write_error_csv(args.out_dir / "errors.csv", log, prov);
    write_error_svg(args.out_dir / "errors.svg", log, prov);
    write_ellipse_svg(args.out_dir / "ellipses.svg", log, args.cfg.ellipse_stride, prov);
    std::cout << "wrote report to " << args.out_dir.string() << "\n";
    return kOk;
}

namespace {

PipelineConfig load_cfg(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return PipelineConfig::from_file(path);
}

std::optional<unsigned long long> env_seed_override() {
    const char* env = std::getenv("MANIPULANT_SEED");
    if (!env || !*env) return std::nullopt;
    try {
        return std::stoull(env);
    } catch (...) {
        throw ParseError("MANIPULANT_SEED is not an integer");
    }
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"manipulability analysis and transfer toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic trial");
    c_synth->add_option("--task", synth.task, "SL, SM, SH, C5 or C10")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "participant seed")->capture_default_str();
    c_synth->add_option("--count", synth.count, "number of trials (out becomes a directory)")
        ->capture_default_str();
    c_synth->add_option("--noise", synth.noise, "noise level, 0 disables")
        ->capture_default_str();
    c_synth->add_option("--rate", synth.sample_rate, "sample rate in Hz")->capture_default_str();
    c_synth->add_option("--out", synth.out, "output file or directory")->required();

    std::string ingest_dir;
    CLI::App* c_ingest = app.add_subcommand("ingest", "validate and summarize trial files");
    c_ingest->add_option("--dir", ingest_dir, "directory of .jsonl trials")->required();

    std::string analyze_dir, analyze_out = ".", analyze_cfg, analyze_arm;
    int analyze_fpa = 0;
    CLI::App* c_analyze =
        app.add_subcommand("analyze", "trials -> ellipsoids, profile and index tracks");
    c_analyze->add_option("--dir", analyze_dir, "directory of .jsonl trials")->required();
    c_analyze->add_option("--out-dir", analyze_out, "output directory")->capture_default_str();
    c_analyze->add_option("--cfg", analyze_cfg, "pipeline config (TOML)");
    c_analyze->add_option("--arm", analyze_arm, "left, right or dual (overrides config)");
    c_analyze->add_option("--frames-per-action", analyze_fpa, "subsampling count override");

    std::string learn_in, learn_out = "gmm.json", learn_cfg, learn_actions;
    int learn_k = 0;
    CLI::App* c_learn = app.add_subcommand("learn-profile", "fit the time-driven mixture model");
    c_learn->add_option("--in", learn_in, "ellipsoids.jsonl from analyze")->required();
    c_learn->add_option("--out", learn_out, "output model file")->capture_default_str();
    c_learn->add_option("--K", learn_k, "number of components (overrides config)");
    c_learn->add_option("--actions", learn_actions, "comma-separated action filter");
    c_learn->add_option("--cfg", learn_cfg, "pipeline config (TOML)");

    std::string track_robot, track_profile, track_out = "run.jsonl", track_cfg;
    CLI::App* c_track = app.add_subcommand("track", "run the manipulability tracking controller");
    c_track->add_option("--robot", track_robot, "robot description JSON")->required();
    c_track->add_option("--profile", track_profile, "gmm/profile/constant document")->required();
    c_track->add_option("--out", track_out, "run log output")->capture_default_str();
    c_track->add_option("--cfg", track_cfg, "pipeline config (TOML)");

    std::string report_in, report_out = "plots";
    std::string report_cfg;
    CLI::App* c_report = app.add_subcommand("report", "emit CSV tracks and SVG plots");
    c_report->add_option("--in", report_in, "run log from track")->required();
    c_report->add_option("--out", report_out, "output directory")->capture_default_str();
    c_report->add_option("--cfg", report_cfg, "pipeline config (TOML)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto seed_override = env_seed_override();
        if (c_synth->parsed()) {
            if (seed_override) synth.seed = *seed_override;
            return cmd_synth(synth);
        }
        if (c_ingest->parsed()) return cmd_ingest(ingest_dir);
        if (c_analyze->parsed()) {
            AnalyzeArgs args;
            args.dir = analyze_dir;
            args.out_dir = analyze_out;
            args.cfg = load_cfg(analyze_cfg);
            if (!analyze_arm.empty()) args.cfg.arm = analyze_arm;
            if (analyze_fpa > 0) args.cfg.frames_per_action = analyze_fpa;
            if (args.cfg.arm != "left" && args.cfg.arm != "right" && args.cfg.arm != "dual") {
                throw ParseError("--arm must be left, right or dual");
            }
            return cmd_analyze(args);
        }
        if (c_learn->parsed()) {
            LearnArgs args;
            args.input = learn_in;
            args.out = learn_out;
            args.cfg = load_cfg(learn_cfg);
            if (learn_k > 0) args.cfg.components = learn_k;
            if (seed_override) args.cfg.seed = *seed_override;
            if (!learn_actions.empty()) {
                std::stringstream ss(learn_actions);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    if (!item.empty()) args.actions.push_back(item);
                }
            }
            return cmd_learn(args);
        }
        if (c_track->parsed()) {
            TrackArgs args;
            args.robot = track_robot;
            args.profile = track_profile;
            args.out = track_out;
            args.cfg = load_cfg(track_cfg);
            return cmd_track(args);
        }
        if (c_report->parsed()) {
            ReportArgs args;
            args.input = report_in;
            args.out_dir = report_out;
            args.cfg = load_cfg(report_cfg);
            return cmd_report(args);
        }
    } catch (const ParseError& e) {
        if (e.line > 0) {
            std::cerr << "error: " << e.what() << " (line " << e.line << ")\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalError;
    }
    return kUserError;
}

}  // namespace manipulant
