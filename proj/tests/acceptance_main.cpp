// Acceptance suite: one pass/fail line per criterion, exit 0 only when all
// criteria hold at their stated tolerances.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "manipulant/cli.hpp"
#include "manipulant/control.hpp"
#include "manipulant/serialization.hpp"
#include "test_support.hpp"

using namespace manipulant;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.str().empty()) detail << "; ";
            detail << what;
        }
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

Outcome spd_manifold_suite() {
    Outcome out;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);

    for (int i = 0; i < 100; ++i) {
        const int d = 2 + static_cast<int>(rng() % 2);
        const SpdMatrix s = testsup::random_spd(rng, d);
        const SpdMatrix l = testsup::random_spd(rng, d);

        // affine invariance under a well-conditioned congruence
        const Eigen::MatrixXd a =
            testsup::random_matrix(rng, d, d) + 2.0 * Eigen::MatrixXd::Identity(d, d);
        const double base = spd_distance(s, l);
        const double congruent =
            spd_distance(SpdMatrix(a * s.matrix() * a.transpose()),
                         SpdMatrix(a * l.matrix() * a.transpose()));
        out.require(std::abs(congruent - base) <= 1e-8, "affine invariance");

        // symmetry
        out.require(std::abs(spd_distance(s, l) - spd_distance(l, s)) <= 1e-12, "symmetry");

        // triangle inequality
        const SpdMatrix m = testsup::random_spd(rng, d);
        out.require(spd_distance(s, l) <= spd_distance(s, m) + spd_distance(m, l) + 1e-10,
                    "triangle inequality");

        // exp/log round trip
        const TangentSym log = spd_log(s, l);
        out.require((spd_exp(s, log).matrix() - l.matrix()).norm() <= 1e-8,
                    "exp/log round trip");
    }

    for (int i = 0; i < 100; ++i) {
        std::vector<SpdMatrix> pts;
        const int n = 3 + static_cast<int>(rng() % 4);
        for (int k = 0; k < n; ++k) pts.push_back(testsup::random_spd(rng, 3));
        const SpdMatrix mean = frechet_mean(pts);

        std::vector<SpdMatrix> perm(pts.rbegin(), pts.rend());
        std::rotate(perm.begin(), perm.begin() + i % n, perm.end());
        out.require((frechet_mean(perm).matrix() - mean.matrix()).norm() <= 1e-9,
                    "mean permutation invariance");

        double max_to_mean = 0.0, diameter = 0.0;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            max_to_mean = std::max(max_to_mean, spd_distance(mean, pts[p]));
            for (std::size_t q = p + 1; q < pts.size(); ++q)
                diameter = std::max(diameter, spd_distance(pts[p], pts[q]));
        }
        out.require(max_to_mean <= diameter, "mean distance-hull containment");
    }

    const double dt = seconds_since(t0);
    out.require(dt < 10.0, "runtime " + std::to_string(dt) + " s >= 10 s");
    out.detail << (out.detail.str().empty() ? "" : "; ") << "100 cases per property, "
               << dt << " s";
    return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome kinematics_suite() {
    Outcome out;
    std::mt19937_64 rng(1002);

    for (int i = 0; i < 100; ++i) {
        const KinematicChain chain = testsup::random_chain(rng);
        const JointConfig q = testsup::random_config(rng, chain.dof());
        const Eigen::MatrixXd j = positional_jacobian(chain, q);
        Eigen::MatrixXd fd(3, chain.dof());
        const double h = 1e-6;
        for (int k = 0; k < chain.dof(); ++k) {
            JointConfig qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            fd.col(k) = (forward_kinematics(chain, qp).translation() -
                         forward_kinematics(chain, qm).translation()) /
                        (2 * h);
        }
        out.require((j - fd).cwiseAbs().maxCoeff() <= 1e-6, "jacobian vs finite differences");
    }

    const AnthropomorphicArm arm;
    for (int i = 0; i < 100; ++i) {
        Pose wrist = Pose::Identity();
        wrist.translation() = testsup::random_unit(rng) *
                              testsup::uniform(rng, arm.min_reach() + 0.02,
                                               arm.max_reach() - 0.01);
        wrist.linear() = testsup::random_rotation(rng);
        const ArmTriangle tri =
            wrist_pose_to_arm_triangle(arm, wrist, testsup::uniform(rng, -M_PI, M_PI));
        const Pose fk = forward_kinematics(arm.chain(), arm_triangle_to_joints(arm, tri));
        const double pos_err = (fk.translation() - wrist.translation()).norm();
        const double rot_err =
            Eigen::AngleAxisd(fk.linear().transpose() * wrist.linear()).angle();
        out.require(pos_err <= 1e-6 && std::abs(rot_err) <= 1e-6, "arm-triangle round trip");
    }
    out.detail << "100 random chains, 100 reachable poses";
    return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome manipulability_suite() {
    Outcome out;
    std::mt19937_64 rng(1003);

    int checked = 0;
    while (checked < 100) {
        const KinematicChain chain = testsup::random_chain(rng, 4, 8);
        const JointConfig q = testsup::random_config(rng, chain.dof());
        const ManipulabilityEllipsoid v = velocity_manipulability(chain, q);
        if (v.singular) continue;
        ++checked;
        const ManipulabilityEllipsoid f = force_manipulability(v);
        out.require((f.matrix * v.matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <=
                        1e-8,
                    "velocity-force duality");
    }

    const KinematicChain planar = testsup::planar_two_link();
    const ManipulabilityEllipsoid m =
        velocity_manipulability(positional_jacobian(planar, Eigen::Vector2d(0, -M_PI / 2))
                                    .topRows(2));
    Eigen::Matrix2d expected;
    expected << 2, 1, 1, 1;
    out.require((m.matrix - expected).cwiseAbs().maxCoeff() <= 1e-12,
                "planar oracle M = [[2,1],[1,1]]");
    const ClassicalIndices idx = classical_indices(m);
    out.require(std::abs(idx.determinant - 1.0) <= 1e-6, "planar oracle det = 1");
    const double cond_expected = (3.0 + std::sqrt(5.0)) / (3.0 - std::sqrt(5.0));
    out.require(std::abs(idx.condition_number - cond_expected) <= 1e-6,
                "planar oracle cond ~ 6.8541");

    for (int i = 0; i < 100; ++i) {
        const KinematicChain chain = testsup::random_chain(rng, 2, 7);
        const JointConfig q = testsup::random_config(rng, chain.dof());
        const ManipulabilityJacobian mj = manipulability_jacobian(chain, q);
        const double h = 1e-6;
        for (int k = 0; k < chain.dof(); ++k) {
            JointConfig qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            const Eigen::MatrixXd fd = (velocity_manipulability(chain, qp).matrix -
                                        velocity_manipulability(chain, qm).matrix) /
                                       (2 * h);
            const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
            out.require((mj.slices[k] - fd).cwiseAbs().maxCoeff() / scale <= 1e-5,
                        "manipulability Jacobian vs finite differences");
        }
    }
    out.detail << "duality x100, planar oracle, derivative tensor x100";
    return out;
}

// ---------------------------------------------------------------- criterion 4

Outcome controller_suite() {
    Outcome out;
    const KinematicChain planar = testsup::planar_three_link();
    const std::vector<int> rows{0, 1};
    const Eigen::Vector3d q0(0.3, 0.5, 0.4);
    const Eigen::Vector3d q_star(0.55, 0.8, 0.05);
    ControllerConfig cfg;
    cfg.task_rows = rows;
    cfg.schedule = {{0.0, PriorityMode::manipulability_first}};

    // zero-error fixed point
    const TaskKinematics tk0 = task_kinematics(planar, q0, rows);
    const SpdMatrix m0(tk0.ellipsoid);
    out.require(manipulability_first_step(tk0, m0, tk0.position, cfg).qdot.norm() <= 1e-12,
                "zero-error fixed point (manipulability first)");
    out.require(position_first_step(tk0, m0, tk0.position, cfg).qdot.norm() <= 1e-12,
                "zero-error fixed point (position first)");

    // strict hierarchy on a redundant spatial arm
    {
        const AnthropomorphicArm arm;
        const KinematicChain chain = arm.chain();
        Pose wrist = Pose::Identity();
        wrist.translation() = Eigen::Vector3d(0.30, -0.05, -0.30);
        wrist.linear() = Eigen::AngleAxisd(-0.4, Eigen::Vector3d::UnitY()).matrix();
        const JointConfig aq0 =
            arm_triangle_to_joints(arm, wrist_pose_to_arm_triangle(arm, wrist, 0.2));
        ControllerConfig acfg;
        const TaskKinematics tk = task_kinematics(chain, aq0, acfg.task_rows);
        const Eigen::MatrixXd n_proj = nullspace_projector(tk.jac);
        const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(7, -1.0, 1.0);
        const TaskKinematics tk_ns = task_kinematics(
            chain, JointConfig(aq0 + 0.35 * (n_proj * w).normalized()), acfg.task_rows);
        const SpdMatrix m_ns(tk_ns.ellipsoid);
        const Eigen::VectorXd target_x = tk.position + Eigen::Vector3d(0.03, -0.02, 0.04);
        const ControlStep step = position_first_step(tk, m_ns, target_x, acfg);
        const Eigen::VectorXd primary =
            damped_pseudoinverse(tk.jac) * acfg.gain_x(3) * (target_x - tk.position);
        const double residual = (tk.jac * (step.qdot - primary)).norm();
        out.require(residual <= 1e-10 * std::max(1.0, step.qdot.norm()),
                    "strict hierarchy residual");
    }

    // planar 3-link constant-target benchmark
    const TaskKinematics tk_star = task_kinematics(planar, q_star, rows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const TrackingLog log = run_tracking(
        planar, q0, [&](double) { return m_target; }, tk0.position, cfg, 5.0);
    out.require(!log.diverged, "benchmark diverged");
    out.require(log.steps.back().spd_dist < 0.05, "distance below 0.05 within 5 s");
    bool monotone = true;
    for (std::size_t k = 51; k < log.steps.size(); ++k) {
        if (log.steps[k].spd_dist > log.steps[k - 1].spd_dist + 1e-6) monotone = false;
    }
    out.require(monotone, "monotone after step 50");

    ControllerConfig half = cfg;
    half.dt = cfg.dt / 2;
    const TrackingLog log2 = run_tracking(
        planar, q0, [&](double) { return m_target; }, tk0.position, half, 5.0);
    const double d1 = log.steps.back().spd_dist;
    const double d2 = log2.steps.back().spd_dist;
    out.require(std::abs(d1 - d2) < 0.01 * std::max({d1, d2, 1e-6}),
                "dt halving changes final distance by >= 1%");
    out.detail << "final distance " << d1;
    return out;
}

// ---------------------------------------------------------------- criterion 5

Outcome two_phase_suite() {
    Outcome out;
    const auto t0 = Clock::now();
    const AnthropomorphicArm arm;
    const KinematicChain chain = arm.chain();
    Pose wrist = Pose::Identity();
    wrist.translation() = Eigen::Vector3d(0.30, -0.05, -0.30);
    wrist.linear() = Eigen::AngleAxisd(-0.4, Eigen::Vector3d::UnitY()).matrix();
    const JointConfig q0 =
        arm_triangle_to_joints(arm, wrist_pose_to_arm_triangle(arm, wrist, 0.2));
    Pose wrist2 = wrist;
    wrist2.translation() += Eigen::Vector3d(0.03, 0.03, 0.04);
    const JointConfig q_star =
        arm_triangle_to_joints(arm, wrist_pose_to_arm_triangle(arm, wrist2, 0.7));

    ControllerConfig cfg;  // default: manipulability first, switch at t = 1 s
    const TaskKinematics tk_star = task_kinematics(chain, q_star, cfg.task_rows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const TrackingLog log = run_tracking(
        chain, q0, [&](double) { return m_target; }, tk_star.position, cfg, 3.0);
    out.require(!log.diverged, "diverged");

    std::size_t i_switch = 0;
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        if (log.steps[i].mode == PriorityMode::manipulability_first) i_switch = i;
    }
    const double d_start = log.steps.front().spd_dist;
    const double d_switch = log.steps[i_switch].spd_dist;
    const double d_end = log.steps.back().spd_dist;
    out.require(d_switch < d_start, "phase-1 manipulability error did not decrease");
    out.require(log.steps.back().pos_error < 1e-3, "phase-2 position error >= 1e-3 m");
    out.require(d_end <= 1.2 * d_switch, "manipulability regressed by more than 20%");

    const double dt = seconds_since(t0);
    out.require(dt < 30.0, "runtime " + std::to_string(dt) + " s >= 30 s");
    out.detail << "d_M " << d_start << " -> " << d_switch << " -> " << d_end << ", pos "
               << log.steps.front().pos_error << " -> " << log.steps.back().pos_error;
    return out;
}

// ---------------------------------------------------------------- criterion 6

Outcome dual_arm_suite() {
    Outcome out;
    const SharedBaseDualArm sys = default_dual_arm();
    Pose wr = Pose::Identity();
    wr.translation() = Eigen::Vector3d(0.42, -0.02, -0.10);
    wr.linear() = (Eigen::Matrix3d() << 1, 0, 0, 0, 0, 1, 0, -1, 0).finished();
    Pose wl = wr;
    wl.translation() = Eigen::Vector3d(0.42, 0.02, -0.10);
    wl.linear() = (Eigen::Matrix3d() << 1, 0, 0, 0, 0, -1, 0, 1, 0).finished();
    const Pose tip = chain_state(sys.torso, Eigen::VectorXd::Zero(3)).end_effector;
    const Pose wl_world = tip * sys.left_mount * wl;
    const Pose wr_world = tip * sys.right_mount * wr;

    const auto posture = [&](double pitch, double swivel) {
        JointConfig qt(3);
        qt << 0.0, pitch, 0.0;
        const Pose t2 = chain_state(sys.torso, qt).end_effector;
        const JointConfig ql = arm_triangle_to_joints(
            sys.left_arm, wrist_pose_to_arm_triangle(
                              sys.left_arm, (t2 * sys.left_mount).inverse() * wl_world, swivel));
        const JointConfig qr = arm_triangle_to_joints(
            sys.right_arm,
            wrist_pose_to_arm_triangle(sys.right_arm,
                                       (t2 * sys.right_mount).inverse() * wr_world, -swivel));
        JointConfig q(sys.dof());
        q << qt, ql, qr;
        return q;
    };

    const JointConfig q0 = posture(0.25, 1.2);
    const SpdMatrix m_target(dual_arm_kinematics(sys, posture(-0.30, 0.0)).ellipsoid);
    ControllerConfig cfg;
    cfg.schedule = {{0.0, PriorityMode::position_first}};
    const DualTrackingLog log = run_dual_arm_tracking(
        sys, q0, [&](double) { return m_target; }, cfg, 4.0);
    out.require(!log.infeasible, "fixture infeasible");
    out.require(log.max_drift <= 1e-3, "end-effector drift exceeds 1e-3 m");
    const double d0 = log.steps.front().spd_dist;
    const double d1 = log.steps.back().spd_dist;
    out.require(d1 <= 0.5 * d0, "distance decreased by less than 50%");
    out.detail << "distance " << d0 << " -> " << d1 << ", drift " << log.max_drift << " m";
    return out;
}

// ---------------------------------------------------------------- criterion 7

Outcome gmm_suite() {
    Outcome out;
    std::mt19937_64 rng(1007);
    const SpdMatrix ca = SpdMatrix::from_diagonal(Eigen::Vector2d(1.0, 0.25));
    const SpdMatrix cb = SpdMatrix::from_diagonal(Eigen::Vector2d(6.0, 3.0));
    std::vector<GmmDatum> data;
    for (int i = 0; i < 30; ++i) {
        data.push_back({testsup::uniform(rng, 0.05, 0.4),
                        spd_exp(ca, Eigen::MatrixXd(0.03 * testsup::random_symmetric(rng, 2)))});
        data.push_back({testsup::uniform(rng, 0.6, 0.95),
                        spd_exp(cb, Eigen::MatrixXd(0.03 * testsup::random_symmetric(rng, 2)))});
    }
    const GmmFitResult fit = fit_gmm(data, 2);
    // a mismatched component count forces a longer EM path; monotonicity must
    // hold across every accepted iteration of both fits
    GmmFitOptions hard;
    hard.tol = 1e-12;
    const GmmFitResult fit3 = fit_gmm(data, 3, hard);
    std::size_t iterations = 0;
    for (const GmmFitResult* f : {&fit, &fit3}) {
        iterations += f->log_likelihood.size();
        for (std::size_t i = 1; i < f->log_likelihood.size(); ++i) {
            out.require(f->log_likelihood[i] >= f->log_likelihood[i - 1] - 1e-9,
                        "log-likelihood decreased");
        }
    }
    const int ia = fit.model.components[0].time_mean < fit.model.components[1].time_mean ? 0 : 1;
    out.require(spd_distance(fit.model.components[ia].center, ca) < 0.05,
                "first cluster center off by >= 0.05");
    out.require(spd_distance(fit.model.components[1 - ia].center, cb) < 0.05,
                "second cluster center off by >= 0.05");

    bool continuous = true;
    for (int i = 0; i <= 1000; ++i) {
        const double u = static_cast<double>(i) / 1000.0;
        if (spd_distance(retrieve_profile(fit.model, u),
                         retrieve_profile(fit.model, u + 1e-4)) >= 1e-2) {
            continuous = false;
        }
    }
    out.require(continuous, "retrieval continuity sweep failed");
    out.detail << iterations << " EM iterations across both fits";
    return out;
}

// ---------------------------------------------------------------- criterion 8

int run_pipeline(const fs::path& root) {
    const std::string bin = MANIPULANT_BIN;
    const fs::path models = fs::path(MANIPULANT_MODELS);
    const std::string quiet = " > /dev/null 2>&1";
    const std::vector<std::string> cmds = {
        bin + " synth --task SM --seed 7 --count 15 --out " + (root / "trials").string(),
        bin + " analyze --dir " + (root / "trials").string() + " --out-dir " +
            (root / "out").string(),
        bin + " learn-profile --in " + (root / "out" / "ellipsoids.jsonl").string() +
            " --K 5 --actions Ca,Pl,Fm --out " + (root / "out" / "gmm.json").string(),
        bin + " track --robot " + (models / "arm7.json").string() + " --profile " +
            (root / "out" / "gmm.json").string() + " --out " + (root / "out" / "run.jsonl").string(),
        bin + " report --in " + (root / "out" / "run.jsonl").string() + " --out " +
            (root / "out" / "plots").string(),
    };
    for (const std::string& cmd : cmds) {
        const int status = std::system((cmd + quiet).c_str());
        if (WEXITSTATUS(status) != 0) return WEXITSTATUS(status);
    }
    return 0;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

Outcome pipeline_suite() {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / "manipulant_acceptance";
    fs::remove_all(root);
    fs::create_directories(root / "a");
    fs::create_directories(root / "b");

    const auto t0 = Clock::now();
    const int code_a = run_pipeline(root / "a");
    const double dt = seconds_since(t0);
    out.require(code_a == 0, "pipeline exited with code " + std::to_string(code_a));
    out.require(dt < 60.0, "runtime " + std::to_string(dt) + " s >= 60 s");

    const int code_b = run_pipeline(root / "b");
    out.require(code_b == 0, "rerun exited with code " + std::to_string(code_b));
    for (const std::string rel :
         {"trials/trial_001.jsonl", "trials/trial_015.jsonl", "out/ellipsoids.jsonl",
          "out/profile.json", "out/indices.csv", "out/gmm.json", "out/run.jsonl",
          "out/plots/errors.csv", "out/plots/errors.svg", "out/plots/ellipses.svg"}) {
        out.require(same_bytes(root / "a" / rel, root / "b" / rel),
                    "artifact differs across reruns: " + rel);
    }
    out.detail << "full pipeline in " << dt << " s, 10 artifacts byte-identical";
    return out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"SPD manifold suite", spd_manifold_suite},
        {"kinematics suite", kinematics_suite},
        {"manipulability suite", manipulability_suite},
        {"controller suite", controller_suite},
        {"two-phase transfer signature", two_phase_suite},
        {"dual-arm fixture run", dual_arm_suite},
        {"GMM suite", gmm_suite},
        {"end-to-end pipeline", pipeline_suite},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << "exception: " << e.what();
        }
        std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": "
                  << criteria[i].first;
        if (!out.detail.str().empty()) std::cout << " (" << out.detail.str() << ")";
        std::cout << std::endl;
        if (!out.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
