#include <doctest.h>

#include <cmath>

#include "manipulant/control.hpp"
#include "test_support.hpp"

using namespace manipulant;
using testsup::planar_three_link;

namespace {

const std::vector<int> kPlanarRows{0, 1};

ControllerConfig planar_cfg() {
    ControllerConfig cfg;
    cfg.task_rows = kPlanarRows;
    return cfg;
}

// benchmark postures for the planar arm
const Eigen::Vector3d kPlanarQ0(0.3, 0.5, 0.4);
const Eigen::Vector3d kPlanarQStar(0.55, 0.8, 0.05);

struct ArmBench {
    AnthropomorphicArm arm;
    KinematicChain chain = arm.chain();
    JointConfig q0, q_star;

    ArmBench() {
        Pose wrist = Pose::Identity();
        wrist.translation() = Eigen::Vector3d(0.30, -0.05, -0.30);
        wrist.linear() =
            (Eigen::AngleAxisd(-0.4, Eigen::Vector3d::UnitY())).matrix();
        q0 = arm_triangle_to_joints(arm, wrist_pose_to_arm_triangle(arm, wrist, 0.2));
        Pose wrist2 = wrist;
        wrist2.translation() += Eigen::Vector3d(0.03, 0.03, 0.04);
        q_star = arm_triangle_to_joints(arm, wrist_pose_to_arm_triangle(arm, wrist2, 0.7));
    }
};

}  // namespace

TEST_CASE("zero-error fixed points produce zero velocity") {
    const KinematicChain chain = planar_three_link();
    const ControllerConfig cfg = planar_cfg();
    const TaskKinematics tk = task_kinematics(chain, kPlanarQ0, kPlanarRows);
    const SpdMatrix m_target(tk.ellipsoid);

    const ControlStep a = manipulability_first_step(tk, m_target, tk.position, cfg);
    CHECK(a.qdot.norm() <= 1e-12);
    const ControlStep b = position_first_step(tk, m_target, tk.position, cfg);
    CHECK(b.qdot.norm() <= 1e-12);
}

TEST_CASE("manipulability-first: position correction is invisible to the manipulability task") {
    const KinematicChain chain = planar_three_link();
    const ControllerConfig cfg = planar_cfg();
    const TaskKinematics tk = task_kinematics(chain, kPlanarQ0, kPlanarRows);
    const SpdMatrix m_target(tk.ellipsoid);  // M == Mhat

    Eigen::VectorXd target_x = tk.position + Eigen::Vector2d(0.05, -0.03);
    const ControlStep step = manipulability_first_step(tk, m_target, target_x, cfg);
    // qdot reduces to the projected position term; the manipulability task
    // must not see it
    CHECK((tk.manip_jac.transpose() * step.qdot).norm() <= 1e-8);

    // interference of the position component in the general case
    const TaskKinematics tk2 = task_kinematics(chain, kPlanarQStar, kPlanarRows);
    const ControlStep full = manipulability_first_step(tk2, m_target, target_x, cfg);
    const ControlStep manip_only = manipulability_first_step(tk2, m_target, tk2.position, cfg);
    const Eigen::VectorXd position_part = full.qdot - manip_only.qdot;
    CHECK((tk2.manip_jac.transpose() * position_part).norm() <= 1e-8);
}

TEST_CASE("manipulability-first: one Euler step descends the distance") {
    const KinematicChain chain = planar_three_link();
    const ControllerConfig cfg = planar_cfg();
    const TaskKinematics tk = task_kinematics(chain, kPlanarQ0, kPlanarRows);

    // small diagonal perturbation of the current ellipsoid as the target
    Eigen::MatrixXd target = tk.ellipsoid;
    target(0, 0) *= 1.05;
    target(1, 1) *= 0.97;
    const SpdMatrix m_target(target);

    const double d0 = spd_distance(SpdMatrix(tk.ellipsoid), m_target);
    const ControlStep step = manipulability_first_step(tk, m_target, tk.position, cfg);
    const Eigen::VectorXd q1 = kPlanarQ0 + cfg.dt * step.qdot;
    const TaskKinematics tk1 = task_kinematics(chain, q1, kPlanarRows);
    const double d1 = spd_distance(SpdMatrix(tk1.ellipsoid), m_target);
    CHECK(d1 < d0);
}

TEST_CASE("position-first: manipulability motion stays in the position nullspace") {
    const ArmBench bench;
    ControllerConfig cfg;
    const TaskKinematics tk = task_kinematics(bench.chain, bench.q0, cfg.task_rows);

    // a target reachable by pure nullspace motion: perturb q0 inside
    // the position nullspace and take that posture's ellipsoid
    const Eigen::MatrixXd n_proj = nullspace_projector(tk.jac);
    const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(bench.chain.dof(), -1.0, 1.0);
    const JointConfig q_ns = bench.q0 + 0.35 * (n_proj * w).normalized();
    const TaskKinematics tk_ns = task_kinematics(bench.chain, q_ns, cfg.task_rows);
    const SpdMatrix m_target(tk_ns.ellipsoid);

    // x == xhat, M != Mhat on a redundant arm: end effector must not move
    const ControlStep step = position_first_step(tk, m_target, tk.position, cfg);
    CHECK(step.qdot.norm() > 1e-6);
    CHECK((tk.jac * step.qdot).norm() <= 1e-10);

    // and the motion makes first-order progress on the manipulability error
    const Eigen::VectorXd q1 = bench.q0 + cfg.dt * step.qdot;
    const TaskKinematics tk1 = task_kinematics(bench.chain, q1, cfg.task_rows);
    CHECK(spd_distance(SpdMatrix(tk1.ellipsoid), m_target) <
          spd_distance(SpdMatrix(tk.ellipsoid), m_target));
}

TEST_CASE("position-first on a square chain annihilates the secondary term") {
    const KinematicChain arm = testsup::planar_two_link();
    ControllerConfig cfg = planar_cfg();
    const Eigen::Vector2d q(0.4, 0.9);
    const TaskKinematics tk = task_kinematics(arm, q, kPlanarRows);

    Eigen::MatrixXd target = tk.ellipsoid;
    target(0, 0) *= 1.3;
    const SpdMatrix m_target(target);

    // full-rank square J: I - J^+ J = 0, so only the position term remains
    const ControlStep with_m = position_first_step(tk, m_target, tk.position, cfg);
    CHECK(with_m.qdot.norm() <= 1e-10);

    const Eigen::VectorXd target_x = tk.position + Eigen::Vector2d(0.02, 0.01);
    const ControlStep step = position_first_step(tk, m_target, target_x, cfg);
    const Eigen::VectorXd expected =
        damped_pseudoinverse(tk.jac) * cfg.gain_x(2) * (target_x - tk.position);
    CHECK((step.qdot - expected).norm() <= 1e-10);
}

TEST_CASE("strict hierarchy residual in position-first mode") {
    const ArmBench bench;
    ControllerConfig cfg;
    const TaskKinematics tk = task_kinematics(bench.chain, bench.q0, cfg.task_rows);
    const TaskKinematics tk_star = task_kinematics(bench.chain, bench.q_star, cfg.task_rows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const Eigen::VectorXd target_x = tk.position + Eigen::Vector3d(0.03, -0.02, 0.04);

    const ControlStep step = position_first_step(tk, m_target, target_x, cfg);
    const Eigen::VectorXd primary =
        damped_pseudoinverse(tk.jac) * cfg.gain_x(3) * (target_x - tk.position);
    const Eigen::VectorXd secondary = step.qdot - primary;
    CHECK((tk.jac * secondary).norm() <= 1e-10 * std::max(1.0, step.qdot.norm()));
}

TEST_CASE("balanced step satisfies the primary task and projects the secondary") {
    std::mt19937_64 rng(61);
    const int n = 9, nv = 6;
    // feet rows pin the virtual base, CoM-xy rows couple everything
    Eigen::MatrixXd j_feet = Eigen::MatrixXd::Zero(6, n + nv);
    j_feet.rightCols(nv).setIdentity();
    const Eigen::MatrixXd j_com = testsup::random_matrix(rng, 2, n + nv);
    const Eigen::Vector2d xdot_com(0.02, -0.01);
    const BalanceTask task = make_balance_task(j_feet, j_com, xdot_com, n);

    // zero secondary: exact least-squares primary solution
    const BalancedStep a = balanced_step(task, Eigen::VectorXd::Zero(n + nv));
    CHECK((a.qdot_full - damped_pseudoinverse(task.j_b) * task.xdot_b).norm() <= 1e-12);
    CHECK((task.j_b * a.qdot_full - task.xdot_b).norm() <= 1e-9);
    CHECK(a.qdot_actuated.size() == n);
    CHECK((a.qdot_actuated - a.qdot_full.head(n)).norm() == 0.0);

    // zero primary velocity: any secondary stays invisible to the primary task
    BalanceTask still = task;
    still.xdot_b.setZero();
    for (int i = 0; i < 10; ++i) {
        const Eigen::VectorXd secondary = testsup::random_matrix(rng, n + nv, 1);
        const BalancedStep b = balanced_step(still, secondary);
        CHECK((still.j_b * b.qdot_full).norm() <= 1e-10);
    }

    // projector idempotence
    const Eigen::MatrixXd nb = nullspace_projector(task.j_b);
    CHECK((nb * nb - nb).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("run_tracking is stationary at exact targets") {
    const KinematicChain chain = planar_three_link();
    ControllerConfig cfg = planar_cfg();
    cfg.schedule = {{0.0, PriorityMode::manipulability_first}};
    const TaskKinematics tk = task_kinematics(chain, kPlanarQ0, kPlanarRows);
    const SpdMatrix m0(tk.ellipsoid);

    const TrackingLog log = run_tracking(
        chain, kPlanarQ0, [&](double) { return m0; }, tk.position, cfg, 0.2);
    CHECK(!log.diverged);
    CHECK((log.steps.back().q - kPlanarQ0).norm() <= 1e-10);
    CHECK(log.steps.back().spd_dist <= 1e-10);
}

TEST_CASE("planar benchmark converges and descends monotonically") {
    const KinematicChain chain = planar_three_link();
    ControllerConfig cfg = planar_cfg();
    cfg.schedule = {{0.0, PriorityMode::manipulability_first}};

    const TaskKinematics tk_star = task_kinematics(chain, kPlanarQStar, kPlanarRows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const TaskKinematics tk0 = task_kinematics(chain, kPlanarQ0, kPlanarRows);

    const TrackingLog log = run_tracking(
        chain, kPlanarQ0, [&](double) { return m_target; }, tk0.position, cfg, 5.0);
    REQUIRE(!log.diverged);
    CHECK(log.steps.back().spd_dist < 0.05);
    for (std::size_t k = 51; k < log.steps.size(); ++k) {
        CHECK(log.steps[k].spd_dist <= log.steps[k - 1].spd_dist + 1e-6);
    }

    // halving dt moves the final distance by less than 1% (absolute floor
    // guards the fully converged case where both runs sit at numerical zero)
    ControllerConfig half = cfg;
    half.dt = cfg.dt / 2;
    const TrackingLog log2 = run_tracking(
        chain, kPlanarQ0, [&](double) { return m_target; }, tk0.position, half, 5.0);
    const double d1 = log.steps.back().spd_dist;
    const double d2 = log2.steps.back().spd_dist;
    CHECK(std::abs(d1 - d2) < 0.01 * std::max({d1, d2, 1e-6}));
}

TEST_CASE("tracking logs are bitwise deterministic") {
    const KinematicChain chain = planar_three_link();
    ControllerConfig cfg = planar_cfg();
    const TaskKinematics tk_star = task_kinematics(chain, kPlanarQStar, kPlanarRows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const TaskKinematics tk0 = task_kinematics(chain, kPlanarQ0, kPlanarRows);

    const TrackingLog a = run_tracking(
        chain, kPlanarQ0, [&](double) { return m_target; }, tk0.position, cfg, 0.5);
    const TrackingLog b = run_tracking(
        chain, kPlanarQ0, [&](double) { return m_target; }, tk0.position, cfg, 0.5);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].spd_dist == b.steps[i].spd_dist);
        CHECK((a.steps[i].q - b.steps[i].q).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("two-phase priority switch reproduces the transfer signature") {
    const ArmBench bench;
    ControllerConfig cfg;  // default schedule: manipulability first, switch at 1 s
    const TaskKinematics tk_star = task_kinematics(bench.chain, bench.q_star, cfg.task_rows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const Eigen::VectorXd target_x = tk_star.position;  // compatible targets

    const TrackingLog log = run_tracking(
        bench.chain, bench.q0, [&](double) { return m_target; }, target_x, cfg, 3.0);
    REQUIRE(!log.diverged);

    const auto at_time = [&](double t) {
        std::size_t best = 0;
        for (std::size_t i = 0; i < log.steps.size(); ++i) {
            if (log.steps[i].t <= t) best = i;
        }
        return log.steps[best];
    };
    const SimStep start = log.steps.front();
    const SimStep at_switch = at_time(1.0 - cfg.dt);
    const SimStep end = log.steps.back();

    CHECK(start.mode == PriorityMode::manipulability_first);
    CHECK(end.mode == PriorityMode::position_first);

    // phase 1: manipulability error strictly decreases
    CHECK(at_switch.spd_dist < start.spd_dist);
    // phase 2: position converges below 1 mm without losing more than 20%
    // of the manipulability progress
    CHECK(end.pos_error < 1e-3);
    CHECK(end.spd_dist <= 1.2 * at_switch.spd_dist);
}

TEST_CASE("divergence guard aborts with a diagnostic") {
    const KinematicChain chain = planar_three_link();
    ControllerConfig cfg = planar_cfg();
    cfg.schedule = {{0.0, PriorityMode::manipulability_first}};
    cfg.k_m_scale = -40.0;  // force ascent instead of descent

    const TaskKinematics tk_star = task_kinematics(chain, kPlanarQStar, kPlanarRows);
    const SpdMatrix m_target(tk_star.ellipsoid);
    const TaskKinematics tk0 = task_kinematics(chain, kPlanarQ0, kPlanarRows);

    const TrackingLog log = run_tracking(
        chain, kPlanarQ0, [&](double) { return m_target; }, tk0.position, cfg, 5.0);
    CHECK(log.diverged);
    CHECK(!log.divergence_message.empty());
}

namespace {

// Carry fixture: wrists extended in front of the torso, palms inward. World
// wrist poses are anchored at the torso-zero posture; other postures re-solve
// the arms against them, so every returned configuration shares the same
// end-effector positions.
struct DualBench {
    SharedBaseDualArm sys = default_dual_arm();
    Pose wl_world, wr_world;

    DualBench() {
        Pose wr = Pose::Identity();
        wr.translation() = Eigen::Vector3d(0.42, -0.02, -0.10);
        wr.linear() = (Eigen::Matrix3d() << 1, 0, 0, 0, 0, 1, 0, -1, 0).finished();
        Pose wl = wr;
        wl.translation() = Eigen::Vector3d(0.42, 0.02, -0.10);
        wl.linear() = (Eigen::Matrix3d() << 1, 0, 0, 0, 0, -1, 0, 1, 0).finished();
        const Pose tip = chain_state(sys.torso, Eigen::VectorXd::Zero(3)).end_effector;
        wl_world = tip * sys.left_mount * wl;
        wr_world = tip * sys.right_mount * wr;
    }

    JointConfig posture(double torso_pitch, double swivel) const {
        JointConfig qt(3);
        qt << 0.0, torso_pitch, 0.0;
        const Pose tip = chain_state(sys.torso, qt).end_effector;
        const JointConfig ql = arm_triangle_to_joints(
            sys.left_arm, wrist_pose_to_arm_triangle(
                              sys.left_arm, (tip * sys.left_mount).inverse() * wl_world, swivel));
        const JointConfig qr = arm_triangle_to_joints(
            sys.right_arm,
            wrist_pose_to_arm_triangle(sys.right_arm,
                                       (tip * sys.right_mount).inverse() * wr_world, -swivel));
        JointConfig q(sys.dof());
        q << qt, ql, qr;
        return q;
    }
};

}  // namespace

TEST_CASE("dual-arm tracking is stationary at the initial ellipsoid") {
    const DualBench bench;
    const JointConfig q0 = bench.posture(0.0, 0.3);
    const SpdMatrix m0(dual_arm_kinematics(bench.sys, q0).ellipsoid);

    ControllerConfig cfg;
    cfg.schedule = {{0.0, PriorityMode::position_first}};
    const DualTrackingLog log = run_dual_arm_tracking(
        bench.sys, q0, [&](double) { return m0; }, cfg, 0.2);
    REQUIRE(!log.infeasible);
    CHECK(log.max_drift <= 1e-9);
    CHECK((log.steps.back().q - q0).norm() <= 1e-9);
}

TEST_CASE("dual-arm tracking reaches a vertical-elongation target within the fixture") {
    const DualBench bench;
    const JointConfig q0 = bench.posture(0.25, 1.2);
    const JointConfig q_star = bench.posture(-0.30, 0.0);

    // same world wrist poses, different torso pitch and elbow swivel
    const DualArmKinematics dk0 = dual_arm_kinematics(bench.sys, q0);
    const DualArmKinematics dk_star = dual_arm_kinematics(bench.sys, q_star);
    CHECK((dk0.left_position - dk_star.left_position).norm() < 1e-8);
    CHECK((dk0.right_position - dk_star.right_position).norm() < 1e-8);

    const SpdMatrix m_target(dk_star.ellipsoid);
    // the target's major axis points within 15 degrees of vertical
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_t(m_target.matrix());
    const Eigen::Vector3d major_t = eig_t.eigenvectors().col(2);
    CHECK(std::abs(major_t.z()) > std::cos(15.0 * M_PI / 180.0));

    ControllerConfig cfg;
    cfg.schedule = {{0.0, PriorityMode::position_first}};
    const DualTrackingLog log = run_dual_arm_tracking(
        bench.sys, q0, [&](double) { return m_target; }, cfg, 4.0);
    REQUIRE(!log.infeasible);

    CHECK(log.max_drift <= 1e-3);
    const double d0 = log.steps.front().spd_dist;
    const double d1 = log.steps.back().spd_dist;
    CHECK(d1 <= 0.5 * d0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_f(log.steps.back().current_m);
    const Eigen::Vector3d major_f = eig_f.eigenvectors().col(2);
    CHECK(std::abs(major_f.z()) > std::cos(15.0 * M_PI / 180.0));
}

TEST_CASE("controller config validation") {
    ControllerConfig cfg;
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.dt = 1e-3;
    cfg.k_x = Eigen::MatrixXd::Identity(3, 3);
    (*cfg.k_x)(0, 0) = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
