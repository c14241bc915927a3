#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "manipulant/manipulability.hpp"

namespace manipulant {

enum class PriorityMode { manipulability_first, position_first };

std::string to_string(PriorityMode m);
PriorityMode priority_mode_from_string(const std::string& s);

struct PrioritySpan {
    double t_start = 0.0;
    PriorityMode mode = PriorityMode::manipulability_first;
};

struct ControllerConfig {
    double k_m_scale = 5.0;   // 1/s, isotropic default for K_M
    double k_x_scale = 10.0;  // 1/s, isotropic default for K_x
    std::optional<Eigen::MatrixXd> k_m;  // overrides k_m_scale when set
    std::optional<Eigen::MatrixXd> k_x;  // overrides k_x_scale when set
    double dt = 1e-3;
    double damping = 1e-4;        // fallback damping near rank deficiency
    double rank_tol = 1e-6;       // smallest singular value triggering the fallback
    std::vector<PrioritySpan> schedule = {
        {0.0, PriorityMode::manipulability_first},
        {1.0, PriorityMode::position_first},
    };
    std::vector<int> task_rows = {0, 1, 2};  // Cartesian rows of the tracked task
    double divergence_factor = 2.0;

    void validate() const;
    PriorityMode mode_at(double t) const;
    Eigen::MatrixXd gain_m(int vec_dim) const;
    Eigen::MatrixXd gain_x(int pos_dim) const;
};

struct ControlStep {
    Eigen::VectorXd qdot;
    bool damped_fallback = false;
};

/// Task-space quantities of a chain restricted to the configured Cartesian
/// rows: Jacobian, ellipsoid M = JJ^T, and the matricized manipulability
/// Jacobian.
struct TaskKinematics {
    Eigen::MatrixXd jac;         // m x n
    Eigen::VectorXd position;    // m
    Eigen::MatrixXd ellipsoid;   // m x m, J J^T
    Eigen::MatrixXd manip_jac;   // n x m(m+1)/2, mode-3 matricization
};

TaskKinematics task_kinematics(const KinematicChain& chain, const JointConfig& q,
                               const std::vector<int>& task_rows);

/// Manipulability-prioritized step:
/// qdot = (A^+)^T K_M vec(Log_M(Mhat)) + (I - (A^+)^T A^T) J^+ K_x (xhat - x)
/// with A the matricized manipulability Jacobian.
ControlStep manipulability_first_step(const TaskKinematics& tk, const SpdMatrix& target_m,
                                      const Eigen::VectorXd& target_x,
                                      const ControllerConfig& cfg);

/// Position-prioritized step:
/// qdot = J^+ K_x (xhat - x) + (I - J^+ J) (A^+)^T K_M vec(Log_M(Mhat))
ControlStep position_first_step(const TaskKinematics& tk, const SpdMatrix& target_m,
                                const Eigen::VectorXd& target_x, const ControllerConfig& cfg);

/// Primary task of a floating-base robot: J_b over the extended joint space
/// [actuated..., virtual...], with the desired primary velocity.
struct BalanceTask {
    Eigen::MatrixXd j_b;
    Eigen::VectorXd xdot_b;
    int n_actuated = 0;

    void validate() const;
};

/// Feet rows pinned to zero velocity stacked over CoM-xy rows.
BalanceTask make_balance_task(const Eigen::MatrixXd& j_feet, const Eigen::MatrixXd& j_com_xy,
                              const Eigen::VectorXd& xdot_com, int n_actuated);

struct BalancedStep {
    Eigen::VectorXd qdot_full;      // extended space
    Eigen::VectorXd qdot_actuated;  // first n_actuated entries
    bool damped_fallback = false;
};

/// qdot_full = J_b^+ xdot_b + N_b qdot_secondary; the actuated part is the
/// selector of Eq-style stacked ordering (actuated rows first).
BalancedStep balanced_step(const BalanceTask& balance, const Eigen::VectorXd& secondary_qdot,
                           const ControllerConfig& cfg = {});

struct SimStep {
    double t = 0.0;
    Eigen::VectorXd q;
    Eigen::VectorXd x;
    Eigen::MatrixXd current_m;
    Eigen::MatrixXd target_m;
    double spd_dist = 0.0;
    double pos_error = 0.0;
    PriorityMode mode = PriorityMode::manipulability_first;
    bool damped_fallback = false;
};

struct TrackingLog {
    std::vector<SimStep> steps;
    bool diverged = false;
    std::string divergence_message;
};

using ProfileSource = std::function<SpdMatrix(double t)>;

/// Euler-integrated manipulability + position tracking with the priority
/// schedule of the config. Aborts (diverged flag + diagnostic message) when
/// the manipulability distance exceeds divergence_factor times its initial
/// value (with a small absolute floor for zero-error starts).
TrackingLog run_tracking(const KinematicChain& chain, const JointConfig& q0,
                         const ProfileSource& profile, const Eigen::VectorXd& target_x,
                         const ControllerConfig& cfg, double duration);

/// Two arms mounted on shared torso joints. Configuration order:
/// [torso..., left arm..., right arm...].
struct SharedBaseDualArm {
    explicit SharedBaseDualArm(KinematicChain torso_chain) : torso(std::move(torso_chain)) {}

    KinematicChain torso;
    Pose left_mount = Pose::Identity();   // torso tip -> left shoulder
    Pose right_mount = Pose::Identity();  // torso tip -> right shoulder
    AnthropomorphicArm left_arm;
    AnthropomorphicArm right_arm;

    int torso_dof() const { return torso.dof(); }
    int dof() const { return torso.dof() + 14; }
};

/// Per-arm positional Jacobians/derivatives embedded over the full joint
/// vector, plus the dual-arm ellipsoid through the positional grasp map
/// (stacked shared-base Jacobian form).
struct DualArmKinematics {
    Eigen::Vector3d left_position;
    Eigen::Vector3d right_position;
    Eigen::MatrixXd stacked_jac;  // 6 x N, both end-effector position rows
    Eigen::MatrixXd ellipsoid;    // 3 x 3 dual-arm velocity manipulability
    Eigen::MatrixXd manip_jac;    // N x 6 matricization of its derivative tensor
};

DualArmKinematics dual_arm_kinematics(const SharedBaseDualArm& sys, const JointConfig& q);

struct DualTrackingLog {
    std::vector<SimStep> steps;  // x holds both end-effector positions (6)
    double max_drift = 0.0;      // worst end-effector excursion, meters
    bool infeasible = false;
    std::string message;
};

/// Eq-10-style nullspace control of the dual-arm ellipsoid while both
/// end-effector positions are held at their initial values.
DualTrackingLog run_dual_arm_tracking(const SharedBaseDualArm& sys, const JointConfig& q0,
                                      const ProfileSource& profile, const ControllerConfig& cfg,
                                      double duration);

/// Benchmark model: 3-DoF torso carrying two anthropomorphic arms.
SharedBaseDualArm default_dual_arm();

}  // namespace manipulant
