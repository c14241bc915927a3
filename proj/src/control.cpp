#include "manipulant/control.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace manipulant {

std::string to_string(PriorityMode m) {
    return m == PriorityMode::manipulability_first ? "manipulability_first" : "position_first";
}

PriorityMode priority_mode_from_string(const std::string& s) {
    if (s == "manipulability_first") return PriorityMode::manipulability_first;
    if (s == "position_first") return PriorityMode::position_first;
    throw ParseError("unknown priority mode '" + s + "'");
}

void ControllerConfig::validate() const {
    if (!(dt > 0.0)) throw Error("ControllerConfig: dt must be positive");
    if (schedule.empty()) throw Error("ControllerConfig: empty priority schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        if (schedule[i].t_start <= schedule[i - 1].t_start) {
            throw Error("ControllerConfig: schedule start times must increase");
        }
    }
    for (const auto& gain : {k_m, k_x}) {
        if (!gain) continue;
        const Eigen::MatrixXd& g = *gain;
        if (g.rows() != g.cols()) throw Error("ControllerConfig: gain matrix not square");
        if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            throw Error("ControllerConfig: gain matrix not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() <= 0.0) {
            throw Error("ControllerConfig: gain matrix not positive definite");
        }
    }
    if (task_rows.empty()) throw Error("ControllerConfig: task_rows empty");
}

PriorityMode ControllerConfig::mode_at(double t) const {
    PriorityMode mode = schedule.front().mode;
    for (const PrioritySpan& span : schedule) {
        if (t >= span.t_start) mode = span.mode;
    }
    return mode;
}

Eigen::MatrixXd ControllerConfig::gain_m(int vec_dim) const {
    if (k_m) {
        if (k_m->rows() != vec_dim) throw DimensionError("ControllerConfig: K_M size mismatch");
        return *k_m;
    }
    return k_m_scale * Eigen::MatrixXd::Identity(vec_dim, vec_dim);
}

Eigen::MatrixXd ControllerConfig::gain_x(int pos_dim) const {
    if (k_x) {
        if (k_x->rows() != pos_dim) throw DimensionError("ControllerConfig: K_x size mismatch");
        return *k_x;
    }
    return k_x_scale * Eigen::MatrixXd::Identity(pos_dim, pos_dim);
}

TaskKinematics task_kinematics(const KinematicChain& chain, const JointConfig& q,
                               const std::vector<int>& task_rows) {
    const int m = static_cast<int>(task_rows.size());
    const Eigen::MatrixXd j_full = positional_jacobian(chain, q);
    const Eigen::Vector3d x_full = forward_kinematics(chain, q).translation();

    TaskKinematics tk;
    tk.jac.resize(m, chain.dof());
    tk.position.resize(m);
    for (int r = 0; r < m; ++r) {
        tk.jac.row(r) = j_full.row(task_rows[r]);
        tk.position[r] = x_full[task_rows[r]];
    }
    Eigen::MatrixXd mm = tk.jac * tk.jac.transpose();
    tk.ellipsoid = 0.5 * (mm + mm.transpose());

    const std::vector<Eigen::MatrixXd> dj = positional_jacobian_derivatives(chain, q);
    tk.manip_jac.resize(chain.dof(), sym_vec_dim(m));
    for (int k = 0; k < chain.dof(); ++k) {
        Eigen::MatrixXd djk(m, chain.dof());
        for (int r = 0; r < m; ++r) djk.row(r) = dj[k].row(task_rows[r]);
        Eigen::MatrixXd slice = djk * tk.jac.transpose() + tk.jac * djk.transpose();
        tk.manip_jac.row(k) = sym_vec(Eigen::MatrixXd(0.5 * (slice + slice.transpose())));
    }
    return tk;
}

namespace {

// Exact pseudoinverse away from rank deficiency, damped fallback otherwise.
Eigen::MatrixXd control_pinv(const Eigen::MatrixXd& m, const ControllerConfig& cfg,
                             bool& damped) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smin = s.size() ? s[s.size() - 1] : 0.0;
    if (smin < cfg.rank_tol) {
        damped = true;
        return damped_pseudoinverse(m, cfg.damping);
    }
    return damped_pseudoinverse(m, 0.0);
}

Eigen::VectorXd manipulability_error(const Eigen::MatrixXd& current, const SpdMatrix& target) {
    const SpdMatrix m(current);
    return sym_vec(spd_log(m, target).value);
}

}  // namespace

ControlStep manipulability_first_step(const TaskKinematics& tk, const SpdMatrix& target_m,
                                      const Eigen::VectorXd& target_x,
                                      const ControllerConfig& cfg) {
    const int n = static_cast<int>(tk.jac.cols());
    const int v = static_cast<int>(tk.manip_jac.cols());
    ControlStep step;
    const Eigen::MatrixXd a = tk.manip_jac;  // n x v
    const Eigen::MatrixXd a_pinv_t = control_pinv(a, cfg, step.damped_fallback).transpose();
    const Eigen::VectorXd e_m = manipulability_error(tk.ellipsoid, target_m);
    const Eigen::VectorXd term_m = a_pinv_t * cfg.gain_m(v) * e_m;

    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(n, n) - a_pinv_t * a.transpose();
    const Eigen::MatrixXd j_pinv = control_pinv(tk.jac, cfg, step.damped_fallback);
    const Eigen::VectorXd term_x =
        proj * j_pinv * cfg.gain_x(static_cast<int>(target_x.size())) *
        (target_x - tk.position);

    step.qdot = term_m + term_x;
    return step;
}

ControlStep position_first_step(const TaskKinematics& tk, const SpdMatrix& target_m,
                                const Eigen::VectorXd& target_x, const ControllerConfig& cfg) {
    const int n = static_cast<int>(tk.jac.cols());
    const int v = static_cast<int>(tk.manip_jac.cols());
    ControlStep step;
    const Eigen::MatrixXd j_pinv = control_pinv(tk.jac, cfg, step.damped_fallback);
    const Eigen::VectorXd term_x =
        j_pinv * cfg.gain_x(static_cast<int>(target_x.size())) * (target_x - tk.position);

    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(n, n) - j_pinv * tk.jac;
    const Eigen::MatrixXd a_pinv_t = control_pinv(tk.manip_jac, cfg, step.damped_fallback)
                                         .transpose();
    const Eigen::VectorXd e_m = manipulability_error(tk.ellipsoid, target_m);
    const Eigen::VectorXd term_m = proj * a_pinv_t * cfg.gain_m(v) * e_m;

    step.qdot = term_x + term_m;
    return step;
}

void BalanceTask::validate() const {
    if (j_b.rows() != xdot_b.size()) {
        throw DimensionError("BalanceTask: J_b rows do not match xdot_b");
    }
    if (n_actuated < 0 || n_actuated > j_b.cols()) {
        throw DimensionError("BalanceTask: invalid actuated joint count");
    }
}

BalanceTask make_balance_task(const Eigen::MatrixXd& j_feet, const Eigen::MatrixXd& j_com_xy,
                              const Eigen::VectorXd& xdot_com, int n_actuated) {
    if (j_feet.cols() != j_com_xy.cols()) {
        throw DimensionError("make_balance_task: column mismatch between blocks");
    }
    BalanceTask task;
    task.j_b.resize(j_feet.rows() + j_com_xy.rows(), j_feet.cols());
    task.j_b << j_feet, j_com_xy;
    task.xdot_b.setZero(task.j_b.rows());
    task.xdot_b.tail(xdot_com.size()) = xdot_com;
    task.n_actuated = n_actuated;
    task.validate();
    return task;
}

BalancedStep balanced_step(const BalanceTask& balance, const Eigen::VectorXd& secondary_qdot,
                           const ControllerConfig& cfg) {
    balance.validate();
    if (secondary_qdot.size() != balance.j_b.cols()) {
        throw DimensionError("balanced_step: secondary velocity size mismatch");
    }
    BalancedStep out;
    const Eigen::MatrixXd j_pinv = control_pinv(balance.j_b, cfg, out.damped_fallback);
    const Eigen::MatrixXd n_b =
        Eigen::MatrixXd::Identity(balance.j_b.cols(), balance.j_b.cols()) - j_pinv * balance.j_b;
    out.qdot_full = j_pinv * balance.xdot_b + n_b * secondary_qdot;
    out.qdot_actuated = out.qdot_full.head(balance.n_actuated);
    return out;
}

TrackingLog run_tracking(const KinematicChain& chain, const JointConfig& q0,
                         const ProfileSource& profile, const Eigen::VectorXd& target_x,
                         const ControllerConfig& cfg, double duration) {
    cfg.validate();
    if (static_cast<int>(target_x.size()) != static_cast<int>(cfg.task_rows.size())) {
        throw DimensionError("run_tracking: target position size does not match task rows");
    }
    TrackingLog log;
    JointConfig q = q0;
    double initial_dist = -1.0;
    const int n_steps = static_cast<int>(std::llround(duration / cfg.dt));
    log.steps.reserve(n_steps);

    for (int k = 0; k < n_steps; ++k) {
        const double t = k * cfg.dt;
        const TaskKinematics tk = task_kinematics(chain, q, cfg.task_rows);
        const SpdMatrix target_m = profile(t);

        SimStep step;
        step.t = t;
        step.q = q;
        step.x = tk.position;
        step.current_m = tk.ellipsoid;
        step.target_m = target_m.matrix();
        step.mode = cfg.mode_at(t);
        step.spd_dist = spd_distance(SpdMatrix(tk.ellipsoid), target_m);
        step.pos_error = (target_x - tk.position).norm();
        if (initial_dist < 0.0) initial_dist = step.spd_dist;

        if (step.spd_dist > cfg.divergence_factor * initial_dist + 1e-9) {
            std::ostringstream os;
            os << "tracking diverged at t=" << t << ": spd_distance " << step.spd_dist
               << " exceeds " << cfg.divergence_factor << " x initial " << initial_dist;
            log.divergence_message = os.str();
            log.diverged = true;
            log.steps.push_back(std::move(step));
            return log;
        }

        const ControlStep ctrl = step.mode == PriorityMode::manipulability_first
                                     ? manipulability_first_step(tk, target_m, target_x, cfg)
                                     : position_first_step(tk, target_m, target_x, cfg);
        step.damped_fallback = ctrl.damped_fallback;
        log.steps.push_back(step);
        q += cfg.dt * ctrl.qdot;
    }
    return log;
}

namespace {

// Rotates an arm chain's local joint data through the fixed mount transform
// and appends it after the torso joints, yielding one serial chain per arm.
KinematicChain compose_arm_chain(const KinematicChain& torso, const Pose& mount,
                                 const KinematicChain& arm) {
    std::vector<RevoluteJoint> joints = torso.joints();
    const Eigen::Matrix3d r = mount.linear();
    for (std::size_t i = 0; i < arm.joints().size(); ++i) {
        RevoluteJoint j;
        j.axis = r * arm.joints()[i].axis;
        j.offset = r * arm.joints()[i].offset;
        if (i == 0) j.offset += mount.translation();
        joints.push_back(j);
    }
    Pose end = Pose::Identity();
    end.linear() = r * arm.end_offset().linear();
    end.translation() = r * arm.end_offset().translation();
    return KinematicChain(std::move(joints), torso.base_pose(), end);
}

}  // namespace

DualArmKinematics dual_arm_kinematics(const SharedBaseDualArm& sys, const JointConfig& q) {
    const int k = sys.torso_dof();
    const int n = sys.dof();
    if (q.size() != n) throw DimensionError("dual_arm_kinematics: configuration size mismatch");

    const KinematicChain left = compose_arm_chain(sys.torso, sys.left_mount, sys.left_arm.chain());
    const KinematicChain right =
        compose_arm_chain(sys.torso, sys.right_mount, sys.right_arm.chain());

    JointConfig ql(k + 7), qr(k + 7);
    ql << q.head(k), q.segment(k, 7);
    qr << q.head(k), q.tail(7);

    // per-arm Jacobians and derivative slices scattered over the full vector
    auto embed_cols = [&](const Eigen::MatrixXd& sub, bool is_left) {
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(3, n);
        full.leftCols(k) = sub.leftCols(k);
        full.middleCols(is_left ? k : k + 7, 7) = sub.rightCols(7);
        return full;
    };
    auto global_index = [&](int local, bool is_left) {
        return local < k ? local : (is_left ? local : local + 7);
    };

    DualArmKinematics out;
    out.left_position = forward_kinematics(left, ql).translation();
    out.right_position = forward_kinematics(right, qr).translation();

    const Eigen::MatrixXd jl = embed_cols(positional_jacobian(left, ql), true);
    const Eigen::MatrixXd jr = embed_cols(positional_jacobian(right, qr), false);
    out.stacked_jac.resize(6, n);
    out.stacked_jac << jl, jr;

    // positional grasp map: object velocity = mean contact velocity, so
    // M_d = 1/4 (J_l + J_r)(J_l + J_r)^T over the shared joint space
    const Eigen::MatrixXd j_sum = jl + jr;
    Eigen::MatrixXd md = 0.25 * j_sum * j_sum.transpose();
    out.ellipsoid = 0.5 * (md + md.transpose());

    std::vector<Eigen::MatrixXd> dsum(n, Eigen::MatrixXd::Zero(3, n));
    for (int arm = 0; arm < 2; ++arm) {
        const bool is_left = arm == 0;
        const auto dj = positional_jacobian_derivatives(is_left ? left : right,
                                                        is_left ? ql : qr);
        for (int local = 0; local < k + 7; ++local) {
            dsum[global_index(local, is_left)] += embed_cols(dj[local], is_left);
        }
    }
    out.manip_jac.resize(n, 6);
    for (int g = 0; g < n; ++g) {
        Eigen::MatrixXd slice = 0.25 * (dsum[g] * j_sum.transpose() + j_sum * dsum[g].transpose());
        out.manip_jac.row(g) = sym_vec(Eigen::MatrixXd(0.5 * (slice + slice.transpose())));
    }
    return out;
}

DualTrackingLog run_dual_arm_tracking(const SharedBaseDualArm& sys, const JointConfig& q0,
                                      const ProfileSource& profile, const ControllerConfig& cfg,
                                      double duration) {
    cfg.validate();
    DualTrackingLog log;
    const int n = sys.dof();
    if (n <= 6) {
        log.infeasible = true;
        log.message = "insufficient redundancy: fixture consumes all degrees of freedom";
        return log;
    }

    JointConfig q = q0;
    const DualArmKinematics initial = dual_arm_kinematics(sys, q0);
    Eigen::VectorXd x_fixed(6);
    x_fixed << initial.left_position, initial.right_position;

    const int n_steps = static_cast<int>(std::llround(duration / cfg.dt));
    log.steps.reserve(n_steps);
    for (int k = 0; k < n_steps; ++k) {
        const double t = k * cfg.dt;
        const DualArmKinematics dk = dual_arm_kinematics(sys, q);
        const SpdMatrix target_m = profile(t);

        Eigen::VectorXd x(6);
        x << dk.left_position, dk.right_position;
        const double drift = std::max((x.head<3>() - x_fixed.head<3>()).norm(),
                                      (x.tail<3>() - x_fixed.tail<3>()).norm());
        log.max_drift = std::max(log.max_drift, drift);

        SimStep step;
        step.t = t;
        step.q = q;
        step.x = x;
        step.current_m = dk.ellipsoid;
        step.target_m = target_m.matrix();
        step.mode = PriorityMode::position_first;
        step.spd_dist = spd_distance(SpdMatrix(dk.ellipsoid), target_m);
        step.pos_error = (x_fixed - x).norm();

        bool damped = false;
        const Eigen::MatrixXd j_pinv = control_pinv(dk.stacked_jac, cfg, damped);
        const Eigen::VectorXd term_x = j_pinv * cfg.gain_x(6) * (x_fixed - x);
        const Eigen::MatrixXd proj =
            Eigen::MatrixXd::Identity(n, n) - j_pinv * dk.stacked_jac;
        const Eigen::MatrixXd a_pinv_t = control_pinv(dk.manip_jac, cfg, damped).transpose();
        const Eigen::VectorXd e_m =
            sym_vec(spd_log(SpdMatrix(dk.ellipsoid), target_m).value);
        const Eigen::VectorXd qdot = term_x + proj * a_pinv_t * cfg.gain_m(6) * e_m;

        step.damped_fallback = damped;
        log.steps.push_back(std::move(step));
        q += cfg.dt * qdot;
    }
    return log;
}

SharedBaseDualArm default_dual_arm() {
    std::vector<RevoluteJoint> torso(3);
    torso[0].axis = Eigen::Vector3d::UnitZ();  // yaw
    torso[0].offset = Eigen::Vector3d(0, 0, 1.0);
    torso[1].axis = Eigen::Vector3d::UnitY();  // pitch
    torso[1].offset = Eigen::Vector3d(0, 0, 0.25);
    torso[2].axis = Eigen::Vector3d::UnitX();  // roll
    torso[2].offset = Eigen::Vector3d(0, 0, 0.15);
    SharedBaseDualArm sys(
        KinematicChain(std::move(torso), Pose::Identity(), Pose::Identity(), "torso3"));
    sys.left_mount = Eigen::Translation3d(0.0, 0.22, 0.10) * Eigen::Quaterniond::Identity();
    sys.right_mount = Eigen::Translation3d(0.0, -0.22, 0.10) * Eigen::Quaterniond::Identity();
    return sys;
}

}  // namespace manipulant
