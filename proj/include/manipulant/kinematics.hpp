#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <optional>
#include <string>
#include <vector>

#include "manipulant/errors.hpp"

namespace manipulant {

using Pose = Eigen::Isometry3d;

/// Revolute joint: rotation `axis` (unit) applied after translating by
/// `offset`, both expressed in the parent frame.
struct RevoluteJoint {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

/// Serial chain of revolute joints. FK composes
/// base_pose * prod_i (Trans(offset_i) Rot(axis_i, q_i)) * end_offset.
class KinematicChain {
public:
    KinematicChain(std::vector<RevoluteJoint> joints, Pose base_pose = Pose::Identity(),
                   Pose end_offset = Pose::Identity(), std::string name = {});

    int dof() const { return static_cast<int>(joints_.size()); }
    const std::vector<RevoluteJoint>& joints() const { return joints_; }
    const Pose& base_pose() const { return base_pose_; }
    const Pose& end_offset() const { return end_offset_; }
    const std::string& name() const { return name_; }

private:
    std::vector<RevoluteJoint> joints_;
    Pose base_pose_;
    Pose end_offset_;
    std::string name_;
};

using JointConfig = Eigen::VectorXd;

/// Joint axes/origins in the world frame at configuration q, plus the
/// end-effector pose. Everything the geometric Jacobian and its derivative
/// need.
struct ChainState {
    std::vector<Eigen::Vector3d> axes;     // world joint axes
    std::vector<Eigen::Vector3d> origins;  // world joint origins
    Pose end_effector;
};

ChainState chain_state(const KinematicChain& chain, const JointConfig& q);
Pose forward_kinematics(const KinematicChain& chain, const JointConfig& q);

/// Geometric Jacobian: column i = (axis_i x (p_ee - p_i); axis_i).
/// Rows 0-2 linear, rows 3-5 angular.
Eigen::MatrixXd jacobian(const KinematicChain& chain, const JointConfig& q);
/// Top 3x n positional block (the manipulability-facing default).
Eigen::MatrixXd positional_jacobian(const KinematicChain& chain, const JointConfig& q);

/// Analytic partial derivatives of the positional Jacobian: out[k] = dJ/dq_k,
/// from the cross-product recurrence of the geometric Jacobian.
std::vector<Eigen::MatrixXd> positional_jacobian_derivatives(const KinematicChain& chain,
                                                             const JointConfig& q);

/// Damped least-squares pseudoinverse via SVD: V diag(s/(s^2+damping^2)) U^T.
/// damping == 0 gives the exact Moore-Penrose pseudoinverse.
Eigen::MatrixXd damped_pseudoinverse(const Eigen::MatrixXd& m, double damping = 0.0);

/// Nullspace projector I - pinv(J) J of a task Jacobian.
Eigen::MatrixXd nullspace_projector(const Eigen::MatrixXd& j, double damping = 0.0);

/// Shoulder-elbow-wrist triangle of an anthropomorphic arm:
/// r = upper-arm direction, l = triangle-plane normal, alpha = elbow angle,
/// p = palm-plane normal, f = finger direction. All vectors unit, in the
/// shoulder frame.
struct ArmTriangle {
    Eigen::Vector3d r;
    Eigen::Vector3d l;
    double alpha = 0.0;  // radians in (0, pi]
    Eigen::Vector3d p;
    Eigen::Vector3d f;

    void validate() const;
};

/// 7-DoF anthropomorphic arm: spherical shoulder (z-y-z), elbow flexion (y),
/// spherical wrist (z-y-x). Zero configuration hangs along -z with fingers
/// along +x and palm normal +z, all in the shoulder frame. The chain's
/// end-effector is the wrist point carrying the hand orientation.
struct AnthropomorphicArm {
    double upper_arm_length = 0.30;
    double forearm_length = 0.25;
    double hand_length = 0.10;
    Pose shoulder_frame = Pose::Identity();

    KinematicChain chain() const;
    double min_reach() const { return std::abs(upper_arm_length - forearm_length); }
    double max_reach() const { return upper_arm_length + forearm_length; }
};

/// Joint angles reproducing the wrist pose encoded by the triangle.
JointConfig arm_triangle_to_joints(const AnthropomorphicArm& arm, const ArmTriangle& tri);

/// Wrist pose of a triangle in the shoulder frame (position of the wrist,
/// orientation of the hand).
Pose arm_triangle_wrist_pose(const AnthropomorphicArm& arm, const ArmTriangle& tri);

/// Inverse of arm_triangle_wrist_pose: (r, l, alpha) from the wrist position
/// with the elbow-circle redundancy fixed by swivel_hint; (p, f) read from
/// the wrist orientation. wrist_pose is relative to the shoulder frame.
ArmTriangle wrist_pose_to_arm_triangle(const AnthropomorphicArm& arm, const Pose& wrist_pose,
                                       double swivel_hint = 0.0);

/// Two contact points held with a tight grasp on a rigid object.
struct GraspModel {
    Eigen::Vector3d left_contact = Eigen::Vector3d::Zero();   // object frame, m
    Eigen::Vector3d right_contact = Eigen::Vector3d::Zero();  // object frame, m
    Pose object_frame = Pose::Identity();

    Eigen::Vector3d world_left_contact() const { return object_frame * left_contact; }
    Eigen::Vector3d world_right_contact() const { return object_frame * right_contact; }
};

/// Full grasp matrix G_d = (G_l, G_r) in R^{6x12}: G_d^T maps the object
/// twist (v, w) to the stacked end-effector twists under the tight grasp.
Eigen::MatrixXd grasp_matrix(const GraspModel& g);
/// Positional variant in R^{3x6}: object velocity to stacked contact-point
/// velocities (each block the identity).
Eigen::MatrixXd grasp_matrix_positional(const GraspModel& g);

}  // namespace manipulant
