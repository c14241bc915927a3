#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "manipulant/kinematics.hpp"
#include "manipulant/spd.hpp"

namespace manipulant {

enum class EllipsoidKind { velocity, force };

/// Velocity or force manipulability ellipsoid. The matrix is kept raw (PSD,
/// possibly singular); spd() converts for manifold operations and throws on
/// singular input. `singular` is set when the smallest eigenvalue dips below
/// 1e-12.
struct ManipulabilityEllipsoid {
    Eigen::MatrixXd matrix;
    EllipsoidKind kind = EllipsoidKind::velocity;
    std::string frame = "world";
    bool singular = false;

    int dim() const { return static_cast<int>(matrix.rows()); }
    SpdMatrix spd() const;
};

struct ClassicalIndices {
    double determinant = 0.0;
    double condition_number = 0.0;
};

/// M = J J^T of the positional Jacobian block.
ManipulabilityEllipsoid velocity_manipulability(const KinematicChain& chain, const JointConfig& q,
                                                const std::string& frame = "world");
/// Velocity manipulability from a caller-supplied Jacobian block.
ManipulabilityEllipsoid velocity_manipulability(const Eigen::MatrixXd& jac,
                                                const std::string& frame = "world");
/// With per-joint velocity weights reflecting actuator properties:
/// M = J W^2 J^T for W = diag(weights).
ManipulabilityEllipsoid velocity_manipulability(const Eigen::MatrixXd& jac,
                                                const Eigen::VectorXd& joint_weights,
                                                const std::string& frame = "world");

/// (J J^T)^-1; rejects singular velocity ellipsoids (SpdError carries the
/// offending eigenvalue).
ManipulabilityEllipsoid force_manipulability(const KinematicChain& chain, const JointConfig& q,
                                             const std::string& frame = "world");
ManipulabilityEllipsoid force_manipulability(const ManipulabilityEllipsoid& velocity);

/// Two independent arms rigidly grasping one object.
struct DualArmSystem {
    KinematicChain left;
    KinematicChain right;
    GraspModel grasp;
};

/// Dual-arm velocity manipulability M_d = G_d^+T J_d J_d^T G_d^+ with
/// J_d = diag(J_l, J_r) positional blocks and the positional grasp matrix.
/// Checks that both end effectors coincide with their contact points to
/// `grasp_tol` (meters).
ManipulabilityEllipsoid dual_arm_velocity_manipulability(const DualArmSystem& sys,
                                                         const JointConfig& q_left,
                                                         const JointConfig& q_right,
                                                         double grasp_tol = 1e-3,
                                                         const std::string& frame = "world");

/// Third-order derivative tensor of M = JJ^T: slice k is
/// dM/dq_k = (dJ/dq_k) J^T + J (dJ/dq_k)^T, each slice symmetric.
struct ManipulabilityJacobian {
    std::vector<Eigen::MatrixXd> slices;  // one DxD slice per joint

    int dof() const { return static_cast<int>(slices.size()); }
    int dim() const { return slices.empty() ? 0 : static_cast<int>(slices[0].rows()); }
    /// Mode-3 matricization, n x D(D+1)/2 under the sym_vec convention;
    /// vec(dM/dt) = matricized()^T qdot.
    Eigen::MatrixXd matricized() const;
};

ManipulabilityJacobian manipulability_jacobian(const KinematicChain& chain, const JointConfig& q);

ClassicalIndices classical_indices(const ManipulabilityEllipsoid& m);
ClassicalIndices classical_indices(const SpdMatrix& m);

/// R M R^T with the frame tag updated; rotation must be orthonormal to 1e-10.
ManipulabilityEllipsoid reframe(const ManipulabilityEllipsoid& m, const Eigen::Matrix3d& rotation,
                                const std::string& new_frame);

}  // namespace manipulant
