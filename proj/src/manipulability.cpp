#include "manipulant/manipulability.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace manipulant {

namespace {

constexpr double kSingularEig = 1e-12;

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

}  // namespace

SpdMatrix ManipulabilityEllipsoid::spd() const { return SpdMatrix(matrix); }

ManipulabilityEllipsoid velocity_manipulability(const Eigen::MatrixXd& jac,
                                                const std::string& frame) {
    ManipulabilityEllipsoid e;
    Eigen::MatrixXd m = jac * jac.transpose();
    e.matrix = 0.5 * (m + m.transpose());
    e.kind = EllipsoidKind::velocity;
    e.frame = frame;
    e.singular = min_eigenvalue(e.matrix) < kSingularEig;
    return e;
}

ManipulabilityEllipsoid velocity_manipulability(const KinematicChain& chain, const JointConfig& q,
                                                const std::string& frame) {
    return velocity_manipulability(positional_jacobian(chain, q), frame);
}

ManipulabilityEllipsoid velocity_manipulability(const Eigen::MatrixXd& jac,
                                                const Eigen::VectorXd& joint_weights,
                                                const std::string& frame) {
    if (joint_weights.size() != jac.cols()) {
        throw DimensionError("velocity_manipulability: joint weight count mismatch");
    }
    return velocity_manipulability(Eigen::MatrixXd(jac * joint_weights.asDiagonal()), frame);
}

ManipulabilityEllipsoid force_manipulability(const ManipulabilityEllipsoid& velocity) {
    const double min_eig = min_eigenvalue(velocity.matrix);
    if (min_eig < kSingularEig) {
        std::ostringstream os;
        os << "force_manipulability: velocity ellipsoid singular, min eigenvalue = " << min_eig;
        throw SpdError(os.str(), min_eig);
    }
    ManipulabilityEllipsoid e;
    e.matrix = SpdMatrix(velocity.matrix).inverse();
    e.kind = EllipsoidKind::force;
    e.frame = velocity.frame;
    e.singular = false;
    return e;
}

ManipulabilityEllipsoid force_manipulability(const KinematicChain& chain, const JointConfig& q,
                                             const std::string& frame) {
    return force_manipulability(velocity_manipulability(chain, q, frame));
}

ManipulabilityEllipsoid dual_arm_velocity_manipulability(const DualArmSystem& sys,
                                                         const JointConfig& q_left,
                                                         const JointConfig& q_right,
                                                         double grasp_tol,
                                                         const std::string& frame) {
    const Eigen::Vector3d ee_left = forward_kinematics(sys.left, q_left).translation();
    const Eigen::Vector3d ee_right = forward_kinematics(sys.right, q_right).translation();
    const double err_left = (ee_left - sys.grasp.world_left_contact()).norm();
    const double err_right = (ee_right - sys.grasp.world_right_contact()).norm();
    if (err_left > grasp_tol || err_right > grasp_tol) {
        std::ostringstream os;
        os << "dual_arm_velocity_manipulability: grasp inconsistent with end-effector poses"
           << " (left error " << err_left << " m, right error " << err_right << " m)";
        throw KinematicsError(os.str());
    }

    const Eigen::MatrixXd jl = positional_jacobian(sys.left, q_left);
    const Eigen::MatrixXd jr = positional_jacobian(sys.right, q_right);
    Eigen::MatrixXd jd = Eigen::MatrixXd::Zero(6, jl.cols() + jr.cols());
    jd.topLeftCorner(3, jl.cols()) = jl;
    jd.bottomRightCorner(3, jr.cols()) = jr;

    const Eigen::MatrixXd gd = grasp_matrix_positional(sys.grasp);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gd);
    if (svd.rank() < gd.rows()) {
        throw KinematicsError("dual_arm_velocity_manipulability: grasp matrix rank-deficient");
    }
    const Eigen::MatrixXd gd_pinv_t = damped_pseudoinverse(gd).transpose();

    ManipulabilityEllipsoid e;
    Eigen::MatrixXd m = gd_pinv_t * (jd * jd.transpose()) * gd_pinv_t.transpose();
    e.matrix = 0.5 * (m + m.transpose());
    e.kind = EllipsoidKind::velocity;
    e.frame = frame;
    e.singular = min_eigenvalue(e.matrix) < kSingularEig;
    return e;
}

Eigen::MatrixXd ManipulabilityJacobian::matricized() const {
    const int n = dof();
    const int v = sym_vec_dim(dim());
    Eigen::MatrixXd m(n, v);
    for (int k = 0; k < n; ++k) m.row(k) = sym_vec(slices[k]).transpose();
    return m;
}

ManipulabilityJacobian manipulability_jacobian(const KinematicChain& chain, const JointConfig& q) {
    const Eigen::MatrixXd j = positional_jacobian(chain, q);
    const std::vector<Eigen::MatrixXd> dj = positional_jacobian_derivatives(chain, q);
    ManipulabilityJacobian out;
    out.slices.reserve(dj.size());
    for (const Eigen::MatrixXd& djk : dj) {
        Eigen::MatrixXd slice = djk * j.transpose() + j * djk.transpose();
        out.slices.push_back(0.5 * (slice + slice.transpose()));
    }
    return out;
}

ClassicalIndices classical_indices(const SpdMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.matrix(), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& vals = eig.eigenvalues();
    ClassicalIndices idx;
    idx.determinant = vals.prod();
    idx.condition_number = vals.maxCoeff() / vals.minCoeff();
    return idx;
}

ClassicalIndices classical_indices(const ManipulabilityEllipsoid& m) {
    return classical_indices(m.spd());
}

ManipulabilityEllipsoid reframe(const ManipulabilityEllipsoid& m, const Eigen::Matrix3d& rotation,
                                const std::string& new_frame) {
    if ((rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
        1e-10) {
        throw KinematicsError("reframe: rotation not orthonormal");
    }
    if (m.dim() != 3) {
        throw DimensionError("reframe: expects a 3x3 ellipsoid");
    }
    ManipulabilityEllipsoid out = m;
    Eigen::MatrixXd r = rotation * m.matrix * rotation.transpose();
    out.matrix = 0.5 * (r + r.transpose());
    out.frame = new_frame;
    return out;
}

}  // namespace manipulant
