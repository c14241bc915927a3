#include "manipulant/kinematics.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace manipulant {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

// ZYZ Euler angles of a rotation matrix, gimbal fallback a = 0.
Eigen::Vector3d euler_zyz(const Eigen::Matrix3d& r) {
    const double sy = std::hypot(r(0, 2), r(1, 2));
    if (sy < 1e-12) {
        if (r(2, 2) > 0.0) return {0.0, 0.0, std::atan2(r(1, 0), r(0, 0))};
        return {0.0, M_PI, -std::atan2(r(1, 0), -r(0, 0))};
    }
    return {std::atan2(r(1, 2), r(0, 2)), std::atan2(sy, r(2, 2)), std::atan2(r(2, 1), -r(2, 0))};
}

// ZYX Euler angles, gimbal fallback a = 0.
Eigen::Vector3d euler_zyx(const Eigen::Matrix3d& r) {
    const double cy = std::hypot(r(0, 0), r(1, 0));
    if (cy < 1e-12) {
        if (r(2, 0) < 0.0) return {0.0, M_PI / 2.0, std::atan2(r(0, 1), r(0, 2))};
        return {0.0, -M_PI / 2.0, std::atan2(-r(0, 1), -r(0, 2))};
    }
    return {std::atan2(r(1, 0), r(0, 0)), std::atan2(-r(2, 0), cy), std::atan2(r(2, 1), r(2, 2))};
}

Eigen::Matrix3d rot_y(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).matrix(); }

void check_unit(const Eigen::Vector3d& v, double tol, const char* what) {
    if (std::abs(v.norm() - 1.0) > tol) {
        std::ostringstream os;
        os << what << ": vector not unit norm, |v| = " << v.norm();
        throw KinematicsError(os.str());
    }
}

}  // namespace

KinematicChain::KinematicChain(std::vector<RevoluteJoint> joints, Pose base_pose, Pose end_offset,
                               std::string name)
    : joints_(std::move(joints)), base_pose_(base_pose), end_offset_(end_offset),
      name_(std::move(name)) {
    if (joints_.empty()) throw KinematicsError("KinematicChain: needs at least one joint");
    for (auto& j : joints_) {
        check_unit(j.axis, 1e-12, "KinematicChain joint axis");
        j.axis.normalize();
    }
}

ChainState chain_state(const KinematicChain& chain, const JointConfig& q) {
    if (q.size() != chain.dof()) {
        std::ostringstream os;
        os << "chain_state: configuration size " << q.size() << " does not match " << chain.dof()
           << "-DoF chain";
        throw DimensionError(os.str());
    }
    ChainState st;
    st.axes.reserve(chain.dof());
    st.origins.reserve(chain.dof());
    Pose t = chain.base_pose();
    for (int i = 0; i < chain.dof(); ++i) {
        const RevoluteJoint& j = chain.joints()[i];
        t = t * Eigen::Translation3d(j.offset);
        st.origins.push_back(t.translation());
        st.axes.push_back(t.linear() * j.axis);
        t = t * Eigen::AngleAxisd(q[i], j.axis);
    }
    st.end_effector = t * chain.end_offset();
    return st;
}

Pose forward_kinematics(const KinematicChain& chain, const JointConfig& q) {
    return chain_state(chain, q).end_effector;
}

Eigen::MatrixXd jacobian(const KinematicChain& chain, const JointConfig& q) {
    const ChainState st = chain_state(chain, q);
    const Eigen::Vector3d p_ee = st.end_effector.translation();
    Eigen::MatrixXd j(6, chain.dof());
    for (int i = 0; i < chain.dof(); ++i) {
        j.col(i).head<3>() = st.axes[i].cross(p_ee - st.origins[i]);
        j.col(i).tail<3>() = st.axes[i];
    }
    return j;
}

Eigen::MatrixXd positional_jacobian(const KinematicChain& chain, const JointConfig& q) {
    return jacobian(chain, q).topRows(3);
}

std::vector<Eigen::MatrixXd> positional_jacobian_derivatives(const KinematicChain& chain,
                                                             const JointConfig& q) {
    const ChainState st = chain_state(chain, q);
    const Eigen::Vector3d p_ee = st.end_effector.translation();
    const int n = chain.dof();
    std::vector<Eigen::MatrixXd> out(n, Eigen::MatrixXd::Zero(3, n));
    // col_i = a_i x (p_ee - p_i). Joint k rotates everything distal to it:
    // for k < i both a_i and p_i move with a_k, for k >= i only p_ee does.
    for (int k = 0; k < n; ++k) {
        const Eigen::Vector3d& ak = st.axes[k];
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector3d& ai = st.axes[i];
            if (k < i) {
                const Eigen::Vector3d rel = p_ee - st.origins[i];
                out[k].col(i) = ak.cross(ai).cross(rel) + ai.cross(ak.cross(rel));
            } else {
                out[k].col(i) = ai.cross(ak.cross(p_ee - st.origins[k]));
            }
        }
    }
    return out;
}

Eigen::MatrixXd damped_pseudoinverse(const Eigen::MatrixXd& m, double damping) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv(s.size());
    const double tol = 1e-12 * std::max<double>(m.rows(), m.cols()) * (s.size() ? s[0] : 0.0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (damping > 0.0) {
            inv[i] = s[i] / (s[i] * s[i] + damping * damping);
        } else {
            inv[i] = s[i] > tol ? 1.0 / s[i] : 0.0;
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd nullspace_projector(const Eigen::MatrixXd& j, double damping) {
    const Eigen::Index n = j.cols();
    return Eigen::MatrixXd::Identity(n, n) - damped_pseudoinverse(j, damping) * j;
}

void ArmTriangle::validate() const {
    check_unit(r, 1e-10, "ArmTriangle.r");
    check_unit(l, 1e-10, "ArmTriangle.l");
    check_unit(p, 1e-10, "ArmTriangle.p");
    check_unit(f, 1e-10, "ArmTriangle.f");
    if (std::abs(r.dot(l)) > 1e-8) {
        throw KinematicsError("ArmTriangle: l not orthogonal to r");
    }
    if (std::abs(p.dot(f)) > 1e-8) {
        throw KinematicsError("ArmTriangle: p not orthogonal to f");
    }
    if (!(alpha > 0.0) || alpha > M_PI + 1e-12) {
        std::ostringstream os;
        os << "ArmTriangle: elbow angle " << alpha << " outside (0, pi]";
        throw KinematicsError(os.str());
    }
}

KinematicChain AnthropomorphicArm::chain() const {
    if (!(upper_arm_length > 0.0) || !(forearm_length > 0.0) || !(hand_length > 0.0)) {
        throw KinematicsError("AnthropomorphicArm: segment lengths must be positive");
    }
    const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
    const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
    const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
    std::vector<RevoluteJoint> joints = {
        {z, zero},                                 // shoulder z
        {y, zero},                                 // shoulder y
        {z, zero},                                 // shoulder z
        {y, {0.0, 0.0, -upper_arm_length}},        // elbow flexion
        {z, {0.0, 0.0, -forearm_length}},          // wrist z
        {y, zero},                                 // wrist y
        {x, zero},                                 // wrist x
    };
    return KinematicChain(std::move(joints), shoulder_frame, Pose::Identity(), "arm7");
}

namespace {

// Hand frame columns: x = finger direction, z = palm normal.
Eigen::Matrix3d hand_rotation(const Eigen::Vector3d& p, const Eigen::Vector3d& f) {
    Eigen::Matrix3d r;
    r.col(0) = f;
    r.col(1) = p.cross(f);
    r.col(2) = p;
    return r;
}

// Shoulder rotation mapping the rest direction -z to r and the rest
// triangle normal +y to l.
Eigen::Matrix3d shoulder_rotation(const Eigen::Vector3d& r, const Eigen::Vector3d& l) {
    Eigen::Matrix3d rs;
    rs.col(0) = r.cross(l);
    rs.col(1) = l;
    rs.col(2) = -r;
    return rs;
}

// Forearm direction for elbow angle alpha: rotates away from r in the
// triangle plane, so that l = normalize(r x forearm).
Eigen::Vector3d forearm_direction(const Eigen::Vector3d& r, const Eigen::Vector3d& l,
                                  double alpha) {
    return -std::sin(alpha) * r.cross(l) - std::cos(alpha) * r;
}

// Orthonormal basis (u, v) of the plane normal to n, with u the projection
// of the downward reference; v = n x u.
void swivel_basis(const Eigen::Vector3d& n, Eigen::Vector3d& u, Eigen::Vector3d& v) {
    Eigen::Vector3d ref = -Eigen::Vector3d::UnitZ();
    if (std::abs(n.dot(ref)) > 1.0 - 1e-8) ref = Eigen::Vector3d::UnitX();
    u = (ref - ref.dot(n) * n).normalized();
    v = n.cross(u);
}

}  // namespace

Pose arm_triangle_wrist_pose(const AnthropomorphicArm& arm, const ArmTriangle& tri) {
    tri.validate();
    const Eigen::Vector3d wrist = arm.upper_arm_length * tri.r +
                                  arm.forearm_length * forearm_direction(tri.r, tri.l, tri.alpha);
    Pose pose = Pose::Identity();
    pose.translation() = wrist;
    pose.linear() = hand_rotation(tri.p, tri.f);
    return pose;
}

JointConfig arm_triangle_to_joints(const AnthropomorphicArm& arm, const ArmTriangle& tri) {
    tri.validate();
    const Eigen::Matrix3d rs = shoulder_rotation(tri.r, tri.l);
    const Eigen::Vector3d q123 = euler_zyz(rs);
    const double q4 = M_PI - tri.alpha;
    const Eigen::Matrix3d r_forearm = rs * rot_y(q4);
    const Eigen::Matrix3d r_rel = r_forearm.transpose() * hand_rotation(tri.p, tri.f);
    const Eigen::Vector3d q567 = euler_zyx(r_rel);
    JointConfig q(7);
    q << q123[0], q123[1], q123[2], q4, q567[0], q567[1], q567[2];
    return q;
}

ArmTriangle wrist_pose_to_arm_triangle(const AnthropomorphicArm& arm, const Pose& wrist_pose,
                                       double swivel_hint) {
    const double l1 = arm.upper_arm_length;
    const double l2 = arm.forearm_length;
    const Eigen::Vector3d w = wrist_pose.translation();
    const double dist = w.norm();
    if (dist < arm.min_reach() - 1e-9 || dist > arm.max_reach() + 1e-9) {
        std::ostringstream os;
        os << "wrist_pose_to_arm_triangle: wrist at distance " << dist
           << " outside reachable annulus [" << arm.min_reach() << ", " << arm.max_reach() << "]";
        throw KinematicsError(os.str());
    }
    const double d = std::clamp(dist, std::max(arm.min_reach(), 1e-12), arm.max_reach());

    ArmTriangle tri;
    tri.alpha = std::acos(std::clamp((l1 * l1 + l2 * l2 - d * d) / (2.0 * l1 * l2), -1.0, 1.0));

    const Eigen::Vector3d n = w / dist;
    Eigen::Vector3d u, v;
    swivel_basis(n, u, v);
    const double lambda = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d * d);
    const double rho2 = l1 * l1 - lambda * lambda * d * d;
    const double rho = std::sqrt(std::max(0.0, rho2));
    const Eigen::Vector3d elbow =
        lambda * d * n + rho * (std::cos(swivel_hint) * u + std::sin(swivel_hint) * v);

    tri.r = (elbow / l1).normalized();
    const Eigen::Vector3d d_forearm = ((w - elbow) / l2).normalized();
    const Eigen::Vector3d cross = tri.r.cross(d_forearm);
    if (cross.norm() > 1e-6) {
        tri.l = cross.normalized();
    } else {
        // Full extension (or fold): triangle normal undefined, take it from
        // the swivel reference plane (the rho -> 0 limit at fixed hint).
        tri.l = std::sin(swivel_hint) * u - std::cos(swivel_hint) * v;
    }
    tri.p = wrist_pose.linear().col(2);
    tri.f = wrist_pose.linear().col(0);
    return tri;
}

Eigen::MatrixXd grasp_matrix(const GraspModel& g) {
    if ((g.left_contact - g.right_contact).norm() < 1e-12) {
        throw KinematicsError("GraspModel: contact points must be distinct");
    }
    const Eigen::Vector3d rl = g.world_left_contact() - g.object_frame.translation();
    const Eigen::Vector3d rr = g.world_right_contact() - g.object_frame.translation();
    Eigen::MatrixXd gd(6, 12);
    for (int arm = 0; arm < 2; ++arm) {
        const Eigen::Vector3d& rc = arm == 0 ? rl : rr;
        Eigen::Matrix<double, 6, 6> b;
        b.setZero();
        b.topLeftCorner<3, 3>().setIdentity();
        b.topRightCorner<3, 3>() = -skew(rc);
        b.bottomRightCorner<3, 3>().setIdentity();
        gd.middleCols<6>(6 * arm) = b.transpose();
    }
    return gd;
}

Eigen::MatrixXd grasp_matrix_positional(const GraspModel& g) {
    if ((g.left_contact - g.right_contact).norm() < 1e-12) {
        throw KinematicsError("GraspModel: contact points must be distinct");
    }
    Eigen::MatrixXd gd(3, 6);
    gd << Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity();
    return gd;
}

}  // namespace manipulant
