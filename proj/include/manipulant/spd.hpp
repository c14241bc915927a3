#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "manipulant/errors.hpp"

namespace manipulant {

/// Symmetric positive-definite matrix, the element of the SPD manifold.
/// Construction validates symmetry and positive-definiteness; the stored
/// matrix is exactly symmetrized.
class SpdMatrix {
public:
    explicit SpdMatrix(const Eigen::MatrixXd& m);

    static SpdMatrix identity(int dim);
    static SpdMatrix from_diagonal(const Eigen::VectorXd& diag);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXd& matrix() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    /// Matrix functions via symmetric eigendecomposition. Eigenvalues are
    /// clamped below at 1e-12; an eigenvalue <= 0 raises SpdError instead
    /// of being clamped silently.
    Eigen::MatrixXd sqrt() const;
    Eigen::MatrixXd inv_sqrt() const;
    Eigen::MatrixXd log() const;
    Eigen::MatrixXd inverse() const;

    bool operator==(const SpdMatrix& other) const { return m_ == other.m_; }

private:
    Eigen::MatrixXd m_;
};

/// Symmetric matrix anchored in the tangent space of `base`.
struct TangentSym {
    TangentSym(SpdMatrix base, const Eigen::MatrixXd& value);

    SpdMatrix base;
    Eigen::MatrixXd value;
};

/// Inner-product-preserving vectorization of a symmetric DxD matrix:
/// diagonal entries in index order, then the upper triangle row-major
/// scaled by sqrt(2). dot(sym_vec(A), sym_vec(B)) == <A,B>_F.
Eigen::VectorXd sym_vec(const Eigen::MatrixXd& m);
Eigen::MatrixXd sym_unvec(const Eigen::VectorXd& v);

/// Dimension of the sym_vec image for DxD matrices: D(D+1)/2.
inline int sym_vec_dim(int d) { return d * (d + 1) / 2; }
/// Inverse: matrix dimension D from a vector length D(D+1)/2.
int sym_vec_matrix_dim(int vec_dim);

/// Sample covariance of SPD points expressed in the tangent space of their
/// mean: a dim^4 tensor S[i,j,k,l] = 1/(N-1) sum_n L_n[i,j] L_n[k,l] with
/// L_n = Log_mean(point_n).
class SpdCovariance {
public:
    SpdCovariance(int dim, SpdMatrix base);

    int dim() const { return dim_; }
    const SpdMatrix& base() const { return base_; }

    double operator()(int i, int j, int k, int l) const { return t_[index(i, j, k, l)]; }
    double& at(int i, int j, int k, int l) { return t_[index(i, j, k, l)]; }

    /// vec-index x vec-index view under the sym_vec convention; symmetric PSD.
    Eigen::MatrixXd matricized() const;
    static SpdCovariance from_matricized(const Eigen::MatrixXd& m, SpdMatrix base);

    /// sqrt(S[i,i,i,i]) for each axis i: std of the (i,i) matrix entry.
    Eigen::VectorXd per_axis_std() const;

private:
    std::size_t index(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l;
    }
    int dim_;
    SpdMatrix base_;
    std::vector<double> t_;
};

/// Affine-invariant distance ||log(a^-1/2 b a^-1/2)||_F.
double spd_distance(const SpdMatrix& a, const SpdMatrix& b);

/// Exponential map: base^1/2 exp(base^-1/2 L base^-1/2) base^1/2.
SpdMatrix spd_exp(const SpdMatrix& base, const TangentSym& tangent);
SpdMatrix spd_exp(const SpdMatrix& base, const Eigen::MatrixXd& tangent_value);

/// Logarithmic map, inverse of spd_exp.
TangentSym spd_log(const SpdMatrix& base, const SpdMatrix& target);

/// Norm of a tangent vector in the metric at its base point,
/// ||base^-1/2 L base^-1/2||_F. Equals spd_distance(base, Exp_base(L)).
double tangent_norm(const TangentSym& tangent);

struct FrechetOptions {
    double tol = 1e-10;  // Frobenius norm of the tangent-space mean
    int max_iter = 100;
};

/// Fixed point of mean <- Exp_mean(sum_n w_n Log_mean(point_n) / sum_n w_n),
/// initialized at the first point. Throws ConvergenceError (carrying the
/// residual) if max_iter is exhausted; the message includes the last iterate.
SpdMatrix frechet_mean(std::span<const SpdMatrix> points, const FrechetOptions& opts = {});
SpdMatrix frechet_mean(std::span<const SpdMatrix> points, std::span<const double> weights,
                       const FrechetOptions& opts = {});

/// Covariance tensor of `points` in the tangent space of `mean` (N >= 2).
SpdCovariance spd_covariance(std::span<const SpdMatrix> points, const SpdMatrix& mean);

/// Point at parameter t in [0,1] on the geodesic from a to b.
SpdMatrix geodesic(const SpdMatrix& a, const SpdMatrix& b, double t);

}  // namespace manipulant
