#include "manipulant/spd.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace manipulant {

namespace {

constexpr double kEigClamp = 1e-12;

void check_square(const Eigen::MatrixXd& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        std::ostringstream os;
        os << who << ": expected a nonempty square matrix, got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

void check_symmetric(const Eigen::MatrixXd& m, const char* who) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        std::ostringstream os;
        os << who << ": matrix not symmetric, max|A - A^T| = " << asym;
        throw SpdError(os.str(), 0.0);
    }
}

// Applies f to the eigenvalues of a symmetric matrix. Eigenvalues <= 0 are an
// error when require_positive; otherwise they pass through untouched.
Eigen::MatrixXd sym_eig_apply(const Eigen::MatrixXd& m, double (*f)(double),
                              bool require_positive, const char* who) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success) {
        throw Error(std::string(who) + ": eigendecomposition failed");
    }
    Eigen::VectorXd vals = eig.eigenvalues();
    if (require_positive) {
        const double min_eig = vals.minCoeff();
        if (min_eig <= 0.0) {
            std::ostringstream os;
            os << who << ": matrix not positive definite, min eigenvalue = " << min_eig;
            throw SpdError(os.str(), min_eig);
        }
        vals = vals.cwiseMax(kEigClamp);
    }
    for (Eigen::Index i = 0; i < vals.size(); ++i) vals[i] = f(vals[i]);
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd sym_matrix_exp(const Eigen::MatrixXd& m) {
    return sym_eig_apply(m, [](double x) { return std::exp(x); }, false, "spd_exp");
}

}  // namespace

SpdMatrix::SpdMatrix(const Eigen::MatrixXd& m) {
    check_square(m, "SpdMatrix");
    check_symmetric(m, "SpdMatrix");
    m_ = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m_, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(min_eig > 0.0)) {
        std::ostringstream os;
        os << "SpdMatrix: not positive definite, min eigenvalue = " << min_eig;
        throw SpdError(os.str(), min_eig);
    }
}

SpdMatrix SpdMatrix::identity(int dim) {
    return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SpdMatrix SpdMatrix::from_diagonal(const Eigen::VectorXd& diag) {
    return SpdMatrix(Eigen::MatrixXd(diag.asDiagonal()));
}

Eigen::MatrixXd SpdMatrix::sqrt() const {
    return sym_eig_apply(m_, [](double x) { return std::sqrt(x); }, true, "SpdMatrix::sqrt");
}

Eigen::MatrixXd SpdMatrix::inv_sqrt() const {
    return sym_eig_apply(m_, [](double x) { return 1.0 / std::sqrt(x); }, true,
                         "SpdMatrix::inv_sqrt");
}

Eigen::MatrixXd SpdMatrix::log() const {
    return sym_eig_apply(m_, [](double x) { return std::log(x); }, true, "SpdMatrix::log");
}

Eigen::MatrixXd SpdMatrix::inverse() const {
    return sym_eig_apply(m_, [](double x) { return 1.0 / x; }, true, "SpdMatrix::inverse");
}

TangentSym::TangentSym(SpdMatrix base_, const Eigen::MatrixXd& value_)
    : base(std::move(base_)), value(0.5 * (value_ + value_.transpose())) {
    check_square(value_, "TangentSym");
    if (value_.rows() != base.dim()) {
        throw DimensionError("TangentSym: value dimension does not match base");
    }
    check_symmetric(value_, "TangentSym");
}

Eigen::VectorXd sym_vec(const Eigen::MatrixXd& m) {
    check_square(m, "sym_vec");
    check_symmetric(m, "sym_vec");
    const int d = static_cast<int>(m.rows());
    Eigen::VectorXd v(sym_vec_dim(d));
    for (int i = 0; i < d; ++i) v[i] = m(i, i);
    int k = d;
    const double s = std::sqrt(2.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) v[k++] = s * 0.5 * (m(i, j) + m(j, i));
    return v;
}

int sym_vec_matrix_dim(int vec_dim) {
    int d = static_cast<int>(std::floor((std::sqrt(8.0 * vec_dim + 1.0) - 1.0) / 2.0));
    if (sym_vec_dim(d) != vec_dim) {
        std::ostringstream os;
        os << "sym_unvec: length " << vec_dim << " is not of the form D(D+1)/2";
        throw DimensionError(os.str());
    }
    return d;
}

Eigen::MatrixXd sym_unvec(const Eigen::VectorXd& v) {
    const int d = sym_vec_matrix_dim(static_cast<int>(v.size()));
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i) m(i, i) = v[i];
    int k = d;
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            m(i, j) = m(j, i) = s * v[k++];
        }
    return m;
}

SpdCovariance::SpdCovariance(int dim, SpdMatrix base)
    : dim_(dim), base_(std::move(base)),
      t_(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0) {
    if (dim != base_.dim()) throw DimensionError("SpdCovariance: base dim mismatch");
}

Eigen::MatrixXd SpdCovariance::matricized() const {
    const int d = dim_;
    const int v = sym_vec_dim(d);
    // (i,j) -> vec slot and weight of the sym_vec convention.
    std::vector<std::pair<int, double>> slot(static_cast<std::size_t>(d) * d);
    const double s = std::sqrt(2.0);
    int k = d;
    for (int i = 0; i < d; ++i) slot[i * d + i] = {i, 1.0};
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            slot[i * d + j] = {k, s};
            slot[j * d + i] = {k, s};
            ++k;
        }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(v, v);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            auto [a, wa] = slot[i * d + j];
            for (int p = 0; p < d; ++p)
                for (int q = p; q < d; ++q) {
                    auto [b, wb] = slot[p * d + q];
                    m(a, b) = wa * wb * (*this)(i, j, p, q);
                }
        }
    return m;
}

SpdCovariance SpdCovariance::from_matricized(const Eigen::MatrixXd& m, SpdMatrix base) {
    const int v = static_cast<int>(m.rows());
    if (m.cols() != v) throw DimensionError("SpdCovariance::from_matricized: not square");
    const int d = sym_vec_matrix_dim(v);
    SpdCovariance cov(d, std::move(base));
    std::vector<std::pair<int, double>> slot(static_cast<std::size_t>(d) * d);
    const double s = std::sqrt(2.0);
    int k = d;
    for (int i = 0; i < d; ++i) slot[i * d + i] = {i, 1.0};
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            slot[i * d + j] = {k, s};
            slot[j * d + i] = {k, s};
            ++k;
        }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            auto [a, wa] = slot[i * d + j];
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q) {
                    auto [b, wb] = slot[p * d + q];
                    cov.at(i, j, p, q) = m(a, b) / (wa * wb);
                }
        }
    return cov;
}

Eigen::VectorXd SpdCovariance::per_axis_std() const {
    Eigen::VectorXd out(dim_);
    for (int i = 0; i < dim_; ++i) out[i] = std::sqrt((*this)(i, i, i, i));
    return out;
}

namespace {

void check_same_dim(const SpdMatrix& a, const SpdMatrix& b, const char* who) {
    if (a.dim() != b.dim()) {
        std::ostringstream os;
        os << who << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
        throw DimensionError(os.str());
    }
}

}  // namespace

double spd_distance(const SpdMatrix& a, const SpdMatrix& b) {
    check_same_dim(a, b, "spd_distance");
    const Eigen::MatrixXd w = a.inv_sqrt();
    const Eigen::MatrixXd whitened = w * b.matrix() * w;
    // log of the whitened matrix through its (positive) eigenvalues
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(whitened, Eigen::EigenvaluesOnly);
    Eigen::VectorXd vals = eig.eigenvalues();
    const double min_eig = vals.minCoeff();
    if (min_eig <= 0.0) {
        throw SpdError("spd_distance: whitened matrix not positive definite", min_eig);
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        const double l = std::log(std::max(vals[i], kEigClamp));
        sum += l * l;
    }
    return std::sqrt(sum);
}

SpdMatrix spd_exp(const SpdMatrix& base, const Eigen::MatrixXd& tangent_value) {
    if (tangent_value.rows() != base.dim() || tangent_value.cols() != base.dim()) {
        throw DimensionError("spd_exp: tangent dimension does not match base");
    }
    const Eigen::MatrixXd s = base.sqrt();
    const Eigen::MatrixXd w = base.inv_sqrt();
    Eigen::MatrixXd inner = w * tangent_value * w;
    inner = 0.5 * (inner + inner.transpose());
    return SpdMatrix(s * sym_matrix_exp(inner) * s);
}

SpdMatrix spd_exp(const SpdMatrix& base, const TangentSym& tangent) {
    if (!(tangent.base.matrix() == base.matrix())) {
        throw DimensionError("spd_exp: tangent is anchored at a different base point");
    }
    return spd_exp(base, tangent.value);
}

TangentSym spd_log(const SpdMatrix& base, const SpdMatrix& target) {
    check_same_dim(base, target, "spd_log");
    const Eigen::MatrixXd s = base.sqrt();
    const Eigen::MatrixXd w = base.inv_sqrt();
    Eigen::MatrixXd whitened = w * target.matrix() * w;
    whitened = 0.5 * (whitened + whitened.transpose());
    const Eigen::MatrixXd lw =
        sym_eig_apply(whitened, [](double x) { return std::log(x); }, true, "spd_log");
    return TangentSym(base, s * lw * s);
}

double tangent_norm(const TangentSym& tangent) {
    const Eigen::MatrixXd w = tangent.base.inv_sqrt();
    return (w * tangent.value * w).norm();
}

SpdMatrix frechet_mean(std::span<const SpdMatrix> points, const FrechetOptions& opts) {
    std::vector<double> w(points.size(), 1.0);
    return frechet_mean(points, w, opts);
}

SpdMatrix frechet_mean(std::span<const SpdMatrix> points, std::span<const double> weights,
                       const FrechetOptions& opts) {
    if (points.empty()) throw DimensionError("frechet_mean: empty point set");
    if (weights.size() != points.size()) {
        throw DimensionError("frechet_mean: weights/points size mismatch");
    }
    const int d = points[0].dim();
    double wsum = 0.0;
    for (std::size_t n = 0; n < points.size(); ++n) {
        if (points[n].dim() != d) throw DimensionError("frechet_mean: mixed dimensions");
        wsum += weights[n];
    }
    if (wsum <= 0.0) throw Error("frechet_mean: nonpositive total weight");

    const auto tangent_mean_at = [&](const SpdMatrix& at) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t n = 0; n < points.size(); ++n) {
            if (weights[n] == 0.0) continue;
            t += weights[n] * spd_log(at, points[n]).value;
        }
        t /= wsum;
        return t;
    };

    SpdMatrix mean = points[0];
    SpdMatrix anchor = mean;
    Eigen::MatrixXd anchor_tangent;
    double anchor_residual = std::numeric_limits<double>::infinity();
    double step = 1.0;
    double residual = 0.0;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        const Eigen::MatrixXd tangent = tangent_mean_at(mean);
        residual = tangent.norm();
        if (residual < opts.tol) return mean;
        if (residual > anchor_residual) {
            // overshoot in a high-curvature region: retreat to the last good
            // iterate and damp the step; the fixed point is unchanged
            step *= 0.5;
            mean = spd_exp(anchor, Eigen::MatrixXd(step * anchor_tangent));
            continue;
        }
        anchor = mean;
        anchor_tangent = tangent;
        anchor_residual = residual;
        mean = spd_exp(mean, Eigen::MatrixXd(step * tangent));
        step = std::min(1.0, step * 2.0);
    }
    std::ostringstream os;
    os << "frechet_mean: no convergence after " << opts.max_iter
       << " iterations, residual = " << residual << ", last iterate =\n"
       << mean.matrix();
    throw ConvergenceError(os.str(), residual, opts.max_iter);
}

SpdCovariance spd_covariance(std::span<const SpdMatrix> points, const SpdMatrix& mean) {
    if (points.size() < 2) throw DimensionError("spd_covariance: needs at least 2 points");
    const int d = mean.dim();
    SpdCovariance cov(d, mean);
    for (const SpdMatrix& p : points) {
        check_same_dim(p, mean, "spd_covariance");
        const Eigen::MatrixXd log = spd_log(mean, p).value;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    for (int l = 0; l < d; ++l) cov.at(i, j, k, l) += log(i, j) * log(k, l);
    }
    const double scale = 1.0 / (static_cast<double>(points.size()) - 1.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) cov.at(i, j, k, l) *= scale;
    return cov;
}

SpdMatrix geodesic(const SpdMatrix& a, const SpdMatrix& b, double t) {
    check_same_dim(a, b, "geodesic");
    if (t < 0.0 || t > 1.0) {
        std::ostringstream os;
        os << "geodesic: t = " << t << " outside [0, 1]";
        throw Error(os.str());
    }
    return spd_exp(a, Eigen::MatrixXd(t * spd_log(a, b).value));
}

}  // namespace manipulant
