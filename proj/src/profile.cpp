#include "manipulant/profile.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "manipulant/manipulability.hpp"

namespace manipulant {

void ManipulabilityProfile::validate() const {
    if (timesteps.empty()) throw Error("ManipulabilityProfile: empty");
    const int n = timesteps.front().n_samples;
    for (std::size_t t = 0; t < timesteps.size(); ++t) {
        const ProfileTimestep& ts = timesteps[t];
        if (ts.n_samples != n) {
            throw Error("ManipulabilityProfile: n_samples varies across timesteps");
        }
        const Eigen::VectorXd expected = ts.covariance.per_axis_std();
        if ((ts.per_axis_std - expected).cwiseAbs().maxCoeff() > 0.0) {
            std::ostringstream os;
            os << "ManipulabilityProfile: per-axis std inconsistent at timestep " << t;
            throw Error(os.str());
        }
    }
}

ManipulabilityProfile build_profile(const std::vector<std::vector<SpdMatrix>>& samples,
                                    const std::vector<double>& u,
                                    const FrechetOptions& mean_opts) {
    if (samples.empty()) throw Error("build_profile: no timesteps");
    if (!u.empty() && u.size() != samples.size()) {
        throw DimensionError("build_profile: u size does not match timestep count");
    }
    ManipulabilityProfile profile;
    profile.timesteps.reserve(samples.size());
    const std::size_t n_t = samples.size();
    for (std::size_t t = 0; t < n_t; ++t) {
        const auto& pts = samples[t];
        if (pts.size() < 2) {
            std::ostringstream os;
            os << "build_profile: timestep " << t << " has " << pts.size()
               << " samples, needs >= 2";
            throw Error(os.str());
        }
        SpdMatrix mean = [&] {
            try {
                return frechet_mean(pts, mean_opts);
            } catch (const ConvergenceError& e) {
                std::ostringstream os;
                os << "build_profile: mean did not converge at timestep " << t << ": "
                   << e.what();
                throw ConvergenceError(os.str(), e.residual, e.iterations);
            }
        }();
        ProfileTimestep ts{.u = u.empty() ? (n_t == 1 ? 0.0 : static_cast<double>(t) / (n_t - 1))
                                          : u[t],
                           .mean = mean,
                           .covariance = spd_covariance(pts, mean),
                           .per_axis_std = Eigen::VectorXd(),
                           .det = 0.0,
                           .cond = 0.0,
                           .n_samples = static_cast<int>(pts.size())};
        ts.per_axis_std = ts.covariance.per_axis_std();
        const ClassicalIndices idx = classical_indices(mean);
        ts.det = idx.determinant;
        ts.cond = idx.condition_number;
        profile.timesteps.push_back(std::move(ts));
    }
    profile.validate();
    return profile;
}

void SpdGmm::validate() const {
    if (components.empty()) throw Error("SpdGmm: no components");
    double wsum = 0.0;
    for (const SpdGmmComponent& c : components) {
        if (!(c.weight > 0.0)) throw Error("SpdGmm: nonpositive component weight");
        if (!(c.time_var > 0.0)) throw Error("SpdGmm: nonpositive time variance");
        wsum += c.weight;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.tangent_covariance,
                                                           Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-12) {
            throw Error("SpdGmm: tangent covariance not PSD");
        }
    }
    if (std::abs(wsum - 1.0) > 1e-10) throw Error("SpdGmm: weights do not sum to 1");
}

namespace {

double log_normal_1d(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (d * d / var + std::log(2.0 * M_PI * var));
}

struct TangentGaussian {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_norm;  // -0.5 log det(2 pi Sigma)

    explicit TangentGaussian(const Eigen::MatrixXd& cov) : llt(cov) {
        if (llt.info() != Eigen::Success) {
            throw Error("fit_gmm: tangent covariance not positive definite");
        }
        double log_det = 0.0;
        const auto& l = llt.matrixLLT();
        for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
        log_norm = -0.5 * (log_det + l.rows() * std::log(2.0 * M_PI));
    }
    double log_density(const Eigen::VectorXd& v) const {
        return log_norm - 0.5 * llt.matrixL().solve(v).squaredNorm();
    }
};

double logsumexp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

struct EmState {
    std::vector<SpdGmmComponent> comps;
    // cached per-component tangent coordinates of all datapoints
};

// Log joint densities, N x K.
Eigen::MatrixXd log_joint(const std::vector<GmmDatum>& data,
                          const std::vector<SpdGmmComponent>& comps) {
    const int n = static_cast<int>(data.size());
    const int k = static_cast<int>(comps.size());
    Eigen::MatrixXd lj(n, k);
    for (int c = 0; c < k; ++c) {
        const TangentGaussian tg(comps[c].tangent_covariance);
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd v = sym_vec(spd_log(comps[c].center, data[i].value).value);
            lj(i, c) = std::log(comps[c].weight) +
                       log_normal_1d(data[i].u, comps[c].time_mean, comps[c].time_var) +
                       tg.log_density(v);
        }
    }
    return lj;
}

double total_log_likelihood(const Eigen::MatrixXd& lj) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < lj.rows(); ++i) ll += logsumexp(lj.row(i));
    return ll;
}

Eigen::MatrixXd tangent_covariance_at(const std::vector<GmmDatum>& data,
                                      const Eigen::VectorXd& resp, const SpdMatrix& center,
                                      double reg) {
    const int v = sym_vec_dim(center.dim());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(v, v);
    double wsum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double w = resp[static_cast<Eigen::Index>(i)];
        if (w <= 0.0) continue;
        const Eigen::VectorXd t = sym_vec(spd_log(center, data[i].value).value);
        cov += w * t * t.transpose();
        wsum += w;
    }
    cov /= std::max(wsum, 1e-300);
    cov += reg * Eigen::MatrixXd::Identity(v, v);
    return 0.5 * (cov + cov.transpose());
}

}  // namespace

GmmFitResult fit_gmm(const std::vector<GmmDatum>& data, int n_components,
                     const GmmFitOptions& opts) {
    if (n_components < 1) throw Error("fit_gmm: need at least one component");
    if (data.empty()) throw Error("fit_gmm: empty dataset");
    const int d = data[0].value.dim();
    for (const GmmDatum& x : data) {
        if (x.value.dim() != d) throw DimensionError("fit_gmm: mixed matrix dimensions");
    }
    const int n = static_cast<int>(data.size());
    const int min_points = n_components * (1 + sym_vec_dim(d));
    if (n < min_points) {
        std::ostringstream os;
        os << "fit_gmm: " << n << " datapoints < required " << min_points << " for K="
           << n_components;
        throw Error(os.str());
    }

    // deterministic init: stable order by (u, coordinates), contiguous time bins
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (data[a].u != data[b].u) return data[a].u < data[b].u;
        const Eigen::VectorXd va = sym_vec(data[a].value.matrix());
        const Eigen::VectorXd vb = sym_vec(data[b].value.matrix());
        for (Eigen::Index i = 0; i < va.size(); ++i) {
            if (va[i] != vb[i]) return va[i] < vb[i];
        }
        return false;
    });

    std::vector<SpdGmmComponent> comps;
    FrechetOptions center_opts{.tol = 1e-9, .max_iter = 100};
    for (int c = 0; c < n_components; ++c) {
        const int lo = c * n / n_components;
        const int hi = (c + 1) * n / n_components;
        std::vector<SpdMatrix> bin;
        double tsum = 0.0;
        for (int i = lo; i < hi; ++i) {
            bin.push_back(data[order[i]].value);
            tsum += data[order[i]].u;
        }
        SpdGmmComponent comp{.weight = static_cast<double>(hi - lo) / n,
                             .time_mean = tsum / (hi - lo),
                             .time_var = 0.0,
                             .center = frechet_mean(bin, center_opts),
                             .tangent_covariance = Eigen::MatrixXd()};
        double tvar = 0.0;
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(hi - lo);
        for (int i = lo; i < hi; ++i) {
            const double du = data[order[i]].u - comp.time_mean;
            tvar += du * du;
        }
        comp.time_var = std::max(tvar / (hi - lo), opts.time_var_floor);
        std::vector<GmmDatum> bin_data;
        for (int i = lo; i < hi; ++i) bin_data.push_back(data[order[i]]);
        comp.tangent_covariance =
            tangent_covariance_at(bin_data, ones, comp.center, opts.cov_reg);
        comps.push_back(std::move(comp));
    }

    GmmFitResult result;
    Eigen::MatrixXd lj = log_joint(data, comps);
    double ll = total_log_likelihood(lj);
    result.log_likelihood.push_back(ll);

    std::vector<int> reseeds(n_components, 0);
    for (int iter = 0; iter < opts.max_em_iter; ++iter) {
        // E-step
        Eigen::MatrixXd resp(n, n_components);
        for (int i = 0; i < n; ++i) {
            const double norm = logsumexp(lj.row(i));
            for (int c = 0; c < n_components; ++c) resp(i, c) = std::exp(lj(i, c) - norm);
        }

        // empty-component rescue: reseed once from the worst-modeled point
        bool reseeded = false;
        for (int c = 0; c < n_components; ++c) {
            const double nk = resp.col(c).sum();
            if (nk / n >= 1e-6) continue;
            if (reseeds[c]++ > 0) {
                throw Error("fit_gmm: component emptied twice, aborting");
            }
            Eigen::Index worst = 0;
            double worst_ll = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                const double li = logsumexp(lj.row(i));
                if (li < worst_ll) {
                    worst_ll = li;
                    worst = i;
                }
            }
            comps[c].center = data[worst].value;
            comps[c].time_mean = data[worst].u;
            comps[c].time_var = 0.05;
            comps[c].weight = 1.0 / n;
            const int v = sym_vec_dim(d);
            comps[c].tangent_covariance = 0.1 * Eigen::MatrixXd::Identity(v, v);
            reseeded = true;
        }
        if (reseeded) {
            lj = log_joint(data, comps);
            continue;  // fresh E-step next iteration; the logged ll stays monotone
        }

        // M-step: closed-form weight/time updates, weighted Frechet centers,
        // covariances at the new centers
        std::vector<SpdGmmComponent> next = comps;
        for (int c = 0; c < n_components; ++c) {
            const Eigen::VectorXd r = resp.col(c);
            const double nk = r.sum();
            next[c].weight = nk / n;
            double tm = 0.0;
            for (int i = 0; i < n; ++i) tm += r[i] * data[i].u;
            tm /= nk;
            double tv = 0.0;
            for (int i = 0; i < n; ++i) tv += r[i] * (data[i].u - tm) * (data[i].u - tm);
            next[c].time_mean = tm;
            next[c].time_var = std::max(tv / nk, opts.time_var_floor);

            std::vector<SpdMatrix> pts;
            std::vector<double> w;
            pts.reserve(n);
            w.reserve(n);
            for (int i = 0; i < n; ++i) {
                pts.push_back(data[i].value);
                w.push_back(r[i]);
            }
            next[c].center = frechet_mean(pts, w, center_opts);
        }

        // center backtracking keeps the likelihood non-decreasing: t = 0 is the
        // exact coordinate M-step with centers frozen
        double candidate_ll = 0.0;
        Eigen::MatrixXd candidate_lj;
        bool accepted = false;
        for (double step : {1.0, 0.5, 0.25, 0.0}) {
            std::vector<SpdGmmComponent> trial = next;
            for (int c = 0; c < n_components; ++c) {
                trial[c].center = step == 1.0
                                      ? next[c].center
                                      : geodesic(comps[c].center, next[c].center, step);
                trial[c].tangent_covariance =
                    tangent_covariance_at(data, resp.col(c), trial[c].center, opts.cov_reg);
            }
            candidate_lj = log_joint(data, trial);
            candidate_ll = total_log_likelihood(candidate_lj);
            if (candidate_ll >= ll - 1e-9) {
                comps = std::move(trial);
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // numerically stuck; keep the previous model

        lj = candidate_lj;
        const double gain = candidate_ll - ll;
        ll = candidate_ll;
        result.log_likelihood.push_back(ll);
        if (gain < opts.tol * std::max(1.0, std::abs(ll))) break;
    }

    result.model.components = std::move(comps);
    result.model.validate();
    return result;
}

SpdMatrix retrieve_profile(const SpdGmm& model, double u) {
    model.validate();
    const int k = model.size();
    Eigen::VectorXd log_h(k);
    for (int c = 0; c < k; ++c) {
        const SpdGmmComponent& comp = model.components[c];
        log_h[c] = std::log(comp.weight) + log_normal_1d(u, comp.time_mean, comp.time_var);
    }
    const double norm = logsumexp(log_h);
    Eigen::VectorXd h = (log_h.array() - norm).exp();

    Eigen::Index best;
    h.maxCoeff(&best);
    SpdMatrix est = model.components[best].center;
    const int d = est.dim();
    FrechetOptions opts{.tol = 1e-12, .max_iter = 100};
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        Eigen::MatrixXd tangent = Eigen::MatrixXd::Zero(d, d);
        for (int c = 0; c < k; ++c) {
            if (h[c] < 1e-300) continue;
            tangent += h[c] * spd_log(est, model.components[c].center).value;
        }
        if (tangent.norm() < opts.tol) break;
        est = spd_exp(est, tangent);
    }
    return est;
}

}  // namespace manipulant
