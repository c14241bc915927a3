#pragma once

#include <optional>
#include <vector>

#include "manipulant/spd.hpp"

namespace manipulant {

/// Per-timestep statistics of aligned manipulability ellipsoids.
struct ProfileTimestep {
    double u = 0.0;  // normalized time in [0, 1]
    SpdMatrix mean;
    SpdCovariance covariance;
    Eigen::VectorXd per_axis_std;
    double det = 0.0;
    double cond = 0.0;
    int n_samples = 0;
};

struct ManipulabilityProfile {
    std::vector<ProfileTimestep> timesteps;

    void validate() const;  // std/covariance consistency, constant n_samples
};

/// Statistics per timestep over timestep-major samples: samples[t] holds the
/// ellipsoids of timestep t across trials (>= 2 each, uniform dimension).
/// `u` gives the normalized time per timestep (defaults to equal spacing).
/// Mean non-convergence is reported with the offending timestep index.
ManipulabilityProfile build_profile(const std::vector<std::vector<SpdMatrix>>& samples,
                                    const std::vector<double>& u = {},
                                    const FrechetOptions& mean_opts = {});

/// One component of a time-driven mixture on the SPD manifold: a Gaussian
/// over time paired with a Gaussian over tangent coordinates at the
/// component's SPD center.
struct SpdGmmComponent {
    double weight = 0.0;
    double time_mean = 0.0;
    double time_var = 1.0;
    SpdMatrix center;
    Eigen::MatrixXd tangent_covariance;  // matricized, sym_vec coordinates at center
};

struct SpdGmm {
    std::vector<SpdGmmComponent> components;

    int size() const { return static_cast<int>(components.size()); }
    int dim() const { return components.empty() ? 0 : components[0].center.dim(); }
    void validate() const;  // weights positive and normalized, covariances PSD
};

struct GmmDatum {
    double u = 0.0;
    SpdMatrix value;
};

struct GmmFitOptions {
    int max_em_iter = 100;
    double tol = 1e-7;          // stop when the log-likelihood gain drops below
    double cov_reg = 1e-6;      // ridge added to tangent covariances each M-step
    double time_var_floor = 1e-4;
    unsigned long long seed = 0;  // reserved for future stochastic init
};

struct GmmFitResult {
    SpdGmm model;
    std::vector<double> log_likelihood;  // one entry per accepted EM iteration
};

/// EM fit of the time-driven SPD mixture. Initialization is deterministic
/// (time-ordered binning), so permuting the data only relabels components.
/// The recorded log-likelihood sequence is non-decreasing: center updates
/// that would lower it are backtracked along the geodesic.
GmmFitResult fit_gmm(const std::vector<GmmDatum>& data, int n_components,
                     const GmmFitOptions& opts = {});

/// Time-conditioned retrieval: responsibilities from the time marginals,
/// output the responsibility-weighted Frechet combination of the component
/// centers. Always SPD.
SpdMatrix retrieve_profile(const SpdGmm& model, double u);

}  // namespace manipulant
