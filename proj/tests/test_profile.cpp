#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "manipulant/profile.hpp"
#include "test_support.hpp"

using namespace manipulant;
using testsup::random_spd;

TEST_CASE("build_profile with identical samples per timestep") {
    std::mt19937_64 rng(51);
    std::vector<std::vector<SpdMatrix>> samples;
    std::vector<SpdMatrix> truth;
    for (int t = 0; t < 5; ++t) {
        const SpdMatrix m = random_spd(rng, 3);
        truth.push_back(m);
        samples.push_back({m, m, m});
    }
    const ManipulabilityProfile profile = build_profile(samples);
    REQUIRE(profile.timesteps.size() == 5);
    for (int t = 0; t < 5; ++t) {
        const ProfileTimestep& ts = profile.timesteps[t];
        CHECK((ts.mean.matrix() - truth[t].matrix()).norm() < 1e-9);
        CHECK(ts.covariance.matricized().cwiseAbs().maxCoeff() < 1e-16);
        CHECK(ts.per_axis_std.cwiseAbs().maxCoeff() < 1e-8);
        CHECK(ts.n_samples == 3);
        CHECK(ts.u == doctest::Approx(t / 4.0));
    }
}

TEST_CASE("build_profile commuting diagonal mean is the geometric mean") {
    std::vector<std::vector<SpdMatrix>> samples{{
        SpdMatrix::from_diagonal(Eigen::Vector2d(1.0, 2.0)),
        SpdMatrix::from_diagonal(Eigen::Vector2d(4.0, 8.0)),
    }};
    const ManipulabilityProfile profile = build_profile(samples);
    const SpdMatrix& mean = profile.timesteps[0].mean;
    CHECK(mean(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(mean(1, 1) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("build_profile std consistency and mean hull") {
    std::mt19937_64 rng(52);
    std::vector<std::vector<SpdMatrix>> samples(4);
    for (auto& ts : samples) {
        for (int i = 0; i < 6; ++i) ts.push_back(random_spd(rng, 2));
    }
    const ManipulabilityProfile profile = build_profile(samples);
    for (std::size_t t = 0; t < samples.size(); ++t) {
        const ProfileTimestep& ts = profile.timesteps[t];
        for (int i = 0; i < 2; ++i) {
            CHECK(ts.per_axis_std[i] ==
                  doctest::Approx(std::sqrt(ts.covariance(i, i, i, i))).epsilon(1e-14));
        }
        double max_to_mean = 0.0, diameter = 0.0;
        for (std::size_t i = 0; i < samples[t].size(); ++i) {
            max_to_mean = std::max(max_to_mean, spd_distance(ts.mean, samples[t][i]));
            for (std::size_t j = i + 1; j < samples[t].size(); ++j)
                diameter = std::max(diameter, spd_distance(samples[t][i], samples[t][j]));
        }
        CHECK(max_to_mean <= diameter + 1e-9);
    }
}

TEST_CASE("build_profile rejects undersampled timesteps") {
    std::vector<std::vector<SpdMatrix>> samples{{SpdMatrix::identity(2)}};
    CHECK_THROWS_AS(build_profile(samples), Error);
}

namespace {

// two well-separated diagonal clusters in time and shape
std::vector<GmmDatum> two_cluster_data(int per_cluster, unsigned long long seed,
                                       SpdMatrix* center_a = nullptr,
                                       SpdMatrix* center_b = nullptr) {
    std::mt19937_64 rng(seed);
    const SpdMatrix ca = SpdMatrix::from_diagonal(Eigen::Vector2d(1.0, 0.25));
    const SpdMatrix cb = SpdMatrix::from_diagonal(Eigen::Vector2d(6.0, 3.0));
    if (center_a) *center_a = ca;
    if (center_b) *center_b = cb;
    std::vector<GmmDatum> data;
    for (int i = 0; i < per_cluster; ++i) {
        const Eigen::MatrixXd na = 0.03 * testsup::random_symmetric(rng, 2);
        const Eigen::MatrixXd nb = 0.03 * testsup::random_symmetric(rng, 2);
        data.push_back({testsup::uniform(rng, 0.05, 0.4), spd_exp(ca, na)});
        data.push_back({testsup::uniform(rng, 0.6, 0.95), spd_exp(cb, nb)});
    }
    return data;
}

}  // namespace

TEST_CASE("fit_gmm with one component recovers the global weighted mean") {
    std::mt19937_64 rng(53);
    std::vector<GmmDatum> data;
    std::vector<SpdMatrix> pts;
    for (int i = 0; i < 12; ++i) {
        const SpdMatrix m = random_spd(rng, 2);
        pts.push_back(m);
        data.push_back({testsup::uniform(rng, 0, 1), m});
    }
    const GmmFitResult fit = fit_gmm(data, 1);
    const SpdMatrix mean = frechet_mean(pts);
    CHECK(spd_distance(fit.model.components[0].center, mean) < 1e-6);
    CHECK(fit.model.components[0].weight == doctest::Approx(1.0));
}

TEST_CASE("fit_gmm recovers two separated clusters") {
    SpdMatrix ca = SpdMatrix::identity(2), cb = SpdMatrix::identity(2);
    const std::vector<GmmDatum> data = two_cluster_data(30, 54, &ca, &cb);
    const GmmFitResult fit = fit_gmm(data, 2);
    REQUIRE(fit.model.size() == 2);

    // match components to generators by time mean
    const int ia = fit.model.components[0].time_mean < fit.model.components[1].time_mean ? 0 : 1;
    CHECK(spd_distance(fit.model.components[ia].center, ca) < 0.05);
    CHECK(spd_distance(fit.model.components[1 - ia].center, cb) < 0.05);
    CHECK(fit.model.components[ia].weight == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("fit_gmm log-likelihood is non-decreasing") {
    const std::vector<GmmDatum> data = two_cluster_data(25, 55);
    for (int k : {1, 2, 3}) {
        const GmmFitResult fit = fit_gmm(data, k);
        REQUIRE(fit.log_likelihood.size() >= 2);
        for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
            CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
        }
    }
}

TEST_CASE("fit_gmm is invariant to data permutation") {
    const std::vector<GmmDatum> data = two_cluster_data(20, 56);
    std::vector<GmmDatum> shuffled(data.rbegin(), data.rend());
    std::rotate(shuffled.begin(), shuffled.begin() + 7, shuffled.end());

    const GmmFitResult a = fit_gmm(data, 2);
    const GmmFitResult b = fit_gmm(shuffled, 2);
    for (int c = 0; c < 2; ++c) {
        CHECK(a.model.components[c].weight ==
              doctest::Approx(b.model.components[c].weight).epsilon(1e-12));
        CHECK(a.model.components[c].time_mean ==
              doctest::Approx(b.model.components[c].time_mean).epsilon(1e-12));
        CHECK((a.model.components[c].center.matrix() - b.model.components[c].center.matrix())
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
    }
}

TEST_CASE("fit_gmm validates the datapoint budget") {
    std::mt19937_64 rng(57);
    std::vector<GmmDatum> data;
    for (int i = 0; i < 7; ++i) data.push_back({0.1 * i, random_spd(rng, 2)});
    CHECK_THROWS_AS(fit_gmm(data, 2), Error);  // needs 2*(1+3) = 8
}

TEST_CASE("retrieve_profile at a dominant component returns its center") {
    SpdMatrix ca = SpdMatrix::identity(2), cb = SpdMatrix::identity(2);
    const std::vector<GmmDatum> data = two_cluster_data(30, 58, &ca, &cb);
    const GmmFitResult fit = fit_gmm(data, 2);
    const int ia = fit.model.components[0].time_mean < fit.model.components[1].time_mean ? 0 : 1;

    const SpdMatrix at_a = retrieve_profile(fit.model, fit.model.components[ia].time_mean);
    CHECK(spd_distance(at_a, fit.model.components[ia].center) < 1e-3);
}

TEST_CASE("retrieve_profile with one component is constant") {
    std::mt19937_64 rng(59);
    std::vector<GmmDatum> data;
    for (int i = 0; i < 10; ++i) data.push_back({0.1 * i, random_spd(rng, 2)});
    const GmmFitResult fit = fit_gmm(data, 1);
    const SpdMatrix a = retrieve_profile(fit.model, 0.0);
    const SpdMatrix b = retrieve_profile(fit.model, 0.77);
    CHECK(spd_distance(a, b) < 1e-10);
    CHECK(spd_distance(a, fit.model.components[0].center) < 1e-10);
}

TEST_CASE("retrieve_profile varies continuously and stays SPD") {
    const std::vector<GmmDatum> data = two_cluster_data(25, 60);
    const GmmFitResult fit = fit_gmm(data, 2);

    for (int i = 0; i <= 1000; ++i) {
        const double u = static_cast<double>(i) / 1000.0;
        const SpdMatrix cur = retrieve_profile(fit.model, u);  // construction checks SPD
        CHECK(spd_distance(cur, retrieve_profile(fit.model, u + 1e-4)) < 1e-2);
    }
}

TEST_CASE("SpdGmm validation rejects bad weights") {
    SpdGmm gmm;
    SpdGmmComponent c{.weight = 0.6,
                      .time_mean = 0.5,
                      .time_var = 0.1,
                      .center = SpdMatrix::identity(2),
                      .tangent_covariance = Eigen::MatrixXd::Identity(3, 3)};
    gmm.components.push_back(c);
    CHECK_THROWS_AS(gmm.validate(), Error);  // weights sum to 0.6
    gmm.components.push_back(c);
    gmm.components[1].weight = 0.4;
    CHECK_NOTHROW(gmm.validate());
}
