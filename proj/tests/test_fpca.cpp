#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "wivjm/fpca.hpp"
#include "wivjm/rng.hpp"

using namespace wivjm;

namespace {

// minimal dataset scaffolding: one survival row per subject, no covariates
Dataset make_dataset(const std::vector<LongitudinalRecord>& lng, int n_subjects, double exit_time) {
    std::vector<SurvivalRecord> surv;
    for (int i = 0; i < n_subjects; ++i) surv.push_back({i, 0.0, exit_time, 0});
    Eigen::MatrixXd no_cov_s(n_subjects, 0), no_cov_l(int(lng.size()), 0);
    return assemble_dataset(surv, no_cov_s, {}, lng, no_cov_l, {});
}

}  // namespace

TEST_CASE("mean estimation recovers a constant within pooled error", "[fpca]") {
    Rng rng(31);
    std::vector<LongitudinalRecord> lng;
    const int n = 30, per = 8;
    const double c = 5.0, sigma = 0.3;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < per; ++j) lng.push_back({i, 10.0 * (j + 0.5) / per, c + rng.normal(0.0, sigma)});
    Dataset ds = make_dataset(lng, n, 10.0);
    KnotConfig cfg = KnotConfig::cubic_uniform(0.0, 10.0, 20);
    Eigen::VectorXd coef = estimate_mean(ds, cfg);
    // pooled standard error, scaled by the worst-case leverage (~4/N at the
    // boundary) of the smoothest fit the penalty can reach, a straight line
    double band = 3.0 * sigma * std::sqrt(4.0 / double(n * per));
    for (double t = 0.0; t <= 10.0; t += 0.1) CHECK(std::abs(eval_spline(cfg, coef, t) - c) <= band);
}

TEST_CASE("mean estimation tracks a sine curve from dense data", "[fpca]") {
    Rng rng(32);
    std::vector<LongitudinalRecord> lng;
    const int n = 200;
    for (int i = 0; i < n; ++i)
        for (double t = 0.0; t <= 10.0 + 1e-9; t += 0.25) lng.push_back({i, t, std::sin(t) + rng.normal(0.0, 0.2)});
    Dataset ds = make_dataset(lng, n, 10.0);
    KnotConfig cfg = KnotConfig::cubic_uniform(0.0, 10.0, 24);
    Eigen::VectorXd coef = estimate_mean(ds, cfg);
    double worst = 0.0;
    for (double t = 0.0; t <= 10.0; t += 0.05) worst = std::max(worst, std::abs(eval_spline(cfg, coef, t) - std::sin(t)));
    CHECK(worst <= 0.05);
}

TEST_CASE("mean estimation enforces its data preconditions", "[fpca]") {
    std::vector<LongitudinalRecord> lng = {{0, 1.0, 1.0}, {0, 2.0, 1.0}, {1, 1.0, 1.0}};
    Dataset tiny = make_dataset(lng, 2, 10.0);
    KnotConfig cfg = KnotConfig::cubic_uniform(0.0, 10.0, 8);
    CHECK_THROWS_AS(estimate_mean(tiny, cfg), data_error);
}

TEST_CASE("covariance smoothing recovers a rank-1 kernel", "[fpca]") {
    Rng rng(33);
    const int n = 500, per = 10;
    const double lam_true = 2.0;
    auto phi = [](double t) { return std::sqrt(2.0) * std::sin(M_PI * t); };  // unit L2 norm on [0,1]
    std::vector<LongitudinalRecord> lng;
    for (int i = 0; i < n; ++i) {
        double score = rng.normal(0.0, std::sqrt(lam_true));
        std::vector<double> ts;
        for (int j = 0; j < per; ++j) ts.push_back(rng.uniform());
        std::sort(ts.begin(), ts.end());
        for (int j = 0; j < per; ++j) lng.push_back({i, ts[std::size_t(j)], score * phi(ts[std::size_t(j)]) + rng.normal(0.0, 0.1)});
    }
    Dataset ds = make_dataset(lng, n, 1.0);
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(51, 0.0, 1.0);
    CovarianceSurface surf = smooth_covariance(ds.obs_value, ds, grid);  // true mean is zero

    CHECK((surf.values - surf.values.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);

    EigenSystem sys = eigendecompose(surf, 0.99);
    CHECK(sys.lambda[0] == Catch::Approx(lam_true).epsilon(0.10));

    // weighted orthonormality of the returned eigenfunctions
    Eigen::MatrixXd gram = sys.psi.transpose() * sys.weights.asDiagonal() * sys.psi;
    CHECK((gram - Eigen::MatrixXd::Identity(sys.L(), sys.L())).lpNorm<Eigen::Infinity>() <= 1e-6);

    // retained components reconstruct the surface up to the discarded
    // spectrum, measured in the weighted norm the truncation is optimal in
    Eigen::MatrixXd recon = sys.psi * sys.lambda.asDiagonal() * sys.psi.transpose();
    Eigen::VectorXd sw = sys.weights.array().sqrt();
    auto wnorm = [&](const Eigen::MatrixXd& M) { return (sw.asDiagonal() * M * sw.asDiagonal()).norm(); };
    double rel = wnorm(recon - surf.values) / wnorm(surf.values);
    CHECK(rel <= 1.0 - 0.99 + 0.01);
}

TEST_CASE("covariance smoothing requires repeated measurements", "[fpca]") {
    std::vector<LongitudinalRecord> lng;
    for (int i = 0; i < 12; ++i) lng.push_back({i, 0.5, 1.0});
    Dataset ds = make_dataset(lng, 12, 1.0);
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(21, 0.0, 1.0);
    CHECK_THROWS_AS(smooth_covariance(ds.obs_value, ds, grid), data_error);
}

TEST_CASE("eigendecomposition recovers a two-component kernel", "[fpca]") {
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(51, 0.0, 1.0);
    const int m = int(grid.size());
    Eigen::VectorXd psi1 = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd psi2(m);
    for (int i = 0; i < m; ++i) psi2[i] = std::sqrt(2.0) * std::cos(M_PI * grid[i]);
    CovarianceSurface surf;
    surf.grid = grid;
    surf.values = 4.0 * psi1 * psi1.transpose() + 1.0 * psi2 * psi2.transpose();

    EigenSystem sys = eigendecompose(surf, 0.999);
    REQUIRE(sys.L() == 2);
    CHECK(sys.lambda[0] == Catch::Approx(4.0).epsilon(0.02));
    CHECK(sys.lambda[1] == Catch::Approx(1.0).epsilon(0.02));
    Eigen::VectorXd w = sys.weights;
    auto cos_sim = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.dot(w.asDiagonal() * b) / std::sqrt(a.dot(w.asDiagonal() * a) * b.dot(w.asDiagonal() * b));
    };
    CHECK(std::abs(cos_sim(sys.psi.col(0), psi1)) >= 0.95);
    CHECK(std::abs(cos_sim(sys.psi.col(1), psi2)) >= 0.95);
    // sign convention: weighted integral nonnegative
    for (int l = 0; l < sys.L(); ++l) CHECK(w.dot(sys.psi.col(l)) >= -1e-12);
}

TEST_CASE("eigendecomposition handles a degenerate spectrum", "[fpca]") {
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(51, 0.0, 1.0);
    const int m = int(grid.size());
    CovarianceSurface surf;
    surf.grid = grid;
    surf.values = 3.0 * Eigen::MatrixXd::Identity(m, m);
    EigenSystem sys = eigendecompose(surf, 0.905);
    // under trapezoid weights the diagonal surface has m-2 equal interior
    // eigenvalues (3h) and two boundary ones (3h/2): pve=0.905 of the total
    // (m-1)·3h needs ceil(0.905·(m-1)) = 46 of the equal leaders
    REQUIRE(sys.L() == 46);
    CHECK(sys.lambda[0] == Catch::Approx(sys.lambda[sys.L() - 1]).epsilon(1e-12));
    CHECK(sys.pve_achieved >= 0.905);

    surf.values(3, 3) = std::nan("");
    CHECK_THROWS_AS(eigendecompose(surf, 0.9), numeric_error);
    CHECK_THROWS_AS(eigendecompose(CovarianceSurface{grid, Eigen::MatrixXd::Identity(m, m), 0.0}, 1.5),
                    std::invalid_argument);
}

TEST_CASE("eigenfunctions re-expand as natural cubic interpolants", "[fpca]") {
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(51, 0.0, 1.0);
    const int m = int(grid.size());
    Eigen::VectorXd psi1 = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd psi2(m);
    for (int i = 0; i < m; ++i) psi2[i] = std::sqrt(2.0) * std::cos(M_PI * grid[i]);
    CovarianceSurface surf;
    surf.grid = grid;
    surf.values = 4.0 * psi1 * psi1.transpose() + psi2 * psi2.transpose();
    EigenSystem sys = eigendecompose(surf, 0.999);
    SplineFamily fam = eigen_family(sys);
    REQUIRE(fam.size() == sys.L());
    for (int l = 0; l < sys.L(); ++l)
        for (int i = 0; i < m; ++i) CHECK(fam.eval(l, grid[i]) == Catch::Approx(sys.psi(i, l)).margin(1e-10));
    // natural boundary conditions: zero curvature at both ends
    for (int l = 0; l < sys.L(); ++l) {
        CHECK(fam.eval(l, 0.0, 2) == Catch::Approx(0.0).margin(1e-8));
        CHECK(fam.eval(l, 1.0, 2) == Catch::Approx(0.0).margin(1e-8));
    }
    // interpolant of cos recovers its curvature away from the nodes
    double t = 0.5 * (grid[20] + grid[21]);
    double truth = -std::sqrt(2.0) * M_PI * M_PI * std::cos(M_PI * t);
    double scale = sys.psi(20, 1) / psi2[20];  // align sign with returned eigenfunction
    CHECK(fam.eval(1, t, 2) == Catch::Approx(truth * scale).epsilon(0.01));
}
