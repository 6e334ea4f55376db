#ifndef WIVJM_FPCA_HPP
#define WIVJM_FPCA_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "wivjm/bspline.hpp"
#include "wivjm/curvature.hpp"
#include "wivjm/dataset.hpp"
#include "wivjm/errors.hpp"
#include "wivjm/mathutil.hpp"
#include "wivjm/penalty.hpp"

namespace wivjm {

struct CovarianceSurface {
    Eigen::VectorXd grid;
    Eigen::MatrixXd values;  // grid x grid, symmetric
    double smoothing_penalty = 0.0;
};

struct EigenSystem {
    Eigen::VectorXd grid;
    Eigen::MatrixXd psi;      // grid x L, unit weighted norm columns
    Eigen::VectorXd lambda;   // L, positive nonincreasing
    Eigen::VectorXd weights;  // trapezoid weights on grid
    double pve_achieved = 0.0;

    int L() const { return int(psi.cols()); }
};

namespace detail {

// Generalized cross-validation over a multiplicative lambda grid for the
// penalized normal equations (X'X + lambda Q) c = X'y, using accumulated
// cross-products only (design rows are never materialized).
struct GcvFit {
    Eigen::VectorXd coef;
    double lambda = 0.0;
    double edf = 0.0;
};

inline GcvFit gcv_penalized_solve(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& Xty, double yty, double n_rows,
                                  const Eigen::MatrixXd& Q) {
    const int p = int(XtX.rows());
    GcvFit best;
    double best_score = kInf;
    for (double loglam = -6.0; loglam <= 10.0 + 1e-9; loglam += 0.125) {
        double lam = std::pow(10.0, loglam);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX + lam * Q);
        if (ldlt.info() != Eigen::Success) continue;
        Eigen::VectorXd c = ldlt.solve(Xty);
        double rss = yty - 2.0 * c.dot(Xty) + c.dot(XtX * c);
        double edf = ldlt.solve(XtX).trace();
        double denom = n_rows - edf;
        if (denom < 1.0) continue;
        double score = n_rows * std::max(rss, 0.0) / (denom * denom);
        if (score < best_score) {
            best_score = score;
            best = {c, lam, edf};
        }
    }
    if (!std::isfinite(best_score)) throw numeric_error("gcv: no usable smoothing parameter");
    return best;
}

}  // namespace detail

// Penalized-spline point estimate of the population mean from pooled
// measurements; smoothing parameter by GCV. Centering step only — the joint
// model re-estimates the mean with its own prior.
inline Eigen::VectorXd estimate_mean(const Dataset& ds, const KnotConfig& cfg) {
    if (ds.n() < 2) throw data_error("estimate_mean: need at least 2 subjects");
    if (ds.n_obs() < 10) throw data_error("estimate_mean: need at least 10 observations");
    cfg.validate();
    const int p = cfg.size();
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd Xty = Eigen::VectorXd::Zero(p);
    double yty = 0.0;
    for (int k = 0; k < ds.n_obs(); ++k) {
        BasisSpan s = eval_basis_local(cfg, ds.obs_time[k], 0);
        double y = ds.obs_value[k];
        yty += y * y;
        for (int a = 0; a <= cfg.degree; ++a) {
            Xty[s.first + a] += s.v[std::size_t(a)] * y;
            for (int b = 0; b <= cfg.degree; ++b)
                XtX(s.first + a, s.first + b) += s.v[std::size_t(a)] * s.v[std::size_t(b)];
        }
    }
    Eigen::MatrixXd Q = PenaltyMatrix::make(2, p, 0.0).mat;
    return detail::gcv_penalized_solve(XtX, Xty, yty, double(ds.n_obs()), Q).coef;
}

// Bivariate penalized-spline smooth of pooled within-subject cross-products
// of centered residuals, diagonal excluded (it carries the measurement-error
// variance). `resid` is row-aligned with the dataset's observation arrays.
inline CovarianceSurface smooth_covariance(const Eigen::VectorXd& resid, const Dataset& ds,
                                           const Eigen::VectorXd& grid, int axis_basis = 13) {
    if (resid.size() != ds.n_obs()) throw data_error("smooth_covariance: residual vector misaligned with dataset");
    if (grid.size() < 4) throw std::invalid_argument("smooth_covariance: grid too small");
    KnotConfig axis = KnotConfig::cubic_uniform(grid[0], grid[grid.size() - 1], axis_basis);
    const int p = axis_basis * axis_basis;
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd Xtz = Eigen::VectorXd::Zero(p);
    double ztz = 0.0;
    long n_pairs = 0;

    const int d1 = axis.degree + 1;
    std::vector<int> idx(std::size_t(d1 * d1));
    std::vector<double> val(std::size_t(d1 * d1));
    // both ordered pairs enter, otherwise the sorted visit times would leave
    // the s > t triangle without data and the fit there would be extrapolation
    for (int i = 0; i < ds.n(); ++i) {
        auto [lo, hi] = ds.obs_span[std::size_t(i)];
        for (int j = lo; j < hi; ++j)
            for (int k = lo; k < hi; ++k) {
                if (j == k) continue;
                BasisSpan bj = eval_basis_local(axis, ds.obs_time[j], 0);
                BasisSpan bk = eval_basis_local(axis, ds.obs_time[k], 0);
                double z = resid[j] * resid[k];
                int m = 0;
                for (int a = 0; a < d1; ++a)
                    for (int b = 0; b < d1; ++b) {
                        idx[std::size_t(m)] = (bj.first + a) * axis_basis + (bk.first + b);
                        val[std::size_t(m)] = bj.v[std::size_t(a)] * bk.v[std::size_t(b)];
                        ++m;
                    }
                for (int a = 0; a < m; ++a) {
                    Xtz[idx[std::size_t(a)]] += val[std::size_t(a)] * z;
                    for (int b = 0; b < m; ++b) XtX(idx[std::size_t(a)], idx[std::size_t(b)]) += val[std::size_t(a)] * val[std::size_t(b)];
                }
                ztz += z * z;
                ++n_pairs;
            }
    }
    if (n_pairs == 0) throw data_error("smooth_covariance: no subject has two or more observations");

    // separable roughness penalty: rough in s plus rough in t
    Eigen::MatrixXd P1 = PenaltyMatrix::make(2, axis_basis, 0.0).mat;
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(axis_basis, axis_basis);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
    for (int a = 0; a < axis_basis; ++a)
        for (int b = 0; b < axis_basis; ++b)
            for (int c = 0; c < axis_basis; ++c)
                for (int d = 0; d < axis_basis; ++d) {
                    // (P1 (x) I) + (I (x) P1)
                    double q = P1(a, c) * I(b, d) + I(a, c) * P1(b, d);
                    if (q != 0.0) Q((a * axis_basis) + b, (c * axis_basis) + d) += q;
                }

    // GCV sample size: unordered pairs are the independent units (each enters
    // the accumulation twice), otherwise the criterion undersmooths
    detail::GcvFit fit = detail::gcv_penalized_solve(XtX, Xtz, ztz, 0.5 * double(n_pairs), Q);
    Eigen::Map<const Eigen::MatrixXd> C(fit.coef.data(), axis_basis, axis_basis);  // C(b,a): column-major map

    CovarianceSurface surf;
    surf.grid = grid;
    surf.smoothing_penalty = fit.lambda;
    Eigen::MatrixXd Bg = design_matrix(axis, grid, 0);
    // coef index (a*axis_basis)+b multiplies B_a(s) B_b(t); the column-major
    // map therefore holds C(b,a), so the surface is Bg C' Bg'.
    Eigen::MatrixXd G = Bg * C.transpose() * Bg.transpose();
    surf.values = 0.5 * (G + G.transpose());
    return surf;
}

inline Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
    const int m = int(grid.size());
    if (m < 2) throw std::invalid_argument("trapezoid_weights: need at least 2 points");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    for (int i = 0; i + 1 < m; ++i) {
        double h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

// Weighted eigenproblem of the smoothed surface: W^{1/2} G W^{1/2}, negative
// eigenvalues dropped, truncation at the requested proportion of variance
// explained, eigenfunctions rescaled to unit weighted norm and sign-fixed so
// their weighted integral is nonnegative.
inline EigenSystem eigendecompose(const CovarianceSurface& surf, double pve) {
    if (!(pve > 0.0 && pve <= 1.0)) throw std::invalid_argument("eigendecompose: pve must lie in (0,1]");
    if (!surf.values.allFinite()) throw numeric_error("eigendecompose: non-finite covariance surface");
    const int m = int(surf.grid.size());
    Eigen::VectorXd w = trapezoid_weights(surf.grid);
    Eigen::VectorXd sw = w.array().sqrt();
    Eigen::MatrixXd K = sw.asDiagonal() * surf.values * sw.asDiagonal();
    K = 0.5 * (K + K.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    if (es.info() != Eigen::Success) throw numeric_error("eigendecompose: eigensolver failed");
    Eigen::VectorXd lam = es.eigenvalues().reverse();
    Eigen::MatrixXd U = es.eigenvectors().rowwise().reverse();

    int n_pos = 0;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        if (lam[i] > 0.0) {
            ++n_pos;
            total += lam[i];
        } else
            break;
    }
    if (n_pos == 0) throw numeric_error("eigendecompose: no positive spectrum");
    int L = n_pos;
    double cum = 0.0;
    for (int i = 0; i < n_pos; ++i) {
        cum += lam[i];
        if (cum >= pve * total) {
            L = i + 1;
            break;
        }
    }

    EigenSystem sys;
    sys.grid = surf.grid;
    sys.weights = w;
    sys.lambda = lam.head(L);
    sys.pve_achieved = sys.lambda.sum() / total;
    sys.psi.resize(m, L);
    for (int l = 0; l < L; ++l) {
        Eigen::VectorXd psi = U.col(l).array() / sw.array();
        if (w.dot(psi) < 0.0) psi = -psi;
        sys.psi.col(l) = psi;
    }
    return sys;
}

// Re-expand the tabulated eigenfunctions as natural cubic interpolants so
// that curvature integrals against spline bases stay exact spline algebra.
inline SplineFamily eigen_family(const EigenSystem& sys) {
    const int m = int(sys.grid.size());
    if (m < 4) throw std::invalid_argument("eigen_family: grid too small");
    std::vector<double> interior(sys.grid.data() + 1, sys.grid.data() + m - 1);
    KnotConfig cfg = KnotConfig::cubic_with_interior(sys.grid[0], sys.grid[m - 1], interior);
    const int p = cfg.size();  // m + 2
    Eigen::MatrixXd A(p, p);
    for (int i = 0; i < m; ++i) A.row(i) = eval_basis(cfg, sys.grid[i], 0).transpose();
    A.row(m) = eval_basis(cfg, sys.grid[0], 2).transpose();
    A.row(m + 1) = eval_basis(cfg, sys.grid[m - 1], 2).transpose();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p, sys.L());
    rhs.topRows(m) = sys.psi;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    SplineFamily fam;
    fam.cfg = cfg;
    fam.coef = lu.solve(rhs);
    if (!fam.coef.allFinite()) throw numeric_error("eigen_family: interpolation system is singular");
    return fam;
}

}  // namespace wivjm

#endif
