#ifndef WIVJM_PSIS_HPP
#define WIVJM_PSIS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <wivjm/errors.hpp>
#include <wivjm/mathutil.hpp>

// Pareto-smoothed importance sampling and survival-based LOO.  Importance
// ratios are 1/likelihood draws; the largest ratios are replaced by order
// statistics of a generalized Pareto tail fitted by profile posterior mean.

namespace wivjm {

struct GpdFit {
    double khat = 0.0;   // tail shape, regularized toward 1/2
    double sigma = 0.0;  // tail scale
};

// Fit exceedances (x >= 0, at least 5 values, upper end strictly positive).
// Profile grid over the reparametrized rate b with quartile-anchored spacing;
// the returned shape is shrunk as (n*k + 5)/(n + 10).
inline GpdFit gpd_fit(Eigen::VectorXd x) {
    const int n = int(x.size());
    if (n < 5) throw std::invalid_argument("gpd_fit: need at least 5 exceedances");
    std::sort(x.data(), x.data() + n);
    if (!(x[0] >= 0.0) || !std::isfinite(x[n - 1])) throw std::invalid_argument("gpd_fit: exceedances must be finite and nonnegative");
    const double xmax = x[n - 1];
    const double xstar = x[int(std::floor(n / 4.0 + 0.5)) - 1];  // first-quartile order statistic
    if (!(xmax > 0.0) || !(xstar > 0.0)) throw std::invalid_argument("gpd_fit: degenerate tail");

    const int m = 30 + int(std::floor(std::sqrt(double(n))));
    Eigen::VectorXd bs(m), ls(m);
    auto k_of_b = [&](double b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += std::log1p(-b * x[i]);
        return acc / n;
    };
    for (int j = 1; j <= m; ++j) {
        double b = 1.0 / xmax + (1.0 - std::sqrt(m / (j - 0.5))) / (3.0 * xstar);
        double k = k_of_b(b);
        double l = (b == 0.0 || k == 0.0) ? -kInf : n * (std::log(-b / k) - k - 1.0);
        bs[j - 1] = b;
        ls[j - 1] = std::isfinite(l) ? l : -kInf;
    }
    double lse = log_sum_exp(ls);
    double bhat = 0.0;
    for (int j = 0; j < m; ++j) bhat += std::exp(ls[j] - lse) * bs[j];

    GpdFit fit;
    double k = k_of_b(bhat);
    fit.sigma = bhat != 0.0 ? -k / bhat : x.mean();
    fit.khat = (n * k + 5.0) / (n + 10.0);
    if (!std::isfinite(fit.khat) || !std::isfinite(fit.sigma))
        throw numeric_error("gpd_fit: fit did not produce finite parameters");
    return fit;
}

inline double gpd_quantile(double p, double k, double sigma) {
    if (!(p >= 0.0) || !(p < 1.0)) throw std::invalid_argument("gpd_quantile: p must be in [0,1)");
    if (std::fabs(k) < 1e-12) return -sigma * std::log1p(-p);
    return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

struct PsisWeights {
    Eigen::VectorXd log_weights;  // centered at max 0, tail-smoothed
    double khat = std::numeric_limits<double>::quiet_NaN();
};

// Smooth one observation's log importance ratios.  The tail is the largest
// ceil(min(0.2*S, 3*sqrt(S))) ratios; tails too short or without spread are
// left unsmoothed with khat = NaN (not assessed).  Smoothed weights never
// exceed the raw maximum.
inline PsisWeights psis_smooth(Eigen::VectorXd log_ratios) {
    const int s = int(log_ratios.size());
    if (s < 1) throw std::invalid_argument("psis_smooth: empty ratio vector");
    if (!log_ratios.allFinite()) throw std::invalid_argument("psis_smooth: log ratios must be finite");

    PsisWeights out;
    log_ratios.array() -= log_ratios.maxCoeff();
    const int tail = int(std::ceil(std::min(0.2 * s, 3.0 * std::sqrt(double(s)))));
    if (tail < 5) {
        out.log_weights = std::move(log_ratios);
        return out;
    }

    std::vector<int> order(static_cast<std::size_t>(s));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return log_ratios[a] < log_ratios[b]; });

    const double cutoff = std::exp(log_ratios[order[std::size_t(s - tail - 1)]]);
    Eigen::VectorXd exceed(tail);
    for (int z = 0; z < tail; ++z) exceed[z] = std::exp(log_ratios[order[std::size_t(s - tail + z)]]) - cutoff;
    const double xstar = exceed[int(std::floor(tail / 4.0 + 0.5)) - 1];
    if (!(exceed[tail - 1] > 0.0) || !(xstar > 0.0)) {
        out.log_weights = std::move(log_ratios);  // flat tail: nothing to smooth
        return out;
    }

    GpdFit fit = gpd_fit(exceed);
    for (int z = 0; z < tail; ++z) {
        double q = gpd_quantile((z + 0.5) / tail, fit.khat, fit.sigma) + cutoff;
        log_ratios[order[std::size_t(s - tail + z)]] = std::min(std::log(q), 0.0);
    }
    out.log_weights = std::move(log_ratios);
    out.khat = fit.khat;
    return out;
}

struct LooResult {
    Eigen::VectorXd elpd_i;  // pointwise contributions
    Eigen::VectorXd khat;    // per-observation tail shape (NaN when not assessed)
    double elpd = 0.0, se = 0.0;
    double looic = 0.0, looic_se = 0.0;
    int n_warn = 0;  // khat > 0.7
    int n_bad = 0;   // khat >= 1
    bool reliable() const { return n_bad == 0; }
};

// PSIS-LOO from an S x n pointwise log-likelihood matrix (draws by subjects).
// Ratios are exp(-loglik); elpd_i = lse(lw + ll) - lse(lw).
inline LooResult survival_loo(const Eigen::MatrixXd& loglik) {
    const int s = int(loglik.rows()), n = int(loglik.cols());
    if (s < 1 || n < 1) throw std::invalid_argument("survival_loo: empty log-likelihood matrix");
    if (!loglik.allFinite()) throw std::invalid_argument("survival_loo: log-likelihood entries must be finite");

    LooResult res;
    res.elpd_i.resize(n);
    res.khat.resize(n);
    for (int i = 0; i < n; ++i) {
        PsisWeights w = psis_smooth(-loglik.col(i));
        res.elpd_i[i] = log_sum_exp((w.log_weights + loglik.col(i)).eval()) - log_sum_exp(w.log_weights);
        res.khat[i] = w.khat;
        if (w.khat > 0.7) ++res.n_warn;
        if (w.khat >= 1.0) ++res.n_bad;
    }
    res.elpd = res.elpd_i.sum();
    if (n > 1) {
        double mean = res.elpd / n;
        double var = (res.elpd_i.array() - mean).square().sum() / (n - 1);
        res.se = std::sqrt(double(n) * var);
    }
    res.looic = -2.0 * res.elpd;
    res.looic_se = 2.0 * res.se;
    return res;
}

}  // namespace wivjm

#endif
