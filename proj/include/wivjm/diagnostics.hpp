#ifndef WIVJM_DIAGNOSTICS_HPP
#define WIVJM_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <wivjm/mathutil.hpp>

// Convergence diagnostics over per-chain scalar series: split potential scale
// reduction and rank-normalized bulk effective sample size.

namespace wivjm {

namespace detail {

inline void check_chains(const std::vector<Eigen::VectorXd>& chains, const char* who) {
    if (chains.empty()) throw std::invalid_argument(std::string(who) + ": no chains");
    Eigen::Index n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n) throw std::invalid_argument(std::string(who) + ": ragged chains");
    if (n < 4) throw std::invalid_argument(std::string(who) + ": need at least 4 draws per chain");
}

inline std::vector<Eigen::VectorXd> split_halves(const std::vector<Eigen::VectorXd>& chains) {
    std::vector<Eigen::VectorXd> halves;
    halves.reserve(2 * chains.size());
    for (const auto& c : chains) {
        Eigen::Index half = c.size() / 2;
        halves.push_back(c.head(half));
        halves.push_back(c.tail(half));  // middle draw dropped when odd
    }
    return halves;
}

// Lag-t autocovariance with the 1/n convention, n the series length.
inline double autocov(const Eigen::VectorXd& x, double mean, Eigen::Index t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + t < x.size(); ++i) s += (x[i] - mean) * (x[i + t] - mean);
    return s / double(x.size());
}

// Effective sample size of the mean across chains, Geyer initial monotone
// truncation of the combined autocorrelation sequence.
inline double ess_chains(const std::vector<Eigen::VectorXd>& chains) {
    const auto m = Eigen::Index(chains.size());
    const Eigen::Index n = chains.front().size();

    Eigen::VectorXd means(m);
    for (Eigen::Index j = 0; j < m; ++j) means[j] = chains[j].mean();
    Eigen::VectorXd gamma0(m);
    for (Eigen::Index j = 0; j < m; ++j) gamma0[j] = autocov(chains[j], means[j], 0);

    double w = gamma0.mean() * double(n) / double(n - 1);
    double var_plus = w * double(n - 1) / double(n);
    if (m > 1) {
        double grand = means.mean();
        var_plus += (means.array() - grand).square().sum() / double(m - 1);
    }
    if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

    auto rho = [&](Eigen::Index t) {
        double g = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) g += autocov(chains[j], means[j], t);
        return 1.0 - (w - g / double(m)) / var_plus;
    };

    // Pair sums P_k = rho_{2k} + rho_{2k+1}: keep while positive, then force
    // the sequence nonincreasing.
    double tau = 0.0;
    double prev_pair = kInf;
    for (Eigen::Index k = 0; 2 * k + 1 < n - 2; ++k) {
        double pair = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau - 1.0, 1e-12);
    double s = double(m * n);
    return std::min(s / tau, s * std::log10(s));
}

}  // namespace detail

// Split potential scale reduction.  Healthy chains sit near 1; values above
// 1.01 flag a mixing failure.  Constant chains yield NaN.
inline double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
    detail::check_chains(chains, "split_rhat");
    auto halves = detail::split_halves(chains);
    const auto m = Eigen::Index(halves.size());
    const double len = double(halves.front().size());

    Eigen::VectorXd means(m), vars(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        means[j] = halves[j].mean();
        vars[j] = (halves[j].array() - means[j]).square().sum() / (len - 1.0);
    }
    double w = vars.mean();
    double grand = means.mean();
    double b_over_n = (means.array() - grand).square().sum() / double(m - 1);
    double var_plus = (len - 1.0) / len * w + b_over_n;
    return std::sqrt(var_plus / w);
}

// Pooled fractional ranks mapped through the normal quantile,
// z = Phi^{-1}((r - 3/8) / (S + 1/4)), ties averaged.
inline std::vector<Eigen::VectorXd> rank_normalize(const std::vector<Eigen::VectorXd>& chains) {
    std::size_t total = 0;
    for (const auto& c : chains) total += std::size_t(c.size());
    if (total == 0) throw std::invalid_argument("rank_normalize: no draws");

    struct Entry {
        double value;
        std::size_t chain, idx;
    };
    std::vector<Entry> entries;
    entries.reserve(total);
    for (std::size_t j = 0; j < chains.size(); ++j)
        for (Eigen::Index i = 0; i < chains[j].size(); ++i)
            entries.push_back({chains[j][i], j, std::size_t(i)});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });

    std::vector<Eigen::VectorXd> out;
    out.reserve(chains.size());
    for (const auto& c : chains) out.push_back(Eigen::VectorXd(c.size()));

    const double denom = double(total) + 0.25;
    std::size_t i = 0;
    while (i < total) {
        std::size_t j = i;
        while (j + 1 < total && entries[j + 1].value == entries[i].value) ++j;
        double midrank = 0.5 * double(i + j) + 1.0;  // 1-based average rank of the tie run
        double z = normal_quantile((midrank - 0.375) / denom);
        for (std::size_t k = i; k <= j; ++k) out[entries[k].chain][Eigen::Index(entries[k].idx)] = z;
        i = j + 1;
    }
    return out;
}

// Bulk effective sample size: split chains, rank-normalize pooled, then the
// combined-autocorrelation ESS.
inline double ess_bulk(const std::vector<Eigen::VectorXd>& chains) {
    detail::check_chains(chains, "ess_bulk");
    return detail::ess_chains(rank_normalize(detail::split_halves(chains)));
}

// ESS of the mean on the raw scale (no rank transform), split chains.
inline double ess_mean(const std::vector<Eigen::VectorXd>& chains) {
    detail::check_chains(chains, "ess_mean");
    return detail::ess_chains(detail::split_halves(chains));
}

// Monte Carlo standard error of the posterior mean.
inline double mcse_mean(const std::vector<Eigen::VectorXd>& chains) {
    detail::check_chains(chains, "mcse_mean");
    std::size_t total = 0;
    double grand = 0.0;
    for (const auto& c : chains) {
        grand += c.sum();
        total += std::size_t(c.size());
    }
    grand /= double(total);
    double ss = 0.0;
    for (const auto& c : chains) ss += (c.array() - grand).square().sum();
    double sd = std::sqrt(ss / double(total - 1));
    return sd / std::sqrt(ess_mean(chains));
}

// Column j of each chain's draw matrix as one scalar series per chain.
inline std::vector<Eigen::VectorXd> param_chains(const std::vector<Eigen::MatrixXd>& draws,
                                                 Eigen::Index j) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(draws.size());
    for (const auto& d : draws) {
        if (j < 0 || j >= d.cols()) throw std::invalid_argument("param_chains: column out of range");
        out.push_back(d.col(j));
    }
    return out;
}

}  // namespace wivjm

#endif
