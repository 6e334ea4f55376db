#ifndef WIVJM_GAUSS_LEGENDRE_HPP
#define WIVJM_GAUSS_LEGENDRE_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace wivjm {

// 15-node Gauss-Legendre rule on [-1,1]; exact for polynomials up to degree 29.
struct GaussLegendre15 {
    static constexpr int n = 15;
    static constexpr std::array<std::array<double, 2>, 15> nodes_weights = {{
        {-9.87992518020485377e-01, 3.07532419961186465e-02},
        {-9.37273392400705951e-01, 7.03660474881080689e-02},
        {-8.48206583410427206e-01, 1.07159220467171773e-01},
        {-7.24417731360170070e-01, 1.39570677926153908e-01},
        {-5.70972172608538830e-01, 1.66269205816993781e-01},
        {-3.94151347077563385e-01, 1.86161000015561878e-01},
        {-2.01194093997434514e-01, 1.98431485327111246e-01},
        {+0.00000000000000000e+00, 2.02578241925560898e-01},
        {+2.01194093997434514e-01, 1.98431485327111246e-01},
        {+3.94151347077563385e-01, 1.86161000015561878e-01},
        {+5.70972172608538830e-01, 1.66269205816993781e-01},
        {+7.24417731360170070e-01, 1.39570677926153908e-01},
        {+8.48206583410427206e-01, 1.07159220467171773e-01},
        {+9.37273392400705951e-01, 7.03660474881080689e-02},
        {+9.87992518020485377e-01, 3.07532419961186465e-02},
    }};

    // Node q mapped to [a,b]; weight already includes the interval Jacobian.
    static std::pair<double, double> mapped(int q, double a, double b) {
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        return {mid + half * nodes_weights[q][0], half * nodes_weights[q][1]};
    }

    template <typename F>
    static double integrate(F&& f, double a, double b) {
        if (b <= a) return 0.0;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0.0;
        for (const auto& nw : nodes_weights) acc += nw[1] * f(mid + half * nw[0]);
        return half * acc;
    }
};

// Gauss-Legendre rule of arbitrary order on [-1,1], via Newton iteration on
// the Legendre recurrence. Each row is {node, weight}.
inline std::vector<std::array<double, 2>> gauss_legendre_rule(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_rule: order must be >= 1");
    std::vector<std::array<double, 2>> rule(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Tricomi initial guess for the i-th root (descending order)
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[std::size_t(i)] = {-x, w};
        rule[std::size_t(n - 1 - i)] = {x, w};
    }
    if (n % 2 == 1) rule[std::size_t(n / 2)][0] = 0.0;
    return rule;
}

}  // namespace wivjm

#endif
