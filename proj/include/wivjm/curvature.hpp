#ifndef WIVJM_CURVATURE_HPP
#define WIVJM_CURVATURE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "wivjm/bspline.hpp"

namespace wivjm {

// A set of smooth functions sharing one knot configuration; column m of
// `coef` holds the raw-basis coefficients of function m.
struct SplineFamily {
    KnotConfig cfg;
    Eigen::MatrixXd coef;

    int size() const { return int(coef.cols()); }

    // All member functions (or a derivative) at t.
    Eigen::VectorXd eval_all(double t, int deriv = 0) const {
        BasisSpan s = eval_basis_local(cfg, t, deriv);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
        for (int j = 0; j <= cfg.degree; ++j) out += s.v[std::size_t(j)] * coef.row(s.first + j).transpose();
        return out;
    }

    double eval(int m, double t, int deriv = 0) const { return eval_spline(cfg, coef.col(m), t, deriv); }
};

namespace detail {

// Breakpoints of the piecewise-polynomial structure of both families inside
// [a, b]: every knot strictly between a and b, plus the endpoints.
inline std::vector<double> merged_breakpoints(const KnotConfig& ca, const KnotConfig& cb, double a, double b) {
    std::vector<double> pts;
    pts.push_back(a);
    auto push = [&](const KnotConfig& c) {
        pts.push_back(c.lo);
        pts.push_back(c.hi);
        for (double k : c.interior) pts.push_back(k);
    };
    push(ca);
    push(cb);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    for (double p : pts) {
        if (p < a || p > b) continue;
        if (out.empty() || p > out.back() + 1e-14 * std::max(1.0, std::abs(p))) out.push_back(p);
    }
    if (out.size() < 2) out = {a, b};
    return out;
}

}  // namespace detail

// Cross-Gram of second derivatives, G[m][n] = int_a^b f_m''(s) g_n''(s) ds.
// Second derivatives of cubic splines are piecewise linear, so the integrand
// is piecewise quadratic on the merged knot partition and one Simpson rule
// per piece integrates it exactly.
inline Eigen::MatrixXd curvature_gram(const SplineFamily& fa, const SplineFamily& fb, double a, double b) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(fa.size(), fb.size());
    if (!(b > a)) return G;
    std::vector<double> bp = detail::merged_breakpoints(fa.cfg, fb.cfg, a, b);
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        double lo = bp[i], hi = bp[i + 1], mid = 0.5 * (lo + hi);
        Eigen::VectorXd al = fa.eval_all(lo, 2), am = fa.eval_all(mid, 2), ah = fa.eval_all(hi, 2);
        Eigen::VectorXd bl = fb.eval_all(lo, 2), bm = fb.eval_all(mid, 2), bh = fb.eval_all(hi, 2);
        double w = (hi - lo) / 6.0;
        G.noalias() += w * (al * bl.transpose() + 4.0 * (am * bm.transpose()) + ah * bh.transpose());
    }
    return G;
}

inline Eigen::MatrixXd curvature_gram(const SplineFamily& f, double a, double b) { return curvature_gram(f, f, a, b); }

}  // namespace wivjm

#endif
