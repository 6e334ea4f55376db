#ifndef WIVJM_BSPLINE_HPP
#define WIVJM_BSPLINE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace wivjm {

// Open (clamped) B-spline basis on [lo, hi] with strictly increasing interior
// knots. Basis count = interior.size() + degree + 1.
struct KnotConfig {
    int degree = 3;
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> interior;

    int size() const { return int(interior.size()) + degree + 1; }

    std::vector<double> knots() const {
        std::vector<double> kv;
        kv.reserve(interior.size() + 2 * (degree + 1));
        for (int i = 0; i <= degree; ++i) kv.push_back(lo);
        kv.insert(kv.end(), interior.begin(), interior.end());
        for (int i = 0; i <= degree; ++i) kv.push_back(hi);
        return kv;
    }

    void validate() const {
        if (degree < 1) throw std::invalid_argument("KnotConfig: degree must be >= 1");
        if (!(lo < hi)) throw std::invalid_argument("KnotConfig: lo must be < hi");
        double prev = lo;
        for (double k : interior) {
            if (!(k > prev) || !(k < hi))
                throw std::invalid_argument("KnotConfig: interior knots must be strictly increasing inside (lo,hi)");
            prev = k;
        }
    }

    // n_basis cubic basis functions with equally spaced interior knots.
    static KnotConfig cubic_uniform(double lo, double hi, int n_basis) {
        if (n_basis < 4) throw std::invalid_argument("cubic_uniform: need at least 4 basis functions");
        KnotConfig cfg;
        cfg.degree = 3;
        cfg.lo = lo;
        cfg.hi = hi;
        int m = n_basis - 4;
        for (int i = 1; i <= m; ++i) cfg.interior.push_back(lo + (hi - lo) * double(i) / double(m + 1));
        return cfg;
    }

    static KnotConfig cubic_with_interior(double lo, double hi, std::vector<double> interior) {
        KnotConfig cfg;
        cfg.degree = 3;
        cfg.lo = lo;
        cfg.hi = hi;
        cfg.interior = std::move(interior);
        cfg.validate();
        return cfg;
    }

    // Greville abscissae; the basis reproduces t as sum_j greville_j B_j(t).
    Eigen::VectorXd greville() const {
        auto kv = knots();
        Eigen::VectorXd g(size());
        for (int j = 0; j < size(); ++j) {
            double s = 0.0;
            for (int r = 1; r <= degree; ++r) s += kv[j + r];
            g[j] = s / degree;
        }
        return g;
    }
};

// Nonzero basis window at t: values v[0..degree] belong to indices
// first .. first+degree.
struct BasisSpan {
    int first = 0;
    std::array<double, 4> v{};
};

namespace detail {

inline int find_span(const std::vector<double>& kv, int degree, int n_basis, double t) {
    // span i with kv[i] <= t < kv[i+1], clamped so t == hi uses the last piece
    int lo = degree, hi = n_basis;  // valid spans: [degree, n_basis-1]
    if (t >= kv[n_basis]) return n_basis - 1;
    if (t <= kv[degree]) return degree;
    auto it = std::upper_bound(kv.begin() + lo, kv.begin() + hi, t);
    return int(it - kv.begin()) - 1;
}

// Values and derivatives of the degree+1 nonzero basis functions at t
// (banded variant of the classic knot-insertion derivative algorithm).
// ders is (nd+1) x (degree+1); row r holds the r-th derivative.
inline void ders_basis_funs(const std::vector<double>& kv, int span, double t, int degree, int nd,
                            Eigen::Ref<Eigen::MatrixXd> ders) {
    const int p = degree;
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - kv[span + 1 - j];
        right[j] = kv[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
    if (nd == 0) return;

    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            int j1 = (rk >= -1) ? 1 : -rk;
            int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double f = p;
    for (int k = 1; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j) ders(k, j) *= f;
        f *= (p - k);
    }
}

}  // namespace detail

// Banded evaluation: the degree+1 basis values (or derivative values) at t.
inline BasisSpan eval_basis_local(const KnotConfig& cfg, double t, int deriv) {
    if (deriv < 0 || deriv > 2) throw std::invalid_argument("eval_basis: deriv must be in {0,1,2}");
    if (!(t >= cfg.lo && t <= cfg.hi)) throw std::domain_error("eval_basis: t outside basis domain");
    auto kv = cfg.knots();
    int span = detail::find_span(kv, cfg.degree, cfg.size(), t);
    Eigen::MatrixXd ders(deriv + 1, cfg.degree + 1);
    detail::ders_basis_funs(kv, span, t, cfg.degree, deriv, ders);
    BasisSpan out;
    out.first = span - cfg.degree;
    for (int j = 0; j <= cfg.degree; ++j) out.v[std::size_t(j)] = ders(deriv, j);
    return out;
}

// Full-length basis (or derivative) vector at t.
inline Eigen::VectorXd eval_basis(const KnotConfig& cfg, double t, int deriv = 0) {
    BasisSpan s = eval_basis_local(cfg, t, deriv);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cfg.size());
    for (int j = 0; j <= cfg.degree; ++j) out[s.first + j] = s.v[std::size_t(j)];
    return out;
}

// Dense design matrix rows = eval_basis(cfg, ts[i], deriv).
inline Eigen::MatrixXd design_matrix(const KnotConfig& cfg, const Eigen::VectorXd& ts, int deriv = 0) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(ts.size(), cfg.size());
    for (int i = 0; i < ts.size(); ++i) {
        BasisSpan s = eval_basis_local(cfg, ts[i], deriv);
        for (int j = 0; j <= cfg.degree; ++j) X(i, s.first + j) = s.v[std::size_t(j)];
    }
    return X;
}

// Value of the spline with given coefficients at t.
inline double eval_spline(const KnotConfig& cfg, const Eigen::VectorXd& coef, double t, int deriv = 0) {
    BasisSpan s = eval_basis_local(cfg, t, deriv);
    double acc = 0.0;
    for (int j = 0; j <= cfg.degree; ++j) acc += s.v[std::size_t(j)] * coef[s.first + j];
    return acc;
}

}  // namespace wivjm

#endif
