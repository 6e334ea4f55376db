#ifndef WIVJM_TRAJECTORY_HPP
#define WIVJM_TRAJECTORY_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "wivjm/bspline.hpp"
#include "wivjm/curvature.hpp"
#include "wivjm/ortho_basis.hpp"

namespace wivjm {

enum class Representation { RSpline, PSpline, Fpca, Smre };

inline const char* representation_name(Representation r) {
    switch (r) {
        case Representation::RSpline: return "rspline";
        case Representation::PSpline: return "pspline";
        case Representation::Fpca: return "fpca";
        case Representation::Smre: return "smre";
    }
    return "?";
}

// Which curvature functional enters the hazard. Current uses |mu''(t)|;
// Cumulative the square-root integrated squared curvature from time zero;
// Windowed the same over a trailing window. The accrual origin is time zero.
struct WivSpec {
    enum class Kind { Current, Cumulative, Windowed };
    Kind kind = Kind::Current;
    double window = 1.0;

    static WivSpec current() { return {Kind::Current, 1.0}; }
    static WivSpec cumulative() { return {Kind::Cumulative, 1.0}; }
    static WivSpec windowed(double w = 1.0) {
        if (!(w > 0.0)) throw std::invalid_argument("wiv: window must be positive");
        return {Kind::Windowed, w};
    }

    // integration interval for the quadratic form at time t
    std::pair<double, double> interval(double t) const {
        if (kind == Kind::Windowed) return {std::max(0.0, t - window), t};
        return {0.0, t};
    }
};

// Second-derivative Gram blocks over one interval: population x population,
// population x subject, subject x subject. Parameter-free, so they are cached
// at quadrature nodes and every WIV evaluation is a quadratic form.
struct CurvatureGram {
    double a = 0.0, b = 0.0;
    Eigen::MatrixXd pop, cross, subj;
};

// One of the four trajectory representations with its basis systems. The
// population coefficient layout and per-subject layout are:
//   RSpline  pop: K spline coefs            subj: K deviations
//   PSpline  pop: M spline coefs            subj: [b0, b1, zeta_1..K]
//   FPCA     pop: M spline coefs            subj: [zeta_1..L]
//   SMRE     pop: [beta0, beta1, c_1..M]    subj: [b0, b1, b2]
// Baseline-covariate fixed effects live outside this class.
struct TrajectoryModel {
    Representation rep = Representation::RSpline;
    KnotConfig pop_cfg;         // RSpline: the shared basis; SMRE: the shared curve
    OrthoBasis ortho;           // PSpline only
    SplineFamily psi;           // FPCA only
    Eigen::VectorXd psi_lambda; // FPCA only: eigenvalues matching psi's columns

    static TrajectoryModel rspline(const KnotConfig& cfg) {
        cfg.validate();
        return {Representation::RSpline, cfg, {}, {}, {}};
    }
    // mean_cfg carries the population mean spline; raw is the (larger) basis
    // the orthogonalized deviation functions are built from.
    static TrajectoryModel pspline(const KnotConfig& mean_cfg, const KnotConfig& raw,
                                   int grid_size = 401, double pve = 0.999) {
        mean_cfg.validate();
        if (std::abs(mean_cfg.lo - raw.lo) > 1e-9 || std::abs(mean_cfg.hi - raw.hi) > 1e-9)
            throw std::invalid_argument("trajectory: mean basis domain differs from the deviation basis domain");
        TrajectoryModel m;
        m.rep = Representation::PSpline;
        m.pop_cfg = mean_cfg;
        m.ortho = build_ortho_basis(raw, grid_size, pve);
        return m;
    }
    static TrajectoryModel fpca(const KnotConfig& mean_cfg, SplineFamily eigenfunctions,
                                Eigen::VectorXd lambda = {}) {
        mean_cfg.validate();
        if (std::abs(eigenfunctions.cfg.lo - mean_cfg.lo) > 1e-9 || std::abs(eigenfunctions.cfg.hi - mean_cfg.hi) > 1e-9)
            throw std::invalid_argument("trajectory: eigenfunction domain differs from the population basis domain");
        if (lambda.size() != 0 && lambda.size() != eigenfunctions.size())
            throw std::invalid_argument("trajectory: eigenvalue count differs from the eigenfunction count");
        return {Representation::Fpca, mean_cfg, {}, std::move(eigenfunctions), std::move(lambda)};
    }
    static TrajectoryModel smre(const KnotConfig& curve_cfg) {
        curve_cfg.validate();
        return {Representation::Smre, curve_cfg, {}, {}, {}};
    }

    int spline_dim() const { return pop_cfg.size(); }

    int pop_dim() const {
        return rep == Representation::Smre ? 2 + spline_dim() : spline_dim();
    }

    int subj_dim() const {
        switch (rep) {
            case Representation::RSpline: return spline_dim();
            case Representation::PSpline: return 2 + ortho.K();
            case Representation::Fpca: return psi.size();
            case Representation::Smre: return 3;
        }
        return 0;
    }

    void check_layout(const Eigen::VectorXd& pop, const Eigen::VectorXd& subj) const {
        if (pop.size() != pop_dim() || subj.size() != subj_dim())
            throw std::invalid_argument("trajectory: coefficient vector does not match the model layout");
    }

    // mu_i(t)
    double eval_mu(const Eigen::VectorXd& pop, const Eigen::VectorXd& subj, double t) const {
        check_layout(pop, subj);
        switch (rep) {
            case Representation::RSpline:
                return eval_spline(pop_cfg, pop + subj, t);
            case Representation::PSpline:
                return eval_spline(pop_cfg, pop, t) + subj[0] + subj[1] * t +
                       subj.tail(ortho.K()).dot(ortho.eval_all(t));
            case Representation::Fpca:
                return eval_spline(pop_cfg, pop, t) + subj.dot(psi.eval_all(t));
            case Representation::Smre:
                return pop[0] + subj[0] + (pop[1] + subj[1]) * t + subj[2] * eval_spline(pop_cfg, pop.tail(spline_dim()), t);
        }
        return 0.0;
    }

    // mu_i''(t); intercept and slope terms vanish
    double eval_mu_dd(const Eigen::VectorXd& pop, const Eigen::VectorXd& subj, double t) const {
        check_layout(pop, subj);
        switch (rep) {
            case Representation::RSpline:
                return eval_spline(pop_cfg, pop + subj, t, 2);
            case Representation::PSpline:
                return eval_spline(pop_cfg, pop, t, 2) + subj.tail(ortho.K()).dot(ortho.eval_all(t, 2));
            case Representation::Fpca:
                return eval_spline(pop_cfg, pop, t, 2) + subj.dot(psi.eval_all(t, 2));
            case Representation::Smre:
                return subj[2] * eval_spline(pop_cfg, pop.tail(spline_dim()), t, 2);
        }
        return 0.0;
    }

    // deviation functions expressed as a spline family on the raw basis
    SplineFamily ortho_family() const { return {ortho.raw, ortho.coef}; }

    // Gram blocks of second derivatives over [a, b]
    CurvatureGram curvature_blocks(double a, double b) const {
        SplineFamily popfam{pop_cfg, Eigen::MatrixXd::Identity(spline_dim(), spline_dim())};
        CurvatureGram g;
        g.a = a;
        g.b = b;
        g.pop = curvature_gram(popfam, a, b);
        switch (rep) {
            case Representation::RSpline:
            case Representation::Smre:
                g.cross.resize(spline_dim(), 0);
                g.subj.resize(0, 0);
                break;
            case Representation::PSpline: {
                SplineFamily dev = ortho_family();
                g.cross = curvature_gram(popfam, dev, a, b);
                g.subj = curvature_gram(dev, a, b);
                break;
            }
            case Representation::Fpca:
                g.cross = curvature_gram(popfam, psi, a, b);
                g.subj = curvature_gram(psi, a, b);
                break;
        }
        return g;
    }

    // integrated squared curvature of subject i over the gram's interval
    double curvature_qf(const CurvatureGram& g, const Eigen::VectorXd& pop, const Eigen::VectorXd& subj) const {
        check_layout(pop, subj);
        switch (rep) {
            case Representation::RSpline: {
                Eigen::VectorXd v = pop + subj;
                return v.dot(g.pop * v);
            }
            case Representation::PSpline: {
                Eigen::VectorXd z = subj.tail(ortho.K());
                return pop.dot(g.pop * pop) + 2.0 * pop.dot(g.cross * z) + z.dot(g.subj * z);
            }
            case Representation::Fpca:
                return pop.dot(g.pop * pop) + 2.0 * pop.dot(g.cross * subj) + subj.dot(g.subj * subj);
            case Representation::Smre: {
                Eigen::VectorXd c = pop.tail(spline_dim());
                return subj[2] * subj[2] * c.dot(g.pop * c);
            }
        }
        return 0.0;
    }

    double wiv_from_gram(const CurvatureGram& g, const Eigen::VectorXd& pop, const Eigen::VectorXd& subj) const {
        return std::sqrt(std::max(0.0, curvature_qf(g, pop, subj)));
    }

    // TB-WIV at time t; builds the Gram on the fly (the fitter uses caches)
    double eval_wiv(const Eigen::VectorXd& pop, const Eigen::VectorXd& subj, const WivSpec& spec, double t) const {
        if (t < 0.0) throw std::domain_error("wiv: negative time");
        if (spec.kind == WivSpec::Kind::Current) return std::abs(eval_mu_dd(pop, subj, t));
        auto [a, b] = spec.interval(t);
        return wiv_from_gram(curvature_blocks(a, b), pop, subj);
    }
};

}  // namespace wivjm

#endif
