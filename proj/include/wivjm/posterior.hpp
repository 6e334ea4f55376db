#ifndef WIVJM_POSTERIOR_HPP
#define WIVJM_POSTERIOR_HPP

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wivjm/dataset.hpp"
#include "wivjm/errors.hpp"
#include "wivjm/gauss_legendre.hpp"
#include "wivjm/hazard.hpp"
#include "wivjm/mathutil.hpp"
#include "wivjm/parameters.hpp"
#include "wivjm/priors.hpp"
#include "wivjm/rng.hpp"
#include "wivjm/trajectory.hpp"

namespace wivjm {

struct JointModelOptions {
    // scales the survival log-likelihood and its gradient; the block-separation
    // tests set it to zero to isolate the prior
    double survival_weight = 1.0;
};

// Log-posterior of the joint longitudinal/survival model with exact gradients
// in the unconstrained parameterization. All basis rows and curvature Gram
// blocks are parameter-free, so they are computed once per dataset: every
// posterior evaluation is dot products and small quadratic forms.
class JointModel {
  public:
    JointModel(TrajectoryModel traj, HazardSpec hazard, WivSpec wiv, Dataset data, JointModelOptions opt = {})
        : traj_(std::move(traj)),
          haz_(std::move(hazard)),
          wiv_(wiv),
          data_(std::move(data)),
          opt_(opt),
          lay_(ParamLayout::create(traj_, haz_, data_.n(), int(data_.cov_long.cols()), int(data_.cov_surv.cols()))),
          rule_(gauss_legendre_rule(haz_.quadrature_nodes)) {
        data_.validate();
        if (lay_.has_rw2_pop()) rw2_ = Rw2Prior(lay_.spline_dim);
        build_caches();
    }

    const ParamLayout& layout() const { return lay_; }
    const TrajectoryModel& trajectory() const { return traj_; }
    const HazardSpec& hazard_spec() const { return haz_; }
    const WivSpec& wiv_spec() const { return wiv_; }
    const Dataset& data() const { return data_; }

    // ---- likelihood components (value only) ----

    double loglik_longitudinal(const Eigen::VectorXd& th) const {
        check_dim(th);
        const double vsig = th[lay_.log_sigma2];
        const double inv_sig2 = std::exp(-vsig);
        Eigen::VectorXd a(lay_.traj_subj_dim);
        double lp = 0.0;
        for (int i = 0; i < data_.n(); ++i) {
            lay_.natural_subject(th, i, a);
            double off = fixed_long_effect(th, i);
            for (int j = data_.obs_span[std::size_t(i)].first; j < data_.obs_span[std::size_t(i)].second; ++j) {
                double r = data_.obs_value[j] - off - mu_at(obs_[std::size_t(j)], th, a);
                lp += -0.5 * (kLog2Pi + vsig) - 0.5 * r * r * inv_sig2;
            }
        }
        return lp;
    }

    // delta_i log h_i(T_i) - (H_i(T_i) - H_i(entry_i)) per subject
    Eigen::VectorXd pointwise_survival_loglik(const Eigen::VectorXd& th) const {
        check_dim(th);
        Eigen::VectorXd out(data_.n());
        Eigen::VectorXd a(lay_.traj_subj_dim);
        Eigen::VectorXd u(lay_.pop_dim), rv(std::max(1, lay_.dev_dim));
        for (int i = 0; i < data_.n(); ++i) {
            lay_.natural_subject(th, i, a);
            double lp = 0.0;
            for (const DesignPoint& pt : quad_[std::size_t(i)])
                lp -= pt.w * std::exp(log_hazard_at(pt, th, a, i, u, rv));
            if (data_.event[i]) lp += log_hazard_at(exit_[std::size_t(i)], th, a, i, u, rv);
            out[i] = lp;
        }
        return out;
    }

    double loglik_survival(const Eigen::VectorXd& th) const { return pointwise_survival_loglik(th).sum(); }

    // log h_i(t) built from scratch (no caches); t must be in the risk window
    double log_hazard(const Eigen::VectorXd& th, int i, double t) const {
        check_dim(th);
        check_subject(i);
        if (t < data_.entry[i]) throw std::domain_error("jointmodel: hazard time before the subject's entry");
        Eigen::VectorXd a(lay_.traj_subj_dim);
        Eigen::VectorXd u(lay_.pop_dim), rv(std::max(1, lay_.dev_dim));
        lay_.natural_subject(th, i, a);
        return log_hazard_at(make_point(t, 0.0), th, a, i, u, rv);
    }

    // Gauss-Legendre integral of h_i over [lo, hi] built from scratch
    double cum_hazard(const Eigen::VectorXd& th, int i, double lo, double hi) const {
        check_dim(th);
        check_subject(i);
        if (lo < 0.0 || hi < lo) throw std::invalid_argument("jointmodel: cumulative hazard needs 0 <= lo <= hi");
        if (hi == lo) return 0.0;
        Eigen::VectorXd a(lay_.traj_subj_dim);
        Eigen::VectorXd u(lay_.pop_dim), rv(std::max(1, lay_.dev_dim));
        lay_.natural_subject(th, i, a);
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        double acc = 0.0;
        for (const auto& nw : rule_)
            acc += half * nw[1] * std::exp(log_hazard_at(make_point(mid + half * nw[0], 0.0), th, a, i, u, rv));
        return acc;
    }

    // ---- prior ----

    double log_prior(const Eigen::VectorXd& th) const {
        check_dim(th);
        double lp = 0.0;
        auto normal_block = [&](int off, int len, double sd) {
            for (int j = 0; j < len; ++j) lp += normal_lpdf(th[off + j], 0.0, sd);
        };
        normal_block(lay_.beta_l, lay_.p_long, 10.0);
        normal_block(lay_.gamma, lay_.q_surv, 10.0);
        normal_block(lay_.alpha1, 2, 10.0);
        lp += inv_gamma_log_lpdf(th[lay_.log_sigma2], 0.01, 0.01);
        if (haz_.kind == HazardSpec::Kind::Weibull) {
            lp += half_cauchy_log_lpdf(th[lay_.hazard], 1.0);
            lp += normal_lpdf(th[lay_.hazard + 1], 0.0, 10.0);
        } else {
            normal_block(lay_.hazard, lay_.haz_dim, 10.0);
        }
        switch (lay_.rep) {
            case Representation::RSpline:
                normal_block(lay_.pop, lay_.spline_dim, 10.0);
                for (int k = 0; k < lay_.dev_dim; ++k) lp += inv_gamma_log_lpdf(th[lay_.log_var_dev(k)], 0.01, 0.01);
                break;
            case Representation::PSpline:
                lp += rw2_.lp(th.segment(lay_.pop, lay_.spline_dim), th[lay_.log_tau_beta()]);
                lp += inv_gamma_log_lpdf(th[lay_.log_var_b0()], 0.01, 0.01);
                lp += inv_gamma_log_lpdf(th[lay_.log_var_b1()], 0.01, 0.01);
                for (int k = 0; k < lay_.dev_dim; ++k) lp += gamma_log_lpdf(th[lay_.log_tau_k(k)], 2.0, 1.0);
                break;
            case Representation::Fpca:
                lp += rw2_.lp(th.segment(lay_.pop, lay_.spline_dim), th[lay_.log_tau_beta()]);
                for (int l = 0; l < lay_.dev_dim; ++l) lp += inv_gamma_log_lpdf(th[lay_.log_var_dev(l)], 0.01, 0.01);
                break;
            case Representation::Smre:
                normal_block(lay_.pop, 2, 10.0);
                lp += rw2_.lp(th.segment(lay_.pop + 2, lay_.spline_dim), th[lay_.log_tau_beta()]);
                lp += inv_gamma_log_lpdf(th[lay_.log_var_b0()], 0.01, 0.01);
                lp += inv_gamma_log_lpdf(th[lay_.log_var_b1()], 0.01, 0.01);
                lp += inv_gamma_log_lpdf(th[lay_.log_var_b2()], 0.01, 0.01);
                break;
        }
        for (int i = 0; i < data_.n(); ++i) {
            const int off = lay_.subject_off(i);
            const int nz = lay_.rep == Representation::PSpline ? lay_.subj_raw_dim - 1 : lay_.subj_raw_dim;
            for (int r = 0; r < nz; ++r) lp += -0.5 * kLog2Pi - 0.5 * th[off + r] * th[off + r];
            if (lay_.rep == Representation::PSpline) lp += half_normal_log_lpdf(th[lay_.log_s(i)], 5.0);
        }
        return lp;
    }

    double log_posterior(const Eigen::VectorXd& th) const {
        return loglik_longitudinal(th) + opt_.survival_weight * loglik_survival(th) + log_prior(th);
    }

    // ---- fused value + exact gradient ----

    double log_posterior_and_grad(const Eigen::VectorXd& th, Eigen::VectorXd& grad) const {
        check_dim(th);
        grad.setZero(lay_.dim);
        const int n = data_.n();
        const int M = lay_.spline_dim;
        const double sw = opt_.survival_weight;
        const double a1 = th[lay_.alpha1], a2 = th[lay_.alpha2];
        const double vsig = th[lay_.log_sigma2];
        const double inv_sig2 = std::exp(-vsig);
        const auto hazp = th.segment(lay_.hazard, lay_.haz_dim);

        Eigen::MatrixXd nat(lay_.traj_subj_dim, n);
        Eigen::MatrixXd gnat = Eigen::MatrixXd::Zero(lay_.traj_subj_dim, n);
        for (int i = 0; i < n; ++i) lay_.natural_subject(th, i, nat.col(i));

        double lp = 0.0;

        // longitudinal Gaussian terms
        for (int i = 0; i < n; ++i) {
            double off = fixed_long_effect(th, i);
            for (int j = data_.obs_span[std::size_t(i)].first; j < data_.obs_span[std::size_t(i)].second; ++j) {
                const DesignPoint& pt = obs_[std::size_t(j)];
                double r = data_.obs_value[j] - off - mu_at(pt, th, nat.col(i));
                lp += -0.5 * (kLog2Pi + vsig) - 0.5 * r * r * inv_sig2;
                grad[lay_.log_sigma2] += -0.5 + 0.5 * r * r * inv_sig2;
                double gm = r * inv_sig2;
                if (lay_.p_long) grad.segment(lay_.beta_l, lay_.p_long) += gm * data_.cov_long.row(i).transpose();
                add_mu_grad(pt, th, nat.col(i), gm, grad, gnat.col(i));
            }
        }

        // survival terms: delta log h(T) - sum_q w_q h(t_q), times the weight
        Eigen::VectorXd u(lay_.pop_dim), rv(std::max(1, lay_.dev_dim));
        if (sw != 0.0) {
            for (int i = 0; i < n; ++i) {
                double covs_eff = lay_.q_surv ? data_.cov_surv.row(i).dot(th.segment(lay_.gamma, lay_.q_surv)) : 0.0;
                double m_fixed = fixed_long_effect(th, i);
                auto survival_point = [&](const DesignPoint& pt, double quad_w, bool event_term) {
                    double mu = mu_at(pt, th, nat.col(i));
                    double m = m_fixed + mu;
                    // WIV value with reusable intermediates for the gradient
                    double W = 0.0, dd = 0.0, qf = 0.0;
                    if (wiv_.kind == WivSpec::Kind::Current) {
                        dd = dd_at(pt, th, nat.col(i));
                        W = std::abs(dd);
                    } else {
                        qf = wiv_matvecs(pt, th, nat.col(i), u, rv);
                        W = std::sqrt(std::max(0.0, qf));
                    }
                    double lh = haz_.log_h0(hazp, pt.t) + covs_eff + a1 * m + a2 * W;
                    double c;
                    if (event_term) {
                        lp += sw * lh;
                        c = sw;
                    } else {
                        double h = std::exp(lh);
                        lp -= sw * quad_w * h;
                        c = -sw * quad_w * h;
                    }
                    haz_.add_grad_log_h0(hazp, pt.t, c, grad.segment(lay_.hazard, lay_.haz_dim));
                    if (lay_.q_surv)
                        grad.segment(lay_.gamma, lay_.q_surv) += c * data_.cov_surv.row(i).transpose();
                    grad[lay_.alpha1] += c * m;
                    grad[lay_.alpha2] += c * W;
                    double cm = c * a1;
                    if (lay_.p_long) grad.segment(lay_.beta_l, lay_.p_long) += cm * data_.cov_long.row(i).transpose();
                    add_mu_grad(pt, th, nat.col(i), cm, grad, gnat.col(i));
                    double cw = c * a2;
                    if (cw != 0.0) {
                        if (wiv_.kind == WivSpec::Kind::Current) {
                            if (W > 0.0) add_dd_grad(pt, th, nat.col(i), cw * (dd > 0.0 ? 1.0 : -1.0), grad, gnat.col(i));
                        } else if (W > 1e-12) {
                            add_qf_grad(th, nat.col(i), cw / (2.0 * W), u, rv, grad, gnat.col(i));
                        }
                    }
                };
                for (const DesignPoint& pt : quad_[std::size_t(i)]) survival_point(pt, pt.w, false);
                if (data_.event[i]) survival_point(exit_[std::size_t(i)], 0.0, true);
            }
        }

        // priors on the raw coordinates
        auto normal_block = [&](int off, int len, double sd) {
            for (int j = 0; j < len; ++j) {
                lp += normal_lpdf(th[off + j], 0.0, sd);
                grad[off + j] -= th[off + j] / (sd * sd);
            }
        };
        normal_block(lay_.beta_l, lay_.p_long, 10.0);
        normal_block(lay_.gamma, lay_.q_surv, 10.0);
        normal_block(lay_.alpha1, 2, 10.0);
        lp += inv_gamma_log_lpdf(vsig, 0.01, 0.01);
        grad[lay_.log_sigma2] += inv_gamma_log_grad(vsig, 0.01, 0.01);
        if (haz_.kind == HazardSpec::Kind::Weibull) {
            lp += half_cauchy_log_lpdf(th[lay_.hazard], 1.0);
            grad[lay_.hazard] += half_cauchy_log_grad(th[lay_.hazard], 1.0);
            lp += normal_lpdf(th[lay_.hazard + 1], 0.0, 10.0);
            grad[lay_.hazard + 1] -= th[lay_.hazard + 1] / 100.0;
        } else {
            normal_block(lay_.hazard, lay_.haz_dim, 10.0);
        }
        switch (lay_.rep) {
            case Representation::RSpline:
                normal_block(lay_.pop, M, 10.0);
                for (int k = 0; k < lay_.dev_dim; ++k) {
                    lp += inv_gamma_log_lpdf(th[lay_.log_var_dev(k)], 0.01, 0.01);
                    grad[lay_.log_var_dev(k)] += inv_gamma_log_grad(th[lay_.log_var_dev(k)], 0.01, 0.01);
                }
                break;
            case Representation::PSpline:
                lp += rw2_.lp_and_grad(th.segment(lay_.pop, M), th[lay_.log_tau_beta()], grad.segment(lay_.pop, M),
                                       grad[lay_.log_tau_beta()]);
                for (int b : {lay_.log_var_b0(), lay_.log_var_b1()}) {
                    lp += inv_gamma_log_lpdf(th[b], 0.01, 0.01);
                    grad[b] += inv_gamma_log_grad(th[b], 0.01, 0.01);
                }
                for (int k = 0; k < lay_.dev_dim; ++k) {
                    lp += gamma_log_lpdf(th[lay_.log_tau_k(k)], 2.0, 1.0);
                    grad[lay_.log_tau_k(k)] += gamma_log_grad(th[lay_.log_tau_k(k)], 2.0, 1.0);
                }
                break;
            case Representation::Fpca:
                lp += rw2_.lp_and_grad(th.segment(lay_.pop, M), th[lay_.log_tau_beta()], grad.segment(lay_.pop, M),
                                       grad[lay_.log_tau_beta()]);
                for (int l = 0; l < lay_.dev_dim; ++l) {
                    lp += inv_gamma_log_lpdf(th[lay_.log_var_dev(l)], 0.01, 0.01);
                    grad[lay_.log_var_dev(l)] += inv_gamma_log_grad(th[lay_.log_var_dev(l)], 0.01, 0.01);
                }
                break;
            case Representation::Smre:
                normal_block(lay_.pop, 2, 10.0);
                lp += rw2_.lp_and_grad(th.segment(lay_.pop + 2, M), th[lay_.log_tau_beta()],
                                       grad.segment(lay_.pop + 2, M), grad[lay_.log_tau_beta()]);
                for (int b : {lay_.log_var_b0(), lay_.log_var_b1(), lay_.log_var_b2()}) {
                    lp += inv_gamma_log_lpdf(th[b], 0.01, 0.01);
                    grad[b] += inv_gamma_log_grad(th[b], 0.01, 0.01);
                }
                break;
        }
        for (int i = 0; i < n; ++i) {
            const int off = lay_.subject_off(i);
            const int nz = lay_.rep == Representation::PSpline ? lay_.subj_raw_dim - 1 : lay_.subj_raw_dim;
            for (int r = 0; r < nz; ++r) {
                lp += -0.5 * kLog2Pi - 0.5 * th[off + r] * th[off + r];
                grad[off + r] -= th[off + r];
            }
            if (lay_.rep == Representation::PSpline) {
                lp += half_normal_log_lpdf(th[lay_.log_s(i)], 5.0);
                grad[lay_.log_s(i)] += half_normal_log_grad(th[lay_.log_s(i)], 5.0);
            }
        }

        // push accumulated natural-coefficient gradients onto z's and scales
        for (int i = 0; i < n; ++i) lay_.backprop_subject(th, i, gnat.col(i), grad);

        if (!std::isfinite(lp)) return -kInf;  // rejection signal
        return lp;
    }

    // ---- initialization and identification ----

    // Coefficients start near zero in unconstrained space, variance-like
    // parameters at unit scale (their prior medians are numerically extreme),
    // positive scales with well-defined prior medians at those medians, and
    // the FPCA score variances at the preliminary eigenvalues. Redraws until
    // the posterior is finite.
    Eigen::VectorXd initialize(Rng& rng, int max_tries = 100) const {
        for (int attempt = 0; attempt < max_tries; ++attempt) {
            Eigen::VectorXd th = initial_draw(rng);
            if (std::isfinite(log_posterior(th))) return th;
        }
        throw numeric_error("jointmodel: no finite starting point found");
    }

    Eigen::VectorXd initial_draw(Rng& rng) const {
        Eigen::VectorXd th = Eigen::VectorXd::Zero(lay_.dim);
        auto draw = [&](int off, int len) {
            for (int j = 0; j < len; ++j) th[off + j] = rng.normal(0.0, 0.1);
        };
        draw(lay_.beta_l, lay_.p_long);
        draw(lay_.gamma, lay_.q_surv);
        draw(lay_.alpha1, 2);
        draw(lay_.hazard, lay_.haz_dim);
        draw(lay_.pop, lay_.pop_dim);
        constexpr double kGamma21Median = 1.6783469900166605;            // Gamma(2,1)
        const double half_normal5_median = 5.0 * normal_quantile(0.75);  // Half-N(0,5^2)
        switch (lay_.rep) {
            case Representation::RSpline:
                break;  // log variances stay 0
            case Representation::PSpline:
                for (int k = 0; k < lay_.dev_dim; ++k) th[lay_.log_tau_k(k)] = std::log(kGamma21Median);
                break;
            case Representation::Fpca:
                for (int l = 0; l < lay_.dev_dim; ++l)
                    th[lay_.log_var_dev(l)] =
                        traj_.psi_lambda.size() ? std::log(std::max(1e-8, traj_.psi_lambda[l])) : 0.0;
                break;
            case Representation::Smre:
                break;
        }
        for (int i = 0; i < data_.n(); ++i) {
            const int off = lay_.subject_off(i);
            const int nz = lay_.rep == Representation::PSpline ? lay_.subj_raw_dim - 1 : lay_.subj_raw_dim;
            draw(off, nz);
            if (lay_.rep == Representation::PSpline) th[lay_.log_s(i)] = std::log(half_normal5_median);
        }
        return th;
    }

    // Rescales the multiplicative effects to mean one and compensates on the
    // shared-curve coefficients; every mu_i(t) is unchanged. Returns false
    // (and leaves th untouched) on a degenerate zero-mean draw.
    bool apply_smre_constraint(Eigen::VectorXd& th) const {
        if (lay_.rep != Representation::Smre)
            throw std::invalid_argument("jointmodel: identification transform is specific to the multiplicative model");
        const double sd2 = std::exp(0.5 * th[lay_.log_var_b2()]);
        double mean = 0.0;
        for (int i = 0; i < data_.n(); ++i) mean += 1.0 + sd2 * th[lay_.subject_off(i) + 2];
        mean /= data_.n();
        if (std::abs(mean) < 1e-12) return false;
        th.segment(lay_.pop + 2, lay_.spline_dim) *= mean;
        for (int i = 0; i < data_.n(); ++i) {
            double b2 = 1.0 + sd2 * th[lay_.subject_off(i) + 2];
            th[lay_.subject_off(i) + 2] = (b2 / mean - 1.0) / sd2;
        }
        return true;
    }

  private:
    // Basis rows (and optional curvature Gram over the WIV interval) at one
    // evaluation time. For the multiplicative representation `pop` holds the
    // shared-curve basis row; the intercept/slope columns are handled
    // analytically.
    struct DesignPoint {
        double t = 0.0, w = 0.0;
        Eigen::VectorXd pop, pop_dd, dev, dev_dd;
        CurvatureGram gram;
    };

    TrajectoryModel traj_;
    HazardSpec haz_;
    WivSpec wiv_;
    Dataset data_;
    JointModelOptions opt_;
    ParamLayout lay_;
    Rw2Prior rw2_;
    std::vector<std::array<double, 2>> rule_;
    std::vector<DesignPoint> obs_;
    std::vector<std::vector<DesignPoint>> quad_;
    std::vector<DesignPoint> exit_;

    void check_dim(const Eigen::VectorXd& th) const {
        if (th.size() != lay_.dim) throw std::invalid_argument("jointmodel: parameter vector has the wrong length");
    }
    void check_subject(int i) const {
        if (i < 0 || i >= data_.n()) throw std::invalid_argument("jointmodel: subject index out of range");
    }

    double fixed_long_effect(const Eigen::VectorXd& th, int i) const {
        return lay_.p_long ? data_.cov_long.row(i).dot(th.segment(lay_.beta_l, lay_.p_long)) : 0.0;
    }

    DesignPoint make_point(double t, double w, bool with_dd = true) const {
        DesignPoint pt;
        pt.t = t;
        pt.w = w;
        pt.pop = eval_basis(traj_.pop_cfg, t);
        if (with_dd) pt.pop_dd = eval_basis(traj_.pop_cfg, t, 2);
        if (lay_.rep == Representation::PSpline) {
            pt.dev = traj_.ortho.eval_all(t);
            if (with_dd) pt.dev_dd = traj_.ortho.eval_all(t, 2);
        } else if (lay_.rep == Representation::Fpca) {
            pt.dev = traj_.psi.eval_all(t);
            if (with_dd) pt.dev_dd = traj_.psi.eval_all(t, 2);
        }
        if (with_dd && wiv_.kind != WivSpec::Kind::Current) {
            auto [a, b] = wiv_.interval(t);
            pt.gram = traj_.curvature_blocks(a, b);
        }
        return pt;
    }

    void build_caches() {
        obs_.reserve(std::size_t(data_.n_obs()));
        for (int j = 0; j < data_.n_obs(); ++j) obs_.push_back(make_point(data_.obs_time[j], 0.0, false));
        quad_.resize(std::size_t(data_.n()));
        exit_.reserve(std::size_t(data_.n()));
        for (int i = 0; i < data_.n(); ++i) {
            double lo = data_.entry[i], hi = data_.exit_time[i];
            double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            auto& nodes = quad_[std::size_t(i)];
            if (half > 0.0) {
                nodes.reserve(rule_.size());
                for (const auto& nw : rule_) nodes.push_back(make_point(mid + half * nw[0], half * nw[1]));
            }
            exit_.push_back(make_point(hi, 0.0));
        }
    }

    double mu_at(const DesignPoint& pt, const Eigen::VectorXd& th, const Eigen::Ref<const Eigen::VectorXd>& a) const {
        switch (lay_.rep) {
            case Representation::RSpline:
                return pt.pop.dot(th.segment(lay_.pop, lay_.pop_dim) + a);
            case Representation::PSpline:
                return pt.pop.dot(th.segment(lay_.pop, lay_.pop_dim)) + a[0] + a[1] * pt.t +
                       pt.dev.dot(a.tail(lay_.dev_dim));
            case Representation::Fpca:
                return pt.pop.dot(th.segment(lay_.pop, lay_.pop_dim)) + pt.dev.dot(a);
            case Representation::Smre:
                return th[lay_.pop] + a[0] + (th[lay_.pop + 1] + a[1]) * pt.t +
                       a[2] * pt.pop.dot(th.segment(lay_.pop + 2, lay_.spline_dim));
        }
        return 0.0;
    }

    double dd_at(const DesignPoint& pt, const Eigen::VectorXd& th, const Eigen::Ref<const Eigen::VectorXd>& a) const {
        switch (lay_.rep) {
            case Representation::RSpline:
                return pt.pop_dd.dot(th.segment(lay_.pop, lay_.pop_dim) + a);
            case Representation::PSpline:
                return pt.pop_dd.dot(th.segment(lay_.pop, lay_.pop_dim)) + pt.dev_dd.dot(a.tail(lay_.dev_dim));
            case Representation::Fpca:
                return pt.pop_dd.dot(th.segment(lay_.pop, lay_.pop_dim)) + pt.dev_dd.dot(a);
            case Representation::Smre:
                return a[2] * pt.pop_dd.dot(th.segment(lay_.pop + 2, lay_.spline_dim));
        }
        return 0.0;
    }

    // accumulate w * d(mu)/d(pop block) into grad and w * d(mu)/d(natural
    // subject coefficients) into gnat
    void add_mu_grad(const DesignPoint& pt, const Eigen::VectorXd& th, const Eigen::Ref<const Eigen::VectorXd>& a,
                     double w, Eigen::VectorXd& grad, Eigen::Ref<Eigen::VectorXd> gnat) const {
        switch (lay_.rep) {
            case Representation::RSpline:
                grad.segment(lay_.pop, lay_.pop_dim) += w * pt.pop;
                gnat += w * pt.pop;
                break;
            case Representation::PSpline:
                grad.segment(lay_.pop, lay_.pop_dim) += w * pt.pop;
                gnat[0] += w;
                gnat[1] += w * pt.t;
                gnat.tail(lay_.dev_dim) += w * pt.dev;
                break;
            case Representation::Fpca:
                grad.segment(lay_.pop, lay_.pop_dim) += w * pt.pop;
                gnat += w * pt.dev;
                break;
            case Representation::Smre:
                grad[lay_.pop] += w;
                grad[lay_.pop + 1] += w * pt.t;
                grad.segment(lay_.pop + 2, lay_.spline_dim) += (w * a[2]) * pt.pop;
                gnat[0] += w;
                gnat[1] += w * pt.t;
                gnat[2] += w * pt.pop.dot(th.segment(lay_.pop + 2, lay_.spline_dim));
                break;
        }
    }

    void add_dd_grad(const DesignPoint& pt, const Eigen::VectorXd& th, const Eigen::Ref<const Eigen::VectorXd>& a,
                     double w, Eigen::VectorXd& grad, Eigen::Ref<Eigen::VectorXd> gnat) const {
        switch (lay_.rep) {
            case Representation::RSpline:
                grad.segment(lay_.pop, lay_.pop_dim) += w * pt.pop_dd;
                gnat += w * pt.pop_dd;
                break;
            case Representation::PSpline:
                grad.segment(lay_.pop, lay_.pop_dim) += w * pt.pop_dd;
                gnat.tail(lay_.dev_dim) += w * pt.dev_dd;
                break;
            case Representation::Fpca:
                grad.segment(lay_.pop, lay_.pop_dim) += w * pt.pop_dd;
                gnat += w * pt.dev_dd;
                break;
            case Representation::Smre:
                grad.segment(lay_.pop + 2, lay_.spline_dim) += (w * a[2]) * pt.pop_dd;
                gnat[2] += w * pt.pop_dd.dot(th.segment(lay_.pop + 2, lay_.spline_dim));
                break;
        }
    }

    // quadratic form of the cumulative/windowed WIV at this point; stores the
    // Gram matvecs in (u, rv) so the gradient pass can reuse them
    double wiv_matvecs(const DesignPoint& pt, const Eigen::VectorXd& th, const Eigen::Ref<const Eigen::VectorXd>& a,
                       Eigen::VectorXd& u, Eigen::VectorXd& rv) const {
        switch (lay_.rep) {
            case Representation::RSpline: {
                u.head(lay_.pop_dim).noalias() = pt.gram.pop * (th.segment(lay_.pop, lay_.pop_dim) + a);
                return u.head(lay_.pop_dim).dot(th.segment(lay_.pop, lay_.pop_dim) + a);
            }
            case Representation::PSpline: {
                auto beta = th.segment(lay_.pop, lay_.pop_dim);
                auto zeta = a.tail(lay_.dev_dim);
                u.head(lay_.pop_dim).noalias() = pt.gram.pop * beta;
                u.head(lay_.pop_dim).noalias() += pt.gram.cross * zeta;
                rv.head(lay_.dev_dim).noalias() = pt.gram.cross.transpose() * beta;
                rv.head(lay_.dev_dim).noalias() += pt.gram.subj * zeta;
                return beta.dot(u.head(lay_.pop_dim)) + zeta.dot(rv.head(lay_.dev_dim));
            }
            case Representation::Fpca: {
                auto beta = th.segment(lay_.pop, lay_.pop_dim);
                u.head(lay_.pop_dim).noalias() = pt.gram.pop * beta;
                u.head(lay_.pop_dim).noalias() += pt.gram.cross * a;
                rv.head(lay_.dev_dim).noalias() = pt.gram.cross.transpose() * beta;
                rv.head(lay_.dev_dim).noalias() += pt.gram.subj * a;
                return beta.dot(u.head(lay_.pop_dim)) + a.dot(rv.head(lay_.dev_dim));
            }
            case Representation::Smre: {
                auto c = th.segment(lay_.pop + 2, lay_.spline_dim);
                u.head(lay_.spline_dim).noalias() = pt.gram.pop * c;
                return a[2] * a[2] * c.dot(u.head(lay_.spline_dim));
            }
        }
        return 0.0;
    }

    // accumulate w * d(qf)/d(coefficients), reusing the matvecs from
    // wiv_matvecs at the same point
    void add_qf_grad(const Eigen::VectorXd& th, const Eigen::Ref<const Eigen::VectorXd>& a, double w,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& rv, Eigen::VectorXd& grad,
                     Eigen::Ref<Eigen::VectorXd> gnat) const {
        switch (lay_.rep) {
            case Representation::RSpline:
                grad.segment(lay_.pop, lay_.pop_dim) += (2.0 * w) * u.head(lay_.pop_dim);
                gnat += (2.0 * w) * u.head(lay_.pop_dim);
                break;
            case Representation::PSpline:
                grad.segment(lay_.pop, lay_.pop_dim) += (2.0 * w) * u.head(lay_.pop_dim);
                gnat.tail(lay_.dev_dim) += (2.0 * w) * rv.head(lay_.dev_dim);
                break;
            case Representation::Fpca:
                grad.segment(lay_.pop, lay_.pop_dim) += (2.0 * w) * u.head(lay_.pop_dim);
                gnat += (2.0 * w) * rv.head(lay_.dev_dim);
                break;
            case Representation::Smre: {
                auto c = th.segment(lay_.pop + 2, lay_.spline_dim);
                grad.segment(lay_.pop + 2, lay_.spline_dim) += (2.0 * w * a[2] * a[2]) * u.head(lay_.spline_dim);
                gnat[2] += 2.0 * w * a[2] * c.dot(u.head(lay_.spline_dim));
                break;
            }
        }
    }

    double log_hazard_at(const DesignPoint& pt, const Eigen::VectorXd& th,
                         const Eigen::Ref<const Eigen::VectorXd>& a, int i, Eigen::VectorXd& u,
                         Eigen::VectorXd& rv) const {
        double m = fixed_long_effect(th, i) + mu_at(pt, th, a);
        double W = wiv_.kind == WivSpec::Kind::Current ? std::abs(dd_at(pt, th, a))
                                                       : std::sqrt(std::max(0.0, wiv_matvecs(pt, th, a, u, rv)));
        double covs = lay_.q_surv ? data_.cov_surv.row(i).dot(th.segment(lay_.gamma, lay_.q_surv)) : 0.0;
        return haz_.log_h0(th.segment(lay_.hazard, lay_.haz_dim), pt.t) + covs + th[lay_.alpha1] * m +
               th[lay_.alpha2] * W;
    }
};

}  // namespace wivjm

#endif
