#ifndef WIVJM_PARAMETERS_HPP
#define WIVJM_PARAMETERS_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wivjm/hazard.hpp"
#include "wivjm/trajectory.hpp"

namespace wivjm {

// Block layout of the unconstrained sampling vector. Positive parameters are
// stored as logs; subject effects are stored non-centered (standard-normal z
// scaled by their hierarchical scales) so the sampler never sees the funnel.
//
// Blocks, in order: longitudinal fixed effects, survival fixed effects,
// alpha1, alpha2, log sigma_e^2, hazard, population spline block,
// hyperparameters, then per-subject raw blocks.
//
// Per-subject raw block and its natural-scale trajectory coefficients:
//   RSpline  [z_1..K]                b_k    = sd_bk z_k
//   PSpline  [z0, z1, zc_1..K, w]    b0     = sd_b0 z0, b1 = sd_b1 z1,
//                                    zeta_k = exp(w) tau_k zc_k
//   FPCA     [z_1..L]                zeta_l = nu_l z_l
//   SMRE     [z0, z1, z2]            b0, b1 as PSpline, b2 = 1 + sd_b2 z2
struct ParamLayout {
    Representation rep = Representation::RSpline;
    int n = 0, p_long = 0, q_surv = 0;
    int spline_dim = 0;  // population spline coefficient count
    int dev_dim = 0;     // penalized/eigen coefficients per subject
    int haz_dim = 0;

    int beta_l = 0, gamma = 0, alpha1 = 0, alpha2 = 0, log_sigma2 = 0;
    int hazard = 0, pop = 0, hyper = 0, subject = 0;
    int pop_dim = 0, hyper_dim = 0, subj_raw_dim = 0, traj_subj_dim = 0, dim = 0;

    static ParamLayout create(const TrajectoryModel& m, const HazardSpec& h, int n, int p_long, int q_surv) {
        if (n < 1) throw std::invalid_argument("layout: need at least one subject");
        ParamLayout L;
        L.rep = m.rep;
        L.n = n;
        L.p_long = p_long;
        L.q_surv = q_surv;
        L.spline_dim = m.spline_dim();
        L.haz_dim = h.dim();
        L.pop_dim = m.pop_dim();
        L.traj_subj_dim = m.subj_dim();
        switch (m.rep) {
            case Representation::RSpline:
                L.dev_dim = m.spline_dim();
                L.hyper_dim = L.dev_dim;
                L.subj_raw_dim = L.dev_dim;
                break;
            case Representation::PSpline:
                L.dev_dim = m.ortho.K();
                L.hyper_dim = 3 + L.dev_dim;  // log tau_beta, two log variances, log tau_k
                L.subj_raw_dim = 2 + L.dev_dim + 1;
                break;
            case Representation::Fpca:
                L.dev_dim = m.psi.size();
                L.hyper_dim = 1 + L.dev_dim;  // log tau_beta, log nu_l^2
                L.subj_raw_dim = L.dev_dim;
                break;
            case Representation::Smre:
                L.dev_dim = 0;
                L.hyper_dim = 4;  // log tau_beta, three log variances
                L.subj_raw_dim = 3;
                break;
        }
        L.beta_l = 0;
        L.gamma = L.beta_l + p_long;
        L.alpha1 = L.gamma + q_surv;
        L.alpha2 = L.alpha1 + 1;
        L.log_sigma2 = L.alpha2 + 1;
        L.hazard = L.log_sigma2 + 1;
        L.pop = L.hazard + L.haz_dim;
        L.hyper = L.pop + L.pop_dim;
        L.subject = L.hyper + L.hyper_dim;
        L.dim = L.subject + n * L.subj_raw_dim;
        return L;
    }

    int subject_off(int i) const { return subject + i * subj_raw_dim; }

    bool has_rw2_pop() const { return rep != Representation::RSpline; }
    // population spline coefficients within the pop block (SMRE skips beta0, beta1)
    int pop_spline_off() const { return rep == Representation::Smre ? pop + 2 : pop; }

    int log_tau_beta() const { return hyper; }                    // all but RSpline
    int log_var_b0() const { return hyper + 1; }                  // PSpline, SMRE
    int log_var_b1() const { return hyper + 2; }
    int log_var_b2() const { return hyper + 3; }                  // SMRE
    int log_tau_k(int k) const { return hyper + 3 + k; }          // PSpline
    int log_var_dev(int k) const {                                // RSpline, FPCA
        return rep == Representation::RSpline ? hyper + k : hyper + 1 + k;
    }
    int log_s(int i) const { return subject_off(i) + 2 + dev_dim; }  // PSpline

    // natural-scale trajectory coefficients of subject i (TrajectoryModel layout)
    void natural_subject(const Eigen::VectorXd& th, int i, Eigen::Ref<Eigen::VectorXd> out) const {
        const int off = subject_off(i);
        switch (rep) {
            case Representation::RSpline:
                for (int k = 0; k < dev_dim; ++k) out[k] = std::exp(0.5 * th[log_var_dev(k)]) * th[off + k];
                break;
            case Representation::PSpline: {
                out[0] = std::exp(0.5 * th[log_var_b0()]) * th[off];
                out[1] = std::exp(0.5 * th[log_var_b1()]) * th[off + 1];
                double s = std::exp(th[log_s(i)]);
                for (int k = 0; k < dev_dim; ++k) out[2 + k] = s * std::exp(th[log_tau_k(k)]) * th[off + 2 + k];
                break;
            }
            case Representation::Fpca:
                for (int l = 0; l < dev_dim; ++l) out[l] = std::exp(0.5 * th[log_var_dev(l)]) * th[off + l];
                break;
            case Representation::Smre:
                out[0] = std::exp(0.5 * th[log_var_b0()]) * th[off];
                out[1] = std::exp(0.5 * th[log_var_b1()]) * th[off + 1];
                out[2] = 1.0 + std::exp(0.5 * th[log_var_b2()]) * th[off + 2];
                break;
        }
    }

    // chain rule from d(lp)/d(natural coefficients) back onto the raw
    // z-scores and the hierarchical scale parameters
    void backprop_subject(const Eigen::VectorXd& th, int i, const Eigen::VectorXd& gnat,
                          Eigen::Ref<Eigen::VectorXd> grad) const {
        const int off = subject_off(i);
        switch (rep) {
            case Representation::RSpline:
                for (int k = 0; k < dev_dim; ++k) {
                    double sd = std::exp(0.5 * th[log_var_dev(k)]);
                    grad[off + k] += sd * gnat[k];
                    grad[log_var_dev(k)] += 0.5 * sd * th[off + k] * gnat[k];
                }
                break;
            case Representation::PSpline: {
                double sd0 = std::exp(0.5 * th[log_var_b0()]);
                double sd1 = std::exp(0.5 * th[log_var_b1()]);
                grad[off] += sd0 * gnat[0];
                grad[log_var_b0()] += 0.5 * sd0 * th[off] * gnat[0];
                grad[off + 1] += sd1 * gnat[1];
                grad[log_var_b1()] += 0.5 * sd1 * th[off + 1] * gnat[1];
                double s = std::exp(th[log_s(i)]);
                for (int k = 0; k < dev_dim; ++k) {
                    double tau = std::exp(th[log_tau_k(k)]);
                    double zeta = s * tau * th[off + 2 + k];
                    grad[off + 2 + k] += s * tau * gnat[2 + k];
                    grad[log_s(i)] += zeta * gnat[2 + k];
                    grad[log_tau_k(k)] += zeta * gnat[2 + k];
                }
                break;
            }
            case Representation::Fpca:
                for (int l = 0; l < dev_dim; ++l) {
                    double sd = std::exp(0.5 * th[log_var_dev(l)]);
                    grad[off + l] += sd * gnat[l];
                    grad[log_var_dev(l)] += 0.5 * sd * th[off + l] * gnat[l];
                }
                break;
            case Representation::Smre: {
                double sd0 = std::exp(0.5 * th[log_var_b0()]);
                double sd1 = std::exp(0.5 * th[log_var_b1()]);
                double sd2 = std::exp(0.5 * th[log_var_b2()]);
                grad[off] += sd0 * gnat[0];
                grad[log_var_b0()] += 0.5 * sd0 * th[off] * gnat[0];
                grad[off + 1] += sd1 * gnat[1];
                grad[log_var_b1()] += 0.5 * sd1 * th[off + 1] * gnat[1];
                grad[off + 2] += sd2 * gnat[2];
                grad[log_var_b2()] += 0.5 * sd2 * th[off + 2] * gnat[2];
                break;
            }
        }
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(std::size_t(dim));
        auto idx = [](const std::string& base, int j) { return base + "[" + std::to_string(j) + "]"; };
        for (int j = 0; j < p_long; ++j) out.push_back(idx("beta_l", j));
        for (int j = 0; j < q_surv; ++j) out.push_back(idx("gamma", j));
        out.push_back("alpha1");
        out.push_back("alpha2");
        out.push_back("log_sigma_e2");
        for (int j = 0; j < haz_dim; ++j) out.push_back(idx("hazard", j));
        if (rep == Representation::Smre) {
            out.push_back("beta0");
            out.push_back("beta1");
            for (int j = 0; j < spline_dim; ++j) out.push_back(idx("curve", j));
        } else {
            for (int j = 0; j < spline_dim; ++j) out.push_back(idx("beta", j));
        }
        switch (rep) {
            case Representation::RSpline:
                for (int k = 0; k < dev_dim; ++k) out.push_back(idx("log_var_b", k));
                break;
            case Representation::PSpline:
                out.push_back("log_tau_beta");
                out.push_back("log_var_b0");
                out.push_back("log_var_b1");
                for (int k = 0; k < dev_dim; ++k) out.push_back(idx("log_tau", k));
                break;
            case Representation::Fpca:
                out.push_back("log_tau_beta");
                for (int l = 0; l < dev_dim; ++l) out.push_back(idx("log_nu2", l));
                break;
            case Representation::Smre:
                out.push_back("log_tau_beta");
                out.push_back("log_var_b0");
                out.push_back("log_var_b1");
                out.push_back("log_var_b2");
                break;
        }
        for (int i = 0; i < n; ++i) {
            std::string si = "subj[" + std::to_string(i) + "].";
            int raw_z = rep == Representation::PSpline ? subj_raw_dim - 1 : subj_raw_dim;
            for (int r = 0; r < raw_z; ++r) out.push_back(si + idx("z", r));
            if (rep == Representation::PSpline) out.push_back(si + "log_s");
        }
        return out;
    }
};

}  // namespace wivjm

#endif
