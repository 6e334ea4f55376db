#ifndef WIVJM_PRIORS_HPP
#define WIVJM_PRIORS_HPP

#include <cmath>

#include <Eigen/Dense>

#include "wivjm/mathutil.hpp"
#include "wivjm/penalty.hpp"

namespace wivjm {

// Log-densities for the prior families, written for unconstrained coordinates.
// Positive parameters are stored as logs; every *_log_* function below is the
// density of the positive variable plus the log-Jacobian of the exp transform,
// so integrating exp(lpdf) over the real line gives 1.

inline double normal_lpdf(double x, double mean, double sd) {
    double z = (x - mean) / sd;
    return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

// x = exp(v) ~ Inverse-Gamma(shape a, scale b); density in v
inline double inv_gamma_log_lpdf(double v, double a, double b) {
    return a * std::log(b) - std::lgamma(a) - a * v - b * std::exp(-v);
}
inline double inv_gamma_log_grad(double v, double a, double b) { return -a + b * std::exp(-v); }

// x = exp(u) ~ Gamma(shape a, rate r); density in u
inline double gamma_log_lpdf(double u, double a, double r) {
    return a * std::log(r) - std::lgamma(a) + a * u - r * std::exp(u);
}
inline double gamma_log_grad(double u, double a, double r) { return a - r * std::exp(u); }

// x = exp(w) ~ Half-Cauchy(scale s) on x > 0; density in w
inline double half_cauchy_log_lpdf(double w, double s) {
    double x = std::exp(w);
    return std::log(2.0 / M_PI) - std::log(s) + w - std::log1p((x / s) * (x / s));
}
inline double half_cauchy_log_grad(double w, double s) {
    double x2 = std::exp(2.0 * w);
    return 1.0 - 2.0 * x2 / (s * s + x2);
}

// x = exp(w) ~ Half-N(0, s^2) on x > 0; density in w
inline double half_normal_log_lpdf(double w, double s) {
    double x = std::exp(w);
    return 0.5 * std::log(2.0 / M_PI) - std::log(s) + w - 0.5 * (x / s) * (x / s);
}
inline double half_normal_log_grad(double w, double s) { return 1.0 - std::exp(2.0 * w) / (s * s); }

// Second-order random-walk prior beta ~ N(0, (tau * Ptilde)^-1) with the
// ridged difference penalty Ptilde = D2'D2 + 1e-6 I, full rank by
// construction. The smoothing precision tau is log-stored with a
// Gamma(0.01, 0.01) hyperprior.
struct Rw2Prior {
    Eigen::MatrixXd ptilde;
    double half_logdet = 0.0;
    double hyper_shape = 0.01, hyper_rate = 0.01;

    Rw2Prior() = default;
    explicit Rw2Prior(int dim) {
        Eigen::MatrixXd d2 = difference_matrix(2, dim);
        ptilde = d2.transpose() * d2 + 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
        // sum of log diag(L) for Ptilde = LL' is half the log-determinant
        half_logdet = Eigen::LLT<Eigen::MatrixXd>(ptilde).matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    int dim() const { return int(ptilde.rows()); }

    // density of (beta, log tau) including the hyperprior; gradients accumulate
    template <typename Grad>
    double lp_and_grad(const Eigen::VectorXd& beta, double log_tau, Grad&& grad_beta, double& grad_log_tau) const {
        double tau = std::exp(log_tau);
        Eigen::VectorXd pb = ptilde * beta;
        double quad = beta.dot(pb);
        grad_beta -= tau * pb;
        grad_log_tau += 0.5 * dim() - 0.5 * tau * quad;
        grad_log_tau += gamma_log_grad(log_tau, hyper_shape, hyper_rate);
        return 0.5 * dim() * (log_tau - kLog2Pi) + half_logdet - 0.5 * tau * quad +
               gamma_log_lpdf(log_tau, hyper_shape, hyper_rate);
    }

    double lp(const Eigen::VectorXd& beta, double log_tau) const {
        double tau = std::exp(log_tau);
        return 0.5 * dim() * (log_tau - kLog2Pi) + half_logdet - 0.5 * tau * beta.dot(ptilde * beta) +
               gamma_log_lpdf(log_tau, hyper_shape, hyper_rate);
    }
};

}  // namespace wivjm

#endif
