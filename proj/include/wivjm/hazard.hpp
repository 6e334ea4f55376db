#ifndef WIVJM_HAZARD_HPP
#define WIVJM_HAZARD_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "wivjm/bspline.hpp"

namespace wivjm {

// Baseline log-hazard family. Weibull parameters are [log shape, log scale]
// so that log h0(t) = log_scale + log(shape) + (shape-1) log(t); the spline
// variant models log h0(t) directly as a cubic spline on its knot config.
struct HazardSpec {
    enum class Kind { Weibull, SplineLogHazard };
    Kind kind = Kind::Weibull;
    KnotConfig cfg;          // SplineLogHazard only
    int quadrature_nodes = 15;

    static HazardSpec weibull(int nodes = 15) {
        HazardSpec h;
        h.kind = Kind::Weibull;
        h.quadrature_nodes = nodes;
        h.validate();
        return h;
    }
    static HazardSpec spline_log(KnotConfig cfg, int nodes = 15) {
        cfg.validate();
        HazardSpec h;
        h.kind = Kind::SplineLogHazard;
        h.cfg = std::move(cfg);
        h.quadrature_nodes = nodes;
        h.validate();
        return h;
    }

    void validate() const {
        if (quadrature_nodes < 7) throw std::invalid_argument("hazard: need at least 7 quadrature nodes");
    }

    int dim() const { return kind == Kind::Weibull ? 2 : cfg.size(); }

    double log_h0(const Eigen::Ref<const Eigen::VectorXd>& p, double t) const {
        if (kind == Kind::Weibull) {
            if (!(t > 0.0)) throw std::domain_error("hazard: Weibull log-hazard needs t > 0");
            double shape = std::exp(p[0]);
            return p[1] + p[0] + (shape - 1.0) * std::log(t);
        }
        return eval_spline(cfg, p, t);
    }

    // accumulate w * d(log h0)/d(params) into g
    void add_grad_log_h0(const Eigen::Ref<const Eigen::VectorXd>& p, double t, double w,
                         Eigen::Ref<Eigen::VectorXd> g) const {
        if (kind == Kind::Weibull) {
            g[0] += w * (1.0 + std::exp(p[0]) * std::log(t));
            g[1] += w;
            return;
        }
        BasisSpan s = eval_basis_local(cfg, t, 0);
        for (int j = 0; j <= cfg.degree; ++j) g[s.first + j] += w * s.v[std::size_t(j)];
    }
};

}  // namespace wivjm

#endif
