#ifndef WIVJM_NUTS_HPP
#define WIVJM_NUTS_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include <wivjm/errors.hpp>
#include <wivjm/mathutil.hpp>
#include <wivjm/rng.hpp>

// Dynamic Hamiltonian Monte Carlo with multinomial sampling over doubling
// trajectory trees, a generalized U-turn termination rule with boundary
// momentum checks, dual-averaging step size adaptation, and windowed
// estimation of a diagonal inverse metric.

namespace wivjm {

struct NutsOptions {
    int warmup = 1000;
    int keep = 1000;
    int max_depth = 10;
    double target_accept = 0.8;
    // Starting guess for the step size search.  With warmup == 0 the search is
    // skipped and this value is used verbatim.
    double init_stepsize = 1.0;
    // Energy error beyond which a trajectory counts as divergent.
    double max_energy_error = 1000.0;
    // Warmup layout: settle-in buffer, first metric window, final step-size
    // buffer.  Metric adaptation is skipped when warmup cannot hold all three.
    int init_buffer = 75;
    int window_base = 25;
    int term_buffer = 50;

    void validate() const {
        if (warmup < 0) throw std::invalid_argument("NutsOptions: warmup must be >= 0");
        if (keep < 1) throw std::invalid_argument("NutsOptions: keep must be >= 1");
        if (max_depth < 1 || max_depth > 20)
            throw std::invalid_argument("NutsOptions: max_depth outside [1, 20]");
        if (!(target_accept > 0.0 && target_accept < 1.0))
            throw std::invalid_argument("NutsOptions: target_accept outside (0, 1)");
        if (!(init_stepsize > 0.0)) throw std::invalid_argument("NutsOptions: init_stepsize must be > 0");
        if (init_buffer < 0 || window_base < 1 || term_buffer < 0)
            throw std::invalid_argument("NutsOptions: bad warmup layout");
    }
};

struct ChainResult {
    Eigen::MatrixXd draws;       // keep x dim, one retained draw per row
    Eigen::VectorXd lp;          // log target at each retained draw
    Eigen::VectorXd inv_metric;  // adapted diagonal inverse metric
    double step_size = 0.0;
    int divergences_warmup = 0;
    int divergences = 0;  // sampling phase
    int max_depth_hits = 0;
    double accept_mean = 0.0;  // mean acceptance statistic, sampling phase
};

namespace detail {

struct Phase {
    Eigen::VectorXd q, p, g;
    double lp = 0.0;
};

// Nesterov dual averaging of log step size toward a target acceptance rate.
struct DualAverage {
    double target = 0.8;
    double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, s_bar = 0.0;
    int counter = 0;

    void restart(double eps) {
        mu = std::log(10.0 * eps);
        log_eps = std::log(eps);
        log_eps_bar = 0.0;
        s_bar = 0.0;
        counter = 0;
    }

    void update(double accept) {
        if (accept > 1.0) accept = 1.0;
        ++counter;
        double eta = 1.0 / (counter + t0);
        s_bar = (1.0 - eta) * s_bar + eta * (target - accept);
        double x = mu - s_bar * std::sqrt(double(counter)) / gamma;
        double w = std::pow(double(counter), -kappa);
        log_eps_bar = (1.0 - w) * log_eps_bar + w * x;
        log_eps = x;
    }
};

struct Welford {
    Eigen::VectorXd mean, m2;
    long n = 0;

    void reset(Eigen::Index dim) {
        mean = Eigen::VectorXd::Zero(dim);
        m2 = Eigen::VectorXd::Zero(dim);
        n = 0;
    }

    void add(const Eigen::VectorXd& x) {
        ++n;
        Eigen::VectorXd d = x - mean;
        mean += d / double(n);
        m2 += d.cwiseProduct(x - mean);
    }

    // Sample variances shrunk toward unit scale: n/(n+5) var + 1e-3 * 5/(n+5).
    Eigen::VectorXd regularized() const {
        double w = double(n) / (double(n) + 5.0);
        Eigen::VectorXd v = m2 / std::max(1.0, double(n) - 1.0);
        return (w * v.array() + 1e-3 * (1.0 - w)).matrix();
    }
};

}  // namespace detail

// Target: double operator()(const Eigen::VectorXd& q, Eigen::VectorXd& grad),
// returning the log density up to a constant and filling grad with its
// gradient.  A -inf return marks the point untenable; the trajectory leaf that
// reached it is treated as divergent.
template <typename Target>
class NutsSampler {
  public:
    NutsSampler(Target& target, int dim, const NutsOptions& opt = {})
        : f_(target), dim_(dim), opt_(opt) {
        if (dim < 1) throw std::invalid_argument("NutsSampler: dim must be positive");
        opt_.validate();
        inv_metric_ = Eigen::VectorXd::Ones(dim_);
    }

    // One chain from the given start; all randomness flows through rng.
    ChainResult run(const Eigen::VectorXd& init, Rng& rng) {
        if (init.size() != dim_) throw std::invalid_argument("NutsSampler: init has wrong dimension");
        inv_metric_.setOnes();

        detail::Phase z;
        z.q = init;
        z.p = Eigen::VectorXd::Zero(dim_);
        z.g = Eigen::VectorXd::Zero(dim_);
        z.lp = f_(z.q, z.g);
        if (!std::isfinite(z.lp)) throw numeric_error("nuts: log density not finite at the initial point");

        ChainResult out;
        out.draws.resize(opt_.keep, dim_);
        out.lp.resize(opt_.keep);

        double eps = opt_.init_stepsize;
        detail::DualAverage da;
        da.target = opt_.target_accept;

        if (opt_.warmup > 0) {
            eps = find_stepsize(z, eps, rng);
            da.restart(eps);

            // Estimation windows cover [init_buffer, warmup - term_buffer),
            // doubling in size; a window too short to double into is merged
            // into its predecessor.
            int est_lo = opt_.init_buffer;
            int est_hi = opt_.warmup - opt_.term_buffer;
            bool adapt_metric = est_hi - est_lo >= opt_.window_base;
            int window_size = opt_.window_base;
            int window_end = est_lo + window_size;
            if (adapt_metric && window_end + 2 * window_size > est_hi) window_end = est_hi;
            detail::Welford acc;
            acc.reset(dim_);

            for (int it = 0; it < opt_.warmup; ++it) {
                Transition tr = transition(z, eps, rng);
                out.divergences_warmup += tr.divergent ? 1 : 0;
                da.update(tr.accept);
                eps = std::exp(da.log_eps);
                if (adapt_metric && it >= est_lo && it < est_hi) {
                    acc.add(z.q);
                    if (it + 1 == window_end) {
                        inv_metric_ = acc.regularized();
                        acc.reset(dim_);
                        eps = find_stepsize(z, eps, rng);
                        da.restart(eps);
                        window_size *= 2;
                        window_end += window_size;
                        if (window_end + 2 * window_size > est_hi) window_end = est_hi;
                    }
                }
            }
            eps = std::exp(da.log_eps_bar);
        }

        out.step_size = eps;
        out.inv_metric = inv_metric_;

        double accept_sum = 0.0;
        for (int it = 0; it < opt_.keep; ++it) {
            Transition tr = transition(z, eps, rng);
            out.divergences += tr.divergent ? 1 : 0;
            out.max_depth_hits += tr.hit_max_depth ? 1 : 0;
            accept_sum += tr.accept;
            out.draws.row(it) = z.q;
            out.lp[it] = z.lp;
        }
        out.accept_mean = accept_sum / double(opt_.keep);
        return out;
    }

  private:
    struct Transition {
        double accept = 0.0;
        bool divergent = false;
        bool hit_max_depth = false;
    };

    double hamiltonian(const detail::Phase& z) const {
        return -z.lp + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
    }

    void leapfrog(detail::Phase& z, double eps) {
        z.p += (0.5 * eps) * z.g;
        z.q += eps * inv_metric_.cwiseProduct(z.p);
        z.lp = f_(z.q, z.g);
        z.p += (0.5 * eps) * z.g;
    }

    // rho spans a trajectory segment; sharp_a/sharp_b are the metric-weighted
    // momenta at its two ends.  Progress requires both projections positive.
    static bool criterion(const Eigen::VectorXd& sharp_a, const Eigen::VectorXd& sharp_b,
                          const Eigen::VectorXd& rho) {
        return rho.dot(sharp_a) > 0.0 && rho.dot(sharp_b) > 0.0;
    }

    // Doubles/halves eps until the one-step acceptance crosses 0.8.
    double find_stepsize(const detail::Phase& z0, double eps0, Rng& rng) {
        double eps = eps0;
        detail::Phase base = z0;
        for (Eigen::Index j = 0; j < dim_; ++j) base.p[j] = rng.normal() / std::sqrt(inv_metric_[j]);
        double h0 = hamiltonian(base);
        int dir = 0;
        for (int iter = 0; iter < 100; ++iter) {
            detail::Phase z = base;
            leapfrog(z, eps);
            double h = hamiltonian(z);
            if (!std::isfinite(h)) h = kInf;
            double dh = h0 - h;
            if (iter == 0) dir = dh > std::log(0.8) ? 1 : -1;
            if (dir == 1 && !(dh > std::log(0.8))) break;
            if (dir == -1 && !(dh < std::log(0.8))) break;
            eps = dir == 1 ? 2.0 * eps : 0.5 * eps;
            if (eps > 1e7) throw numeric_error("nuts: step size search diverged");
            if (eps < 1e-16) throw numeric_error("nuts: step size search collapsed");
        }
        return eps;
    }

    // Builds a subtree of 2^depth leapfrog steps extending z.  In integration
    // order, beg is the state adjacent to the pre-existing trajectory and end
    // the outermost one.  Returns false when any leaf diverged or an internal
    // U-turn invalidates the subtree; the caller must then discard prop.
    bool build_tree(int depth, detail::Phase& z, double eps, double h0, Eigen::VectorXd& rho,
                    Eigen::VectorXd& sharp_beg, Eigen::VectorXd& sharp_end, Eigen::VectorXd& p_beg,
                    Eigen::VectorXd& p_end, detail::Phase& prop, double& lsw, double& sum_metro,
                    int& n_leap, bool& divergent, Rng& rng) {
        if (depth == 0) {
            leapfrog(z, eps);
            ++n_leap;
            double h = hamiltonian(z);
            if (!std::isfinite(h)) h = kInf;
            sum_metro += std::min(1.0, std::exp(h0 - h));
            if (h - h0 > opt_.max_energy_error) {
                divergent = true;
                return false;
            }
            lsw = h0 - h;
            prop = z;
            rho += z.p;
            p_beg = z.p;
            p_end = z.p;
            sharp_beg = inv_metric_.cwiseProduct(z.p);
            sharp_end = sharp_beg;
            return true;
        }

        double lsw1 = -kInf, lsw2 = -kInf;
        Eigen::VectorXd rho1 = Eigen::VectorXd::Zero(dim_), rho2 = Eigen::VectorXd::Zero(dim_);
        Eigen::VectorXd sharp1_end(dim_), p1_end(dim_), sharp2_beg(dim_), p2_beg(dim_);
        detail::Phase prop1, prop2;

        if (!build_tree(depth - 1, z, eps, h0, rho1, sharp_beg, sharp1_end, p_beg, p1_end, prop1,
                        lsw1, sum_metro, n_leap, divergent, rng))
            return false;
        if (!build_tree(depth - 1, z, eps, h0, rho2, sharp2_beg, sharp_end, p2_beg, p_end, prop2,
                        lsw2, sum_metro, n_leap, divergent, rng))
            return false;

        lsw = log_sum_exp(lsw1, lsw2);
        prop = rng.uniform() < std::exp(lsw2 - lsw) ? prop2 : prop1;
        rho += rho1 + rho2;

        // U-turn over the merged span plus the two joins, each join extending
        // one half by the adjacent boundary momentum of the other.
        return criterion(sharp_beg, sharp_end, rho1 + rho2) &&
               criterion(sharp_beg, sharp2_beg, rho1 + p2_beg) &&
               criterion(sharp1_end, sharp_end, rho2 + p1_end);
    }

    Transition transition(detail::Phase& z, double eps, Rng& rng) {
        for (Eigen::Index j = 0; j < dim_; ++j) z.p[j] = rng.normal() / std::sqrt(inv_metric_[j]);
        double h0 = hamiltonian(z);

        detail::Phase z_minus = z, z_plus = z, sample = z;
        Eigen::VectorXd sharp_minus = inv_metric_.cwiseProduct(z.p);
        Eigen::VectorXd sharp_plus = sharp_minus;
        Eigen::VectorXd rho = z.p;
        double lsw = 0.0;  // weight of the initial state relative to itself

        Transition tr;
        double sum_metro = 0.0;
        int n_leap = 0;

        for (int depth = 0; depth < opt_.max_depth; ++depth) {
            int dir = rng.uniform() < 0.5 ? -1 : 1;
            detail::Phase& edge = dir == 1 ? z_plus : z_minus;
            Eigen::VectorXd p_edge_old = edge.p;
            Eigen::VectorXd sharp_edge_old = inv_metric_.cwiseProduct(edge.p);

            double lsw_sub = -kInf;
            Eigen::VectorXd rho_sub = Eigen::VectorXd::Zero(dim_);
            Eigen::VectorXd sharp_inner(dim_), sharp_outer(dim_), p_inner(dim_), p_outer(dim_);
            detail::Phase prop;
            bool ok = build_tree(depth, edge, dir * eps, h0, rho_sub, sharp_inner, sharp_outer,
                                 p_inner, p_outer, prop, lsw_sub, sum_metro, n_leap, tr.divergent, rng);
            if (!ok) break;

            // Progressive sampling, biased toward the fresh half.
            if (lsw_sub > lsw || rng.uniform() < std::exp(lsw_sub - lsw)) sample = prop;
            lsw = log_sum_exp(lsw, lsw_sub);

            rho += rho_sub;
            (dir == 1 ? sharp_plus : sharp_minus) = sharp_outer;
            bool persist = criterion(sharp_minus, sharp_plus, rho) &&
                           criterion(sharp_edge_old, sharp_outer, rho_sub + p_edge_old) &&
                           criterion(sharp_inner, dir == 1 ? sharp_minus : sharp_plus,
                                     (rho - rho_sub) + p_inner);
            if (!persist) break;
            if (depth + 1 == opt_.max_depth) tr.hit_max_depth = true;
        }

        tr.accept = n_leap > 0 ? sum_metro / double(n_leap) : 0.0;
        z = sample;
        return tr;
    }

    Target& f_;
    Eigen::Index dim_;
    NutsOptions opt_;
    Eigen::VectorXd inv_metric_;
};

// Convenience wrapper for a single chain.
template <typename Target>
ChainResult nuts_chain(Target& target, const Eigen::VectorXd& init, Rng& rng,
                       const NutsOptions& opt = {}) {
    NutsSampler<Target> sampler(target, int(init.size()), opt);
    return sampler.run(init, rng);
}

}  // namespace wivjm

#endif
