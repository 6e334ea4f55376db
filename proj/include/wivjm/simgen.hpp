#ifndef WIVJM_SIMGEN_HPP
#define WIVJM_SIMGEN_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include <wivjm/bspline.hpp>
#include <wivjm/dataset.hpp>
#include <wivjm/errors.hpp>
#include <wivjm/gauss_legendre.hpp>
#include <wivjm/mathutil.hpp>
#include <wivjm/rng.hpp>
#include <wivjm/trajectory.hpp>

// Data-generating processes for the three simulation designs, with event
// times drawn by inverting subject-specific cumulative hazards.

namespace wivjm {

struct ScenarioConfig {
    int case_id = 1;
    WivSpec::Kind wiv = WivSpec::Kind::Current;
    int n = 300;
    std::uint64_t seed = 0;
    bool null_alpha2 = false;  // case 3: zero the curvature association at generation
    // Unset means the case default.
    std::optional<double> gamma;  // cases 1-2 single-covariate effect
    std::optional<double> alpha1, alpha2;
    std::optional<double> baseline_log_scale;  // cases 1-2 Weibull log-scale
    std::string fixture_path = "share/case3_fixture.json";

    void validate() const {
        if (case_id < 1 || case_id > 3) throw config_error("scenario: case must be 1, 2, or 3");
        if (n < 1) throw config_error("scenario: n must be >= 1");
        if (wiv == WivSpec::Kind::Windowed)
            throw config_error("scenario: generators cover current and cumulative curvature only");
        if (null_alpha2 && case_id != 3) throw config_error("scenario: null_alpha2 applies to case 3 only");
    }
};

// Inverse-transform event sampling: E ~ Exp(1), then H(t) - H(entry) = E by
// bisection to |t| tolerance 1e-8.  The cumulative hazard uses the same
// quadrature rule as the fitted likelihood.  Returns +inf when the horizon is
// exhausted first (censored beyond domain_end).
inline double sample_event_time(const std::function<double(double)>& hazard, double entry,
                                double domain_end, Rng& rng) {
    if (!(domain_end > entry)) throw std::invalid_argument("sample_event_time: empty horizon");
    double e = rng.exponential();
    auto cum = [&](double hi) {
        double v = GaussLegendre15::integrate(
            [&](double s) {
                double h = hazard(s);
                if (h < 0.0 || !std::isfinite(h))
                    throw numeric_error("sample_event_time: hazard must be finite and nonnegative");
                return h;
            },
            entry, hi);
        if (!std::isfinite(v) || v < 0.0)
            throw numeric_error("sample_event_time: cumulative hazard not finite");
        return v;
    };
    if (cum(domain_end) < e) return kInf;
    double lo = entry, hi = domain_end;
    for (int it = 0; it < 200 && hi - lo > 1e-8; ++it) {
        double mid = 0.5 * (lo + hi);
        (cum(mid) < e ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

// Accumulates per-subject rows, then materializes one Dataset.  Longitudinal
// covariates are baseline values, repeated across the subject's records.
struct ScenarioBuild {
    std::vector<std::string> surv_names, long_names;
    std::vector<SurvivalRecord> surv;
    std::vector<LongitudinalRecord> lng;
    std::vector<Eigen::VectorXd> surv_rows, long_rows;

    void add_subject(std::int64_t id, double entry, double exit, int event,
                     const Eigen::VectorXd& surv_cov, const Eigen::VectorXd& long_cov,
                     const std::vector<double>& times, const std::vector<double>& values) {
        surv.push_back({id, entry, exit, event});
        surv_rows.push_back(surv_cov);
        for (std::size_t j = 0; j < times.size(); ++j) {
            lng.push_back({id, times[j], values[j]});
            long_rows.push_back(long_cov);
        }
    }

    Dataset finish() const {
        Eigen::MatrixXd sc(surv.size(), surv_names.size());
        for (std::size_t i = 0; i < surv_rows.size(); ++i) sc.row(Eigen::Index(i)) = surv_rows[i];
        Eigen::MatrixXd lc(lng.size(), long_names.size());
        for (std::size_t i = 0; i < long_rows.size(); ++i) lc.row(Eigen::Index(i)) = long_rows[i];
        return assemble_dataset(surv, sc, surv_names, lng, lc, long_names);
    }
};

inline double weibull_log_h0(double shape, double log_scale, double t) {
    return std::log(shape) + log_scale + (shape - 1.0) * std::log(t);
}

// Case-2 trajectory family: mu = b1*(-(t-3)^3/6 + (t-3)) + b2 + b3*sin(t).
inline double case2_mu(double b1, double b2, double b3, double t) {
    return b1 * (-std::pow(t - 3.0, 3) / 6.0 + (t - 3.0)) + b2 + b3 * std::sin(t);
}

inline double case2_mudd(double b1, double b3, double t) {
    return -b1 * (t - 3.0) - b3 * std::sin(t);
}

// \int_0^t (mu'')^2 ds in closed form: quadratic in (b1, b3).
inline double case2_cum_qf(double b1, double b3, double t) {
    double aa = (std::pow(t - 3.0, 3) + 27.0) / 3.0;
    double bb = std::sin(t) - t * std::cos(t) - 3.0 + 3.0 * std::cos(t);
    double cc = 0.5 * t - 0.25 * std::sin(2.0 * t);
    return b1 * b1 * aa + 2.0 * b1 * b3 * bb + b3 * b3 * cc;
}

}  // namespace detail

// Regression-spline trajectories over [0,10]: three equispaced interior
// knots, visits every 0.5, one Bernoulli(0.5) survival covariate.
inline Dataset generate_case1(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.case_id != 1) throw config_error("generate_case1: config targets another case");
    const bool current = cfg.wiv == WivSpec::Kind::Current;
    const double gam = cfg.gamma.value_or(-2.0);
    const double a1 = cfg.alpha1.value_or(0.2);
    const double a2 = cfg.alpha2.value_or(0.3);
    const double shape = 3.0;
    const double ls = cfg.baseline_log_scale.value_or(current ? -7.0 : -8.0);

    TrajectoryModel traj = TrajectoryModel::rspline(KnotConfig::cubic_with_interior(0.0, 10.0, {2.5, 5.0, 7.5}));
    Eigen::VectorXd beta(7), sd(7);
    beta << 6.0, 3.0, 7.0, 1.0, 8.0, 5.0, 4.0;
    sd << std::sqrt(3.0), 2.0, 2.0, std::sqrt(5.0), 2.0, std::sqrt(3.0), 2.0;
    const WivSpec wspec = current ? WivSpec::current() : WivSpec::cumulative();

    Rng rng = Rng::fork(cfg.seed, 1);
    detail::ScenarioBuild b;
    b.surv_names = {"w"};

    for (int i = 0; i < cfg.n; ++i) {
        double w = double(rng.bernoulli(0.5));
        Eigen::VectorXd bi(7);
        for (int k = 0; k < 7; ++k) bi[k] = sd[k] * rng.normal();

        auto hazard = [&](double t) {
            double lh = detail::weibull_log_h0(shape, ls, t) + gam * w + a1 * traj.eval_mu(beta, bi, t) +
                        a2 * traj.eval_wiv(beta, bi, wspec, t);
            return std::exp(lh);
        };
        double tev = sample_event_time(hazard, 0.0, 10.0, rng);
        double cens = std::min(rng.uniform(6.0, 15.0), 10.0);
        double exit = std::min(tev, cens);
        int event = tev <= cens ? 1 : 0;

        std::vector<double> times, values;
        for (int j = 0; 0.5 * j <= exit; ++j) {
            double t = 0.5 * j;
            times.push_back(t);
            values.push_back(traj.eval_mu(beta, bi, t) + rng.normal(0.0, 1.0));
        }
        b.add_subject(i + 1, 0.0, exit, event, Eigen::VectorXd::Constant(1, w), Eigen::VectorXd(0),
                      times, values);
    }
    return b.finish();
}

// Non-spline trajectories over [0,6]: cubic drift plus sinusoid with uniform
// subject loadings; visits every 0.4 up to 2, then every 0.5 from 2.5.
inline Dataset generate_case2(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.case_id != 2) throw config_error("generate_case2: config targets another case");
    const bool current = cfg.wiv == WivSpec::Kind::Current;
    const double gam = cfg.gamma.value_or(-1.0);
    const double a1 = cfg.alpha1.value_or(0.3);
    const double a2 = cfg.alpha2.value_or(0.3);
    const double shape = 3.0;
    const double ls = cfg.baseline_log_scale.value_or(current ? -6.5 : -7.5);

    static const std::vector<double> grid = {0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.5,
                                             3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0};

    Rng rng = Rng::fork(cfg.seed, 2);
    detail::ScenarioBuild b;
    b.surv_names = {"w"};

    for (int i = 0; i < cfg.n; ++i) {
        double w = double(rng.bernoulli(0.5));
        double b1 = rng.uniform(0.5, 2.0);
        double b2 = rng.uniform(4.0, 8.0);
        double b3 = rng.uniform(0.5, 1.5);

        auto mu = [&](double t) { return detail::case2_mu(b1, b2, b3, t); };
        auto wiv = [&](double t) {
            return current ? std::fabs(detail::case2_mudd(b1, b3, t))
                           : std::sqrt(std::max(0.0, detail::case2_cum_qf(b1, b3, t)));
        };
        auto hazard = [&](double t) {
            return std::exp(detail::weibull_log_h0(shape, ls, t) + gam * w + a1 * mu(t) + a2 * wiv(t));
        };
        double tev = sample_event_time(hazard, 0.0, 6.0, rng);
        double cens = std::min(rng.uniform(3.0, 10.0), 6.0);
        double exit = std::min(tev, cens);
        int event = tev <= cens ? 1 : 0;

        std::vector<double> times, values;
        for (double t : grid) {
            if (t > exit) break;
            times.push_back(t);
            values.push_back(mu(t) + rng.normal(0.0, 0.4));
        }
        b.add_subject(i + 1, 0.0, exit, event, Eigen::VectorXd::Constant(1, w), Eigen::VectorXd(0),
                      times, values);
    }
    return b.finish();
}

// Generating model for the registry-style design: a fitted single-knot cubic
// joint model shipped as a versioned fixture.
struct Case3Fixture {
    KnotConfig traj_knots, hazard_knots;
    Eigen::VectorXd traj_coef, ranef_sd;
    double sigma_e2 = 0.0;
    double entry_meanlog = 0.0, entry_sdlog = 1.0, entry_upper = 0.0;
    double p_diagnosis = 0.0, p_genotype = 0.0;
    struct Variant {
        Eigen::VectorXd beta_l, gamma, log_hazard_coef;
        double alpha1 = 0.0, alpha2 = 0.0;
    };
    Variant current, cumulative;

    static Case3Fixture load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("case 3 generator fit not found: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error("case 3 fixture unreadable: " + std::string(e.what()));
        }
        try {
            Case3Fixture fx;
            auto vec = [](const nlohmann::json& a) {
                Eigen::VectorXd v(a.size());
                for (std::size_t k = 0; k < a.size(); ++k) v[Eigen::Index(k)] = a[k].get<double>();
                return v;
            };
            double lo = j.at("time_domain").at(0).get<double>();
            double hi = j.at("time_domain").at(1).get<double>();
            fx.traj_knots = KnotConfig::cubic_with_interior(
                lo, hi, j.at("trajectory_interior_knots").get<std::vector<double>>());
            fx.hazard_knots = KnotConfig::cubic_with_interior(
                lo, hi, j.at("hazard_interior_knots").get<std::vector<double>>());
            fx.traj_coef = vec(j.at("traj_coef"));
            fx.ranef_sd = vec(j.at("ranef_sd"));
            fx.sigma_e2 = j.at("sigma_e2").get<double>();
            fx.entry_meanlog = j.at("entry").at("meanlog").get<double>();
            fx.entry_sdlog = j.at("entry").at("sdlog").get<double>();
            fx.entry_upper = j.at("entry").at("upper").get<double>();
            fx.p_diagnosis = j.at("covariates").at("p_diagnosis").get<double>();
            fx.p_genotype = j.at("covariates").at("p_genotype").get<double>();
            auto read_variant = [&](const char* key) {
                Variant v;
                const auto& jv = j.at(key);
                v.beta_l = vec(jv.at("beta_l"));
                v.gamma = vec(jv.at("gamma"));
                v.log_hazard_coef = vec(jv.at("log_hazard_coef"));
                v.alpha1 = jv.at("alpha1").get<double>();
                v.alpha2 = jv.at("alpha2").get<double>();
                if (v.beta_l.size() != 3 || v.gamma.size() != 3)
                    throw config_error("case 3 fixture: expected three covariate effects");
                return v;
            };
            fx.current = read_variant("current");
            fx.cumulative = read_variant("cumulative");
            if (fx.traj_coef.size() != fx.traj_knots.size() || fx.ranef_sd.size() != fx.traj_coef.size())
                throw config_error("case 3 fixture: trajectory coefficient size mismatch");
            if (fx.current.log_hazard_coef.size() != fx.hazard_knots.size() ||
                fx.cumulative.log_hazard_coef.size() != fx.hazard_knots.size())
                throw config_error("case 3 fixture: hazard coefficient size mismatch");
            if (!(fx.entry_upper > 0.0) || fx.sigma_e2 <= 0.0)
                throw config_error("case 3 fixture: nonpositive entry bound or noise variance");
            return fx;
        } catch (const nlohmann::json::exception& e) {
            throw config_error("case 3 fixture malformed: " + std::string(e.what()));
        }
    }
};

// Registry-style design: delayed entry from a truncated log-normal, three
// baseline covariates shared by both submodels, irregular visits, censoring
// entry + U(3,28) with an administrative cap at the domain end.
inline Dataset generate_case3(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.case_id != 3) throw config_error("generate_case3: config targets another case");
    const Case3Fixture fx = Case3Fixture::load(cfg.fixture_path);
    const bool current = cfg.wiv == WivSpec::Kind::Current;
    const Case3Fixture::Variant& v = current ? fx.current : fx.cumulative;
    const double a1 = cfg.alpha1.value_or(v.alpha1);
    const double a2 = cfg.null_alpha2 ? 0.0 : cfg.alpha2.value_or(v.alpha2);
    const double cap = fx.traj_knots.hi;
    const double sig_e = std::sqrt(fx.sigma_e2);

    TrajectoryModel traj = TrajectoryModel::rspline(fx.traj_knots);
    const WivSpec wspec = current ? WivSpec::current() : WivSpec::cumulative();

    Rng rng = Rng::fork(cfg.seed, 3);
    detail::ScenarioBuild b;
    b.surv_names = {"diagnosis", "genotype", "entry_age10"};
    b.long_names = b.surv_names;

    for (int i = 0; i < cfg.n; ++i) {
        double entry;
        do {
            entry = rng.lognormal(fx.entry_meanlog, fx.entry_sdlog);
        } while (entry >= fx.entry_upper);
        Eigen::VectorXd cov(3);
        cov << double(rng.bernoulli(fx.p_diagnosis)), double(rng.bernoulli(fx.p_genotype)), entry / 10.0;

        Eigen::VectorXd bi(fx.ranef_sd.size());
        for (Eigen::Index k = 0; k < bi.size(); ++k) bi[k] = fx.ranef_sd[k] * rng.normal();

        double fixed = v.beta_l.dot(cov);
        auto hazard = [&](double t) {
            double lh = eval_spline(fx.hazard_knots, v.log_hazard_coef, t) + v.gamma.dot(cov) +
                        a1 * (fixed + traj.eval_mu(fx.traj_coef, bi, t)) +
                        a2 * traj.eval_wiv(fx.traj_coef, bi, wspec, t);
            return std::exp(lh);
        };
        double tev = sample_event_time(hazard, entry, cap, rng);
        double cens = std::min(entry + rng.uniform(3.0, 28.0), cap);
        double exit = std::min(tev, cens);
        int event = tev <= cens ? 1 : 0;

        std::vector<double> times, values;
        for (double t = entry; t <= exit; t += rng.uniform(0.9, 1.6)) {
            times.push_back(t);
            values.push_back(fixed + traj.eval_mu(fx.traj_coef, bi, t) + rng.normal(0.0, sig_e));
        }
        b.add_subject(i + 1, entry, exit, event, cov, cov, times, values);
    }
    return b.finish();
}

inline Dataset generate_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    switch (cfg.case_id) {
        case 1: return generate_case1(cfg);
        case 2: return generate_case2(cfg);
        default: return generate_case3(cfg);
    }
}

}  // namespace wivjm

#endif
