#ifndef WIVJM_DATASET_HPP
#define WIVJM_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wivjm/errors.hpp"

namespace wivjm {

struct LongitudinalRecord {
    std::int64_t subject = 0;
    double time = 0.0;
    double value = 0.0;
};

struct SurvivalRecord {
    std::int64_t subject = 0;
    double entry = 0.0;
    double exit_time = 0.0;
    int event = 0;
};

// One study: survival row per subject plus sparse longitudinal observations,
// all indexed by a dense subject index 0..n-1 (original ids kept for I/O).
// Longitudinal observations are stored sorted by (subject, time) with a
// per-subject [first, last) span so likelihood code can walk them directly.
struct Dataset {
    std::vector<std::int64_t> id;
    Eigen::VectorXd entry;
    Eigen::VectorXd exit_time;
    Eigen::VectorXi event;
    Eigen::MatrixXd cov_surv;  // n x q baseline survival covariates
    Eigen::MatrixXd cov_long;  // n x p baseline longitudinal covariates
    std::vector<std::string> cov_surv_names;
    std::vector<std::string> cov_long_names;

    std::vector<int> obs_subject;
    Eigen::VectorXd obs_time;
    Eigen::VectorXd obs_value;
    std::vector<std::pair<int, int>> obs_span;

    int n() const { return int(id.size()); }
    int n_obs() const { return int(obs_time.size()); }
    int n_events() const { return event.sum(); }

    // observation domain: trajectories are anchored at time zero
    std::pair<double, double> time_domain() const {
        double hi = 0.0;
        if (exit_time.size() > 0) hi = exit_time.maxCoeff();
        if (obs_time.size() > 0) hi = std::max(hi, obs_time.maxCoeff());
        if (!(hi > 0.0)) throw data_error("dataset: empty time domain");
        return {0.0, hi};
    }

    void validate() const {
        if (id.empty()) throw data_error("dataset: no subjects");
        for (int i = 0; i < n(); ++i) {
            if (!std::isfinite(entry[i]) || !std::isfinite(exit_time[i]))
                throw data_error("dataset: non-finite entry/exit for subject " + std::to_string(id[std::size_t(i)]));
            if (entry[i] < 0.0) throw data_error("dataset: negative entry time for subject " + std::to_string(id[std::size_t(i)]));
            if (exit_time[i] < entry[i])
                throw data_error("dataset: exit before entry for subject " + std::to_string(id[std::size_t(i)]));
            if (event[i] != 0 && event[i] != 1)
                throw data_error("dataset: event flag not 0/1 for subject " + std::to_string(id[std::size_t(i)]));
        }
        if (!cov_surv.allFinite() || !cov_long.allFinite()) throw data_error("dataset: non-finite covariate");
        for (int k = 0; k < n_obs(); ++k) {
            int i = obs_subject[std::size_t(k)];
            if (!std::isfinite(obs_time[k]) || !std::isfinite(obs_value[k]))
                throw data_error("dataset: non-finite observation for subject " + std::to_string(id[std::size_t(i)]));
            if (obs_time[k] < 0.0) throw data_error("dataset: negative observation time");
            if (obs_time[k] > exit_time[i] + 1e-12)
                throw data_error("dataset: observation after exit for subject " + std::to_string(id[std::size_t(i)]));
        }
        for (int i = 0; i < n(); ++i) {
            auto [lo, hi] = obs_span[std::size_t(i)];
            for (int k = lo + 1; k < hi; ++k) {
                if (!(obs_time[k] > obs_time[k - 1]))
                    throw data_error("dataset: duplicate observation time for subject " + std::to_string(id[std::size_t(i)]));
            }
        }
    }
};

// Dense-index assembly from raw records. Covariates arrive row-aligned with
// the records; longitudinal covariates are baseline values repeated per row
// and must be constant within subject.
inline Dataset assemble_dataset(const std::vector<SurvivalRecord>& surv, const Eigen::MatrixXd& surv_cov,
                                const std::vector<std::string>& surv_cov_names,
                                const std::vector<LongitudinalRecord>& lng, const Eigen::MatrixXd& long_cov,
                                const std::vector<std::string>& long_cov_names) {
    if (surv.empty()) throw data_error("dataset: survival table is empty");
    if (int(surv.size()) != surv_cov.rows() || int(lng.size()) != long_cov.rows())
        throw data_error("dataset: covariate rows do not match record count");

    std::vector<int> order(surv.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return surv[std::size_t(a)].subject < surv[std::size_t(b)].subject; });

    Dataset ds;
    int n = int(surv.size());
    ds.id.resize(std::size_t(n));
    ds.entry.resize(n);
    ds.exit_time.resize(n);
    ds.event.resize(n);
    ds.cov_surv.resize(n, surv_cov.cols());
    ds.cov_surv_names = surv_cov_names;
    ds.cov_long_names = long_cov_names;
    for (int r = 0; r < n; ++r) {
        const SurvivalRecord& s = surv[std::size_t(order[std::size_t(r)])];
        if (r > 0 && s.subject == ds.id[std::size_t(r - 1)])
            throw data_error("dataset: duplicate survival row for subject " + std::to_string(s.subject));
        ds.id[std::size_t(r)] = s.subject;
        ds.entry[r] = s.entry;
        ds.exit_time[r] = s.exit_time;
        ds.event[r] = s.event;
        ds.cov_surv.row(r) = surv_cov.row(order[std::size_t(r)]);
    }

    auto subject_index = [&](std::int64_t sid) {
        auto it = std::lower_bound(ds.id.begin(), ds.id.end(), sid);
        if (it == ds.id.end() || *it != sid)
            throw data_error("dataset: longitudinal subject " + std::to_string(sid) + " missing from survival table");
        return int(it - ds.id.begin());
    };

    std::vector<int> lorder(lng.size());
    std::iota(lorder.begin(), lorder.end(), 0);
    std::vector<int> lsubj(lng.size());
    for (std::size_t k = 0; k < lng.size(); ++k) lsubj[k] = subject_index(lng[k].subject);
    std::sort(lorder.begin(), lorder.end(), [&](int a, int b) {
        int sa = lsubj[std::size_t(a)], sb = lsubj[std::size_t(b)];
        if (sa != sb) return sa < sb;
        return lng[std::size_t(a)].time < lng[std::size_t(b)].time;
    });

    int m = int(lng.size());
    ds.obs_subject.resize(std::size_t(m));
    ds.obs_time.resize(m);
    ds.obs_value.resize(m);
    ds.cov_long = Eigen::MatrixXd::Zero(n, long_cov.cols());
    Eigen::VectorXi seen = Eigen::VectorXi::Zero(n);
    for (int k = 0; k < m; ++k) {
        int src = lorder[std::size_t(k)];
        int i = lsubj[std::size_t(src)];
        ds.obs_subject[std::size_t(k)] = i;
        ds.obs_time[k] = lng[std::size_t(src)].time;
        ds.obs_value[k] = lng[std::size_t(src)].value;
        if (!seen[i]) {
            ds.cov_long.row(i) = long_cov.row(src);
            seen[i] = 1;
        } else if ((ds.cov_long.row(i) - long_cov.row(src)).lpNorm<Eigen::Infinity>() > 0.0) {
            throw data_error("dataset: longitudinal covariates vary within subject " +
                             std::to_string(lng[std::size_t(src)].subject));
        }
    }
    ds.obs_span.assign(std::size_t(n), {0, 0});
    for (int i = 0, k = 0; i < n; ++i) {
        int lo = k;
        while (k < m && ds.obs_subject[std::size_t(k)] == i) ++k;
        ds.obs_span[std::size_t(i)] = {lo, k};
    }
    ds.validate();
    return ds;
}

}  // namespace wivjm

#endif
