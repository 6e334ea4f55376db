#ifndef WIVJM_REPORT_HPP
#define WIVJM_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <wivjm/errors.hpp>
#include <wivjm/psis.hpp>

// Replication-study reporting: bias/coverage tables across replicates and
// pairwise predictive comparisons on paired pointwise elpd.

namespace wivjm {

struct ParamSummary {
    std::string name;
    double mean = 0.0;
    double lo = 0.0;  // 2.5% quantile
    double hi = 0.0;  // 97.5% quantile
};

struct ReplicationResult {
    int replicate = 0;
    std::string approach;
    std::vector<ParamSummary> params;
    double looic = 0.0;
    double looic_se = 0.0;
    double max_khat = 0.0;
};

struct BiasCpRow {
    std::string approach;
    std::string param;
    int n_reps = 0;
    double bias = 0.0;
    double cp = 0.0;  // fraction of replicates whose interval covers truth
};

// Mean posterior-mean bias and 95% interval coverage per (approach, parameter),
// rows ordered by first appearance.
inline std::vector<BiasCpRow> bias_cp_table(const std::vector<ReplicationResult>& results,
                                            const std::map<std::string, double>& truth) {
    if (results.empty()) throw std::invalid_argument("bias_cp_table: no replicates");
    std::vector<BiasCpRow> rows;
    auto row_for = [&](const std::string& approach, const std::string& param) -> BiasCpRow& {
        for (auto& r : rows)
            if (r.approach == approach && r.param == param) return r;
        rows.push_back({approach, param, 0, 0.0, 0.0});
        return rows.back();
    };
    for (const ReplicationResult& rr : results) {
        for (const ParamSummary& p : rr.params) {
            auto it = truth.find(p.name);
            if (it == truth.end())
                throw std::invalid_argument("bias_cp_table: no true value for parameter " + p.name);
            if (!(p.lo <= p.hi)) throw std::invalid_argument("bias_cp_table: interval lower bound above upper");
            BiasCpRow& row = row_for(rr.approach, p.name);
            row.n_reps += 1;
            row.bias += p.mean - it->second;
            row.cp += (p.lo <= it->second && it->second <= p.hi) ? 1.0 : 0.0;
        }
    }
    for (auto& r : rows) {
        r.bias /= r.n_reps;
        r.cp /= r.n_reps;
    }
    return rows;
}

struct LooComparison {
    double d_elpd = 0.0;   // A minus B
    double se = 0.0;       // paired SE of the elpd difference
    double d_looic = 0.0;  // -2 * d_elpd
    double z = 0.0;        // d_looic / (2 * se); 0 when the difference is degenerate
};

// Paired comparison of two fits' pointwise elpd on the same subjects.
inline LooComparison compare_loo(const LooResult& a, const LooResult& b) {
    const int n = int(a.elpd_i.size());
    if (n != int(b.elpd_i.size())) throw std::invalid_argument("compare_loo: subject sets differ");
    Eigen::VectorXd d = a.elpd_i - b.elpd_i;
    LooComparison out;
    out.d_elpd = d.sum();
    if (n > 1) {
        double mean = out.d_elpd / n;
        out.se = std::sqrt(double(n) * (d.array() - mean).square().sum() / (n - 1));
    }
    out.d_looic = -2.0 * out.d_elpd;
    out.z = out.se > 0.0 ? out.d_looic / (2.0 * out.se) : 0.0;
    return out;
}

// Wide table mirroring the replication summaries: one row per parameter,
// bias and CP columns per approach (approaches ordered by first appearance).
inline void write_bias_cp_csv(std::ostream& os, const std::vector<BiasCpRow>& rows) {
    std::vector<std::string> approaches, params;
    for (const auto& r : rows) {
        if (std::find(approaches.begin(), approaches.end(), r.approach) == approaches.end())
            approaches.push_back(r.approach);
        if (std::find(params.begin(), params.end(), r.param) == params.end()) params.push_back(r.param);
    }
    os << "parameter";
    for (const auto& a : approaches) os << "," << a << "_bias," << a << "_cp";
    os << "\n";
    os.precision(10);
    for (const auto& p : params) {
        os << p;
        for (const auto& a : approaches) {
            const BiasCpRow* hit = nullptr;
            for (const auto& r : rows)
                if (r.approach == a && r.param == p) hit = &r;
            if (hit)
                os << "," << hit->bias << "," << hit->cp;
            else
                os << ",,";
        }
        os << "\n";
    }
}

// Long format for distribution plots: one row per (replicate, approach).
inline void write_looic_long_csv(std::ostream& os, const std::vector<ReplicationResult>& results) {
    os << "replicate,approach,looic,looic_se,max_khat\n";
    os.precision(10);
    for (const auto& r : results)
        os << r.replicate << "," << r.approach << "," << r.looic << "," << r.looic_se << "," << r.max_khat
           << "\n";
}

}  // namespace wivjm

#endif
