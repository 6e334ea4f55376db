#ifndef WIVJM_CSV_HPP
#define WIVJM_CSV_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wivjm/dataset.hpp"
#include "wivjm/errors.hpp"

namespace wivjm {
namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r')
            cur += c;
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& file, int lineno) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw data_error(file + ":" + std::to_string(lineno) + ": not a number: '" + s + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& file, int lineno) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw data_error(file + ":" + std::to_string(lineno) + ": not an integer: '" + s + "'");
    return v;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    Table t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto cells = split_line(line);
        if (lineno == 1) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw data_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw data_error(path + ": missing header row");
    return t;
}

inline void require_prefix(const Table& t, const std::vector<std::string>& prefix, const std::string& path) {
    if (t.header.size() < prefix.size()) throw data_error(path + ": header too short");
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (t.header[i] != prefix[i])
            throw data_error(path + ": expected column '" + prefix[i] + "', found '" + t.header[i] + "'");
}

struct LongitudinalTable {
    std::vector<LongitudinalRecord> records;
    Eigen::MatrixXd cov;
    std::vector<std::string> cov_names;
};

struct SurvivalTable {
    std::vector<SurvivalRecord> records;
    Eigen::MatrixXd cov;
    std::vector<std::string> cov_names;
};

// schema: subject,time,value,cov...
inline LongitudinalTable read_longitudinal(const std::string& path) {
    Table t = read_table(path);
    require_prefix(t, {"subject", "time", "value"}, path);
    LongitudinalTable out;
    out.cov_names.assign(t.header.begin() + 3, t.header.end());
    int p = int(out.cov_names.size());
    out.cov.resize(int(t.rows.size()), p);
    out.records.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        int lineno = int(r) + 2;
        const auto& row = t.rows[r];
        LongitudinalRecord rec;
        rec.subject = parse_int(row[0], path, lineno);
        rec.time = parse_double(row[1], path, lineno);
        rec.value = parse_double(row[2], path, lineno);
        out.records.push_back(rec);
        for (int j = 0; j < p; ++j) out.cov(int(r), j) = parse_double(row[std::size_t(3 + j)], path, lineno);
    }
    return out;
}

// schema: subject,entry,exit,event,cov...
inline SurvivalTable read_survival(const std::string& path) {
    Table t = read_table(path);
    require_prefix(t, {"subject", "entry", "exit", "event"}, path);
    SurvivalTable out;
    out.cov_names.assign(t.header.begin() + 4, t.header.end());
    int q = int(out.cov_names.size());
    out.cov.resize(int(t.rows.size()), q);
    out.records.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        int lineno = int(r) + 2;
        const auto& row = t.rows[r];
        SurvivalRecord rec;
        rec.subject = parse_int(row[0], path, lineno);
        rec.entry = parse_double(row[1], path, lineno);
        rec.exit_time = parse_double(row[2], path, lineno);
        double ev = parse_double(row[3], path, lineno);
        if (ev != 0.0 && ev != 1.0) throw data_error(path + ":" + std::to_string(lineno) + ": event must be 0 or 1");
        rec.event = int(ev);
        out.records.push_back(rec);
        for (int j = 0; j < q; ++j) out.cov(int(r), j) = parse_double(row[std::size_t(4 + j)], path, lineno);
    }
    return out;
}

inline Dataset read_dataset(const std::string& long_path, const std::string& surv_path) {
    LongitudinalTable lt = read_longitudinal(long_path);
    SurvivalTable st = read_survival(surv_path);
    return assemble_dataset(st.records, st.cov, st.cov_names, lt.records, lt.cov, lt.cov_names);
}

// full-precision, locale-independent number formatting for round-trips
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_longitudinal(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "subject,time,value";
    for (const auto& nm : ds.cov_long_names) out << ',' << nm;
    out << '\n';
    for (int k = 0; k < ds.n_obs(); ++k) {
        int i = ds.obs_subject[std::size_t(k)];
        out << ds.id[std::size_t(i)] << ',' << fmt(ds.obs_time[k]) << ',' << fmt(ds.obs_value[k]);
        for (int j = 0; j < ds.cov_long.cols(); ++j) out << ',' << fmt(ds.cov_long(i, j));
        out << '\n';
    }
}

inline void write_survival(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "subject,entry,exit,event";
    for (const auto& nm : ds.cov_surv_names) out << ',' << nm;
    out << '\n';
    for (int i = 0; i < ds.n(); ++i) {
        out << ds.id[std::size_t(i)] << ',' << fmt(ds.entry[i]) << ',' << fmt(ds.exit_time[i]) << ',' << ds.event[i];
        for (int j = 0; j < ds.cov_surv.cols(); ++j) out << ',' << fmt(ds.cov_surv(i, j));
        out << '\n';
    }
}

}  // namespace csv
}  // namespace wivjm

#endif
