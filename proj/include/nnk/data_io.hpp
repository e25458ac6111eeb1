#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace nnk {

/// Regression dataset with optional standardization statistics.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> columns;  // feature names, if known
    std::string target_name;
    Eigen::VectorXd x_mean, x_std;  // empty until standardized
    double y_mean = 0.0, y_std = 1.0;
    std::string provenance;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }
};

namespace detail {

// Splits one CSV record; quoted fields may contain commas and doubled quotes.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(lineno) + ": unterminated quoted field");
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline bool is_missing(const std::string& s) {
    std::string t = s;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    return t.empty() || t == "na" || t == "nan" || t == "?" || t == "null";
}

}  // namespace detail

/// Reads a numeric CSV table. `target` is a column name (with a header) or an
/// integer index; negative indices count from the end.
inline Dataset load_csv(const std::string& path, const std::string& target, bool has_header = true) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_csv: cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line, lineno);
        if (has_header && header.empty()) {
            for (auto& f : fields) header.push_back(detail::trim(f));
            continue;
        }
        const std::size_t width = header.empty() ? (rows.empty() ? fields.size() : rows.front().size()) : header.size();
        if (fields.size() != width)
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                             " fields, found " + std::to_string(fields.size()));
        std::vector<double> r;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string f = detail::trim(fields[j]);
            const std::string col = header.empty() ? std::to_string(j) : header[j];
            if (detail::is_missing(f))
                throw ParseError("line " + std::to_string(lineno) + ", column '" + col + "': missing value");
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(f, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != f.size() || !std::isfinite(v))
                throw ParseError("line " + std::to_string(lineno) + ", column '" + col + "': not a number: '" + f +
                                 "'");
            r.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ParseError("load_csv: no data rows in '" + path + "'");
    const long width = static_cast<long>(rows.front().size());
    if (width < 2) throw ParseError("load_csv: need at least one feature and one target column");

    long t = -1;
    if (!header.empty()) {
        const auto it = std::find(header.begin(), header.end(), target);
        if (it != header.end()) t = it - header.begin();
    }
    if (t < 0) {
        std::size_t used = 0;
        long idx = 0;
        try {
            idx = std::stol(target, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != target.size()) throw ParseError("load_csv: unknown target column '" + target + "'");
        t = idx < 0 ? width + idx : idx;
        if (t < 0 || t >= width) throw ParseError("load_csv: target column index out of range");
    }

    Dataset ds;
    ds.provenance = path;
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), width - 1);
    ds.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::Index c = 0;
        for (long j = 0; j < width; ++j) {
            if (j == t)
                ds.y[i] = rows[i][j];
            else
                ds.X(i, c++) = rows[i][j];
        }
    }
    for (long j = 0; j < width; ++j) {
        const std::string name = header.empty() ? "x" + std::to_string(j) : header[j];
        if (j == t)
            ds.target_name = name;
        else
            ds.columns.push_back(name);
    }
    return ds;
}

/// Centers and scales every feature column and the target to mean 0, variance 1
/// (population convention). Statistics are stored on the result.
inline Dataset standardize(const Dataset& ds) {
    const Eigen::Index n = ds.n();
    if (n < 2) throw DomainError("standardize: need at least two rows");
    Dataset out = ds;
    out.x_mean = ds.X.colwise().mean().transpose();
    out.x_std.resize(ds.d());
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
        const double sd = std::sqrt((ds.X.col(j).array() - out.x_mean[j]).square().sum() / static_cast<double>(n));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(out.x_mean[j]))))
            throw DomainError("standardize: constant column " +
                              (j < static_cast<Eigen::Index>(ds.columns.size()) ? "'" + ds.columns[j] + "'"
                                                                                 : std::to_string(j)));
        out.x_std[j] = sd;
        out.X.col(j) = (ds.X.col(j).array() - out.x_mean[j]) / sd;
    }
    out.y_mean = ds.y.mean();
    out.y_std = std::sqrt((ds.y.array() - out.y_mean).square().sum() / static_cast<double>(n));
    if (!(out.y_std > 1e-12 * std::max(1.0, std::abs(out.y_mean)))) throw DomainError("standardize: constant target");
    out.y = (ds.y.array() - out.y_mean) / out.y_std;
    return out;
}

/// Seeded permutation partition of 0..n-1 into (train, test).
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(Eigen::Index n, double train_frac,
                                                                                     std::uint64_t seed) {
    if (n < 2) throw DomainError("split: need at least two rows");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw DomainError("split: train fraction must lie in (0, 1)");
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 gen(seed);
    for (Eigen::Index i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<Eigen::Index> pick(0, i);
        std::swap(idx[i], idx[pick(gen)]);
    }
    const Eigen::Index ntr = std::clamp<Eigen::Index>(std::llround(train_frac * static_cast<double>(n)), 1, n - 1);
    std::vector<Eigen::Index> tr(idx.begin(), idx.begin() + ntr), te(idx.begin() + ntr, idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    return {tr, te};
}

inline Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
    Dataset out = ds;
    out.X = ds.X(rows, Eigen::all);
    out.y = ds.y(rows);
    return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
    const auto [tr, te] = split_indices(ds.n(), train_frac, seed);
    return {subset(ds, tr), subset(ds, te)};
}

/// Target functions of the unit-disc task, as functions of the heading gamma.
/// saw is the period-2 pi sawtooth (gamma mod 2 pi) / pi - 1; tan is clipped to [-50, 50].
inline double disc_target(const std::string& f, double g) {
    if (f == "sin") return std::sin(g);
    if (f == "saw") return 2.0 * (std::fmod(g, 2.0 * std::numbers::pi) / std::numbers::pi - 1.0) + 5.0;
    if (f == "cubic") return g * g * g - 4.0;
    if (f == "sinc") return g == 0.0 ? 1.0 : std::sin(g) / g;
    if (f == "expabs") return std::exp(std::abs(g - std::numbers::pi));
    if (f == "tan") return std::clamp(std::tan(g), -50.0, 50.0);
    throw DomainError("disc_task: unknown target function '" + f + "'");
}

/// N points on the unit circle at uniform headings with noisy targets f(gamma).
inline Dataset disc_task(const std::string& f, Eigen::Index N, double noise_var = 0.1, std::uint64_t seed = 0) {
    if (N < 1) throw DomainError("disc_task: N must be >= 1");
    if (!(noise_var >= 0.0)) throw DomainError("disc_task: noise variance must be non-negative");
    disc_target(f, 0.0);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> ug(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> nd(0.0, 1.0);
    Dataset ds;
    ds.X.resize(N, 2);
    ds.y.resize(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double g = ug(gen);
        const double e = nd(gen);
        ds.X(i, 0) = std::cos(g);
        ds.X(i, 1) = std::sin(g);
        ds.y[i] = disc_target(f, g) + std::sqrt(noise_var) * e;
    }
    ds.columns = {"cos_gamma", "sin_gamma"};
    ds.target_name = f;
    ds.provenance = "disc:" + f;
    return ds;
}

/// Headings of disc-task rows.
inline Eigen::VectorXd disc_headings(const Dataset& ds) {
    Eigen::VectorXd g(ds.n());
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        double a = std::atan2(ds.X(i, 1), ds.X(i, 0));
        g[i] = a < 0.0 ? a + 2.0 * std::numbers::pi : a;
    }
    return g;
}

}  // namespace nnk
