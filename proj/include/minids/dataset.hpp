#ifndef MINIDS_DATASET_HPP
#define MINIDS_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "minids/features.hpp"

namespace minids {

struct column_count_mismatch : error {
    explicit column_count_mismatch(const std::string& what) : error(what) {}
};
struct unparsable_number : error {
    explicit unparsable_number(const std::string& what) : error(what) {}
};
struct empty_file : error {
    explicit empty_file(const std::string& what) : error(what) {}
};
struct empty_dataset : error {
    explicit empty_dataset(const std::string& what) : error(what) {}
};
struct dimension_mismatch : error {
    explicit dimension_mismatch(const std::string& what) : error(what) {}
};
struct too_few_samples : error {
    explicit too_few_samples(const std::string& what) : error(what) {}
};

struct NormParams {
    std::vector<double> min;
    std::vector<double> max;
};

struct LabeledDataset {
    std::string schema_id;
    std::vector<std::string> feature_names;
    std::vector<FeatureVector> X;
    std::vector<int> y; // label_benign or label_malicious
    std::optional<NormParams> norm_params;

    size_t size() const { return X.size(); }
    size_t dim() const { return X.empty() ? feature_names.size() : X[0].size(); }
};

enum class csv_format { nsl_kdd, generic };

namespace detail {

inline const std::vector<std::string>& nslkdd_feature_names() {
    static const std::vector<std::string> names = {
        "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
        "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
        "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
        "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
        "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
        "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
        "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
        "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
        "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
    };
    return names;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    for (std::string& s : cells) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }
    return cells;
}

inline bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size() && std::isfinite(out);
    } catch (...) {
        return false;
    }
}

inline double require_number(const std::string& s, size_t row, size_t col) {
    double v;
    if (!parse_number(s, v))
        throw unparsable_number("row " + std::to_string(row) + ", column " +
                                std::to_string(col + 1) + ": cannot parse '" + s + "'");
    return v;
}

} // namespace detail

// Loads a labeled CSV. nsl_kdd expects 41 features + label (+ optional
// difficulty, ignored); the three symbolic columns are integer-coded in order
// of first appearance and any label other than "normal" is malicious.
// generic expects all-numeric columns with the label last (-1/+1 or 0/1); a
// header row is detected by failing to parse as numbers.
inline LabeledDataset load_labeled_csv(const std::string& path, csv_format format) {
    std::ifstream in(path);
    if (!in) throw empty_file("cannot open " + path);

    std::vector<std::pair<size_t, std::vector<std::string>>> rows; // (line number, cells)
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        rows.emplace_back(lineno, detail::split_csv_row(line));
    }

    LabeledDataset ds;

    if (format == csv_format::nsl_kdd) {
        if (rows.empty()) throw empty_file(path + " has no data rows");
        ds.schema_id = "nslkdd-v1";
        ds.feature_names = detail::nslkdd_feature_names();
        // symbolic column -> (value -> first-appearance index)
        std::map<size_t, std::map<std::string, double>> symbolic;
        for (const auto& [row_no, cells] : rows) {
            if (cells.size() != 42 && cells.size() != 43)
                throw column_count_mismatch("row " + std::to_string(row_no) + ": expected 42 or " +
                                            "43 columns, found " + std::to_string(cells.size()));
            FeatureVector v(41);
            for (size_t c = 0; c < 41; ++c) {
                if (c >= 1 && c <= 3) { // protocol_type, service, flag
                    auto& codes = symbolic[c];
                    const auto it = codes.find(cells[c]);
                    if (it != codes.end()) {
                        v[c] = it->second;
                    } else {
                        const double code = double(codes.size());
                        codes.emplace(cells[c], code);
                        v[c] = code;
                    }
                } else {
                    v[c] = detail::require_number(cells[c], row_no, c);
                }
            }
            ds.X.push_back(std::move(v));
            ds.y.push_back(cells[41] == "normal" ? label_benign : label_malicious);
        }
        return ds;
    }

    // generic format
    size_t start = 0;
    std::vector<std::string> header;
    if (!rows.empty()) {
        bool numeric = true;
        double tmp;
        for (const std::string& cell : rows[0].second)
            if (!detail::parse_number(cell, tmp)) {
                numeric = false;
                break;
            }
        if (!numeric) {
            header = rows[0].second;
            start = 1;
        }
    }
    if (rows.size() <= start) throw empty_file(path + " has no data rows");

    const size_t ncols = rows[start].second.size();
    if (ncols < 2)
        throw column_count_mismatch("row " + std::to_string(rows[start].first) +
                                    ": need at least one feature plus a label");
    ds.schema_id = "generic-csv";
    if (!header.empty()) {
        if (header.size() != ncols)
            throw column_count_mismatch("header has " + std::to_string(header.size()) +
                                        " columns but data rows have " + std::to_string(ncols));
        ds.feature_names.assign(header.begin(), header.end() - 1);
    } else {
        for (size_t i = 0; i + 1 < ncols; ++i) ds.feature_names.push_back("f" + std::to_string(i));
    }

    for (size_t r = start; r < rows.size(); ++r) {
        const auto& [row_no, cells] = rows[r];
        if (cells.size() != ncols)
            throw column_count_mismatch("row " + std::to_string(row_no) + ": expected " +
                                        std::to_string(ncols) + " columns, found " +
                                        std::to_string(cells.size()));
        FeatureVector v(ncols - 1);
        for (size_t c = 0; c + 1 < ncols; ++c)
            v[c] = detail::require_number(cells[c], row_no, c);
        const double lab = detail::require_number(cells[ncols - 1], row_no, ncols - 1);
        int y;
        if (lab == -1.0 || lab == 0.0) y = label_benign;
        else if (lab == 1.0) y = label_malicious;
        else
            throw unparsable_number("row " + std::to_string(row_no) +
                                    ": label must be -1/+1 or 0/1, found " + cells[ncols - 1]);
        ds.X.push_back(std::move(v));
        ds.y.push_back(y);
    }
    return ds;
}

inline NormParams fit_minmax(const LabeledDataset& ds) {
    if (ds.X.empty()) throw empty_dataset("cannot fit normalization on an empty dataset");
    const size_t d = ds.X[0].size();
    NormParams p;
    p.min.assign(d, 0.0);
    p.max.assign(d, 0.0);
    for (size_t j = 0; j < d; ++j) p.min[j] = p.max[j] = ds.X[0][j];
    for (const FeatureVector& v : ds.X) {
        if (v.size() != d) throw dimension_mismatch("ragged dataset");
        for (size_t j = 0; j < d; ++j) {
            p.min[j] = std::min(p.min[j], v[j]);
            p.max[j] = std::max(p.max[j], v[j]);
        }
    }
    return p;
}

// (x - min) / (max - min), clamped into [0,1]; constant columns map to 0.
inline FeatureVector apply_minmax(const NormParams& p, const FeatureVector& v) {
    if (v.size() != p.min.size())
        throw dimension_mismatch("vector has " + std::to_string(v.size()) +
                                 " features, params have " + std::to_string(p.min.size()));
    FeatureVector out(v.size());
    for (size_t j = 0; j < v.size(); ++j) {
        const double range = p.max[j] - p.min[j];
        if (range <= 0.0) {
            out[j] = 0.0;
        } else {
            out[j] = std::clamp((v[j] - p.min[j]) / range, 0.0, 1.0);
        }
    }
    return out;
}

inline LabeledDataset apply_minmax(const NormParams& p, const LabeledDataset& ds) {
    LabeledDataset out = ds;
    for (FeatureVector& v : out.X) v = apply_minmax(p, v);
    out.norm_params = p;
    return out;
}

struct fold_split {
    std::vector<size_t> train;
    std::vector<size_t> test;
};

// Stratified k-fold. Indices are shuffled per class, then dealt round-robin
// with the fold pointer carried across classes, which keeps both the overall
// and the per-class fold sizes within one of each other.
inline std::vector<fold_split> stratified_kfold(const LabeledDataset& ds, size_t k,
                                                uint64_t seed) {
    if (k < 2) throw too_few_samples("k must be at least 2");
    std::vector<size_t> benign, malicious;
    for (size_t i = 0; i < ds.y.size(); ++i)
        (ds.y[i] == label_benign ? benign : malicious).push_back(i);
    for (const auto* cls : {&benign, &malicious}) {
        if (!cls->empty() && cls->size() < k)
            throw too_few_samples("a class has " + std::to_string(cls->size()) +
                                  " samples, fewer than k=" + std::to_string(k));
    }
    if (ds.y.size() < k) throw too_few_samples("dataset smaller than k");

    std::vector<std::vector<size_t>> folds(k);
    size_t next_fold = 0;
    size_t class_idx = 0;
    for (auto* cls : {&benign, &malicious}) {
        rng_t rng(derive_seed(seed, class_idx++));
        std::vector<size_t>& idx = *cls;
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
        for (size_t i : idx) {
            folds[next_fold].push_back(i);
            next_fold = (next_fold + 1) % k;
        }
    }

    std::vector<fold_split> out(k);
    std::vector<char> in_test(ds.y.size());
    for (size_t f = 0; f < k; ++f) {
        std::fill(in_test.begin(), in_test.end(), 0);
        for (size_t i : folds[f]) in_test[i] = 1;
        for (size_t i = 0; i < ds.y.size(); ++i)
            (in_test[i] ? out[f].test : out[f].train).push_back(i);
    }
    return out;
}

} // namespace minids

#endif
