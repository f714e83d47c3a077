#ifndef MINIDS_BASELINES_HPP
#define MINIDS_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "minids/dataset.hpp"

namespace minids {

// ---- Gaussian naive Bayes ----

// Keeps a zero-variance feature (constant within a class) from collapsing
// the density to a point mass.
constexpr double nb_variance_floor = 1e-9;

struct NbModel {
    double prior_benign = 0.5;
    double prior_malicious = 0.5;
    std::vector<double> mean_benign, var_benign;
    std::vector<double> mean_malicious, var_malicious;
    NormParams norm_params; // empty vectors mean "inputs used raw"
    std::string schema_id;
    std::vector<std::string> feature_names;
};

inline NbModel train_naive_bayes(const LabeledDataset& ds) {
    const size_t n = ds.size(), d = ds.dim();
    size_t n_ben = 0;
    for (int label : ds.y)
        if (label == label_benign) ++n_ben;
    const size_t n_mal = n - n_ben;
    if (n_ben == 0 || n_mal == 0)
        throw single_class("training data must contain both classes");
    for (const FeatureVector& v : ds.X)
        if (v.size() != d) throw dimension_mismatch("ragged dataset");

    NbModel m;
    m.prior_benign = double(n_ben) / double(n);
    m.prior_malicious = double(n_mal) / double(n);
    m.mean_benign.assign(d, 0.0);
    m.mean_malicious.assign(d, 0.0);
    m.var_benign.assign(d, 0.0);
    m.var_malicious.assign(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
        std::vector<double>& mean = ds.y[i] == label_benign ? m.mean_benign : m.mean_malicious;
        for (size_t f = 0; f < d; ++f) mean[f] += ds.X[i][f];
    }
    for (size_t f = 0; f < d; ++f) {
        m.mean_benign[f] /= double(n_ben);
        m.mean_malicious[f] /= double(n_mal);
    }
    for (size_t i = 0; i < n; ++i) {
        const bool ben = ds.y[i] == label_benign;
        const std::vector<double>& mean = ben ? m.mean_benign : m.mean_malicious;
        std::vector<double>& var = ben ? m.var_benign : m.var_malicious;
        for (size_t f = 0; f < d; ++f) {
            const double diff = ds.X[i][f] - mean[f];
            var[f] += diff * diff;
        }
    }
    for (size_t f = 0; f < d; ++f) {
        m.var_benign[f] = std::max(m.var_benign[f] / double(n_ben), nb_variance_floor);
        m.var_malicious[f] = std::max(m.var_malicious[f] / double(n_mal), nb_variance_floor);
    }
    m.schema_id = ds.schema_id;
    m.feature_names = ds.feature_names;
    if (ds.norm_params) m.norm_params = *ds.norm_params;
    return m;
}

namespace detail {

inline double nb_class_log_score(double prior, const std::vector<double>& mean,
                                 const std::vector<double>& var, const FeatureVector& x) {
    double s = std::log(prior);
    for (size_t f = 0; f < x.size(); ++f) {
        const double diff = x[f] - mean[f];
        s += -0.5 * std::log(2.0 * std::numbers::pi * var[f]) - diff * diff / (2.0 * var[f]);
    }
    return s;
}

} // namespace detail

// Argmax of log prior + sum of per-feature log Gaussian densities. An exact
// tie goes to benign.
inline int predict_nb(const NbModel& m, const FeatureVector& x) {
    if (x.size() != m.mean_benign.size())
        throw dimension_mismatch("input has " + std::to_string(x.size()) + " features, model has " +
                                 std::to_string(m.mean_benign.size()));
    const double sb = detail::nb_class_log_score(m.prior_benign, m.mean_benign, m.var_benign, x);
    const double sm =
        detail::nb_class_log_score(m.prior_malicious, m.mean_malicious, m.var_malicious, x);
    return sm > sb ? label_malicious : label_benign;
}

// Posterior P(malicious | x), the logistic of the class log-odds. Exactly 0.5
// when predict_nb sees a tie, so the two always agree about the 0.5 boundary.
inline double nb_prob_malicious(const NbModel& m, const FeatureVector& x) {
    if (x.size() != m.mean_benign.size())
        throw dimension_mismatch("input has " + std::to_string(x.size()) + " features, model has " +
                                 std::to_string(m.mean_benign.size()));
    const double sb = detail::nb_class_log_score(m.prior_benign, m.mean_benign, m.var_benign, x);
    const double sm =
        detail::nb_class_log_score(m.prior_malicious, m.mean_malicious, m.var_malicious, x);
    return 1.0 / (1.0 + std::exp(sb - sm));
}

// ---- CART decision tree ----

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = label_benign; // majority of the training rows that reached here
    size_t count_benign = 0, count_malicious = 0;
};

struct TreeModel {
    std::vector<TreeNode> nodes; // nodes[0] is the root, parents precede children
    size_t n_features = 0;
    int max_depth = 0, min_leaf = 1;
    NormParams norm_params;
    std::string schema_id;
    std::vector<std::string> feature_names;
};

namespace detail {

inline double gini_of(size_t ben, size_t mal) {
    const double n = double(ben + mal);
    if (n == 0.0) return 0.0;
    const double pb = double(ben) / n, pm = double(mal) / n;
    return 1.0 - pb * pb - pm * pm;
}

// Exhaustive search over midpoints of sorted distinct values in every
// feature. Returns false when no candidate both respects min_leaf and
// strictly lowers the weighted Gini impurity. First candidate wins ties
// (features in index order, thresholds ascending), so training is
// deterministic.
inline bool best_gini_split(const LabeledDataset& ds, const std::vector<size_t>& rows,
                            size_t min_leaf, size_t& out_feature, double& out_threshold) {
    size_t total_ben = 0, total_mal = 0;
    for (size_t r : rows) (ds.y[r] == label_benign ? total_ben : total_mal)++;
    double best = gini_of(total_ben, total_mal) - 1e-12;
    bool found = false;
    std::vector<size_t> order(rows);
    for (size_t f = 0; f < ds.dim(); ++f) {
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return ds.X[a][f] < ds.X[b][f]; });
        size_t left_ben = 0, left_mal = 0;
        for (size_t k = 0; k + 1 < order.size(); ++k) {
            (ds.y[order[k]] == label_benign ? left_ben : left_mal)++;
            const double v = ds.X[order[k]][f], next = ds.X[order[k + 1]][f];
            if (!(next > v)) continue; // still inside a run of equal values
            const double mid = 0.5 * (v + next);
            if (!(mid < next)) continue; // adjacent doubles, midpoint rounded up
            const size_t n_left = k + 1, n_right = order.size() - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            const double w = (double(n_left) * gini_of(left_ben, left_mal) +
                              double(n_right) * gini_of(total_ben - left_ben, total_mal - left_mal)) /
                             double(order.size());
            if (w < best) {
                best = w;
                found = true;
                out_feature = f;
                out_threshold = mid;
            }
        }
    }
    return found;
}

inline int build_cart_node(const LabeledDataset& ds, const std::vector<size_t>& rows,
                           int depth_left, size_t min_leaf, std::vector<TreeNode>& nodes) {
    const int idx = int(nodes.size());
    nodes.push_back(TreeNode{});
    size_t ben = 0, mal = 0;
    for (size_t r : rows) (ds.y[r] == label_benign ? ben : mal)++;
    nodes[idx].count_benign = ben;
    nodes[idx].count_malicious = mal;
    nodes[idx].label = mal > ben ? label_malicious : label_benign; // tie goes to benign

    if (depth_left <= 0 || ben == 0 || mal == 0) return idx; // depth cap or pure node
    size_t f = 0;
    double t = 0.0;
    if (!detail::best_gini_split(ds, rows, min_leaf, f, t)) return idx;

    std::vector<size_t> left_rows, right_rows;
    for (size_t r : rows) (ds.X[r][f] <= t ? left_rows : right_rows).push_back(r);
    const int left_idx = build_cart_node(ds, left_rows, depth_left - 1, min_leaf, nodes);
    const int right_idx = build_cart_node(ds, right_rows, depth_left - 1, min_leaf, nodes);
    nodes[idx].feature = int(f);
    nodes[idx].threshold = t;
    nodes[idx].left = left_idx;
    nodes[idx].right = right_idx;
    return idx;
}

} // namespace detail

inline TreeModel train_cart(const LabeledDataset& ds, int max_depth, int min_leaf) {
    if (ds.X.empty()) throw empty_dataset("cannot grow a tree from an empty dataset");
    for (const FeatureVector& v : ds.X)
        if (v.size() != ds.dim()) throw dimension_mismatch("ragged dataset");
    TreeModel m;
    m.max_depth = std::max(0, max_depth);
    m.min_leaf = std::max(1, min_leaf);
    m.n_features = ds.dim();
    m.schema_id = ds.schema_id;
    m.feature_names = ds.feature_names;
    if (ds.norm_params) m.norm_params = *ds.norm_params;
    std::vector<size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), size_t{0});
    detail::build_cart_node(ds, rows, m.max_depth, size_t(m.min_leaf), m.nodes);
    return m;
}

inline const TreeNode& tree_leaf_for(const TreeModel& m, const FeatureVector& x) {
    if (x.size() != m.n_features)
        throw dimension_mismatch("input has " + std::to_string(x.size()) + " features, model has " +
                                 std::to_string(m.n_features));
    int idx = 0;
    while (m.nodes[size_t(idx)].feature >= 0) {
        const TreeNode& node = m.nodes[size_t(idx)];
        idx = x[size_t(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return m.nodes[size_t(idx)];
}

inline int predict_tree(const TreeModel& m, const FeatureVector& x) {
    return tree_leaf_for(m, x).label;
}

// Malicious fraction of the training rows that landed in the same leaf.
inline double tree_prob_malicious(const TreeModel& m, const FeatureVector& x) {
    const TreeNode& leaf = tree_leaf_for(m, x);
    const double n = double(leaf.count_benign + leaf.count_malicious);
    return n > 0.0 ? double(leaf.count_malicious) / n : 0.5;
}

// ---- model file I/O (same versioned JSON envelope as the SVM) ----

inline nlohmann::json nb_to_json(const NbModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["model_kind"] = "nb";
    j["schema_id"] = m.schema_id;
    j["feature_names"] = m.feature_names;
    j["norm_params"] = {{"min", m.norm_params.min}, {"max", m.norm_params.max}};
    j["prior_benign"] = m.prior_benign;
    j["prior_malicious"] = m.prior_malicious;
    j["mean_benign"] = m.mean_benign;
    j["var_benign"] = m.var_benign;
    j["mean_malicious"] = m.mean_malicious;
    j["var_malicious"] = m.var_malicious;
    return j;
}

inline NbModel nb_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"] != 1)
        throw model_format_error("unsupported model version");
    if (j.value("model_kind", "nb") != "nb")
        throw model_format_error("not a naive bayes model: " + j.value("model_kind", "?"));
    NbModel m;
    try {
        m.schema_id = j.at("schema_id").get<std::string>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.norm_params.min = j.at("norm_params").at("min").get<std::vector<double>>();
        m.norm_params.max = j.at("norm_params").at("max").get<std::vector<double>>();
        m.prior_benign = j.at("prior_benign").get<double>();
        m.prior_malicious = j.at("prior_malicious").get<double>();
        m.mean_benign = j.at("mean_benign").get<std::vector<double>>();
        m.var_benign = j.at("var_benign").get<std::vector<double>>();
        m.mean_malicious = j.at("mean_malicious").get<std::vector<double>>();
        m.var_malicious = j.at("var_malicious").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("malformed naive bayes model: ") + e.what());
    }
    const size_t d = m.mean_benign.size();
    if (m.var_benign.size() != d || m.mean_malicious.size() != d || m.var_malicious.size() != d)
        throw model_format_error("per-class statistic lengths differ");
    if (!(m.prior_benign > 0.0 && m.prior_benign < 1.0) ||
        !(m.prior_malicious > 0.0 && m.prior_malicious < 1.0))
        throw model_format_error("priors must lie strictly inside (0, 1)");
    for (double v : m.var_benign)
        if (!(v >= nb_variance_floor)) throw model_format_error("variance below floor");
    for (double v : m.var_malicious)
        if (!(v >= nb_variance_floor)) throw model_format_error("variance below floor");
    return m;
}

inline void save_nb(const NbModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot create " + path);
    out << nb_to_json(m).dump(2) << "\n";
    if (!out) throw io_failure("write error on " + path);
}

inline NbModel load_nb(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("cannot parse ") + path + ": " + e.what());
    }
    return nb_from_json(j);
}

inline nlohmann::json tree_to_json(const TreeModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["model_kind"] = "cart";
    j["schema_id"] = m.schema_id;
    j["feature_names"] = m.feature_names;
    j["norm_params"] = {{"min", m.norm_params.min}, {"max", m.norm_params.max}};
    j["n_features"] = m.n_features;
    j["max_depth"] = m.max_depth;
    j["min_leaf"] = m.min_leaf;
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& node : m.nodes) {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right},
                         {"label", node.label},
                         {"count_benign", node.count_benign},
                         {"count_malicious", node.count_malicious}});
    }
    j["nodes"] = std::move(nodes);
    return j;
}

inline TreeModel tree_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"] != 1)
        throw model_format_error("unsupported model version");
    if (j.value("model_kind", "cart") != "cart")
        throw model_format_error("not a decision tree model: " + j.value("model_kind", "?"));
    TreeModel m;
    try {
        m.schema_id = j.at("schema_id").get<std::string>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.norm_params.min = j.at("norm_params").at("min").get<std::vector<double>>();
        m.norm_params.max = j.at("norm_params").at("max").get<std::vector<double>>();
        m.n_features = j.at("n_features").get<size_t>();
        m.max_depth = j.at("max_depth").get<int>();
        m.min_leaf = j.at("min_leaf").get<int>();
        for (const nlohmann::json& nj : j.at("nodes")) {
            TreeNode node;
            node.feature = nj.at("feature").get<int>();
            node.threshold = nj.at("threshold").get<double>();
            node.left = nj.at("left").get<int>();
            node.right = nj.at("right").get<int>();
            node.label = nj.at("label").get<int>();
            node.count_benign = nj.at("count_benign").get<size_t>();
            node.count_malicious = nj.at("count_malicious").get<size_t>();
            m.nodes.push_back(node);
        }
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("malformed decision tree model: ") + e.what());
    }
    if (m.nodes.empty()) throw model_format_error("tree has no nodes");
    const int count = int(m.nodes.size());
    for (const TreeNode& node : m.nodes) {
        if (node.label != label_benign && node.label != label_malicious)
            throw model_format_error("node label must be -1 or +1");
        if (node.feature >= 0) {
            if (size_t(node.feature) >= m.n_features)
                throw model_format_error("split feature out of range");
            if (node.left < 0 || node.left >= count || node.right < 0 || node.right >= count)
                throw model_format_error("internal node child out of range");
        }
    }
    return m;
}

inline void save_tree(const TreeModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot create " + path);
    out << tree_to_json(m).dump(2) << "\n";
    if (!out) throw io_failure("write error on " + path);
}

inline TreeModel load_tree(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("cannot parse ") + path + ": " + e.what());
    }
    return tree_from_json(j);
}

} // namespace minids

#endif
