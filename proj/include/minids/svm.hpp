#ifndef MINIDS_SVM_HPP
#define MINIDS_SVM_HPP

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "minids/dataset.hpp"

namespace minids {

struct non_finite_feature : error {
    explicit non_finite_feature(const std::string& what) : error(what) {}
};

inline double rbf_kernel(const FeatureVector& a, const FeatureVector& b, double gamma_rbf) {
    if (a.size() != b.size())
        throw dimension_mismatch("kernel arguments have dimensions " + std::to_string(a.size()) +
                                 " and " + std::to_string(b.size()));
    double d2 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma_rbf * d2);
}

struct SvmModel {
    std::vector<FeatureVector> support_vectors;
    std::vector<double> coeffs; // alpha_i * y_i per support vector
    double bias = 0.0;
    double gamma_rbf = 0.1;
    double c_param = 1.0;
    NormParams norm_params; // empty vectors mean "inputs used raw"
    std::string schema_id;
    std::vector<std::string> feature_names;
};

inline double decision_value(const SvmModel& m, const FeatureVector& x) {
    double f = m.bias;
    for (size_t i = 0; i < m.support_vectors.size(); ++i)
        f += m.coeffs[i] * rbf_kernel(m.support_vectors[i], x, m.gamma_rbf);
    return f;
}

// Sign of the decision value; an exact zero counts as benign so a degenerate
// model cannot flood alarms.
inline int predict(const SvmModel& m, const FeatureVector& x) {
    return decision_value(m, x) > 0.0 ? label_malicious : label_benign;
}

// Dual objective W(alpha) reconstructed from the retained vectors (dropped
// vectors have alpha = 0 and contribute nothing).
inline double svm_dual_objective(const SvmModel& m) {
    double sum_alpha = 0.0, quad = 0.0;
    for (size_t i = 0; i < m.coeffs.size(); ++i) {
        sum_alpha += std::fabs(m.coeffs[i]);
        for (size_t j = 0; j < m.coeffs.size(); ++j)
            quad += m.coeffs[i] * m.coeffs[j] *
                    rbf_kernel(m.support_vectors[i], m.support_vectors[j], m.gamma_rbf);
    }
    return sum_alpha - 0.5 * quad;
}

namespace detail {

// Kernel matrix with an on-the-fly fallback for datasets too large to cache.
struct kernel_source {
    const std::vector<FeatureVector>& X;
    double gamma;
    std::vector<double> cache; // n*n, empty when not cached
    size_t n;

    kernel_source(const std::vector<FeatureVector>& X_, double gamma_) : X(X_), gamma(gamma_) {
        n = X.size();
        if (n <= 4096) {
            cache.resize(n * n);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i; j < n; ++j)
                    cache[i * n + j] = cache[j * n + i] = rbf_kernel(X[i], X[j], gamma);
        }
    }

    double operator()(size_t i, size_t j) const {
        if (!cache.empty()) return cache[i * n + j];
        return rbf_kernel(X[i], X[j], gamma);
    }
};

} // namespace detail

// Sequential minimal optimization for the soft-margin dual. All pair
// selection is deterministic (first violator in index order, then the
// largest |E_i - E_j| with ties broken by index), so identical inputs
// reproduce the identical model.
inline SvmModel train_smo(const LabeledDataset& ds, double c_param, double gamma_rbf,
                          double kkt_tol = 1e-3, size_t max_passes = 0) {
    const size_t n = ds.size();
    if (c_param <= 0.0) throw error("c_param must be positive");
    bool has_benign = false, has_malicious = false;
    for (int label : ds.y) (label == label_benign ? has_benign : has_malicious) = true;
    if (!has_benign || !has_malicious)
        throw single_class("training data must contain both classes");
    for (const FeatureVector& v : ds.X)
        for (double x : v)
            if (!std::isfinite(x)) throw non_finite_feature("non-finite feature value");
    if (max_passes == 0) max_passes = 100 * n;

    const detail::kernel_source K(ds.X, gamma_rbf);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> F(n, 0.0); // decision value sans bias per sample
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = double(ds.y[i]);
    double b = 0.0;

    auto error_of = [&](size_t i) { return F[i] + b - y[i]; };

    auto take_step = [&](size_t i, size_t j) -> bool {
        if (i == j) return false;
        const double ai_old = alpha[i], aj_old = alpha[j];
        const double Ei = error_of(i), Ej = error_of(j);
        const double s = y[i] * y[j];
        double L, H;
        if (s < 0) {
            L = std::max(0.0, aj_old - ai_old);
            H = std::min(c_param, c_param + aj_old - ai_old);
        } else {
            L = std::max(0.0, ai_old + aj_old - c_param);
            H = std::min(c_param, ai_old + aj_old);
        }
        if (L >= H) return false;
        const double kii = K(i, i), kjj = K(j, j), kij = K(i, j);
        const double eta = kii + kjj - 2.0 * kij;
        double aj_new;
        if (eta > 1e-12) {
            aj_new = aj_old + y[j] * (Ei - Ej) / eta;
            aj_new = std::clamp(aj_new, L, H);
        } else {
            // flat direction: compare the objective at both clip ends
            const double f1 = y[i] * (Ei + b) - ai_old * kii - s * aj_old * kij;
            const double f2 = y[j] * (Ej + b) - aj_old * kjj - s * ai_old * kij;
            const double L1 = ai_old + s * (aj_old - L);
            const double H1 = ai_old + s * (aj_old - H);
            const double Lobj = L1 * f1 + L * f2 + 0.5 * L1 * L1 * kii + 0.5 * L * L * kjj +
                                s * L * L1 * kij;
            const double Hobj = H1 * f1 + H * f2 + 0.5 * H1 * H1 * kii + 0.5 * H * H * kjj +
                                s * H * H1 * kij;
            if (Lobj < Hobj - 1e-12) aj_new = L;
            else if (Lobj > Hobj + 1e-12) aj_new = H;
            else return false;
        }
        // snap near-bound values onto the bound so a 1-ulp gap to the box
        // edge cannot wedge the pair selection
        auto snap = [&](double v) {
            if (v < 1e-10) return 0.0;
            if (v > c_param - 1e-10) return c_param;
            return v;
        };
        aj_new = snap(aj_new);
        if (std::fabs(aj_new - aj_old) < 1e-12 * (aj_new + aj_old + 1e-12)) return false;
        const double ai_new = snap(ai_old + s * (aj_old - aj_new));

        const double di = y[i] * (ai_new - ai_old), dj = y[j] * (aj_new - aj_old);
        const double b1 = b - Ei - di * kii - dj * kij;
        const double b2 = b - Ej - di * kij - dj * kjj;
        if (ai_new > 0.0 && ai_new < c_param) b = b1;
        else if (aj_new > 0.0 && aj_new < c_param) b = b2;
        else b = 0.5 * (b1 + b2);

        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for (size_t k = 0; k < n; ++k) F[k] += di * K(i, k) + dj * K(j, k);
        return true;
    };

    auto examine = [&](size_t i) -> bool {
        const double Ei = error_of(i);
        const double ri = Ei * y[i];
        const bool violates = (ri < -kkt_tol && alpha[i] < c_param) ||
                              (ri > kkt_tol && alpha[i] > 0.0);
        if (!violates) return false;

        // second choice: largest |Ei - Ej| among non-bound alphas
        size_t best = n;
        double best_gap = -1.0;
        for (size_t j = 0; j < n; ++j) {
            if (alpha[j] <= 0.0 || alpha[j] >= c_param) continue;
            const double gap = std::fabs(Ei - error_of(j));
            if (gap > best_gap) {
                best_gap = gap;
                best = j;
            }
        }
        if (best < n && take_step(i, best)) return true;
        // fall back to a deterministic scan, non-bound first, then everything
        for (size_t off = 1; off < n; ++off) {
            const size_t j = (i + off) % n;
            if (alpha[j] <= 0.0 || alpha[j] >= c_param) continue;
            if (take_step(i, j)) return true;
        }
        for (size_t off = 1; off < n; ++off) {
            if (take_step(i, (i + off) % n)) return true;
        }
        return false;
    };

    bool examine_all = true;
    size_t pass = 0;
    while (pass < max_passes) {
        ++pass;
        size_t changed = 0;
        for (size_t i = 0; i < n; ++i) {
            if (!examine_all && (alpha[i] <= 0.0 || alpha[i] >= c_param)) continue;
            if (examine(i)) ++changed;
        }
        if (examine_all) {
            if (changed == 0) break;
            examine_all = false;
        } else if (changed == 0) {
            examine_all = true;
        }
    }

    // final bias from the converged alphas: average over free vectors, else
    // the midpoint of the interval the bound vectors allow
    double free_sum = 0.0;
    size_t free_count = 0;
    double b_lo = -std::numeric_limits<double>::infinity();
    double b_hi = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        const double v = y[i] - F[i]; // bias that puts sample i exactly on the margin
        if (alpha[i] > 0.0 && alpha[i] < c_param) {
            free_sum += v;
            ++free_count;
        } else if (alpha[i] <= 0.0) {
            if (y[i] > 0) b_lo = std::max(b_lo, v);
            else b_hi = std::min(b_hi, v);
        } else { // alpha == C
            if (y[i] > 0) b_hi = std::min(b_hi, v);
            else b_lo = std::max(b_lo, v);
        }
    }
    if (free_count > 0) {
        b = free_sum / double(free_count);
    } else if (std::isfinite(b_lo) && std::isfinite(b_hi)) {
        b = 0.5 * (b_lo + b_hi);
    } else if (std::isfinite(b_lo)) {
        b = b_lo;
    } else if (std::isfinite(b_hi)) {
        b = b_hi;
    }

    SvmModel m;
    m.bias = b;
    m.gamma_rbf = gamma_rbf;
    m.c_param = c_param;
    m.schema_id = ds.schema_id;
    m.feature_names = ds.feature_names;
    if (ds.norm_params) m.norm_params = *ds.norm_params;
    for (size_t i = 0; i < n; ++i) {
        if (alpha[i] > 1e-12) {
            m.support_vectors.push_back(ds.X[i]);
            m.coeffs.push_back(alpha[i] * y[i]);
        }
    }
    return m;
}

// ---- model file I/O (versioned JSON) ----

inline nlohmann::json svm_to_json(const SvmModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["model_kind"] = "svm";
    j["schema_id"] = m.schema_id;
    j["feature_names"] = m.feature_names;
    j["norm_params"] = {{"min", m.norm_params.min}, {"max", m.norm_params.max}};
    j["c_param"] = m.c_param;
    j["gamma_rbf"] = m.gamma_rbf;
    j["bias"] = m.bias;
    j["support_vectors"] = m.support_vectors;
    j["coeffs"] = m.coeffs;
    return j;
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"] != 1)
        throw model_format_error("unsupported model version");
    if (j.value("model_kind", "svm") != "svm")
        throw model_format_error("not an svm model: " + j.value("model_kind", "?"));
    SvmModel m;
    try {
        m.schema_id = j.at("schema_id").get<std::string>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.norm_params.min = j.at("norm_params").at("min").get<std::vector<double>>();
        m.norm_params.max = j.at("norm_params").at("max").get<std::vector<double>>();
        m.c_param = j.at("c_param").get<double>();
        m.gamma_rbf = j.at("gamma_rbf").get<double>();
        m.bias = j.at("bias").get<double>();
        m.support_vectors = j.at("support_vectors").get<std::vector<FeatureVector>>();
        m.coeffs = j.at("coeffs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("malformed svm model: ") + e.what());
    }
    if (m.support_vectors.size() != m.coeffs.size())
        throw model_format_error("support vector and coefficient counts differ");
    return m;
}

inline void save_svm(const SvmModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot create " + path);
    out << svm_to_json(m).dump(2) << "\n";
    if (!out) throw io_failure("write error on " + path);
}

inline SvmModel load_svm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("cannot parse ") + path + ": " + e.what());
    }
    return svm_from_json(j);
}

} // namespace minids

#endif
