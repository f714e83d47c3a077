#ifndef MINIDS_METRICS_HPP
#define MINIDS_METRICS_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "minids/baselines.hpp"
#include "minids/fuzzy.hpp"

namespace minids {

struct length_mismatch : error {
    explicit length_mismatch(const std::string& what) : error(what) {}
};

// A rate whose denominator is zero. `which` names the empty denominator so
// callers can tell a missing positive class from a missing negative one.
struct undefined_rate : error {
    std::string which;
    undefined_rate(const std::string& which_, const std::string& what)
        : error(what), which(which_) {}
};

struct ConfusionMatrix {
    uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    uint64_t positives() const { return tp + fn; }
    uint64_t negatives() const { return fp + tn; }
    uint64_t total() const { return tp + fp + tn + fn; }
};

// Positive class is malicious (+1); anything else counts as benign.
inline ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw length_mismatch("truth has " + std::to_string(truth.size()) + " labels, predictions " +
                              std::to_string(pred.size()));
    if (truth.empty()) throw empty_dataset("cannot score zero predictions");
    ConfusionMatrix cm;
    for (size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] == label_malicious;
        const bool p = pred[i] == label_malicious;
        if (t && p) ++cm.tp;
        else if (t) ++cm.fn;
        else if (p) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

struct RateTriple {
    double tpr = 0.0, fpr = 0.0, fnr = 0.0;
};

inline RateTriple rates(const ConfusionMatrix& cm) {
    if (cm.positives() == 0)
        throw undefined_rate("P", "no positive samples, TPR/FNR undefined");
    if (cm.negatives() == 0)
        throw undefined_rate("N", "no negative samples, FPR undefined");
    RateTriple r;
    r.tpr = double(cm.tp) / double(cm.positives());
    r.fnr = double(cm.fn) / double(cm.positives());
    r.fpr = double(cm.fp) / double(cm.negatives());
    return r;
}

// TPR / (TPR + FNR). Over a single confusion matrix this collapses to the
// TPR itself; it is kept as a separate formula because aggregated inputs
// (e.g. averages of per-fold rates) need not satisfy tpr + fnr == 1.
inline double detection_rate(double tpr, double fnr) {
    if (tpr < 0.0 || fnr < 0.0) throw error("rates must be non-negative");
    if (tpr + fnr <= 0.0)
        throw undefined_rate("tpr+fnr", "detection rate undefined when tpr + fnr == 0");
    return tpr / (tpr + fnr);
}

// (TPR + FNR) / (TPR + FNR + FPR); equals 1 / (1 + FPR) whenever
// tpr + fnr == 1.
inline double detection_accuracy(double tpr, double fnr, double fpr) {
    if (tpr < 0.0 || fnr < 0.0 || fpr < 0.0) throw error("rates must be non-negative");
    if (tpr + fnr + fpr <= 0.0)
        throw undefined_rate("tpr+fnr+fpr", "detection accuracy undefined when all rates are 0");
    return (tpr + fnr) / (tpr + fnr + fpr);
}

// One named row of a metrics table (used for per-category breakdowns).
struct MetricsRow {
    std::string name;
    ConfusionMatrix counts;
    double tpr = 0.0, fpr = 0.0, fnr = 0.0, dr = 0.0, da = 0.0;
};

struct MetricsReport {
    double tpr = 0.0, fpr = 0.0, fnr = 0.0, dr = 0.0, da = 0.0;
    ConfusionMatrix counts;
    std::vector<MetricsRow> per_category;
};

inline MetricsReport report_from_confusion(const ConfusionMatrix& cm) {
    const RateTriple r = rates(cm);
    MetricsReport rep;
    rep.counts = cm;
    rep.tpr = r.tpr;
    rep.fpr = r.fpr;
    rep.fnr = r.fnr;
    rep.dr = detection_rate(r.tpr, r.fnr);
    rep.da = detection_accuracy(r.tpr, r.fnr, r.fpr);
    return rep;
}

// "96.8%" style cell used by the table renderers.
inline std::string percent_1dp(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
    return buf;
}

// ---- classifier dispatch shared by cross-validation and the pipeline ----

struct ClassifierSpec {
    enum class kind_t { svm, nb, cart, fuzzy, hybrid } kind = kind_t::svm;
    double c_param = 1.0, gamma_rbf = 0.1; // svm and hybrid
    int max_depth = 6, min_leaf = 2;       // cart
    FuzzySystem fuzzy_system;              // fuzzy and hybrid
};

inline ClassifierSpec::kind_t classifier_kind_from_name(const std::string& name) {
    if (name == "svm") return ClassifierSpec::kind_t::svm;
    if (name == "nb") return ClassifierSpec::kind_t::nb;
    if (name == "cart") return ClassifierSpec::kind_t::cart;
    if (name == "fuzzy") return ClassifierSpec::kind_t::fuzzy;
    if (name == "hybrid") return ClassifierSpec::kind_t::hybrid;
    throw error("unknown classifier kind: " + name);
}

inline const char* classifier_kind_name(ClassifierSpec::kind_t kind) {
    switch (kind) {
        case ClassifierSpec::kind_t::svm: return "svm";
        case ClassifierSpec::kind_t::nb: return "nb";
        case ClassifierSpec::kind_t::cart: return "cart";
        case ClassifierSpec::kind_t::fuzzy: return "fuzzy";
        case ClassifierSpec::kind_t::hybrid: return "hybrid";
    }
    return "?";
}

namespace detail {

// Pairs each fuzzy input variable with the feature column of the same name.
inline std::vector<std::pair<std::string, size_t>> map_fuzzy_inputs(
    const FuzzySystem& sys, const std::vector<std::string>& feature_names, bool skip_margin) {
    std::vector<std::pair<std::string, size_t>> out;
    for (const FuzzyVariable& var : sys.inputs) {
        if (skip_margin && var.name == "margin") continue;
        bool found = false;
        for (size_t f = 0; f < feature_names.size(); ++f) {
            if (feature_names[f] == var.name) {
                out.push_back({var.name, f});
                found = true;
                break;
            }
        }
        if (!found)
            throw missing_input("fuzzy input '" + var.name + "' matches no feature column");
    }
    return out;
}

} // namespace detail

struct TrainedClassifier {
    ClassifierSpec::kind_t kind = ClassifierSpec::kind_t::svm;
    SvmModel svm;
    NbModel nb;
    TreeModel tree;
    FuzzySystem fuzzy_system;
    std::vector<std::pair<std::string, size_t>> fuzzy_inputs; // variable -> feature column
};

inline TrainedClassifier train_classifier(const ClassifierSpec& spec, const LabeledDataset& train) {
    TrainedClassifier t;
    t.kind = spec.kind;
    switch (spec.kind) {
        case ClassifierSpec::kind_t::svm:
            t.svm = train_smo(train, spec.c_param, spec.gamma_rbf);
            break;
        case ClassifierSpec::kind_t::nb:
            t.nb = train_naive_bayes(train);
            break;
        case ClassifierSpec::kind_t::cart:
            t.tree = train_cart(train, spec.max_depth, spec.min_leaf);
            break;
        case ClassifierSpec::kind_t::fuzzy:
            validate_fuzzy(spec.fuzzy_system);
            t.fuzzy_system = spec.fuzzy_system;
            t.fuzzy_inputs = detail::map_fuzzy_inputs(spec.fuzzy_system, train.feature_names, false);
            break;
        case ClassifierSpec::kind_t::hybrid:
            validate_fuzzy(spec.fuzzy_system);
            t.svm = train_smo(train, spec.c_param, spec.gamma_rbf);
            t.fuzzy_system = spec.fuzzy_system;
            t.fuzzy_inputs = detail::map_fuzzy_inputs(spec.fuzzy_system, train.feature_names, true);
            break;
    }
    return t;
}

struct Prediction {
    int label = label_benign;
    double confidence = 0.0; // in [0, 1]
};

inline Prediction predict_with(const TrainedClassifier& t, const FeatureVector& x) {
    Prediction p;
    switch (t.kind) {
        case ClassifierSpec::kind_t::svm: {
            const double f = decision_value(t.svm, x);
            p.label = f > 0.0 ? label_malicious : label_benign;
            p.confidence = std::min(1.0, std::fabs(f));
            break;
        }
        case ClassifierSpec::kind_t::nb: {
            const double prob = nb_prob_malicious(t.nb, x);
            p.label = prob > 0.5 ? label_malicious : label_benign;
            p.confidence = std::fabs(2.0 * prob - 1.0);
            break;
        }
        case ClassifierSpec::kind_t::cart: {
            const double prob = tree_prob_malicious(t.tree, x);
            p.label = prob > 0.5 ? label_malicious : label_benign;
            p.confidence = std::fabs(2.0 * prob - 1.0);
            break;
        }
        case ClassifierSpec::kind_t::fuzzy: {
            std::map<std::string, double> in;
            for (const auto& [name, col] : t.fuzzy_inputs) in[name] = x.at(col);
            const FuzzyDecision d = fuzzy_classify(t.fuzzy_system, in);
            p.label = d.label;
            p.confidence = d.confidence;
            break;
        }
        case ClassifierSpec::kind_t::hybrid: {
            std::map<std::string, double> aux;
            for (const auto& [name, col] : t.fuzzy_inputs) aux[name] = x.at(col);
            const FuzzyDecision d = hybrid_classify(t.svm, t.fuzzy_system, x, aux);
            p.label = d.label;
            p.confidence = d.confidence;
            break;
        }
    }
    return p;
}

// ---- cross-validation ----

inline LabeledDataset dataset_subset(const LabeledDataset& ds, const std::vector<size_t>& idx) {
    LabeledDataset out;
    out.schema_id = ds.schema_id;
    out.feature_names = ds.feature_names;
    for (size_t i : idx) {
        out.X.push_back(ds.X.at(i));
        out.y.push_back(ds.y.at(i));
    }
    return out;
}

struct FoldReport {
    ConfusionMatrix counts;
    double tpr = 0.0, fpr = 0.0, fnr = 0.0;
    NormParams norm_params; // fitted on this fold's training split only
};

struct CvResult {
    MetricsReport mean; // tpr/fpr/fnr are fold means; dr/da derive from those means
    std::vector<FoldReport> folds;
};

// Stratified k-fold evaluation. Normalization is fitted inside each fold on
// the training split alone, so the test split never influences scaling.
inline CvResult cross_validate(const LabeledDataset& ds, const ClassifierSpec& spec, size_t k,
                               uint64_t seed) {
    CvResult out;
    double sum_tpr = 0.0, sum_fpr = 0.0, sum_fnr = 0.0;
    for (const fold_split& fold : stratified_kfold(ds, k, seed)) {
        LabeledDataset train = dataset_subset(ds, fold.train);
        LabeledDataset test = dataset_subset(ds, fold.test);
        const NormParams norm = fit_minmax(train);
        train = apply_minmax(norm, train);
        test = apply_minmax(norm, test);

        const TrainedClassifier model = train_classifier(spec, train);
        std::vector<int> pred;
        pred.reserve(test.size());
        for (const FeatureVector& x : test.X) pred.push_back(predict_with(model, x).label);

        FoldReport fr;
        fr.counts = confusion(test.y, pred);
        const RateTriple r = rates(fr.counts);
        fr.tpr = r.tpr;
        fr.fpr = r.fpr;
        fr.fnr = r.fnr;
        fr.norm_params = norm;
        out.folds.push_back(std::move(fr));

        sum_tpr += r.tpr;
        sum_fpr += r.fpr;
        sum_fnr += r.fnr;
        out.mean.counts.tp += fr.counts.tp;
        out.mean.counts.fp += fr.counts.fp;
        out.mean.counts.tn += fr.counts.tn;
        out.mean.counts.fn += fr.counts.fn;
    }
    const double nf = double(out.folds.size());
    out.mean.tpr = sum_tpr / nf;
    out.mean.fpr = sum_fpr / nf;
    out.mean.fnr = sum_fnr / nf;
    out.mean.dr = detection_rate(out.mean.tpr, out.mean.fnr);
    out.mean.da = detection_accuracy(out.mean.tpr, out.mean.fnr, out.mean.fpr);
    return out;
}

// ---- report serialization ----

inline nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["counts"] = confusion_to_json(r.counts);
    j["tpr"] = r.tpr;
    j["fpr"] = r.fpr;
    j["fnr"] = r.fnr;
    j["dr"] = r.dr;
    j["da"] = r.da;
    if (!r.per_category.empty()) {
        j["per_category"] = nlohmann::json::array();
        for (const MetricsRow& row : r.per_category) {
            j["per_category"].push_back({{"name", row.name},
                                         {"counts", confusion_to_json(row.counts)},
                                         {"tpr", row.tpr},
                                         {"fpr", row.fpr},
                                         {"fnr", row.fnr},
                                         {"dr", row.dr},
                                         {"da", row.da}});
        }
    }
    return j;
}

inline nlohmann::json cv_to_json(const CvResult& r) {
    nlohmann::json j;
    j["mean"] = report_to_json(r.mean);
    j["folds"] = nlohmann::json::array();
    for (const FoldReport& f : r.folds) {
        j["folds"].push_back({{"counts", confusion_to_json(f.counts)},
                              {"tpr", f.tpr},
                              {"fpr", f.fpr},
                              {"fnr", f.fnr},
                              {"norm_min", f.norm_params.min},
                              {"norm_max", f.norm_params.max}});
    }
    return j;
}

} // namespace minids

#endif
