#ifndef MINIDS_FUZZY_HPP
#define MINIDS_FUZZY_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "minids/svm.hpp"

namespace minids {

struct missing_input : error {
    explicit missing_input(const std::string& what) : error(what) {}
};

// Triangular membership with left foot a, peak b, right foot c. Degenerate
// shoulders (a == b or b == c) saturate at universe ends.
struct MembershipFn {
    double a = 0.0, b = 0.0, c = 0.0;
};

inline double fuzzify(double x, const MembershipFn& mf) {
    if (x == mf.b) return 1.0;
    if (x <= mf.a || x >= mf.c) return 0.0;
    if (x < mf.b) return (x - mf.a) / (mf.b - mf.a);
    return (mf.c - x) / (mf.c - mf.b);
}

struct FuzzyVariable {
    std::string name;
    double lo = 0.0, hi = 1.0;
    std::vector<std::pair<std::string, MembershipFn>> terms;

    const MembershipFn* find_term(const std::string& term) const {
        for (const auto& [tname, mf] : terms)
            if (tname == term) return &mf;
        return nullptr;
    }
};

struct FuzzyRule {
    std::vector<std::pair<std::string, std::string>> antecedent; // (variable, term) conjunction
    std::string consequent;                                      // term of the output variable
};

struct FuzzySystem {
    std::vector<FuzzyVariable> inputs;
    FuzzyVariable output; // always "alarm" over [0, 1]
    std::vector<FuzzyRule> rules;

    const FuzzyVariable* find_input(const std::string& name) const {
        for (const FuzzyVariable& v : inputs)
            if (v.name == name) return &v;
        return nullptr;
    }
};

// Output membership is sampled on this fixed grid over [0, 1].
constexpr size_t fuzzy_grid = 101;

// Mamdani inference: rule strength is the min over antecedent degrees, each
// consequent is clipped at its rule strength, and the rules aggregate by
// pointwise max. Inputs are clamped to the declared universe so shoulder
// terms saturate instead of dropping to zero outside it.
inline std::vector<double> infer(const FuzzySystem& sys,
                                 const std::map<std::string, double>& inputs) {
    if (sys.rules.empty()) throw model_format_error("fuzzy system has no rules");
    std::vector<double> agg(fuzzy_grid, 0.0);
    for (const FuzzyRule& rule : sys.rules) {
        double strength = 1.0;
        for (const auto& [var_name, term_name] : rule.antecedent) {
            const FuzzyVariable* var = sys.find_input(var_name);
            if (!var)
                throw model_format_error("rule references undeclared variable " + var_name);
            const MembershipFn* mf = var->find_term(term_name);
            if (!mf)
                throw model_format_error("rule references undeclared term " + var_name + "." +
                                         term_name);
            const auto it = inputs.find(var_name);
            if (it == inputs.end()) throw missing_input("no value for input " + var_name);
            const double x = std::clamp(it->second, var->lo, var->hi);
            strength = std::min(strength, fuzzify(x, *mf));
        }
        if (strength <= 0.0) continue;
        const MembershipFn* cons = sys.output.find_term(rule.consequent);
        if (!cons)
            throw model_format_error("rule references undeclared output term " + rule.consequent);
        for (size_t i = 0; i < fuzzy_grid; ++i) {
            const double x = sys.output.lo +
                             (sys.output.hi - sys.output.lo) * double(i) / double(fuzzy_grid - 1);
            agg[i] = std::max(agg[i], std::min(strength, fuzzify(x, *cons)));
        }
    }
    return agg;
}

// Centroid over the sampled grid. An all-zero aggregate (no rule fired)
// defuzzifies to the neutral 0.5.
inline double defuzzify_centroid(const std::vector<double>& agg) {
    if (agg.size() != fuzzy_grid)
        throw dimension_mismatch("aggregate has " + std::to_string(agg.size()) +
                                 " samples, expected " + std::to_string(fuzzy_grid));
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < fuzzy_grid; ++i) {
        num += (double(i) / double(fuzzy_grid - 1)) * agg[i];
        den += agg[i];
    }
    if (den <= 0.0) return 0.5;
    return num / den;
}

namespace detail {

// Verdicts compare the crisp degree against 0.5. Summation order leaves
// last-bit noise on mirror-symmetric aggregates, so the degree is quantized
// to nanodegree resolution before the comparison; a symmetric system then
// lands exactly on the tie.
inline double snap_degree(double d) {
    return std::round(d * 1e9) / 1e9;
}

} // namespace detail

struct FuzzyDecision {
    int label = label_benign;
    double confidence = 0.0; // |degree - 0.5| * 2
    double degree = 0.5;     // crisp alarm degree in [0, 1]
};

inline FuzzyDecision decide_degree(double raw_degree) {
    FuzzyDecision out;
    out.degree = detail::snap_degree(raw_degree);
    out.label = out.degree > 0.5 ? label_malicious : label_benign; // the tie stays benign
    out.confidence = std::fabs(out.degree - 0.5) * 2.0;
    return out;
}

inline FuzzyDecision fuzzy_classify(const FuzzySystem& sys,
                                    const std::map<std::string, double>& inputs) {
    return decide_degree(defuzzify_centroid(infer(sys, inputs)));
}

// SVM + fuzzy hybrid: the SVM margin, clamped to the [-3, 3] universe, feeds
// the "margin" input; aux carries the remaining inputs (e.g. packet_rate).
inline FuzzyDecision hybrid_classify(const SvmModel& m, const FuzzySystem& sys,
                                     const FeatureVector& x,
                                     const std::map<std::string, double>& aux) {
    std::map<std::string, double> in(aux);
    in["margin"] = std::clamp(decision_value(m, x), -3.0, 3.0);
    return fuzzy_classify(sys, in);
}

// ---- config file I/O ----

inline void validate_fuzzy(const FuzzySystem& sys) {
    if (sys.rules.empty()) throw model_format_error("fuzzy system has no rules");
    if (sys.output.name != "alarm") throw model_format_error("output variable must be 'alarm'");
    if (sys.output.lo != 0.0 || sys.output.hi != 1.0)
        throw model_format_error("output universe must be [0, 1]");
    if (sys.output.terms.size() != 3 || !sys.output.find_term("benign") ||
        !sys.output.find_term("uncertain") || !sys.output.find_term("malicious"))
        throw model_format_error("output terms must be exactly benign/uncertain/malicious");

    auto check_var = [](const FuzzyVariable& v) {
        if (v.name.empty()) throw model_format_error("variable with empty name");
        if (!(v.lo < v.hi)) throw model_format_error("variable " + v.name + " has empty universe");
        if (v.terms.empty()) throw model_format_error("variable " + v.name + " has no terms");
        for (size_t i = 0; i < v.terms.size(); ++i) {
            const auto& [tname, mf] = v.terms[i];
            if (!(mf.a <= mf.b && mf.b <= mf.c))
                throw model_format_error("term " + v.name + "." + tname +
                                         " must satisfy a <= b <= c");
            for (size_t j = i + 1; j < v.terms.size(); ++j)
                if (v.terms[j].first == tname)
                    throw model_format_error("duplicate term " + v.name + "." + tname);
        }
    };
    check_var(sys.output);
    for (size_t i = 0; i < sys.inputs.size(); ++i) {
        check_var(sys.inputs[i]);
        for (size_t j = i + 1; j < sys.inputs.size(); ++j)
            if (sys.inputs[j].name == sys.inputs[i].name)
                throw model_format_error("duplicate variable " + sys.inputs[i].name);
    }
    for (const FuzzyRule& rule : sys.rules) {
        if (rule.antecedent.empty()) throw model_format_error("rule with empty antecedent");
        for (const auto& [var_name, term_name] : rule.antecedent) {
            const FuzzyVariable* var = sys.find_input(var_name);
            if (!var) throw model_format_error("rule references undeclared variable " + var_name);
            if (!var->find_term(term_name))
                throw model_format_error("rule references undeclared term " + var_name + "." +
                                         term_name);
        }
        if (!sys.output.find_term(rule.consequent))
            throw model_format_error("rule references undeclared output term " + rule.consequent);
    }
}

inline nlohmann::json fuzzy_to_json(const FuzzySystem& sys) {
    auto var_json = [](const FuzzyVariable& v) {
        nlohmann::json terms;
        for (const auto& [tname, mf] : v.terms) terms[tname] = {mf.a, mf.b, mf.c};
        return nlohmann::json{{"name", v.name}, {"lo", v.lo}, {"hi", v.hi}, {"terms", terms}};
    };
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = "fuzzy_system";
    j["inputs"] = nlohmann::json::array();
    for (const FuzzyVariable& v : sys.inputs) j["inputs"].push_back(var_json(v));
    j["output"] = var_json(sys.output);
    j["rules"] = nlohmann::json::array();
    for (const FuzzyRule& rule : sys.rules) {
        nlohmann::json cond;
        for (const auto& [var_name, term_name] : rule.antecedent) cond[var_name] = term_name;
        j["rules"].push_back({{"if", cond}, {"then", rule.consequent}});
    }
    return j;
}

inline FuzzySystem fuzzy_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"] != 1)
        throw model_format_error("unsupported fuzzy config version");
    if (j.value("kind", "fuzzy_system") != "fuzzy_system")
        throw model_format_error("not a fuzzy system config");
    FuzzySystem sys;
    auto parse_var = [](const nlohmann::json& vj) {
        FuzzyVariable v;
        v.name = vj.at("name").get<std::string>();
        v.lo = vj.at("lo").get<double>();
        v.hi = vj.at("hi").get<double>();
        for (const auto& [tname, tj] : vj.at("terms").items()) {
            if (!tj.is_array() || tj.size() != 3)
                throw model_format_error("term " + tname + " must be [a, b, c]");
            v.terms.push_back({tname, MembershipFn{tj[0].get<double>(), tj[1].get<double>(),
                                                   tj[2].get<double>()}});
        }
        return v;
    };
    try {
        for (const nlohmann::json& vj : j.at("inputs")) sys.inputs.push_back(parse_var(vj));
        sys.output = parse_var(j.at("output"));
        for (const nlohmann::json& rj : j.at("rules")) {
            FuzzyRule rule;
            for (const auto& [var_name, term_name] : rj.at("if").items())
                rule.antecedent.push_back({var_name, term_name.get<std::string>()});
            rule.consequent = rj.at("then").get<std::string>();
            sys.rules.push_back(rule);
        }
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("malformed fuzzy config: ") + e.what());
    }
    validate_fuzzy(sys);
    return sys;
}

inline void save_fuzzy(const FuzzySystem& sys, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot create " + path);
    out << fuzzy_to_json(sys).dump(2) << "\n";
    if (!out) throw io_failure("write error on " + path);
}

inline FuzzySystem load_fuzzy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("cannot parse ") + path + ": " + e.what());
    }
    return fuzzy_from_json(j);
}

} // namespace minids

#endif
