#ifndef MINIDS_PIPELINE_HPP
#define MINIDS_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "minids/metrics.hpp"
#include "minids/trafficgen.hpp"

// Detection pipeline: the rule engine scans every packet while an optional
// classifier plug-in judges each one-second flow window; fusion then decides
// per window whether rule hits become an alarm, get suppressed, or whether
// the plug-in raises an anomaly alarm of its own.

namespace minids {

struct artifact_load_error : error {
    explicit artifact_load_error(const std::string& what) : error(what) {}
};

struct truth_gap : error {
    explicit truth_gap(const std::string& what) : error(what) {}
};

enum class plugin_kind : uint8_t { svm, fuzzy, cart, nb, hybrid, firefly_svm };

inline const char* plugin_kind_name(plugin_kind k) {
    switch (k) {
    case plugin_kind::svm: return "svm";
    case plugin_kind::fuzzy: return "fuzzy";
    case plugin_kind::cart: return "cart";
    case plugin_kind::nb: return "nb";
    case plugin_kind::hybrid: return "hybrid";
    case plugin_kind::firefly_svm: return "firefly_svm";
    }
    return "?";
}

inline std::optional<plugin_kind> plugin_kind_from_name(const std::string& s) {
    for (int k = 0; k <= int(plugin_kind::firefly_svm); ++k)
        if (s == plugin_kind_name(plugin_kind(k))) return plugin_kind(k);
    return std::nullopt;
}

struct PluginSpec {
    plugin_kind kind = plugin_kind::svm;
    std::string model_path;        // trained model (or fuzzy bundle) JSON
    std::string fuzzy_config_path; // hybrid only: the bare fuzzy system
    double suppress_threshold = 0.8;
    double anomaly_threshold = 0.9;
};

// ---- fuzzy bundle: a fuzzy system packaged with normalization ----
//
// The bare fuzzy configs express their universes in normalized feature
// units, so deploying one standalone needs the min/max fitted on whatever
// training set the other models saw. The bundle is that pairing, wrapped in
// the same envelope as the trained models.

struct FuzzyBundle {
    FuzzySystem system;
    NormParams norm_params;
    std::string schema_id;
    std::vector<std::string> feature_names;
};

inline nlohmann::json fuzzy_bundle_to_json(const FuzzyBundle& b) {
    nlohmann::json j;
    j["version"] = 1;
    j["model_kind"] = "fuzzy_bundle";
    j["schema_id"] = b.schema_id;
    j["feature_names"] = b.feature_names;
    j["norm_params"] = {{"min", b.norm_params.min}, {"max", b.norm_params.max}};
    j["system"] = fuzzy_to_json(b.system);
    return j;
}

inline FuzzyBundle fuzzy_bundle_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"] != 1)
        throw model_format_error("unsupported model version");
    if (j.value("model_kind", "?") != "fuzzy_bundle")
        throw model_format_error("not a fuzzy bundle: " + j.value("model_kind", "?"));
    FuzzyBundle b;
    try {
        b.schema_id = j.at("schema_id").get<std::string>();
        b.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        b.norm_params.min = j.at("norm_params").at("min").get<std::vector<double>>();
        b.norm_params.max = j.at("norm_params").at("max").get<std::vector<double>>();
        b.system = fuzzy_from_json(j.at("system"));
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("bad fuzzy bundle: ") + e.what());
    }
    if (b.norm_params.min.size() != b.norm_params.max.size() ||
        b.norm_params.min.size() != b.feature_names.size())
        throw model_format_error("fuzzy bundle norm_params do not match feature_names");
    return b;
}

inline void save_fuzzy_bundle(const std::string& path, const FuzzyBundle& b) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot open " + path + " for writing");
    out << fuzzy_bundle_to_json(b).dump(2) << "\n";
}

inline FuzzyBundle load_fuzzy_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("bad fuzzy bundle: ") + e.what());
    }
    return fuzzy_bundle_from_json(j);
}

// ---- pipeline assembly ----

struct Pipeline {
    RuleSet rules;
    bool has_plugin = false;
    plugin_kind kind = plugin_kind::svm;
    TrainedClassifier clf;
    NormParams norm; // applied to raw window features before classifying
    double suppress_threshold = 0.8;
    double anomaly_threshold = 0.9;
};

namespace detail {

// Deployed models must speak the flow window schema, otherwise the feature
// vectors fed at runtime mean something else entirely.
inline void check_flow_schema(const std::string& what, const std::string& schema_id,
                              const std::vector<std::string>& feature_names) {
    if (schema_id != flow_schema_id)
        throw artifact_load_error(what + " has schema '" + schema_id + "', pipeline needs '" +
                                  flow_schema_id + "'");
    const auto& names = flow_feature_names();
    if (feature_names.size() != names.size() ||
        !std::equal(names.begin(), names.end(), feature_names.begin()))
        throw artifact_load_error(what + " feature names do not match the flow window schema");
}

} // namespace detail

inline Pipeline build_pipeline(RuleSet rules, const std::optional<PluginSpec>& spec) {
    Pipeline p;
    p.rules = std::move(rules);
    if (!spec) return p;

    const auto in_range = [](double t) { return t >= 0.0 && t <= 1.01; };
    if (!in_range(spec->suppress_threshold) || !in_range(spec->anomaly_threshold))
        throw invalid_spec("fusion thresholds must lie in [0, 1.01]");

    p.has_plugin = true;
    p.kind = spec->kind;
    p.suppress_threshold = spec->suppress_threshold;
    p.anomaly_threshold = spec->anomaly_threshold;
    try {
        switch (spec->kind) {
        case plugin_kind::svm:
        case plugin_kind::firefly_svm:
            p.clf.kind = ClassifierSpec::kind_t::svm;
            p.clf.svm = load_svm(spec->model_path);
            detail::check_flow_schema("svm model", p.clf.svm.schema_id, p.clf.svm.feature_names);
            p.norm = p.clf.svm.norm_params;
            break;
        case plugin_kind::nb:
            p.clf.kind = ClassifierSpec::kind_t::nb;
            p.clf.nb = load_nb(spec->model_path);
            detail::check_flow_schema("nb model", p.clf.nb.schema_id, p.clf.nb.feature_names);
            p.norm = p.clf.nb.norm_params;
            break;
        case plugin_kind::cart:
            p.clf.kind = ClassifierSpec::kind_t::cart;
            p.clf.tree = load_tree(spec->model_path);
            detail::check_flow_schema("cart model", p.clf.tree.schema_id, p.clf.tree.feature_names);
            p.norm = p.clf.tree.norm_params;
            break;
        case plugin_kind::fuzzy: {
            const FuzzyBundle b = load_fuzzy_bundle(spec->model_path);
            detail::check_flow_schema("fuzzy bundle", b.schema_id, b.feature_names);
            p.clf.kind = ClassifierSpec::kind_t::fuzzy;
            p.clf.fuzzy_system = b.system;
            p.clf.fuzzy_inputs =
                detail::map_fuzzy_inputs(p.clf.fuzzy_system, b.feature_names, false);
            p.norm = b.norm_params;
            break;
        }
        case plugin_kind::hybrid:
            p.clf.kind = ClassifierSpec::kind_t::hybrid;
            p.clf.svm = load_svm(spec->model_path);
            detail::check_flow_schema("svm model", p.clf.svm.schema_id, p.clf.svm.feature_names);
            p.clf.fuzzy_system = load_fuzzy(spec->fuzzy_config_path);
            p.clf.fuzzy_inputs =
                detail::map_fuzzy_inputs(p.clf.fuzzy_system, p.clf.svm.feature_names, true);
            p.norm = p.clf.svm.norm_params;
            break;
        }
    } catch (const artifact_load_error&) {
        throw;
    } catch (const error& e) {
        throw artifact_load_error("loading plugin artifacts failed: " + std::string(e.what()));
    }
    return p;
}

// ---- alarms and the run log ----

enum class alarm_source : uint8_t { rules, plugin, fused };

inline const char* alarm_source_name(alarm_source s) {
    switch (s) {
    case alarm_source::rules: return "RULES";
    case alarm_source::plugin: return "PLUGIN";
    case alarm_source::fused: return "FUSED";
    }
    return "?";
}

inline std::optional<alarm_source> alarm_source_from_name(const std::string& s) {
    if (s == "RULES") return alarm_source::rules;
    if (s == "PLUGIN") return alarm_source::plugin;
    if (s == "FUSED") return alarm_source::fused;
    return std::nullopt;
}

// One alarm, or (when suppression is set) the audit trail of rule hits that
// the plug-in talked the pipeline out of raising. Rule-derived records cover
// one (window, flow) cell; sids is the deduplicated list and rule_hits the
// raw per-packet match count behind it.
struct AlarmRecord {
    int64_t timestamp_us = 0; // first matching (or first seen) packet
    alarm_source source = alarm_source::rules;
    bool suppression = false;
    std::vector<uint32_t> sids;
    std::vector<uint32_t> suppressed_sids;
    uint64_t rule_hits = 0;
    std::string category;
    double confidence = 1.0;
    flow_key flow;
    int64_t window_start_us = 0;
};

struct WindowVerdict {
    int64_t window_start_us = 0;
    flow_key flow;
    int label = label_benign;
    double confidence = 0.0;
    uint64_t rule_hits = 0;
    bool suppressed = false;
};

struct RunTotals {
    uint64_t frames = 0;
    uint64_t decode_errors = 0;
    uint64_t windows = 0;
    uint64_t raw_rule_hits = 0;  // per-packet per-sid match instances
    uint64_t alarm_records = 0;
    uint64_t suppression_records = 0;
    uint64_t alarmed_hits = 0;   // rule hits that surfaced as alarms
    uint64_t suppressed_hits = 0;
};

struct RunLog {
    std::vector<AlarmRecord> records; // time-ordered alarms and audits
    std::vector<WindowVerdict> verdicts;
    RunTotals totals;
};

// Pure fusion policy for one closed window.
enum class fuse_action : uint8_t { none, suppress, fused_alarm, plugin_alarm };

inline fuse_action fuse(bool any_rule_hit, int plugin_label, double plugin_confidence,
                        double suppress_threshold, double anomaly_threshold) {
    if (any_rule_hit) {
        if (plugin_label == label_benign && plugin_confidence >= suppress_threshold)
            return fuse_action::suppress;
        return fuse_action::fused_alarm;
    }
    if (plugin_label == label_malicious && plugin_confidence >= anomaly_threshold)
        return fuse_action::plugin_alarm;
    return fuse_action::none;
}

namespace detail {

struct open_cell {
    std::vector<DecodedPacket> packets;
    std::vector<uint32_t> sid_hits; // one entry per packet-sid match
    int64_t first_hit_ts = 0;
    int64_t first_seen_ts = 0;
};

inline std::string category_of_sids(const RuleSet& rules, const std::vector<uint32_t>& sids) {
    if (sids.empty()) return "";
    const Rule* r = rules.find_sid(sids.front());
    return r ? category_name(r->category) : "";
}

inline void close_cell(const Pipeline& p, const window_flow_id& id, open_cell& cell,
                       RunLog& log, std::vector<AlarmRecord>& batch) {
    ++log.totals.windows;

    std::vector<uint32_t> sids = cell.sid_hits;
    std::sort(sids.begin(), sids.end());
    sids.erase(std::unique(sids.begin(), sids.end()), sids.end());
    const uint64_t hits = cell.sid_hits.size();

    AlarmRecord rec;
    rec.flow = id.flow;
    rec.window_start_us = id.window * 1000000;

    if (!p.has_plugin) {
        if (hits == 0) return;
        rec.timestamp_us = cell.first_hit_ts;
        rec.source = alarm_source::rules;
        rec.sids = std::move(sids);
        rec.rule_hits = hits;
        rec.category = category_of_sids(p.rules, rec.sids);
        log.totals.alarmed_hits += hits;
        ++log.totals.alarm_records;
        batch.push_back(std::move(rec));
        return;
    }

    FlowWindow fw;
    fw.key = id.flow;
    fw.packets = std::move(cell.packets);
    FeatureVector x = extract_flow_features(fw);
    if (!p.norm.min.empty()) x = apply_minmax(p.norm, x);
    const Prediction pred = predict_with(p.clf, x);

    WindowVerdict v;
    v.window_start_us = rec.window_start_us;
    v.flow = id.flow;
    v.label = pred.label;
    v.confidence = pred.confidence;
    v.rule_hits = hits;

    switch (fuse(hits > 0, pred.label, pred.confidence, p.suppress_threshold,
                 p.anomaly_threshold)) {
    case fuse_action::suppress:
        v.suppressed = true;
        rec.timestamp_us = cell.first_hit_ts;
        rec.source = alarm_source::fused;
        rec.suppression = true;
        rec.suppressed_sids = std::move(sids);
        rec.rule_hits = hits;
        rec.category = category_of_sids(p.rules, rec.suppressed_sids);
        rec.confidence = pred.confidence;
        log.totals.suppressed_hits += hits;
        ++log.totals.suppression_records;
        batch.push_back(std::move(rec));
        break;
    case fuse_action::fused_alarm:
        rec.timestamp_us = cell.first_hit_ts;
        rec.source = alarm_source::fused;
        rec.sids = std::move(sids);
        rec.rule_hits = hits;
        rec.category = category_of_sids(p.rules, rec.sids);
        log.totals.alarmed_hits += hits;
        ++log.totals.alarm_records;
        batch.push_back(std::move(rec));
        break;
    case fuse_action::plugin_alarm:
        rec.timestamp_us = cell.first_seen_ts;
        rec.source = alarm_source::plugin;
        rec.confidence = pred.confidence;
        ++log.totals.alarm_records;
        batch.push_back(std::move(rec));
        break;
    case fuse_action::none:
        break;
    }
    log.verdicts.push_back(v);
}

} // namespace detail

// Runs the full pipeline over a time-ordered capture. Windows close when the
// epoch-aligned second they belong to has passed; each closed (window, flow)
// cell is fused independently. Malformed frames are counted and skipped.
inline RunLog process(const Pipeline& p, const std::vector<RawFrame>& frames) {
    RunLog log;
    std::map<window_flow_id, detail::open_cell> open;
    int64_t cur_window = std::numeric_limits<int64_t>::min();

    auto flush = [&]() {
        std::vector<AlarmRecord> batch;
        for (auto& [id, cell] : open) detail::close_cell(p, id, cell, log, batch);
        open.clear();
        std::sort(batch.begin(), batch.end(), [](const AlarmRecord& a, const AlarmRecord& b) {
            if (a.timestamp_us != b.timestamp_us) return a.timestamp_us < b.timestamp_us;
            return a.flow < b.flow;
        });
        for (AlarmRecord& r : batch) log.records.push_back(std::move(r));
    };

    for (const RawFrame& f : frames) {
        ++log.totals.frames;
        DecodedPacket pkt;
        try {
            pkt = decode_frame(f);
        } catch (const error&) {
            ++log.totals.decode_errors;
            continue;
        }
        if (pkt.proto == proto_t::non_ip) continue; // no flow identity, no rule protocol

        const int64_t w = pkt.timestamp_us / 1000000;
        if (w > cur_window) {
            flush();
            cur_window = w;
        }
        window_flow_id id;
        id.window = w;
        id.flow = canonical_key(pkt);
        detail::open_cell& cell = open[id];
        if (cell.packets.empty()) cell.first_seen_ts = pkt.timestamp_us;

        const std::vector<uint32_t> sids = scan(p.rules, pkt);
        if (!sids.empty()) {
            if (cell.sid_hits.empty()) cell.first_hit_ts = pkt.timestamp_us;
            cell.sid_hits.insert(cell.sid_hits.end(), sids.begin(), sids.end());
            log.totals.raw_rule_hits += sids.size();
        }
        cell.packets.push_back(std::move(pkt));
    }
    flush();
    return log;
}

// ---- evaluation against ground truth ----

namespace detail {

// Rates that tolerate an absent class: undefined entries come back NaN
// instead of throwing, since a per-category table routinely has rows with no
// negatives of their own.
struct soft_rates {
    double tpr = std::numeric_limits<double>::quiet_NaN();
    double fpr = std::numeric_limits<double>::quiet_NaN();
    double fnr = std::numeric_limits<double>::quiet_NaN();
    double dr = std::numeric_limits<double>::quiet_NaN();
    double da = std::numeric_limits<double>::quiet_NaN();
};

inline soft_rates rates_or_nan(const ConfusionMatrix& cm) {
    soft_rates r;
    if (cm.positives() > 0) {
        r.tpr = double(cm.tp) / double(cm.positives());
        r.fnr = double(cm.fn) / double(cm.positives());
    }
    if (cm.negatives() > 0) r.fpr = double(cm.fp) / double(cm.negatives());
    if (std::isfinite(r.tpr) && r.tpr + r.fnr > 0.0) {
        r.dr = detection_rate(r.tpr, r.fnr);
        if (std::isfinite(r.fpr)) r.da = detection_accuracy(r.tpr, r.fnr, r.fpr);
    }
    return r;
}

inline MetricsRow row_from(const std::string& name, const ConfusionMatrix& cm) {
    const soft_rates r = rates_or_nan(cm);
    MetricsRow row;
    row.name = name;
    row.counts = cm;
    row.tpr = r.tpr;
    row.fpr = r.fpr;
    row.fnr = r.fnr;
    row.dr = r.dr;
    row.da = r.da;
    return row;
}

} // namespace detail

// Scores a run window by window: a truth cell counts as alarmed when any
// non-suppression record landed on it. Category rows share the global benign
// population, since benign windows belong to no attack category.
inline MetricsReport evaluate_run(const RunLog& log, const std::vector<TruthRecord>& truth) {
    if (truth.empty()) throw empty_dataset("ground truth has no records");

    std::map<window_flow_id, const TruthRecord*> truth_map;
    for (const TruthRecord& t : truth) {
        window_flow_id id;
        id.window = t.window_start_us / 1000000;
        id.flow = t.flow;
        truth_map.emplace(id, &t);
    }

    std::set<window_flow_id> alarmed;
    std::vector<std::string> gaps;
    for (const AlarmRecord& r : log.records) {
        if (r.suppression) continue;
        window_flow_id id;
        id.window = r.window_start_us / 1000000;
        id.flow = r.flow;
        alarmed.insert(id);
        if (!truth_map.count(id) && gaps.size() < 4)
            gaps.push_back(flow_key_to_string(r.flow) + " @" + std::to_string(r.window_start_us));
    }
    if (!gaps.empty()) {
        std::string msg = "windows with no truth label:";
        for (const std::string& g : gaps) msg += " " + g;
        throw truth_gap(msg);
    }

    ConfusionMatrix total;
    std::map<std::string, ConfusionMatrix> per_cat;
    for (const auto& [id, t] : truth_map) {
        const bool positive = alarmed.count(id) > 0;
        if (t->label == label_malicious) {
            ConfusionMatrix& cm = per_cat[t->category];
            if (positive) {
                ++total.tp;
                ++cm.tp;
            } else {
                ++total.fn;
                ++cm.fn;
            }
        } else {
            if (positive)
                ++total.fp;
            else
                ++total.tn;
        }
    }

    MetricsReport report;
    const MetricsRow total_row = detail::row_from("Total", total);
    report.counts = total;
    report.tpr = total_row.tpr;
    report.fpr = total_row.fpr;
    report.fnr = total_row.fnr;
    report.dr = total_row.dr;
    report.da = total_row.da;

    // canonical category order first, anything unrecognized after it
    std::vector<std::string> order;
    for (int c = 0; c <= int(rule_category::scan); ++c)
        if (per_cat.count(category_name(rule_category(c))))
            order.push_back(category_name(rule_category(c)));
    for (const auto& [name, cm] : per_cat) {
        (void)cm;
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    }
    for (const std::string& name : order) {
        ConfusionMatrix cm = per_cat[name];
        cm.fp = total.fp; // benign windows are shared by every category row
        cm.tn = total.tn;
        report.per_category.push_back(detail::row_from(name, cm));
    }
    return report;
}

// ---- alarm log serialization ----

inline nlohmann::json alarm_to_json(const AlarmRecord& r) {
    return {{"timestamp_us", r.timestamp_us},
            {"window_start_us", r.window_start_us},
            {"flow_key", flow_key_to_string(r.flow)},
            {"source", alarm_source_name(r.source)},
            {"verdict", r.suppression ? "benign" : "malicious"},
            {"suppression", r.suppression},
            {"sids", r.sids},
            {"suppressed_sids", r.suppressed_sids},
            {"rule_hits", r.rule_hits},
            {"category", r.category},
            {"confidence", r.confidence}};
}

inline AlarmRecord alarm_from_json(const nlohmann::json& j) {
    AlarmRecord r;
    try {
        r.timestamp_us = j.at("timestamp_us").get<int64_t>();
        r.window_start_us = j.at("window_start_us").get<int64_t>();
        const auto flow = flow_key_from_string(j.at("flow_key").get<std::string>());
        if (!flow) throw model_format_error("bad flow key in alarm record");
        r.flow = *flow;
        const auto source = alarm_source_from_name(j.at("source").get<std::string>());
        if (!source) throw model_format_error("bad source in alarm record");
        r.source = *source;
        r.suppression = j.at("suppression").get<bool>();
        const std::string verdict = j.at("verdict").get<std::string>();
        if (verdict != (r.suppression ? "benign" : "malicious"))
            throw model_format_error("alarm verdict contradicts its suppression flag");
        r.sids = j.at("sids").get<std::vector<uint32_t>>();
        r.suppressed_sids = j.at("suppressed_sids").get<std::vector<uint32_t>>();
        r.rule_hits = j.at("rule_hits").get<uint64_t>();
        r.category = j.at("category").get<std::string>();
        r.confidence = j.at("confidence").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw model_format_error(std::string("bad alarm record: ") + e.what());
    }
    return r;
}

inline std::string alarms_to_jsonl(const std::vector<AlarmRecord>& records) {
    std::string out;
    for (const AlarmRecord& r : records) {
        out += alarm_to_json(r).dump();
        out += "\n";
    }
    return out;
}

inline std::vector<AlarmRecord> alarms_from_jsonl(const std::string& text) {
    std::vector<AlarmRecord> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(alarm_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw model_format_error(std::string("bad alarm record: ") + e.what());
        }
    }
    return out;
}

inline void save_alarms(const std::string& path, const std::vector<AlarmRecord>& records) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot open " + path + " for writing");
    out << alarms_to_jsonl(records);
}

inline std::vector<AlarmRecord> load_alarms(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return alarms_from_jsonl(ss.str());
}

inline nlohmann::json totals_to_json(const RunTotals& t) {
    return {{"frames", t.frames},
            {"decode_errors", t.decode_errors},
            {"windows", t.windows},
            {"raw_rule_hits", t.raw_rule_hits},
            {"alarm_records", t.alarm_records},
            {"suppression_records", t.suppression_records},
            {"alarmed_hits", t.alarmed_hits},
            {"suppressed_hits", t.suppressed_hits}};
}

} // namespace minids

#endif
