// Command line front end: scenario generation, feature extraction, training,
// firefly tuning, cross-validation, pipeline runs, and report rendering.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "minids/firefly.hpp"
#include "minids/pcap.hpp"
#include "minids/pipeline.hpp"

using namespace minids;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_json(const nlohmann::json& j) { std::printf("%s\n", j.dump(2).c_str()); }

// Loads a labeled CSV. A generic file whose header names exactly the flow
// window schema is promoted to that schema so the resulting model can be
// deployed in the pipeline.
LabeledDataset load_dataset(const std::string& path, const std::string& format) {
    const csv_format f = format == "nsl_kdd" ? csv_format::nsl_kdd : csv_format::generic;
    LabeledDataset ds = load_labeled_csv(path, f);
    const auto& names = flow_feature_names();
    if (ds.feature_names.size() == names.size() &&
        std::equal(names.begin(), names.end(), ds.feature_names.begin()))
        ds.schema_id = flow_schema_id;
    return ds;
}

std::string fmt_rate(double v) { return std::isfinite(v) ? percent_1dp(v) : "-"; }

void print_report_table(const MetricsReport& rep) {
    auto line = [](const std::string& name, const ConfusionMatrix& cm, double tpr, double fpr,
                   double fnr, double dr, double da) {
        std::printf("%-10s %7llu %7llu %7llu %7llu %8s %8s %8s %8s %8s\n", name.c_str(),
                    (unsigned long long)cm.tp, (unsigned long long)cm.fp,
                    (unsigned long long)cm.tn, (unsigned long long)cm.fn, fmt_rate(tpr).c_str(),
                    fmt_rate(fpr).c_str(), fmt_rate(fnr).c_str(), fmt_rate(dr).c_str(),
                    fmt_rate(da).c_str());
    };
    std::printf("%-10s %7s %7s %7s %7s %8s %8s %8s %8s %8s\n", "Category", "TP", "FP", "TN", "FN",
                "TPR", "FPR", "FNR", "DR", "DA");
    for (const MetricsRow& r : rep.per_category)
        line(r.name, r.counts, r.tpr, r.fpr, r.fnr, r.dr, r.da);
    line("Total", rep.counts, rep.tpr, rep.fpr, rep.fnr, rep.dr, rep.da);
}

void print_cv_table(const CvResult& r) {
    std::printf("%-6s %8s %8s %8s\n", "Fold", "TPR", "FPR", "FNR");
    for (size_t i = 0; i < r.folds.size(); ++i)
        std::printf("%-6zu %8s %8s %8s\n", i + 1, fmt_rate(r.folds[i].tpr).c_str(),
                    fmt_rate(r.folds[i].fpr).c_str(), fmt_rate(r.folds[i].fnr).c_str());
    std::printf("%-6s %8s %8s %8s\n", "Mean", fmt_rate(r.mean.tpr).c_str(),
                fmt_rate(r.mean.fpr).c_str(), fmt_rate(r.mean.fnr).c_str());
    std::printf("DR %s  DA %s\n", fmt_rate(r.mean.dr).c_str(), fmt_rate(r.mean.da).c_str());
}

// ---- gen ----

struct GenOpts {
    std::string scenario, out, truth;
};

void run_gen(const GenOpts& o) {
    const ScenarioSpec sc = load_scenario(o.scenario);
    const GeneratedTraffic t = mix(sc);
    write_pcap(o.out, t.frames);
    save_truth(o.truth, t.truth);
    print_json({{"frames", t.frames.size()}, {"truth_records", t.truth.size()}});
}

void setup_gen(CLI::App& app) {
    auto o = std::make_shared<GenOpts>();
    CLI::App* sub = app.add_subcommand("gen", "generate a scenario capture plus ground truth");
    sub->add_option("--scenario", o->scenario, "scenario description (json)")->required();
    sub->add_option("--out", o->out, "output capture (pcap)")->required();
    sub->add_option("--truth", o->truth, "output ground truth (jsonl)")->required();
    sub->callback([o] { run_gen(*o); });
}

// ---- features ----

struct FeaturesOpts {
    std::string pcap, truth, out;
};

// Windows a capture into one-second flow cells and writes one labeled CSV row
// per cell, ready for train/tune/cv. %.17g keeps the doubles bit-exact
// through the round-trip.
void run_features(const FeaturesOpts& o) {
    const std::vector<RawFrame> frames = read_pcap(o.pcap);
    const std::vector<TruthRecord> truth = load_truth(o.truth);

    std::map<window_flow_id, const TruthRecord*> labels;
    for (const TruthRecord& t : truth) {
        window_flow_id id;
        id.window = t.window_start_us / 1000000;
        id.flow = t.flow;
        labels.emplace(id, &t);
    }

    std::vector<DecodedPacket> pkts;
    uint64_t decode_errors = 0;
    for (const RawFrame& f : frames) {
        try {
            pkts.push_back(decode_frame(f));
        } catch (const error&) {
            ++decode_errors;
        }
    }

    std::ofstream out(o.out);
    if (!out) throw io_failure("cannot open " + o.out + " for writing");
    for (const std::string& name : flow_feature_names()) out << name << ",";
    out << "label\n";

    uint64_t benign = 0, malicious = 0;
    char buf[32];
    for (const auto& [id, w] : group_into_windows(pkts)) {
        const auto it = labels.find(id);
        if (it == labels.end())
            throw truth_gap("no truth label for " + flow_key_to_string(id.flow) + " @" +
                            std::to_string(id.window * 1000000));
        for (double v : extract_flow_features(w)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ",";
        }
        out << (it->second->label == label_malicious ? "1" : "-1") << "\n";
        (it->second->label == label_malicious ? malicious : benign)++;
    }
    print_json({{"rows", benign + malicious},
                {"benign", benign},
                {"malicious", malicious},
                {"decode_errors", decode_errors}});
}

void setup_features(CLI::App& app) {
    auto o = std::make_shared<FeaturesOpts>();
    CLI::App* sub =
        app.add_subcommand("features", "extract labeled flow window features from a capture");
    sub->add_option("--pcap", o->pcap, "input capture")->required();
    sub->add_option("--truth", o->truth, "ground truth (jsonl)")->required();
    sub->add_option("--out", o->out, "output dataset (csv)")->required();
    sub->callback([o] { run_features(*o); });
}

// ---- train ----

struct TrainOpts {
    std::string model, data, format = "generic", fuzzy_config, out;
    double c = 1.0, gamma = 0.1;
    int max_depth = 6, min_leaf = 2;
};

void run_train(const TrainOpts& o) {
    if (o.model == "fuzzy" && o.fuzzy_config.empty())
        throw CLI::RequiredError("--fuzzy-config (with --model fuzzy)");

    const LabeledDataset raw = load_dataset(o.data, o.format);
    const NormParams norm = fit_minmax(raw);

    nlohmann::json summary = {{"rows", raw.size()}, {"features", raw.dim()}, {"out", o.out}};
    if (o.model == "fuzzy") {
        // nothing to fit beyond normalization: package the config with it
        FuzzyBundle b;
        b.system = load_fuzzy(o.fuzzy_config);
        b.norm_params = norm;
        b.schema_id = raw.schema_id;
        b.feature_names = raw.feature_names;
        detail::map_fuzzy_inputs(b.system, b.feature_names, false); // fail fast on bad columns
        save_fuzzy_bundle(o.out, b);
        summary["model_kind"] = "fuzzy_bundle";
    } else {
        const LabeledDataset ds = apply_minmax(norm, raw);
        if (o.model == "svm") {
            save_svm(train_smo(ds, o.c, o.gamma), o.out);
            summary["model_kind"] = "svm";
        } else if (o.model == "nb") {
            save_nb(train_naive_bayes(ds), o.out);
            summary["model_kind"] = "nb";
        } else {
            save_tree(train_cart(ds, o.max_depth, o.min_leaf), o.out);
            summary["model_kind"] = "cart";
        }
    }
    print_json(summary);
}

void setup_train(CLI::App& app) {
    auto o = std::make_shared<TrainOpts>();
    CLI::App* sub = app.add_subcommand("train", "fit a classifier and save the model");
    sub->add_option("--model", o->model, "classifier kind")
        ->required()
        ->check(CLI::IsMember({"svm", "nb", "cart", "fuzzy"}));
    sub->add_option("--data", o->data, "labeled dataset (csv)")->required();
    sub->add_option("--format", o->format, "dataset format")
        ->check(CLI::IsMember({"nsl_kdd", "generic"}));
    sub->add_option("--c", o->c, "svm soft-margin C");
    sub->add_option("--gamma", o->gamma, "svm rbf gamma");
    sub->add_option("--max-depth", o->max_depth, "cart depth limit");
    sub->add_option("--min-leaf", o->min_leaf, "cart minimum leaf size");
    sub->add_option("--fuzzy-config", o->fuzzy_config, "fuzzy system (json, --model fuzzy)");
    sub->add_option("--out", o->out, "output model (json)")->required();
    sub->callback([o] { run_train(*o); });
}

// ---- tune ----

struct TuneOpts {
    std::string data, data_format = "generic", out, report;
    uint64_t seed = 0;
    int population = 20, iterations = 50;
    size_t k = 10;
};

void run_tune(const TuneOpts& o) {
    const LabeledDataset raw = load_dataset(o.data, o.data_format);

    FireflyParams params;
    params.population = o.population;
    params.iterations = o.iterations;
    params.seed = o.seed;
    const SearchSpace space = default_svm_space();
    const TuneResult r = tune_svm(raw, space, params, o.k);

    std::ofstream rep(o.report);
    if (!rep) throw io_failure("cannot open " + o.report + " for writing");
    rep << tune_to_json(r, params, space).dump(2) << "\n";

    // deployable model: refit on everything at the tuned operating point
    const NormParams norm = fit_minmax(raw);
    save_svm(train_smo(apply_minmax(norm, raw), r.c_param, r.gamma_rbf), o.out);
    print_json({{"best_c", r.c_param}, {"best_gamma", r.gamma_rbf}, {"fitness", r.fitness}});
}

void setup_tune(CLI::App& app) {
    auto o = std::make_shared<TuneOpts>();
    CLI::App* sub = app.add_subcommand("tune", "firefly search over svm (C, gamma)");
    sub->add_option("--data", o->data, "labeled dataset (csv)")->required();
    sub->add_option("--data-format", o->data_format, "dataset format")
        ->check(CLI::IsMember({"nsl_kdd", "generic"}));
    sub->add_option("--seed", o->seed, "search seed")->required();
    sub->add_option("--population", o->population, "fireflies");
    sub->add_option("--iterations", o->iterations, "search iterations");
    sub->add_option("--k", o->k, "cross-validation folds for the fitness");
    sub->add_option("--out", o->out, "output model (json)")->required();
    sub->add_option("--report", o->report, "output search report (json)")->required();
    sub->callback([o] { run_tune(*o); });
}

// ---- cv ----

struct CvOpts {
    std::string data, data_format = "generic", model, fuzzy_config, format = "json";
    size_t k = 10;
    uint64_t seed = 0;
    double c = 1.0, gamma = 0.1;
    int max_depth = 6, min_leaf = 2;
};

void run_cv(const CvOpts& o) {
    if ((o.model == "fuzzy" || o.model == "hybrid") && o.fuzzy_config.empty())
        throw CLI::RequiredError("--fuzzy-config (with --model " + o.model + ")");

    ClassifierSpec spec;
    spec.kind = classifier_kind_from_name(o.model);
    spec.c_param = o.c;
    spec.gamma_rbf = o.gamma;
    spec.max_depth = o.max_depth;
    spec.min_leaf = o.min_leaf;
    if (!o.fuzzy_config.empty()) spec.fuzzy_system = load_fuzzy(o.fuzzy_config);

    const CvResult r = cross_validate(load_dataset(o.data, o.data_format), spec, o.k, o.seed);
    if (o.format == "table")
        print_cv_table(r);
    else
        print_json(cv_to_json(r));
}

void setup_cv(CLI::App& app) {
    auto o = std::make_shared<CvOpts>();
    CLI::App* sub = app.add_subcommand("cv", "stratified k-fold cross-validation");
    sub->add_option("--data", o->data, "labeled dataset (csv)")->required();
    sub->add_option("--data-format", o->data_format, "dataset format")
        ->check(CLI::IsMember({"nsl_kdd", "generic"}));
    sub->add_option("--model", o->model, "classifier kind")
        ->required()
        ->check(CLI::IsMember({"svm", "nb", "cart", "fuzzy", "hybrid"}));
    sub->add_option("--k", o->k, "number of folds");
    sub->add_option("--seed", o->seed, "fold shuffle seed")->required();
    sub->add_option("--format", o->format, "output format")
        ->check(CLI::IsMember({"json", "table"}));
    sub->add_option("--c", o->c, "svm soft-margin C");
    sub->add_option("--gamma", o->gamma, "svm rbf gamma");
    sub->add_option("--max-depth", o->max_depth, "cart depth limit");
    sub->add_option("--min-leaf", o->min_leaf, "cart minimum leaf size");
    sub->add_option("--fuzzy-config", o->fuzzy_config, "fuzzy system (json)");
    sub->callback([o] { run_cv(*o); });
}

// ---- run ----

struct RunOpts {
    std::string pcap, rules, plugin, fuzzy_config, out;
    double theta_s = 0.8, theta_a = 0.9;
};

// The plug-in kind comes from the model file itself; an svm model plus a
// fuzzy config makes the hybrid.
plugin_kind infer_plugin_kind(const std::string& model_path, bool with_fuzzy_config) {
    std::ifstream in(model_path);
    if (!in) throw artifact_load_error("cannot open " + model_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw artifact_load_error(model_path + " is not a model file: " + e.what());
    }
    const std::string kind = j.value("model_kind", "");
    if (kind == "svm") return with_fuzzy_config ? plugin_kind::hybrid : plugin_kind::svm;
    if (kind == "nb") return plugin_kind::nb;
    if (kind == "cart") return plugin_kind::cart;
    if (kind == "fuzzy_bundle") return plugin_kind::fuzzy;
    throw artifact_load_error(model_path + " has unrecognized model_kind '" + kind + "'");
}

void run_run(const RunOpts& o) {
    const RuleSet rules = parse_ruleset(read_text(o.rules));

    std::optional<PluginSpec> spec;
    if (!o.plugin.empty()) {
        PluginSpec s;
        s.kind = infer_plugin_kind(o.plugin, !o.fuzzy_config.empty());
        s.model_path = o.plugin;
        s.fuzzy_config_path = o.fuzzy_config;
        s.suppress_threshold = o.theta_s;
        s.anomaly_threshold = o.theta_a;
        spec = s;
    }

    const Pipeline p = build_pipeline(rules, spec);
    const RunLog log = process(p, read_pcap(o.pcap));
    save_alarms(o.out, log.records);

    nlohmann::json j = totals_to_json(log.totals);
    j["plugin"] = spec ? plugin_kind_name(spec->kind) : "none";
    print_json(j);
}

void setup_run(CLI::App& app) {
    auto o = std::make_shared<RunOpts>();
    CLI::App* sub = app.add_subcommand("run", "run the detection pipeline over a capture");
    sub->add_option("--pcap", o->pcap, "input capture")->required();
    sub->add_option("--rules", o->rules, "ruleset file")->required();
    sub->add_option("--plugin", o->plugin, "classifier model (json); omit for rules only");
    sub->add_option("--fuzzy-config", o->fuzzy_config, "fuzzy system for the hybrid (json)");
    sub->add_option("--theta-s", o->theta_s, "suppression confidence threshold");
    sub->add_option("--theta-a", o->theta_a, "anomaly alarm confidence threshold");
    sub->add_option("--out", o->out, "output alarm log (jsonl)")->required();
    sub->callback([o] { run_run(*o); });
}

// ---- eval ----

struct EvalOpts {
    std::string log, truth, format = "json";
};

void run_eval(const EvalOpts& o) {
    RunLog log;
    log.records = load_alarms(o.log);
    const MetricsReport rep = evaluate_run(log, load_truth(o.truth));
    if (o.format == "table")
        print_report_table(rep);
    else
        print_json(report_to_json(rep));
}

void setup_eval(CLI::App& app) {
    auto o = std::make_shared<EvalOpts>();
    CLI::App* sub = app.add_subcommand("eval", "score an alarm log against ground truth");
    sub->add_option("--log", o->log, "alarm log (jsonl)")->required();
    sub->add_option("--truth", o->truth, "ground truth (jsonl)")->required();
    sub->add_option("--format", o->format, "output format")
        ->check(CLI::IsMember({"json", "table"}));
    sub->callback([o] { run_eval(*o); });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"miniature network intrusion detection toolkit"};
    app.require_subcommand(1);
    setup_gen(app);
    setup_features(app);
    setup_train(app);
    setup_tune(app);
    setup_cv(app);
    setup_run(app);
    setup_eval(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
