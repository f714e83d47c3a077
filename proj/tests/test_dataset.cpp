#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "minids/dataset.hpp"
#include "minids/framebuild.hpp"

using namespace minids;

namespace {

host_id mk_host(uint32_t ip) {
    host_id h;
    h.ip = ip;
    h.mac = {0x02, 0, 0, uint8_t(ip >> 16), uint8_t(ip >> 8), uint8_t(ip)};
    return h;
}

bytes_t to_bytes(const std::string& s) { return bytes_t(s.begin(), s.end()); }

std::string write_temp_csv(const std::string& content) {
    static int counter = 0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("minids_ds_" + std::to_string(++counter) + ".csv");
    std::ofstream out(path);
    out << content;
    return path.string();
}

FlowWindow window_of(std::vector<RawFrame> frames, int64_t span_us = 1000000) {
    FlowWindow w;
    w.span_us = span_us;
    for (const RawFrame& f : frames) w.packets.push_back(decode_frame(f));
    if (!w.packets.empty()) w.key = canonical_key(w.packets.front());
    return w;
}

} // namespace

TEST_CASE("a single 1470-byte UDP frame featurizes to the documented basics") {
    const host_id a = mk_host(0x0a000001), b = mk_host(0x0a000002);
    const size_t payload_len = 1470 - 42; // frame = eth 14 + ip 20 + udp 8 + payload
    FlowWindow w = window_of({build_udp(500, a, b, 4000, 5001, bytes_t(payload_len, 'x'))});
    const FeatureVector v = extract_flow_features(w);
    REQUIRE(v.size() == 12);
    REQUIRE(v[0] == 1.0);              // packet_count
    REQUIRE(v[1] == 1470.0);           // byte_count
    REQUIRE(v[2] == 1470.0);           // mean_packet_size
    REQUIRE(v[6] == 1.0);              // unique_dst_ports
    REQUIRE(v[7] == 0.0);              // icmp_ratio
    REQUIRE(v[10] == 0.0);             // mean_interarrival_us (single packet)
    REQUIRE(v[11] == 1.0);             // direction_ratio
}

TEST_CASE("500 packets over a one-second window give packet_rate 500") {
    const host_id a = mk_host(0x0a000001), b = mk_host(0x0a000002);
    std::vector<RawFrame> frames;
    for (int i = 0; i < 500; ++i)
        frames.push_back(build_udp(i * 2000, a, b, 4000, 5001, bytes_t(100, 'x')));
    const FeatureVector v = extract_flow_features(window_of(std::move(frames)));
    REQUIRE(v[0] == 500.0);
    REQUIRE(v[3] == 500.0);
    REQUIRE(v[10] == 2000.0);
}

TEST_CASE("empty windows are rejected") {
    FlowWindow w;
    REQUIRE_THROWS_AS(extract_flow_features(w), empty_window);
}

TEST_CASE("span is floored at one millisecond for rate computation") {
    const host_id a = mk_host(1), b = mk_host(2);
    FlowWindow w = window_of({build_udp(0, a, b, 1, 2, {})}, 0);
    REQUIRE(extract_flow_features(w)[3] == 1000.0); // 1 packet / 1 ms
}

TEST_CASE("tcp flag and payload features respond to content") {
    const host_id a = mk_host(1), b = mk_host(2);
    SECTION("all-SYN burst") {
        std::vector<RawFrame> frames;
        for (int i = 0; i < 10; ++i)
            frames.push_back(build_tcp(i, a, b, uint16_t(1000 + i), uint16_t(i + 1),
                                       tcpflag::syn, {}));
        const FeatureVector v = extract_flow_features(window_of(std::move(frames)));
        REQUIRE(v[4] == 1.0);  // tcp_syn_ratio
        REQUIRE(v[5] == 0.0);  // single flag value, zero entropy
        REQUIRE(v[6] == 10.0); // one port each
        REQUIRE(v[9] == 0.0);  // no payloads
    }
    SECTION("mixed flags have positive entropy") {
        std::vector<RawFrame> frames;
        for (int i = 0; i < 8; ++i)
            frames.push_back(build_tcp(i, a, b, 1000, 80,
                                       i % 2 ? tcpflag::syn : uint8_t(tcpflag::psh | tcpflag::ack),
                                       to_bytes("x")));
        const FeatureVector v = extract_flow_features(window_of(std::move(frames)));
        REQUIRE(v[4] == 0.5);
        REQUIRE(v[5] == Catch::Approx(1.0)); // two equally common flag bytes
    }
    SECTION("uniform random payload entropy approaches 8 bits, constant is 0") {
        rng_t rng(3);
        bytes_t uniform_payload(4096);
        for (auto& c : uniform_payload) c = uint8_t(rng());
        const FeatureVector hi = extract_flow_features(
            window_of({build_tcp(0, a, b, 1, 2, 0, uniform_payload)}));
        REQUIRE(hi[9] > 7.8);
        const FeatureVector lo = extract_flow_features(
            window_of({build_tcp(0, a, b, 1, 2, 0, bytes_t(512, 'A'))}));
        REQUIRE(lo[9] == 0.0);
    }
    SECTION("icmp and arp ratios") {
        std::vector<RawFrame> frames;
        frames.push_back(build_icmp_echo(0, a, b, 8, 1, 1, to_bytes("ping")));
        frames.push_back(build_icmp_echo(1, a, b, 8, 1, 2, to_bytes("ping")));
        frames.push_back(build_arp(2, a.mac, b.mac, 2, a.mac, a.ip, b.mac, b.ip));
        frames.push_back(build_udp(3, a, b, 1, 2, {}));
        FlowWindow w;
        w.span_us = 1000000;
        for (const RawFrame& f : frames) w.packets.push_back(decode_frame(f));
        w.key = canonical_key(w.packets.front());
        const FeatureVector v = extract_flow_features(w);
        REQUIRE(v[7] == 0.5);
        REQUIRE(v[8] == 0.25);
    }
}

TEST_CASE("direction ratio counts packets leaving the canonical source") {
    const host_id lo = mk_host(0x0a000001), hi = mk_host(0x0a000009);
    std::vector<RawFrame> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(build_udp(i, lo, hi, 1, 2, {}));
    frames.push_back(build_udp(3, hi, lo, 2, 1, {}));
    const FeatureVector v = extract_flow_features(window_of(std::move(frames)));
    REQUIRE(v[11] == 0.75);
}

TEST_CASE("features are invariant under timestamp translation") {
    const host_id a = mk_host(7), b = mk_host(9);
    rng_t rng(55);
    std::vector<RawFrame> frames;
    int64_t t = 0;
    for (int i = 0; i < 60; ++i) {
        t += int64_t(uniform_index(rng, 20000));
        bytes_t payload(uniform_index(rng, 400));
        for (auto& c : payload) c = uint8_t(rng());
        frames.push_back(build_tcp(t, a, b, 1234, uint16_t(1 + uniform_index(rng, 100)),
                                   uniform01(rng) < 0.3 ? tcpflag::syn : tcpflag::ack, payload));
    }
    const FeatureVector base = extract_flow_features(window_of(frames));
    for (RawFrame& f : frames) f.timestamp_us += 86400000000LL;
    const FeatureVector shifted = extract_flow_features(window_of(frames));
    REQUIRE(base == shifted);
}

TEST_CASE("window grouping aligns to epoch seconds and merges directions") {
    const host_id a = mk_host(0x0a000001), b = mk_host(0x0a000005);
    std::vector<DecodedPacket> pkts;
    pkts.push_back(decode_frame(build_udp(999999, a, b, 1, 2, {})));
    pkts.push_back(decode_frame(build_udp(1000000, a, b, 1, 2, {})));
    pkts.push_back(decode_frame(build_udp(1500000, b, a, 2, 1, {})));
    RawFrame vlan = build_udp(1600000, a, b, 1, 2, {});
    vlan.bytes[12] = 0x81; // NonIp frames carry no flow identity
    vlan.bytes[13] = 0x00;
    pkts.push_back(decode_frame(vlan));

    const auto windows = group_into_windows(pkts);
    REQUIRE(windows.size() == 2);
    const auto first = windows.begin();
    REQUIRE(first->first.window == 0);
    REQUIRE(first->second.packets.size() == 1);
    const auto second = std::next(first);
    REQUIRE(second->first.window == 1);
    REQUIRE(second->second.packets.size() == 2); // both directions, no vlan frame
    REQUIRE(second->first.flow == first->first.flow);
    REQUIRE(second->second.packets[0].timestamp_us <= second->second.packets[1].timestamp_us);
}

TEST_CASE("bundled NSL-KDD-layout sample loads with the documented shape") {
    const std::string path = std::string(MINIDS_DATA_DIR) + "/nslkdd_sample.csv";
    const LabeledDataset ds = load_labeled_csv(path, csv_format::nsl_kdd);
    REQUIRE(ds.size() == 500);
    REQUIRE(ds.dim() == 41);
    REQUIRE(ds.feature_names.size() == 41);
    REQUIRE(ds.feature_names[0] == "duration");
    REQUIRE(ds.feature_names[1] == "protocol_type");
    REQUIRE(ds.feature_names[40] == "dst_host_srv_rerror_rate");
    const long benign = std::count(ds.y.begin(), ds.y.end(), label_benign);
    REQUIRE(benign == 250);

    // loading twice gives an identical dataset, symbolic codes included
    const LabeledDataset again = load_labeled_csv(path, csv_format::nsl_kdd);
    REQUIRE(again.X == ds.X);
    REQUIRE(again.y == ds.y);
}

TEST_CASE("nsl_kdd parsing encodes symbols by first appearance and maps labels") {
    const std::string row_tail = ",0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,"
                                 "0.0,0.0,0.0,0.0,1.0,0.0,0.0,1,1,1.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0";
    const std::string content = "0,tcp,http,SF,100,200" + row_tail + ",normal,21\n" +
                                "0,udp,http,S0,1,2" + row_tail + ",neptune,20\n" +
                                "0,tcp,ftp,SF,3,4" + row_tail + ",teardrop\n";
    const std::string path = write_temp_csv(content);
    const LabeledDataset ds = load_labeled_csv(path, csv_format::nsl_kdd);
    REQUIRE(ds.size() == 3);
    // protocol_type: tcp=0, udp=1; service: http=0, ftp=1; flag: SF=0, S0=1
    REQUIRE(ds.X[0][1] == 0.0);
    REQUIRE(ds.X[1][1] == 1.0);
    REQUIRE(ds.X[2][1] == 0.0);
    REQUIRE(ds.X[0][2] == 0.0);
    REQUIRE(ds.X[2][2] == 1.0);
    REQUIRE(ds.X[1][3] == 1.0);
    REQUIRE(ds.y == std::vector<int>({label_benign, label_malicious, label_malicious}));
    std::remove(path.c_str());
}

TEST_CASE("nsl_kdd rejects malformed rows") {
    SECTION("wrong column count names the row") {
        const std::string path = write_temp_csv("1,2,3\n");
        try {
            load_labeled_csv(path, csv_format::nsl_kdd);
            FAIL("expected column_count_mismatch");
        } catch (const column_count_mismatch& e) {
            REQUIRE(std::string(e.what()).find("row 1") != std::string::npos);
        }
        std::remove(path.c_str());
    }
    SECTION("unparsable numeric cell") {
        std::string row = "oops,tcp,http,SF";
        for (int i = 0; i < 37; ++i) row += ",0";
        row += ",normal,21\n";
        const std::string path = write_temp_csv(row);
        REQUIRE_THROWS_AS(load_labeled_csv(path, csv_format::nsl_kdd), unparsable_number);
        std::remove(path.c_str());
    }
    SECTION("empty file") {
        const std::string path = write_temp_csv("\n  \n");
        REQUIRE_THROWS_AS(load_labeled_csv(path, csv_format::nsl_kdd), empty_file);
        std::remove(path.c_str());
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_labeled_csv("/nonexistent/x.csv", csv_format::nsl_kdd),
                          empty_file);
    }
}

TEST_CASE("generic csv handles headers and both label conventions") {
    SECTION("with header, 0/1 labels") {
        const std::string path = write_temp_csv("alpha,beta,label\n1,2,0\n3,4,1\n");
        const LabeledDataset ds = load_labeled_csv(path, csv_format::generic);
        REQUIRE(ds.feature_names == std::vector<std::string>({"alpha", "beta"}));
        REQUIRE(ds.X == std::vector<FeatureVector>({{1, 2}, {3, 4}}));
        REQUIRE(ds.y == std::vector<int>({label_benign, label_malicious}));
        std::remove(path.c_str());
    }
    SECTION("headerless, -1/+1 labels") {
        const std::string path = write_temp_csv("0.5,-1\n0.7,1\n");
        const LabeledDataset ds = load_labeled_csv(path, csv_format::generic);
        REQUIRE(ds.feature_names == std::vector<std::string>({"f0"}));
        REQUIRE(ds.y == std::vector<int>({label_benign, label_malicious}));
        std::remove(path.c_str());
    }
    SECTION("bad label value") {
        const std::string path = write_temp_csv("1,2,7\n");
        REQUIRE_THROWS_AS(load_labeled_csv(path, csv_format::generic), unparsable_number);
        std::remove(path.c_str());
    }
    SECTION("ragged data row") {
        const std::string path = write_temp_csv("1,2,0\n1,2,3,0\n");
        REQUIRE_THROWS_AS(load_labeled_csv(path, csv_format::generic), column_count_mismatch);
        std::remove(path.c_str());
    }
    SECTION("header-only file has no data") {
        const std::string path = write_temp_csv("a,b,label\n");
        REQUIRE_THROWS_AS(load_labeled_csv(path, csv_format::generic), empty_file);
        std::remove(path.c_str());
    }
}

TEST_CASE("minmax normalization follows the declared mapping") {
    LabeledDataset ds;
    ds.feature_names = {"a", "b", "c"};
    ds.X = {{0, 5, 2}, {5, 5, 2}, {10, 5, 4}};
    ds.y = {label_benign, label_benign, label_malicious};

    const NormParams p = fit_minmax(ds);
    REQUIRE(p.min == std::vector<double>({0, 5, 2}));
    REQUIRE(p.max == std::vector<double>({10, 5, 4}));

    REQUIRE(apply_minmax(p, {0, 5, 2}) == FeatureVector({0, 0, 0}));
    REQUIRE(apply_minmax(p, {10, 5, 4}) == FeatureVector({1, 0, 1}));
    REQUIRE(apply_minmax(p, {5, 5, 3}) == FeatureVector({0.5, 0, 0.5}));
    // clamping for unseen values, zero for constant columns
    REQUIRE(apply_minmax(p, {25, 99, -7}) == FeatureVector({1, 0, 0}));
    REQUIRE(apply_minmax(p, {-3, 0, 2})[0] == 0.0);

    REQUIRE_THROWS_AS(apply_minmax(p, {1, 2}), dimension_mismatch);
    REQUIRE_THROWS_AS(fit_minmax(LabeledDataset{}), empty_dataset);

    SECTION("single sample fits to min==max==sample") {
        LabeledDataset one;
        one.X = {{3, 4}};
        one.y = {label_benign};
        const NormParams q = fit_minmax(one);
        REQUIRE(q.min == q.max);
        REQUIRE(q.min == std::vector<double>({3, 4}));
        REQUIRE(apply_minmax(q, {3, 4}) == FeatureVector({0, 0}));
    }
}

TEST_CASE("normalizing a dataset with its own params lands every value in [0,1]") {
    rng_t rng(808);
    LabeledDataset ds;
    for (int i = 0; i < 200; ++i) {
        FeatureVector v(6);
        for (double& x : v) x = uniform(rng, -1000, 1000);
        ds.X.push_back(v);
        ds.y.push_back(uniform01(rng) < 0.5 ? label_benign : label_malicious);
    }
    const LabeledDataset norm = apply_minmax(fit_minmax(ds), ds);
    for (const FeatureVector& v : norm.X)
        for (double x : v) {
            REQUIRE(x >= 0.0);
            REQUIRE(x <= 1.0);
        }
    REQUIRE(norm.norm_params.has_value());
}

TEST_CASE("stratified folds balance both classes") {
    LabeledDataset ds;
    for (int i = 0; i < 100; ++i) {
        ds.X.push_back({double(i)});
        ds.y.push_back(i < 50 ? label_benign : label_malicious);
    }
    const auto folds = stratified_kfold(ds, 10, 42);
    REQUIRE(folds.size() == 10);
    for (const fold_split& f : folds) {
        REQUIRE(f.test.size() == 10);
        REQUIRE(f.train.size() == 90);
        const long benign = std::count_if(f.test.begin(), f.test.end(),
                                          [&](size_t i) { return ds.y[i] == label_benign; });
        REQUIRE(benign == 5);
    }
}

TEST_CASE("k-fold partition properties hold for random shapes") {
    rng_t shape_rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        const size_t k = 2 + uniform_index(shape_rng, 9);
        const size_t n_benign = k + uniform_index(shape_rng, 40);
        const size_t n_mal = k + uniform_index(shape_rng, 40);
        LabeledDataset ds;
        for (size_t i = 0; i < n_benign + n_mal; ++i) {
            ds.X.push_back({double(i)});
            ds.y.push_back(i < n_benign ? label_benign : label_malicious);
        }
        const uint64_t seed = shape_rng();
        const auto folds = stratified_kfold(ds, k, seed);

        std::vector<size_t> all;
        size_t min_fold = SIZE_MAX, max_fold = 0;
        size_t min_b = SIZE_MAX, max_b = 0;
        for (const fold_split& f : folds) {
            all.insert(all.end(), f.test.begin(), f.test.end());
            min_fold = std::min(min_fold, f.test.size());
            max_fold = std::max(max_fold, f.test.size());
            const size_t b = size_t(std::count_if(
                f.test.begin(), f.test.end(), [&](size_t i) { return ds.y[i] == label_benign; }));
            min_b = std::min(min_b, b);
            max_b = std::max(max_b, b);
            // train is the complement
            REQUIRE(f.train.size() + f.test.size() == ds.size());
        }
        std::sort(all.begin(), all.end());
        std::vector<size_t> expect(ds.size());
        for (size_t i = 0; i < ds.size(); ++i) expect[i] = i;
        REQUIRE(all == expect);
        REQUIRE(max_fold - min_fold <= 1);
        REQUIRE(max_b - min_b <= 1);

        // same seed reproduces the exact split
        const auto again = stratified_kfold(ds, k, seed);
        for (size_t f = 0; f < k; ++f) REQUIRE(again[f].test == folds[f].test);
    }
}

TEST_CASE("undersized classes are rejected") {
    LabeledDataset ds;
    for (int i = 0; i < 30; ++i) {
        ds.X.push_back({double(i)});
        ds.y.push_back(i < 5 ? label_malicious : label_benign);
    }
    REQUIRE_THROWS_AS(stratified_kfold(ds, 10, 1), too_few_samples);
    REQUIRE_THROWS_AS(stratified_kfold(ds, 1, 1), too_few_samples);
    REQUIRE_NOTHROW(stratified_kfold(ds, 5, 1));
}
