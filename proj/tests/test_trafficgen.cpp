#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "minids/pcap.hpp"
#include "minids/trafficgen.hpp"

using namespace minids;

namespace {

RuleSet load_default_rules() {
    const std::string path = std::string(MINIDS_DATA_DIR) + "/default.rules";
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ruleset(ss.str());
}

std::vector<DecodedPacket> decode_all(const std::vector<RawFrame>& frames) {
    std::vector<DecodedPacket> out;
    out.reserve(frames.size());
    for (const RawFrame& f : frames) out.push_back(decode_frame(f));
    return out;
}

bool frames_equal(const std::vector<RawFrame>& a, const std::vector<RawFrame>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].timestamp_us != b[i].timestamp_us || a[i].bytes != b[i].bytes) return false;
    return true;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

StreamSpec make_spec(stream_kind kind, double rate, uint64_t count) {
    StreamSpec s;
    s.kind = kind;
    s.rate = rate;
    s.count = count;
    return s;
}

} // namespace

TEST_CASE("the 500 pps profile emits 1470-byte payloads over about two seconds") {
    const GeneratedTraffic t = gen_legit(stream_kind::legit_udp, 500.0, 1000, 42);
    REQUIRE(t.frames.size() == 1000);

    for (const DecodedPacket& p : decode_all(t.frames)) {
        REQUIRE(p.proto == proto_t::udp);
        REQUIRE(p.payload.size() == 1470);
        REQUIRE(p.dst_port == 5001);
    }
    const int64_t span = t.frames.back().timestamp_us - t.frames.front().timestamp_us;
    REQUIRE(span >= 1950000);
    REQUIRE(span <= 2050000);

    // constant rate with at most 1% of one inter-arrival of jitter
    for (size_t i = 1; i < t.frames.size(); ++i) {
        const int64_t gap = t.frames[i].timestamp_us - t.frames[i - 1].timestamp_us;
        REQUIRE(gap >= 1980);
        REQUIRE(gap <= 2020);
    }

    REQUIRE_FALSE(t.truth.empty());
    for (const TruthRecord& r : t.truth) {
        REQUIRE(r.label == label_benign);
        REQUIRE(r.category.empty());
        REQUIRE(r.flow.proto == proto_t::udp);
    }
}

TEST_CASE("identical specs and seeds reproduce byte-identical captures and truth") {
    StreamSpec spec = make_spec(stream_kind::legit_tcp, 400.0, 800);
    spec.collide_prob = 0.5;
    const GeneratedTraffic a = gen_legit(spec, 7);
    const GeneratedTraffic b = gen_legit(spec, 7);
    REQUIRE(frames_equal(a.frames, b.frames));
    REQUIRE(truth_to_jsonl(a.truth) == truth_to_jsonl(b.truth));

    const GeneratedTraffic c = gen_legit(spec, 8);
    REQUIRE_FALSE(frames_equal(a.frames, c.frames));

    const std::string p1 = "/tmp/minids_gen_a.pcap", p2 = "/tmp/minids_gen_b.pcap";
    write_pcap(p1, a.frames);
    write_pcap(p2, b.frames);
    REQUIRE(read_file(p1) == read_file(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("stream validation rejects degenerate knobs") {
    REQUIRE_THROWS_AS(gen_legit(stream_kind::legit_udp, 0.0, 100, 1), invalid_spec);
    REQUIRE_THROWS_AS(gen_legit(stream_kind::legit_udp, -5.0, 100, 1), invalid_spec);
    REQUIRE_THROWS_AS(gen_legit(stream_kind::legit_udp, 100.0, 0, 1), invalid_spec);

    StreamSpec bad = make_spec(stream_kind::legit_udp, 100.0, 10);
    bad.collide_prob = 1.5;
    REQUIRE_THROWS_AS(gen_legit(bad, 1), invalid_spec);
    bad.collide_prob = 0.05;
    bad.start_us = -1;
    REQUIRE_THROWS_AS(gen_legit(bad, 1), invalid_spec);
    bad.start_us = 0;
    bad.intensity = 0.0;
    REQUIRE_THROWS_AS(gen_legit(bad, 1), invalid_spec);
    bad.intensity = 1.0;
    bad.src_ip = "999.1.2.3";
    REQUIRE_THROWS_AS(gen_legit(bad, 1), invalid_spec);

    // kind routing is strict in both directions
    REQUIRE_THROWS_AS(gen_legit(make_spec(stream_kind::atk_ssh, 100.0, 10), 1), invalid_spec);
    REQUIRE_THROWS_AS(gen_attack(make_spec(stream_kind::legit_udp, 100.0, 10), 1), invalid_spec);
}

TEST_CASE("collision knob controls whether benign windows trip content rules") {
    const RuleSet rules = load_default_rules();

    StreamSpec clean = make_spec(stream_kind::legit_udp, 200.0, 600);
    clean.collide_prob = 0.0;
    for (const DecodedPacket& p : decode_all(gen_legit(clean, 3).frames))
        REQUIRE(scan(rules, p).empty());

    StreamSpec noisy = clean;
    noisy.collide_prob = 1.0;
    const GeneratedTraffic t = gen_legit(noisy, 3);
    std::set<int64_t> windows, hit_windows;
    for (const DecodedPacket& p : decode_all(t.frames)) {
        windows.insert(p.timestamp_us / 1000000);
        if (!scan(rules, p).empty()) hit_windows.insert(p.timestamp_us / 1000000);
    }
    REQUIRE(windows == hit_windows); // every window planted, every window fires
    REQUIRE(windows.size() >= 3);
}

TEST_CASE("every attack shape except the scan trips rules of its own category") {
    const RuleSet rules = load_default_rules();
    const stream_kind noisy_kinds[] = {stream_kind::atk_ssh,  stream_kind::atk_dos,
                                       stream_kind::atk_ftp,  stream_kind::atk_http,
                                       stream_kind::atk_icmp, stream_kind::atk_arp};

    for (stream_kind kind : noisy_kinds) {
        const GeneratedTraffic t = gen_attack(make_spec(kind, 100.0, 300), 17);
        const rule_category want = *stream_category(kind);

        // every one-second window of the stream must contain at least one
        // packet that fires a rule of the stream's own category
        std::set<int64_t> windows, matched;
        for (const DecodedPacket& p : decode_all(t.frames)) {
            const int64_t w = p.timestamp_us / 1000000;
            windows.insert(w);
            for (uint32_t sid : scan(rules, p)) {
                if (rules.find_sid(sid)->category == want) {
                    matched.insert(w);
                    break;
                }
            }
        }
        INFO("kind " << stream_kind_name(kind));
        REQUIRE(windows == matched);

        for (const TruthRecord& r : t.truth) {
            REQUIRE(r.label == label_malicious);
            REQUIRE(r.category == category_name(want));
        }
    }

    for (const DecodedPacket& p :
         decode_all(gen_attack(make_spec(stream_kind::atk_scan, 100.0, 300), 17).frames))
        REQUIRE(scan(rules, p).empty());
}

TEST_CASE("the port scan covers over a hundred ports per window with bare SYNs") {
    const GeneratedTraffic t = gen_attack(make_spec(stream_kind::atk_scan, 200.0, 600), 23);
    const auto windows = group_into_windows(decode_all(t.frames));
    REQUIRE_FALSE(windows.empty());

    size_t big_windows = 0;
    for (const auto& [id, w] : windows) {
        (void)id;
        const FeatureVector v = extract_flow_features(w);
        if (w.packets.size() >= 150) {
            REQUIRE(v[6] >= 100.0); // unique_dst_ports
            ++big_windows;
        }
        REQUIRE(v[4] == 1.0); // every packet is a SYN
    }
    REQUIRE(big_windows >= 3);

    for (const DecodedPacket& p : decode_all(t.frames)) {
        REQUIRE(p.proto == proto_t::tcp);
        REQUIRE(p.tcp_flags == tcpflag::syn);
        REQUIRE(p.payload.empty());
    }
}

TEST_CASE("gratuitous ARP claims one IP from conflicting MACs") {
    const GeneratedTraffic t = gen_attack(make_spec(stream_kind::atk_arp, 50.0, 120), 29);
    std::set<mac_addr> macs;
    for (const DecodedPacket& p : decode_all(t.frames)) {
        REQUIRE(p.proto == proto_t::arp);
        REQUIRE(p.arp_op == 2);
        REQUIRE(p.arp_sender_ip == *ipv4_from_string("192.168.1.1"));
        macs.insert(p.arp_sender_mac);
    }
    REQUIRE(macs.size() >= 2);
}

TEST_CASE("benign pings still trip the protocol catch-all rule") {
    const RuleSet rules = load_default_rules();
    StreamSpec spec = make_spec(stream_kind::legit_icmp, 100.0, 200);
    spec.collide_prob = 0.0;
    const GeneratedTraffic t = gen_legit(spec, 31);
    for (const DecodedPacket& p : decode_all(t.frames)) {
        const std::vector<uint32_t> sids = scan(rules, p);
        REQUIRE(std::find(sids.begin(), sids.end(), 477u) != sids.end());
    }
    for (const TruthRecord& r : t.truth) REQUIRE(r.label == label_benign);
}

TEST_CASE("mix merges streams by timestamp with declaration-order ties") {
    ScenarioSpec sc;
    sc.seed = 91;
    sc.streams.push_back(make_spec(stream_kind::legit_udp, 1000000.0, 1000));
    StreamSpec second = make_spec(stream_kind::legit_udp, 1000000.0, 1000);
    second.src_ip = "192.168.1.99";
    sc.streams.push_back(second);

    const GeneratedTraffic t = mix(sc);
    REQUIRE(t.frames.size() == 2000);

    const ipv4_addr first_src = *ipv4_from_string("192.168.1.10");
    const ipv4_addr second_src = *ipv4_from_string("192.168.1.99");
    int64_t prev_ts = -1;
    bool tie_seen = false;
    bool group_has_second = false;
    for (const RawFrame& f : t.frames) {
        REQUIRE(f.timestamp_us >= prev_ts);
        const DecodedPacket p = decode_frame(f);
        if (f.timestamp_us != prev_ts) {
            group_has_second = false;
            prev_ts = f.timestamp_us;
        } else {
            tie_seen = true;
        }
        if (p.src_ip == second_src) group_has_second = true;
        // once the later-declared stream appears at a timestamp, the
        // earlier-declared one must not follow at that same timestamp
        if (p.src_ip == first_src) REQUIRE_FALSE(group_has_second);
    }
    REQUIRE(tie_seen);

    REQUIRE_THROWS_AS(mix(ScenarioSpec{}), invalid_spec);
}

TEST_CASE("mix labels a flow malicious when an attack shares it with benign traffic") {
    ScenarioSpec sc;
    sc.seed = 4;
    sc.streams.push_back(make_spec(stream_kind::legit_icmp, 100.0, 300));
    StreamSpec poison = make_spec(stream_kind::atk_icmp, 100.0, 300);
    poison.src_ip = "192.168.1.1";
    poison.dst_ip = "192.168.1.12"; // same canonical flow as the benign pings
    sc.streams.push_back(poison);

    const GeneratedTraffic t = mix(sc);
    REQUIRE(t.frames.size() == 600);

    std::set<std::pair<int64_t, std::string>> seen;
    for (const TruthRecord& r : t.truth) {
        REQUIRE(seen.emplace(r.window_start_us, flow_key_to_string(r.flow)).second);
        REQUIRE(r.label == label_malicious);
        REQUIRE(r.category == "ICMP");
    }
}

TEST_CASE("separate benign and attack streams keep separate truth labels") {
    ScenarioSpec sc;
    sc.seed = 12;
    sc.streams.push_back(make_spec(stream_kind::legit_udp, 200.0, 400));
    sc.streams.push_back(make_spec(stream_kind::atk_ssh, 100.0, 200));

    const GeneratedTraffic t = mix(sc);
    REQUIRE(t.frames.size() == 600);

    size_t benign = 0, malicious = 0;
    for (const TruthRecord& r : t.truth) {
        if (r.label == label_malicious) {
            REQUIRE(r.category == "SSH");
            ++malicious;
        } else {
            REQUIRE(r.category.empty());
            ++benign;
        }
    }
    REQUIRE(benign >= 2);
    REQUIRE(malicious >= 2);
}

TEST_CASE("scenario files round-trip and regenerate identical traffic") {
    ScenarioSpec sc;
    sc.seed = 77;
    StreamSpec a = make_spec(stream_kind::legit_udp, 250.0, 500);
    a.collide_prob = 0.25;
    sc.streams.push_back(a);
    StreamSpec b = make_spec(stream_kind::atk_dos, 500.0, 1000);
    b.intensity = 0.1;
    b.start_us = 500000;
    sc.streams.push_back(b);

    const std::string path = "/tmp/minids_scenario.json";
    save_scenario(path, sc);
    const ScenarioSpec back = load_scenario(path);
    std::remove(path.c_str());

    REQUIRE(back.seed == 77);
    REQUIRE(back.streams.size() == 2);
    REQUIRE(back.streams[0].collide_prob == 0.25);
    REQUIRE(back.streams[1].intensity == 0.1);
    REQUIRE(back.streams[1].start_us == 500000);

    const GeneratedTraffic t1 = mix(sc);
    const GeneratedTraffic t2 = mix(back);
    REQUIRE(frames_equal(t1.frames, t2.frames));
    REQUIRE(truth_to_jsonl(t1.truth) == truth_to_jsonl(t2.truth));
}

TEST_CASE("scenario loader rejects malformed files") {
    REQUIRE_THROWS_AS(load_scenario("/tmp/minids_no_such_scenario.json"), io_failure);

    REQUIRE_THROWS_AS(scenario_from_json(nlohmann::json{{"seed", 1}}), invalid_spec);
    REQUIRE_THROWS_AS(
        scenario_from_json(nlohmann::json{{"seed", 1}, {"streams", nlohmann::json::array()}}),
        invalid_spec);

    nlohmann::json bad_kind = {{"seed", 1},
                               {"streams", {{{"kind", "atk_quantum"}, {"rate", 10.0}, {"count", 5}}}}};
    REQUIRE_THROWS_AS(scenario_from_json(bad_kind), invalid_spec);

    nlohmann::json bad_rate = {{"seed", 1},
                               {"streams", {{{"kind", "legit_udp"}, {"rate", 0.0}, {"count", 5}}}}};
    REQUIRE_THROWS_AS(scenario_from_json(bad_rate), invalid_spec);

    const std::string garbage = "/tmp/minids_garbage_scenario.json";
    std::ofstream(garbage) << "not json at all";
    REQUIRE_THROWS_AS(load_scenario(garbage), invalid_spec);
    std::remove(garbage.c_str());
}

TEST_CASE("truth records survive the JSON Lines round-trip") {
    const GeneratedTraffic t = mix([] {
        ScenarioSpec sc;
        sc.seed = 55;
        sc.streams.push_back(make_spec(stream_kind::legit_tcp, 200.0, 400));
        sc.streams.push_back(make_spec(stream_kind::atk_http, 100.0, 200));
        return sc;
    }());

    const std::string path = "/tmp/minids_truth.jsonl";
    save_truth(path, t.truth);
    const std::vector<TruthRecord> back = load_truth(path);
    std::remove(path.c_str());

    REQUIRE(back.size() == t.truth.size());
    for (size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].window_start_us == t.truth[i].window_start_us);
        REQUIRE(back[i].flow == t.truth[i].flow);
        REQUIRE(back[i].label == t.truth[i].label);
        REQUIRE(back[i].category == t.truth[i].category);
    }

    REQUIRE_THROWS_AS(truth_from_jsonl(R"({"window_start_us":0,"flow_key":"bogus","label":"benign","category":""})"),
                      model_format_error);
    REQUIRE_THROWS_AS(
        truth_from_jsonl(
            R"({"window_start_us":0,"flow_key":"1.2.3.4-5.6.7.8-TCP","label":"odd","category":""})"),
        model_format_error);
    REQUIRE_THROWS_AS(truth_from_jsonl("{\"window_start_us\":0}"), model_format_error);
    REQUIRE(truth_from_jsonl("").empty());
    REQUIRE_THROWS_AS(load_truth("/tmp/minids_no_such_truth.jsonl"), io_failure);
}
