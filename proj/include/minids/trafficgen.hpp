#ifndef MINIDS_TRAFFICGEN_HPP
#define MINIDS_TRAFFICGEN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minids/features.hpp"
#include "minids/framebuild.hpp"
#include "minids/rules.hpp"

// Seeded synthetic traffic: three legitimate profiles and seven attack
// shapes, each emitting frames plus per-window ground truth. Shapes are
// defined at the traffic level so that the bundled ruleset and the flow
// features can both see them; no real exploit payloads are reproduced.

namespace minids {

struct invalid_spec : error {
    explicit invalid_spec(const std::string& what) : error(what) {}
};

enum class stream_kind : uint8_t {
    legit_udp,
    legit_tcp,
    legit_icmp,
    atk_ssh,
    atk_dos,
    atk_ftp,
    atk_http,
    atk_icmp,
    atk_arp,
    atk_scan,
};

inline const char* stream_kind_name(stream_kind k) {
    switch (k) {
    case stream_kind::legit_udp: return "legit_udp";
    case stream_kind::legit_tcp: return "legit_tcp";
    case stream_kind::legit_icmp: return "legit_icmp";
    case stream_kind::atk_ssh: return "atk_ssh";
    case stream_kind::atk_dos: return "atk_dos";
    case stream_kind::atk_ftp: return "atk_ftp";
    case stream_kind::atk_http: return "atk_http";
    case stream_kind::atk_icmp: return "atk_icmp";
    case stream_kind::atk_arp: return "atk_arp";
    case stream_kind::atk_scan: return "atk_scan";
    }
    return "?";
}

inline std::optional<stream_kind> stream_kind_from_name(const std::string& s) {
    for (int k = 0; k <= int(stream_kind::atk_scan); ++k)
        if (s == stream_kind_name(stream_kind(k))) return stream_kind(k);
    return std::nullopt;
}

inline bool is_attack(stream_kind k) { return k >= stream_kind::atk_ssh; }

inline std::optional<rule_category> stream_category(stream_kind k) {
    switch (k) {
    case stream_kind::atk_ssh: return rule_category::ssh;
    case stream_kind::atk_dos: return rule_category::dos;
    case stream_kind::atk_ftp: return rule_category::ftp;
    case stream_kind::atk_http: return rule_category::http;
    case stream_kind::atk_icmp: return rule_category::icmp;
    case stream_kind::atk_arp: return rule_category::arp;
    case stream_kind::atk_scan: return rule_category::scan;
    default: return std::nullopt;
    }
}

struct StreamSpec {
    stream_kind kind = stream_kind::legit_udp;
    double rate = 200.0;    // packets per second
    uint64_t count = 600;   // frames to emit
    int64_t start_us = 0;   // offset of the first frame
    double intensity = 1.0; // scales kind-specific knobs (sources, ports, macs)
    // fraction of one-second windows in a legitimate stream whose payloads
    // carry a string that collides with a content rule
    double collide_prob = 0.05;
    std::string src_ip; // override; empty means the kind's default endpoint
    std::string dst_ip;
};

struct ScenarioSpec {
    std::vector<StreamSpec> streams;
    uint64_t seed = 1;
};

// One (window, flow) truth cell. category is empty for benign traffic and a
// ruleset category name otherwise.
struct TruthRecord {
    int64_t window_start_us = 0;
    flow_key flow;
    int label = label_benign;
    std::string category;
};

struct GeneratedTraffic {
    std::vector<RawFrame> frames; // time-ordered
    std::vector<TruthRecord> truth; // ordered by (window, flow)
};

namespace detail {

inline bytes_t to_bytes(std::string_view s) { return bytes_t(s.begin(), s.end()); }

// Locally administered MAC derived from the IPv4 address.
inline mac_addr mac_for(ipv4_addr ip) {
    return {0x02, 0x1d, uint8_t(ip >> 24), uint8_t(ip >> 16), uint8_t(ip >> 8), uint8_t(ip)};
}

inline host_id host_for(ipv4_addr ip) { return {mac_for(ip), ip}; }

inline bytes_t random_printable(rng_t& rng, size_t n) {
    bytes_t b(n);
    for (uint8_t& c : b) c = uint8_t(0x20 + uniform_index(rng, 95));
    return b;
}

inline void overlay(bytes_t& payload, const bytes_t& s, rng_t& rng) {
    if (s.size() > payload.size()) return;
    const size_t off = uniform_index(rng, payload.size() - s.size() + 1);
    std::copy(s.begin(), s.end(), payload.begin() + off);
}

// Benign strings that the bundled content rules also fire on; one gets
// planted into every payload of a colliding window.
inline const std::vector<bytes_t>& collision_pool(stream_kind k) {
    static const std::vector<bytes_t> tcp = {
        to_bytes("Scarlett"),       to_bytes("online casino bonus"),
        to_bytes("work from home"), to_bytes("lottery winner"),
        to_bytes("click here now"), to_bytes("FREE ACCESS"),
        to_bytes("password1234"),   to_bytes("hot singles"),
        to_bytes("SSH-1.99-"),      to_bytes("SSH-2.0-libssh-0.1"),
    };
    static const std::vector<bytes_t> udp = {
        bytes_t{0xde, 0xad, 0xbe, 0xef},
        to_bytes("stressor-udp"),
        to_bytes("booter payload"),
        to_bytes("X-Flood: yes"),
    };
    static const std::vector<bytes_t> icmp = {
        to_bytes("covert-ping"),
        to_bytes("icmp-tunnel42"),
    };
    switch (k) {
    case stream_kind::legit_udp: return udp;
    case stream_kind::legit_icmp: return icmp;
    default: return tcp;
    }
}

// Jittered constant-rate timestamps: frame i sits at most 1% of one
// inter-arrival after its nominal slot, never before it.
struct pacer {
    int64_t start_us;
    double ia_us;
    int64_t jmax;

    pacer(int64_t start, double rate)
        : start_us(start), ia_us(1e6 / rate),
          jmax(std::max<int64_t>(1, int64_t(ia_us * 0.01))) {}

    int64_t at(uint64_t i, rng_t& rng) const {
        return start_us + int64_t(double(i) * ia_us) + int64_t(uniform_index(rng, uint64_t(jmax) + 1));
    }
};

inline void validate_stream(const StreamSpec& s) {
    if (!(s.rate > 0.0) || !std::isfinite(s.rate)) throw invalid_spec("rate must be positive");
    if (s.count == 0) throw invalid_spec("count must be positive");
    if (s.start_us < 0) throw invalid_spec("start offset cannot be negative");
    if (!(s.intensity > 0.0) || !std::isfinite(s.intensity))
        throw invalid_spec("intensity must be positive");
    if (!(s.collide_prob >= 0.0 && s.collide_prob <= 1.0))
        throw invalid_spec("collide_prob must be in [0, 1]");
}

inline ipv4_addr endpoint(const std::string& override_ip, const char* fallback) {
    const std::string& s = override_ip.empty() ? fallback : override_ip;
    const auto ip = ipv4_from_string(s);
    if (!ip) throw invalid_spec("bad endpoint address '" + s + "'");
    return *ip;
}

inline std::vector<TruthRecord> truth_for(const std::vector<RawFrame>& frames, int label,
                                          const std::string& category) {
    std::vector<DecodedPacket> pkts;
    pkts.reserve(frames.size());
    for (const RawFrame& f : frames) pkts.push_back(decode_frame(f));
    std::vector<TruthRecord> truth;
    for (const auto& [id, w] : group_into_windows(pkts)) {
        (void)w;
        TruthRecord t;
        t.window_start_us = id.window * 1000000;
        t.flow = id.flow;
        t.label = label;
        t.category = category;
        truth.push_back(t);
    }
    return truth;
}

} // namespace detail

// Constant-rate benign traffic: 1470-byte pseudo-random printable payloads,
// with a per-window chance of planting one rule-colliding string.
inline GeneratedTraffic gen_legit(const StreamSpec& spec, uint64_t seed) {
    detail::validate_stream(spec);
    if (is_attack(spec.kind)) throw invalid_spec("gen_legit needs a legit_* stream kind");

    rng_t rng(seed);
    const detail::pacer pace(spec.start_us, spec.rate);
    const std::vector<bytes_t>& pool = detail::collision_pool(spec.kind);

    GeneratedTraffic out;
    out.frames.reserve(spec.count);

    int64_t cur_window = -1;
    bool colliding = false;
    bytes_t planted;
    bytes_t echo_payload; // last request payload, repeated in the icmp reply
    for (uint64_t i = 0; i < spec.count; ++i) {
        const int64_t t = pace.at(i, rng);
        const int64_t w = t / 1000000;
        if (w != cur_window) {
            cur_window = w;
            colliding = uniform01(rng) < spec.collide_prob;
            if (colliding) planted = pool[uniform_index(rng, pool.size())];
        }
        auto payload = [&]() {
            bytes_t p = detail::random_printable(rng, 1470);
            if (colliding) detail::overlay(p, planted, rng);
            return p;
        };

        switch (spec.kind) {
        case stream_kind::legit_udp: {
            const host_id client = detail::host_for(detail::endpoint(spec.src_ip, "192.168.1.10"));
            const host_id server = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.53"));
            out.frames.push_back(build_udp(t, client, server, 40000, 5001, payload()));
            break;
        }
        case stream_kind::legit_tcp: {
            const host_id client = detail::host_for(detail::endpoint(spec.src_ip, "192.168.1.11"));
            const host_id server = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.80"));
            if (i % 4 == 3) // server acknowledges every fourth segment
                out.frames.push_back(build_tcp(t, server, client, 8080, 41000, tcpflag::ack, {}));
            else
                out.frames.push_back(build_tcp(t, client, server, 41000, 8080,
                                               tcpflag::psh | tcpflag::ack, payload(),
                                               uint32_t(i) * 1470));
            break;
        }
        case stream_kind::legit_icmp: {
            const host_id client = detail::host_for(detail::endpoint(spec.src_ip, "192.168.1.12"));
            const host_id gw = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.1"));
            const uint16_t seq = uint16_t(i / 2);
            if (i % 2 == 0) {
                echo_payload = payload();
                out.frames.push_back(build_icmp_echo(t, client, gw, 8, 0x1d1d, seq, echo_payload));
            } else {
                out.frames.push_back(build_icmp_echo(t, gw, client, 0, 0x1d1d, seq, echo_payload));
            }
            break;
        }
        default: break; // unreachable, guarded above
        }
    }
    out.truth = detail::truth_for(out.frames, label_benign, "");
    return out;
}

// Attack traffic. Every shape except the port scan plants payloads (or, for
// ARP, addresses) that the bundled category rules fire on; the scan emits
// bare SYNs whose signal only exists at the flow-feature level.
inline GeneratedTraffic gen_attack(const StreamSpec& spec, uint64_t seed) {
    detail::validate_stream(spec);
    if (!is_attack(spec.kind)) throw invalid_spec("gen_attack needs an atk_* stream kind");

    rng_t rng(seed);
    const detail::pacer pace(spec.start_us, spec.rate);

    GeneratedTraffic out;
    out.frames.reserve(spec.count);
    for (uint64_t i = 0; i < spec.count; ++i) {
        const int64_t t = pace.at(i, rng);
        switch (spec.kind) {
        case stream_kind::atk_ssh: {
            // short brute-force connections: SYN, banner, credential, reset
            const host_id atk = detail::host_for(detail::endpoint(spec.src_ip, "10.0.0.66"));
            const host_id srv = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.22"));
            const uint64_t conn = i / 4;
            const uint16_t sport = uint16_t(30000 + conn % 20000);
            switch (i % 4) {
            case 0: out.frames.push_back(build_tcp(t, atk, srv, sport, 22, tcpflag::syn, {})); break;
            case 1:
                out.frames.push_back(build_tcp(t, atk, srv, sport, 22,
                                               tcpflag::psh | tcpflag::ack,
                                               detail::to_bytes("SSH-2.0-OpenSSH_7.4p1 probe")));
                break;
            case 2:
                out.frames.push_back(build_tcp(t, atk, srv, sport, 22,
                                               tcpflag::psh | tcpflag::ack,
                                               detail::random_printable(rng, 12)));
                break;
            default:
                out.frames.push_back(build_tcp(t, atk, srv, sport, 22, tcpflag::rst, {}));
                break;
            }
            break;
        }
        case stream_kind::atk_dos: {
            // spoofed flood: many 10.66/16 sources against one web server
            const host_id victim = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.80"));
            const uint64_t n_src = std::max<uint64_t>(2, uint64_t(spec.intensity * 200.0));
            const host_id src = detail::host_for(0x0A420000u | uint32_t(1 + i % n_src));
            const uint16_t sport = uint16_t(1024 + i % 60000);
            if (i % 2 == 0) {
                out.frames.push_back(build_tcp(t, src, victim, sport, 80, tcpflag::syn, {}));
            } else {
                out.frames.push_back(build_tcp(
                    t, src, victim, sport, 80, tcpflag::psh | tcpflag::ack,
                    detail::to_bytes("GET / HTTP/1.1\r\nHost: victim\r\nUser-Agent: LOIC\r\n\r\n")));
            }
            break;
        }
        case stream_kind::atk_ftp: {
            const host_id atk = detail::host_for(detail::endpoint(spec.src_ip, "10.0.0.77"));
            const host_id srv = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.21"));
            static const char* cmds[5] = {"USER anonymous\r\n", "PASS guest@example.com\r\n",
                                          "SYST\r\n", "RETR passwd\r\n", "QUIT\r\n"};
            out.frames.push_back(build_tcp(t, atk, srv, 31000, 21, tcpflag::psh | tcpflag::ack,
                                           detail::to_bytes(cmds[i % 5]), uint32_t(i) * 16));
            break;
        }
        case stream_kind::atk_http: {
            const host_id atk = detail::host_for(detail::endpoint(spec.src_ip, "10.0.0.88"));
            const host_id srv = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.80"));
            static const char* reqs[3] = {
                "GET /../../etc/passwd HTTP/1.0\r\n\r\n",
                "GET /scripts/..%c0%af../winnt/system32/CMD.EXE?/c+dir HTTP/1.0\r\n\r\n",
                "HEAD /status HTTP/1.0\r\n\r\n",
            };
            out.frames.push_back(build_tcp(t, atk, srv, uint16_t(32000 + i % 20000), 80,
                                           tcpflag::psh | tcpflag::ack,
                                           detail::to_bytes(reqs[i % 3])));
            break;
        }
        case stream_kind::atk_icmp: {
            const host_id atk = detail::host_for(detail::endpoint(spec.src_ip, "10.0.0.55"));
            const host_id victim = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.10"));
            out.frames.push_back(
                build_icmp_echo(t, atk, victim, 8, 0xbeef, uint16_t(i),
                                detail::random_printable(rng, 56)));
            break;
        }
        case stream_kind::atk_arp: {
            // gratuitous replies claiming the gateway from rotating MACs
            const ipv4_addr claimed = detail::endpoint(spec.dst_ip, "192.168.1.1");
            const uint64_t n_macs = std::max<uint64_t>(2, uint64_t(spec.intensity * 2.0));
            const mac_addr liar = {0x02, 0xab, 0xad, 0x1d, 0xea, uint8_t(i % n_macs)};
            const mac_addr bcast = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff};
            out.frames.push_back(build_arp(t, liar, bcast, 2, liar, claimed, mac_addr{}, claimed));
            break;
        }
        case stream_kind::atk_scan: {
            const host_id atk = detail::host_for(detail::endpoint(spec.src_ip, "10.0.0.99"));
            const host_id victim = detail::host_for(detail::endpoint(spec.dst_ip, "192.168.1.80"));
            const uint64_t n_ports = std::max<uint64_t>(2, uint64_t(spec.intensity * 120.0));
            out.frames.push_back(build_tcp(t, atk, victim, uint16_t(45000 + i % 5000),
                                           uint16_t(1 + i % n_ports), tcpflag::syn, {}));
            break;
        }
        default: break; // unreachable, guarded above
        }
    }
    const auto cat = stream_category(spec.kind);
    out.truth = detail::truth_for(out.frames, label_malicious, category_name(*cat));
    return out;
}

inline GeneratedTraffic gen_stream(const StreamSpec& spec, uint64_t seed) {
    return is_attack(spec.kind) ? gen_attack(spec, seed) : gen_legit(spec, seed);
}

// Convenience form matching the basic profile knobs.
inline GeneratedTraffic gen_legit(stream_kind kind, double rate, uint64_t count, uint64_t seed) {
    StreamSpec s;
    s.kind = kind;
    s.rate = rate;
    s.count = count;
    return gen_legit(s, seed);
}

// Generates every stream from a sub-seed of the scenario seed and merges by
// timestamp, declaration order breaking ties. Truth cells shared by several
// streams collapse to one record; a malicious label always wins over benign.
inline GeneratedTraffic mix(const ScenarioSpec& scenario) {
    if (scenario.streams.empty()) throw invalid_spec("scenario has no streams");

    GeneratedTraffic out;
    std::map<window_flow_id, TruthRecord> truth;
    std::vector<std::pair<size_t, RawFrame>> tagged;
    for (size_t s = 0; s < scenario.streams.size(); ++s) {
        GeneratedTraffic one = gen_stream(scenario.streams[s], derive_seed(scenario.seed, s));
        for (RawFrame& f : one.frames) tagged.emplace_back(s, std::move(f));
        for (TruthRecord& t : one.truth) {
            window_flow_id id;
            id.window = t.window_start_us / 1000000;
            id.flow = t.flow;
            const auto it = truth.find(id);
            if (it == truth.end())
                truth.emplace(id, std::move(t));
            else if (it->second.label == label_benign && t.label == label_malicious)
                it->second = std::move(t);
        }
    }
    std::stable_sort(tagged.begin(), tagged.end(),
                     [](const auto& a, const auto& b) {
                         return a.second.timestamp_us < b.second.timestamp_us;
                     });
    out.frames.reserve(tagged.size());
    for (auto& [s, f] : tagged) {
        (void)s;
        out.frames.push_back(std::move(f));
    }
    for (auto& [id, t] : truth) {
        (void)id;
        out.truth.push_back(std::move(t));
    }
    return out;
}

// ---- scenario and truth files ----

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
    nlohmann::json streams = nlohmann::json::array();
    for (const StreamSpec& st : s.streams) {
        streams.push_back({{"kind", stream_kind_name(st.kind)},
                           {"rate", st.rate},
                           {"count", st.count},
                           {"start_us", st.start_us},
                           {"intensity", st.intensity},
                           {"collide_prob", st.collide_prob},
                           {"src_ip", st.src_ip},
                           {"dst_ip", st.dst_ip}});
    }
    return {{"seed", s.seed}, {"streams", streams}};
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    ScenarioSpec s;
    try {
        s.seed = j.at("seed").get<uint64_t>();
        for (const nlohmann::json& js : j.at("streams")) {
            StreamSpec st;
            const auto kind = stream_kind_from_name(js.at("kind").get<std::string>());
            if (!kind) throw invalid_spec("unknown stream kind '" + js.at("kind").get<std::string>() + "'");
            st.kind = *kind;
            st.rate = js.value("rate", st.rate);
            st.count = js.value("count", st.count);
            st.start_us = js.value("start_us", st.start_us);
            st.intensity = js.value("intensity", st.intensity);
            st.collide_prob = js.value("collide_prob", st.collide_prob);
            st.src_ip = js.value("src_ip", st.src_ip);
            st.dst_ip = js.value("dst_ip", st.dst_ip);
            detail::validate_stream(st);
            s.streams.push_back(std::move(st));
        }
    } catch (const nlohmann::json::exception& e) {
        throw invalid_spec(std::string("bad scenario: ") + e.what());
    }
    if (s.streams.empty()) throw invalid_spec("scenario has no streams");
    return s;
}

inline ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_spec(std::string("bad scenario: ") + e.what());
    }
    return scenario_from_json(j);
}

inline void save_scenario(const std::string& path, const ScenarioSpec& s) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot open " + path + " for writing");
    out << scenario_to_json(s).dump(2) << "\n";
}

inline std::string truth_to_jsonl(const std::vector<TruthRecord>& truth) {
    std::string out;
    for (const TruthRecord& t : truth) {
        const nlohmann::json j = {
            {"window_start_us", t.window_start_us},
            {"flow_key", flow_key_to_string(t.flow)},
            {"label", t.label == label_malicious ? "malicious" : "benign"},
            {"category", t.category},
        };
        out += j.dump();
        out += "\n";
    }
    return out;
}

inline std::vector<TruthRecord> truth_from_jsonl(const std::string& text) {
    std::vector<TruthRecord> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            TruthRecord t;
            t.window_start_us = j.at("window_start_us").get<int64_t>();
            const auto flow = flow_key_from_string(j.at("flow_key").get<std::string>());
            if (!flow) throw model_format_error("bad flow key in truth record");
            t.flow = *flow;
            const std::string label = j.at("label").get<std::string>();
            if (label == "malicious")
                t.label = label_malicious;
            else if (label == "benign")
                t.label = label_benign;
            else
                throw model_format_error("bad label '" + label + "' in truth record");
            t.category = j.at("category").get<std::string>();
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw model_format_error(std::string("bad truth record: ") + e.what());
        }
    }
    return out;
}

inline void save_truth(const std::string& path, const std::vector<TruthRecord>& truth) {
    std::ofstream out(path);
    if (!out) throw io_failure("cannot open " + path + " for writing");
    out << truth_to_jsonl(truth);
}

inline std::vector<TruthRecord> load_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_failure("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return truth_from_jsonl(ss.str());
}

} // namespace minids

#endif
