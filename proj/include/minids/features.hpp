#ifndef MINIDS_FEATURES_HPP
#define MINIDS_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "minids/packet.hpp"

namespace minids {

struct empty_window : error {
    explicit empty_window(const std::string& what) : error(what) {}
};

using FeatureVector = std::vector<double>;

// Bidirectional flow identity: endpoints stored with the numerically smaller
// address first so both directions land in the same flow.
struct flow_key {
    ipv4_addr src_ip = 0;
    ipv4_addr dst_ip = 0;
    proto_t proto = proto_t::non_ip;

    bool operator<(const flow_key& o) const {
        return std::tie(src_ip, dst_ip, proto) < std::tie(o.src_ip, o.dst_ip, o.proto);
    }
    bool operator==(const flow_key& o) const {
        return src_ip == o.src_ip && dst_ip == o.dst_ip && proto == o.proto;
    }
};

// "a.b.c.d-e.f.g.h-PROTO", the form used in truth files and alarm logs.
inline std::string flow_key_to_string(const flow_key& k) {
    return ipv4_to_string(k.src_ip) + "-" + ipv4_to_string(k.dst_ip) + "-" + proto_name(k.proto);
}

inline std::optional<flow_key> flow_key_from_string(const std::string& s) {
    const size_t a = s.find('-');
    if (a == std::string::npos) return std::nullopt;
    const size_t b = s.find('-', a + 1);
    if (b == std::string::npos) return std::nullopt;
    const auto src = ipv4_from_string(s.substr(0, a));
    const auto dst = ipv4_from_string(s.substr(a + 1, b - a - 1));
    const auto proto = proto_from_name(s.substr(b + 1));
    if (!src || !dst || !proto) return std::nullopt;
    flow_key k;
    k.src_ip = *src;
    k.dst_ip = *dst;
    k.proto = *proto;
    return k;
}

inline flow_key canonical_key(const DecodedPacket& p) {
    flow_key k;
    k.proto = p.proto;
    if (p.src_ip <= p.dst_ip) {
        k.src_ip = p.src_ip;
        k.dst_ip = p.dst_ip;
    } else {
        k.src_ip = p.dst_ip;
        k.dst_ip = p.src_ip;
    }
    return k;
}

struct FlowWindow {
    flow_key key;
    std::vector<DecodedPacket> packets; // time-ordered
    int64_t span_us = 1000000;
};

constexpr const char* flow_schema_id = "flow-v1";

inline const std::array<std::string, 12>& flow_feature_names() {
    static const std::array<std::string, 12> names = {
        "packet_count",    "byte_count",      "mean_packet_size",     "packet_rate",
        "tcp_syn_ratio",   "tcp_flag_entropy", "unique_dst_ports",    "icmp_ratio",
        "arp_ratio",       "mean_payload_entropy", "mean_interarrival_us", "direction_ratio",
    };
    return names;
}

namespace detail {

inline double shannon_bits(const std::map<uint8_t, size_t>& counts, size_t total) {
    double h = 0.0;
    for (const auto& [sym, c] : counts) {
        (void)sym;
        const double p = double(c) / double(total);
        h -= p * std::log2(p);
    }
    return h;
}

// bits per byte, 0 for an empty buffer
inline double payload_entropy(const bytes_t& payload) {
    if (payload.empty()) return 0.0;
    std::array<size_t, 256> counts{};
    for (uint8_t b : payload) ++counts[b];
    double h = 0.0;
    for (size_t c : counts) {
        if (!c) continue;
        const double p = double(c) / double(payload.size());
        h -= p * std::log2(p);
    }
    return h;
}

} // namespace detail

// Summarizes one flow window into the fixed 12-value schema. Every feature
// depends only on packet contents and timestamp differences, so shifting all
// timestamps by a constant leaves the vector unchanged.
inline FeatureVector extract_flow_features(const FlowWindow& w) {
    if (w.packets.empty()) throw empty_window("cannot featurize a window with no packets");
    const double n = double(w.packets.size());

    double byte_count = 0;
    size_t tcp_count = 0, syn_count = 0, icmp_count = 0, arp_count = 0;
    std::map<uint8_t, size_t> flag_counts;
    std::set<uint16_t> dst_ports;
    double entropy_sum = 0;
    size_t entropy_n = 0;
    size_t forward = 0;

    for (const DecodedPacket& p : w.packets) {
        byte_count += double(p.frame_len);
        if (p.proto == proto_t::tcp) {
            ++tcp_count;
            if (p.tcp_flags & tcpflag::syn) ++syn_count;
            ++flag_counts[p.tcp_flags];
        }
        if (p.proto == proto_t::icmp) ++icmp_count;
        if (p.proto == proto_t::arp) ++arp_count;
        if (p.has_ports()) dst_ports.insert(p.dst_port);
        if (!p.payload.empty()) {
            entropy_sum += detail::payload_entropy(p.payload);
            ++entropy_n;
        }
        if (p.src_ip == w.key.src_ip) ++forward;
    }

    double interarrival_sum = 0;
    for (size_t i = 1; i < w.packets.size(); ++i)
        interarrival_sum += double(w.packets[i].timestamp_us - w.packets[i - 1].timestamp_us);

    const double span_s = double(std::max<int64_t>(w.span_us, 1000)) / 1e6;

    FeatureVector v(12);
    v[0] = n;
    v[1] = byte_count;
    v[2] = byte_count / n;
    v[3] = n / span_s;
    v[4] = tcp_count ? double(syn_count) / double(tcp_count) : 0.0;
    v[5] = tcp_count ? detail::shannon_bits(flag_counts, tcp_count) : 0.0;
    v[6] = double(dst_ports.size());
    v[7] = double(icmp_count) / n;
    v[8] = double(arp_count) / n;
    v[9] = entropy_n ? entropy_sum / double(entropy_n) : 0.0;
    v[10] = w.packets.size() > 1 ? interarrival_sum / double(w.packets.size() - 1) : 0.0;
    v[11] = double(forward) / n;
    return v;
}

// Identity of one (window, flow) cell in a tumbling-window decomposition.
struct window_flow_id {
    int64_t window = 0; // timestamp_us / window_us
    flow_key flow;

    bool operator<(const window_flow_id& o) const {
        if (window != o.window) return window < o.window;
        return flow < o.flow;
    }
    bool operator==(const window_flow_id& o) const {
        return window == o.window && flow == o.flow;
    }
};

// Buckets IP and ARP packets into epoch-aligned tumbling windows per flow.
// NonIp packets carry no flow identity and are skipped; the caller decides
// what to do with them.
inline std::map<window_flow_id, FlowWindow> group_into_windows(
    const std::vector<DecodedPacket>& packets, int64_t window_us = 1000000) {
    std::map<window_flow_id, FlowWindow> out;
    for (const DecodedPacket& p : packets) {
        if (p.proto == proto_t::non_ip) continue;
        window_flow_id id;
        id.window = p.timestamp_us / window_us;
        id.flow = canonical_key(p);
        FlowWindow& w = out[id];
        w.key = id.flow;
        w.span_us = window_us;
        w.packets.push_back(p);
    }
    for (auto& [id, w] : out) {
        (void)id;
        std::stable_sort(w.packets.begin(), w.packets.end(),
                         [](const DecodedPacket& a, const DecodedPacket& b) {
                             return a.timestamp_us < b.timestamp_us;
                         });
    }
    return out;
}

} // namespace minids

#endif
