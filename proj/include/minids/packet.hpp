#ifndef MINIDS_PACKET_HPP
#define MINIDS_PACKET_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "minids/common.hpp"

namespace minids {

struct truncated_frame : error {
    explicit truncated_frame(const std::string& what) : error(what) {}
};
struct bad_ip_header : error {
    explicit bad_ip_header(const std::string& what) : error(what) {}
};

enum class link_type : uint8_t { ethernet };

// One captured frame, exactly as it appeared on the wire.
struct RawFrame {
    int64_t timestamp_us = 0; // microseconds since epoch
    link_type link = link_type::ethernet;
    bytes_t bytes;
};

enum class proto_t : uint8_t { tcp, udp, icmp, arp, other_ip, non_ip };

inline const char* proto_name(proto_t p) {
    switch (p) {
    case proto_t::tcp: return "TCP";
    case proto_t::udp: return "UDP";
    case proto_t::icmp: return "ICMP";
    case proto_t::arp: return "ARP";
    case proto_t::other_ip: return "OTHER_IP";
    case proto_t::non_ip: return "NON_IP";
    }
    return "?";
}

inline std::optional<proto_t> proto_from_name(const std::string& s) {
    if (s == "TCP") return proto_t::tcp;
    if (s == "UDP") return proto_t::udp;
    if (s == "ICMP") return proto_t::icmp;
    if (s == "ARP") return proto_t::arp;
    if (s == "OTHER_IP") return proto_t::other_ip;
    if (s == "NON_IP") return proto_t::non_ip;
    return std::nullopt;
}

using mac_addr = std::array<uint8_t, 6>;

// IPv4 address kept in host byte order so a.b.c.d == (a<<24)|...
using ipv4_addr = uint32_t;

inline std::string ipv4_to_string(ipv4_addr a) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (a >> 24) & 0xff, (a >> 16) & 0xff,
                  (a >> 8) & 0xff, a & 0xff);
    return buf;
}

inline std::optional<ipv4_addr> ipv4_from_string(const std::string& s) {
    unsigned a, b, c, d;
    char tail;
    if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) != 4) return std::nullopt;
    if (a > 255 || b > 255 || c > 255 || d > 255) return std::nullopt;
    return (a << 24) | (b << 16) | (c << 8) | d;
}

// TCP flag bits (offset 13 of the TCP header).
namespace tcpflag {
constexpr uint8_t fin = 0x01;
constexpr uint8_t syn = 0x02;
constexpr uint8_t rst = 0x04;
constexpr uint8_t psh = 0x08;
constexpr uint8_t ack = 0x10;
constexpr uint8_t urg = 0x20;
} // namespace tcpflag

// Layered view of one decoded frame. Fields not applicable to the decoded
// protocol stay at their defaults; `proto` says which ones are meaningful.
struct DecodedPacket {
    int64_t timestamp_us = 0;
    mac_addr src_mac{};
    mac_addr dst_mac{};
    uint16_t ethertype = 0;
    proto_t proto = proto_t::non_ip;

    ipv4_addr src_ip = 0; // IPv4 / ARP sender
    ipv4_addr dst_ip = 0; // IPv4 / ARP target

    uint16_t src_port = 0; // TCP/UDP only
    uint16_t dst_port = 0;
    uint8_t tcp_flags = 0;

    uint8_t icmp_type = 0;
    uint8_t icmp_code = 0;

    uint16_t arp_op = 0;
    ipv4_addr arp_sender_ip = 0;
    mac_addr arp_sender_mac{};
    ipv4_addr arp_target_ip = 0;

    bytes_t payload;
    size_t frame_len = 0;

    bool has_ports() const { return proto == proto_t::tcp || proto == proto_t::udp; }
    bool has_ipv4() const {
        return proto == proto_t::tcp || proto == proto_t::udp || proto == proto_t::icmp ||
               proto == proto_t::other_ip;
    }
};

namespace detail {
inline uint16_t be16(const uint8_t* p) { return uint16_t(p[0]) << 8 | p[1]; }
inline uint32_t be32(const uint8_t* p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | p[3];
}
} // namespace detail

// Decodes an Ethernet frame down to L4. IPv4 only; VLAN-tagged and other
// ethertypes come back as non_ip with the post-Ethernet bytes as payload.
// Never reads past frame.bytes; malformed layering raises truncated_frame
// or bad_ip_header.
inline DecodedPacket decode_frame(const RawFrame& frame) {
    const bytes_t& b = frame.bytes;
    constexpr size_t eth_len = 14;
    if (b.size() < eth_len) throw truncated_frame("frame shorter than Ethernet header");

    DecodedPacket pkt;
    pkt.timestamp_us = frame.timestamp_us;
    pkt.frame_len = b.size();
    for (int i = 0; i < 6; ++i) pkt.dst_mac[i] = b[i];
    for (int i = 0; i < 6; ++i) pkt.src_mac[i] = b[6 + i];
    pkt.ethertype = detail::be16(&b[12]);

    if (pkt.ethertype == 0x0806) { // ARP
        constexpr size_t arp_len = 28; // IPv4-over-Ethernet ARP
        if (b.size() < eth_len + arp_len) throw truncated_frame("frame ends inside ARP header");
        const uint8_t* a = &b[eth_len];
        pkt.proto = proto_t::arp;
        pkt.arp_op = detail::be16(a + 6);
        for (int i = 0; i < 6; ++i) pkt.arp_sender_mac[i] = a[8 + i];
        pkt.arp_sender_ip = detail::be32(a + 14);
        pkt.arp_target_ip = detail::be32(a + 24);
        pkt.src_ip = pkt.arp_sender_ip;
        pkt.dst_ip = pkt.arp_target_ip;
        pkt.payload.assign(b.begin() + eth_len + arp_len, b.end());
        return pkt;
    }

    if (pkt.ethertype != 0x0800) { // not IPv4
        pkt.proto = proto_t::non_ip;
        pkt.payload.assign(b.begin() + eth_len, b.end());
        return pkt;
    }

    // IPv4
    if (b.size() < eth_len + 20) throw truncated_frame("frame ends inside IPv4 header");
    const uint8_t* ip = &b[eth_len];
    const uint8_t version = ip[0] >> 4;
    const size_t ihl = (ip[0] & 0x0f) * 4u;
    if (version != 4) {
        pkt.proto = proto_t::non_ip;
        pkt.payload.assign(b.begin() + eth_len, b.end());
        return pkt;
    }
    if (ihl < 20) throw bad_ip_header("IHL < 5");
    const size_t total_len = detail::be16(ip + 2);
    if (total_len < ihl) throw bad_ip_header("total length smaller than header");
    if (eth_len + total_len > b.size()) throw bad_ip_header("total length exceeds frame");
    if (b.size() < eth_len + ihl) throw truncated_frame("frame ends inside IPv4 options");

    const uint8_t ip_proto = ip[9];
    pkt.src_ip = detail::be32(ip + 12);
    pkt.dst_ip = detail::be32(ip + 16);

    const uint8_t* l4 = ip + ihl;
    const size_t l4_len = total_len - ihl;

    switch (ip_proto) {
    case 6: { // TCP
        if (l4_len < 20) throw truncated_frame("IP payload ends inside TCP header");
        const size_t doff = (l4[12] >> 4) * 4u;
        if (doff < 20 || doff > l4_len) throw truncated_frame("TCP data offset exceeds segment");
        pkt.proto = proto_t::tcp;
        pkt.src_port = detail::be16(l4);
        pkt.dst_port = detail::be16(l4 + 2);
        pkt.tcp_flags = l4[13];
        pkt.payload.assign(l4 + doff, l4 + l4_len);
        break;
    }
    case 17: { // UDP
        if (l4_len < 8) throw truncated_frame("IP payload ends inside UDP header");
        pkt.proto = proto_t::udp;
        pkt.src_port = detail::be16(l4);
        pkt.dst_port = detail::be16(l4 + 2);
        pkt.payload.assign(l4 + 8, l4 + l4_len);
        break;
    }
    case 1: { // ICMP
        if (l4_len < 4) throw truncated_frame("IP payload ends inside ICMP header");
        pkt.proto = proto_t::icmp;
        pkt.icmp_type = l4[0];
        pkt.icmp_code = l4[1];
        pkt.payload.assign(l4 + 4, l4 + l4_len);
        break;
    }
    default:
        pkt.proto = proto_t::other_ip;
        pkt.payload.assign(l4, l4 + l4_len);
        break;
    }
    return pkt;
}

} // namespace minids

#endif
