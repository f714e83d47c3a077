#ifndef MINIDS_FRAMEBUILD_HPP
#define MINIDS_FRAMEBUILD_HPP

#include <cstdint>

#include "minids/packet.hpp"

// Frame construction helpers for the traffic generator and tests. Frames are
// built exactly as long as their headers plus payload (no minimum-length
// padding), so decode round-trips preserve payload sizes byte for byte.

namespace minids {

namespace detail {

inline void put_be16(bytes_t& b, uint16_t v) {
    b.push_back(uint8_t(v >> 8));
    b.push_back(uint8_t(v));
}
inline void put_be32(bytes_t& b, uint32_t v) {
    b.push_back(uint8_t(v >> 24));
    b.push_back(uint8_t(v >> 16));
    b.push_back(uint8_t(v >> 8));
    b.push_back(uint8_t(v));
}

// RFC 1071 ones'-complement sum over a header slice.
inline uint16_t ip_checksum(const uint8_t* p, size_t n) {
    uint32_t sum = 0;
    for (size_t i = 0; i + 1 < n; i += 2) sum += uint32_t(p[i]) << 8 | p[i + 1];
    if (n & 1) sum += uint32_t(p[n - 1]) << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return uint16_t(~sum);
}

inline void eth_header(bytes_t& b, const mac_addr& dst, const mac_addr& src, uint16_t ethertype) {
    b.insert(b.end(), dst.begin(), dst.end());
    b.insert(b.end(), src.begin(), src.end());
    put_be16(b, ethertype);
}

// Appends a 20-byte IPv4 header with a valid checksum.
inline void ipv4_header(bytes_t& b, uint8_t proto, ipv4_addr src, ipv4_addr dst,
                        size_t l4_len, uint8_t ttl = 64) {
    const size_t start = b.size();
    b.push_back(0x45); // version 4, IHL 5
    b.push_back(0);    // DSCP/ECN
    put_be16(b, uint16_t(20 + l4_len));
    put_be16(b, 0); // identification
    put_be16(b, 0x4000); // don't fragment
    b.push_back(ttl);
    b.push_back(proto);
    put_be16(b, 0); // checksum placeholder
    put_be32(b, src);
    put_be32(b, dst);
    const uint16_t ck = ip_checksum(&b[start], 20);
    b[start + 10] = uint8_t(ck >> 8);
    b[start + 11] = uint8_t(ck);
}

} // namespace detail

// Endpoint identity reused across builders.
struct host_id {
    mac_addr mac{};
    ipv4_addr ip = 0;
};

// TCP segment. Checksum left zero: nothing downstream verifies L4 sums and
// keeping it zero makes generated captures reproducible by inspection.
inline RawFrame build_tcp(int64_t timestamp_us, const host_id& src, const host_id& dst,
                          uint16_t sport, uint16_t dport, uint8_t flags, const bytes_t& payload,
                          uint32_t seq = 0, uint32_t ack = 0) {
    RawFrame f;
    f.timestamp_us = timestamp_us;
    bytes_t& b = f.bytes;
    b.reserve(14 + 20 + 20 + payload.size());
    detail::eth_header(b, dst.mac, src.mac, 0x0800);
    detail::ipv4_header(b, 6, src.ip, dst.ip, 20 + payload.size());
    detail::put_be16(b, sport);
    detail::put_be16(b, dport);
    detail::put_be32(b, seq);
    detail::put_be32(b, ack);
    b.push_back(0x50); // data offset 5
    b.push_back(flags);
    detail::put_be16(b, 0xffff); // window
    detail::put_be16(b, 0);      // checksum (unused)
    detail::put_be16(b, 0);      // urgent pointer
    b.insert(b.end(), payload.begin(), payload.end());
    return f;
}

inline RawFrame build_udp(int64_t timestamp_us, const host_id& src, const host_id& dst,
                          uint16_t sport, uint16_t dport, const bytes_t& payload) {
    RawFrame f;
    f.timestamp_us = timestamp_us;
    bytes_t& b = f.bytes;
    b.reserve(14 + 20 + 8 + payload.size());
    detail::eth_header(b, dst.mac, src.mac, 0x0800);
    detail::ipv4_header(b, 17, src.ip, dst.ip, 8 + payload.size());
    detail::put_be16(b, sport);
    detail::put_be16(b, dport);
    detail::put_be16(b, uint16_t(8 + payload.size()));
    detail::put_be16(b, 0); // checksum (unused)
    b.insert(b.end(), payload.begin(), payload.end());
    return f;
}

// ICMP echo request (type 8) or reply (type 0).
inline RawFrame build_icmp_echo(int64_t timestamp_us, const host_id& src, const host_id& dst,
                                uint8_t type, uint16_t ident, uint16_t seq,
                                const bytes_t& payload) {
    RawFrame f;
    f.timestamp_us = timestamp_us;
    bytes_t& b = f.bytes;
    b.reserve(14 + 20 + 8 + payload.size());
    detail::eth_header(b, dst.mac, src.mac, 0x0800);
    detail::ipv4_header(b, 1, src.ip, dst.ip, 8 + payload.size());
    const size_t icmp_start = b.size();
    b.push_back(type);
    b.push_back(0); // code
    detail::put_be16(b, 0); // checksum placeholder
    detail::put_be16(b, ident);
    detail::put_be16(b, seq);
    b.insert(b.end(), payload.begin(), payload.end());
    const uint16_t ck = detail::ip_checksum(&b[icmp_start], b.size() - icmp_start);
    b[icmp_start + 2] = uint8_t(ck >> 8);
    b[icmp_start + 3] = uint8_t(ck);
    return f;
}

// Ethernet ARP for IPv4. oper: 1 request, 2 reply.
inline RawFrame build_arp(int64_t timestamp_us, const mac_addr& eth_src, const mac_addr& eth_dst,
                          uint16_t oper, const mac_addr& sender_mac, ipv4_addr sender_ip,
                          const mac_addr& target_mac, ipv4_addr target_ip) {
    RawFrame f;
    f.timestamp_us = timestamp_us;
    bytes_t& b = f.bytes;
    b.reserve(14 + 28);
    detail::eth_header(b, eth_dst, eth_src, 0x0806);
    detail::put_be16(b, 1);      // htype Ethernet
    detail::put_be16(b, 0x0800); // ptype IPv4
    b.push_back(6);
    b.push_back(4);
    detail::put_be16(b, oper);
    b.insert(b.end(), sender_mac.begin(), sender_mac.end());
    detail::put_be32(b, sender_ip);
    b.insert(b.end(), target_mac.begin(), target_mac.end());
    detail::put_be32(b, target_ip);
    return f;
}

} // namespace minids

#endif
