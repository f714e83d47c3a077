#ifndef MINIDS_PCAP_HPP
#define MINIDS_PCAP_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "minids/packet.hpp"

namespace minids {

struct bad_magic : error {
    explicit bad_magic(const std::string& what) : error(what) {}
};
struct truncated_record : error {
    explicit truncated_record(const std::string& what) : error(what) {}
};

namespace detail {

inline uint32_t swap32(uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}
inline uint16_t swap16(uint16_t v) { return uint16_t((v >> 8) | (v << 8)); }

inline void put32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
}
inline void put16le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
}

} // namespace detail

// Reads a classic (non-pcapng) capture file. Accepts microsecond and
// nanosecond magic in either byte order; nanosecond stamps are truncated
// to microseconds. Only linktype 1 (Ethernet) frames come back.
inline std::vector<RawFrame> read_pcap(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_failure("cannot open " + path);
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    if (in.bad()) throw io_failure("read error on " + path);
    if (data.size() < 24) throw bad_magic("file shorter than pcap global header");

    auto rd32 = [](const uint8_t* p) {
        uint32_t v;
        std::memcpy(&v, p, 4);
        return v; // host is little-endian on every platform we target
    };

    const uint32_t magic = rd32(data.data());
    bool swapped = false, nanos = false;
    switch (magic) {
    case 0xa1b2c3d4u: break;
    case 0xd4c3b2a1u: swapped = true; break;
    case 0xa1b23c4du: nanos = true; break;
    case 0x4d3cb2a1u: swapped = true; nanos = true; break;
    default: throw bad_magic("unrecognized pcap magic");
    }
    auto fix32 = [&](uint32_t v) { return swapped ? detail::swap32(v) : v; };

    const uint32_t linktype = fix32(rd32(&data[20]));
    if (linktype != 1) throw bad_magic("unsupported linktype (only Ethernet)");

    std::vector<RawFrame> frames;
    size_t pos = 24;
    while (pos < data.size()) {
        if (data.size() - pos < 16) throw truncated_record("file ends inside record header");
        const uint32_t ts_sec = fix32(rd32(&data[pos]));
        const uint32_t ts_frac = fix32(rd32(&data[pos + 4]));
        const uint32_t incl_len = fix32(rd32(&data[pos + 8]));
        pos += 16;
        if (data.size() - pos < incl_len) throw truncated_record("record longer than file");
        RawFrame f;
        const int64_t us = nanos ? int64_t(ts_frac) / 1000 : int64_t(ts_frac);
        f.timestamp_us = int64_t(ts_sec) * 1000000 + us;
        f.bytes.assign(data.begin() + pos, data.begin() + pos + incl_len);
        frames.push_back(std::move(f));
        pos += incl_len;
    }
    return frames;
}

// Writes a classic little-endian microsecond pcap (linktype 1, snaplen
// 65535). Output bytes depend only on the frames, so identical input
// produces an identical file.
inline void write_pcap(const std::string& path, const std::vector<RawFrame>& frames) {
    std::vector<uint8_t> out;
    out.reserve(24 + frames.size() * 16);
    detail::put32le(out, 0xa1b2c3d4u);
    detail::put16le(out, 2); // version 2.4
    detail::put16le(out, 4);
    detail::put32le(out, 0); // thiszone
    detail::put32le(out, 0); // sigfigs
    detail::put32le(out, 65535);
    detail::put32le(out, 1); // Ethernet

    for (const RawFrame& f : frames) {
        const int64_t sec = f.timestamp_us / 1000000;
        const int64_t usec = f.timestamp_us % 1000000;
        detail::put32le(out, uint32_t(sec));
        detail::put32le(out, uint32_t(usec));
        detail::put32le(out, uint32_t(f.bytes.size()));
        detail::put32le(out, uint32_t(f.bytes.size()));
        out.insert(out.end(), f.bytes.begin(), f.bytes.end());
    }

    std::ofstream of(path, std::ios::binary | std::ios::trunc);
    if (!of) throw io_failure("cannot create " + path);
    of.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!of) throw io_failure("write error on " + path);
}

} // namespace minids

#endif
