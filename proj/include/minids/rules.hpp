#ifndef MINIDS_RULES_HPP
#define MINIDS_RULES_HPP

#include <cctype>
#include <cstring>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "minids/packet.hpp"

namespace minids {

struct syntax_error : error {
    size_t column; // 1-based offset into the offending line
    syntax_error(const std::string& what, size_t col)
        : error(what + " (column " + std::to_string(col) + ")"), column(col) {}
};
struct missing_sid : error {
    explicit missing_sid(const std::string& what) : error(what) {}
};
struct duplicate_sid : error {
    explicit duplicate_sid(const std::string& what) : error(what) {}
};

enum class rule_proto : uint8_t { tcp, udp, icmp, ip, arp, http };
enum class rule_category : uint8_t { ssh, dos, ftp, http, icmp, arp, scan, other };

inline const char* category_name(rule_category c) {
    switch (c) {
    case rule_category::ssh: return "SSH";
    case rule_category::dos: return "DoS";
    case rule_category::ftp: return "FTP";
    case rule_category::http: return "HTTP";
    case rule_category::icmp: return "ICMP";
    case rule_category::arp: return "ARP";
    case rule_category::scan: return "SCAN";
    case rule_category::other: return "OTHER";
    }
    return "?";
}

inline std::optional<rule_category> category_from_name(const std::string& s) {
    std::string up;
    for (char c : s) up.push_back(char(std::toupper(uint8_t(c))));
    if (up == "SSH") return rule_category::ssh;
    if (up == "DOS") return rule_category::dos;
    if (up == "FTP") return rule_category::ftp;
    if (up == "HTTP") return rule_category::http;
    if (up == "ICMP") return rule_category::icmp;
    if (up == "ARP") return rule_category::arp;
    if (up == "SCAN") return rule_category::scan;
    if (up == "OTHER") return rule_category::other;
    return std::nullopt;
}

// Source or destination address constraint: any, a single host, or a CIDR
// block.
struct addr_spec {
    bool any = true;
    ipv4_addr addr = 0;
    uint8_t prefix = 32;

    bool matches(ipv4_addr ip) const {
        if (any) return true;
        if (prefix == 0) return true;
        const uint32_t mask = prefix >= 32 ? 0xffffffffu : ~((1u << (32 - prefix)) - 1u);
        return (ip & mask) == (addr & mask);
    }
};

// Port constraint: any, one port, or an inclusive range (a:b, :b, a:).
struct port_spec {
    bool any = true;
    uint16_t lo = 0;
    uint16_t hi = 65535;

    bool matches(uint16_t port) const { return any || (port >= lo && port <= hi); }
};

struct content_pattern {
    bytes_t pattern;
    bool nocase = false;
    bytes_t folded; // lowercase copy, used when nocase
};

struct Rule {
    rule_proto proto = rule_proto::ip;
    addr_spec src_addr, dst_addr;
    port_spec src_port, dst_port;
    std::string msg;
    std::vector<content_pattern> contents;
    uint32_t sid = 0;
    uint32_t rev = 1;
    std::string classtype;
    rule_category category = rule_category::other;
    // unknown options survive a parse round-trip but never affect matching
    std::vector<std::pair<std::string, std::string>> extra_options;
};

namespace detail {

inline uint8_t ascii_lower(uint8_t c) { return (c >= 'A' && c <= 'Z') ? uint8_t(c + 32) : c; }

inline bytes_t fold_copy(const bytes_t& in) {
    bytes_t out(in.size());
    for (size_t i = 0; i < in.size(); ++i) out[i] = ascii_lower(in[i]);
    return out;
}

// memchr-anchored substring search; patterns here are short so this beats
// building per-call searcher tables.
inline bool contains(const uint8_t* hay, size_t n, const uint8_t* pat, size_t m) {
    if (m == 0) return true;
    if (m > n) return false;
    const uint8_t* p = hay;
    const uint8_t* last = hay + (n - m);
    while (p <= last) {
        p = static_cast<const uint8_t*>(std::memchr(p, pat[0], size_t(last - p) + 1));
        if (!p) return false;
        if (std::memcmp(p + 1, pat + 1, m - 1) == 0) return true;
        ++p;
    }
    return false;
}

// Line parser with 1-based column tracking for error reports.
struct rule_cursor {
    const std::string& s;
    size_t pos = 0;

    explicit rule_cursor(const std::string& line) : s(line) {}

    size_t col() const { return pos + 1; }
    bool eof() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }

    void skip_ws() {
        while (!eof() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }

    std::string word() {
        skip_ws();
        const size_t start = pos;
        while (!eof() && !std::isspace(uint8_t(s[pos])) && s[pos] != '(') ++pos;
        if (pos == start) throw syntax_error("expected a token", col());
        return s.substr(start, pos - start);
    }

    void expect(char c, const char* what) {
        skip_ws();
        if (eof() || s[pos] != c) throw syntax_error(std::string("expected ") + what, col());
        ++pos;
    }
};

inline addr_spec parse_addr(const std::string& tok, size_t col) {
    addr_spec a;
    if (tok == "any") return a;
    a.any = false;
    std::string ip_part = tok;
    const size_t slash = tok.find('/');
    if (slash != std::string::npos) {
        ip_part = tok.substr(0, slash);
        const std::string pfx = tok.substr(slash + 1);
        if (pfx.empty() || pfx.size() > 2 ||
            pfx.find_first_not_of("0123456789") != std::string::npos)
            throw syntax_error("bad CIDR prefix '" + tok + "'", col);
        const int v = std::stoi(pfx);
        if (v < 0 || v > 32) throw syntax_error("CIDR prefix out of range '" + tok + "'", col);
        a.prefix = uint8_t(v);
    }
    const auto ip = ipv4_from_string(ip_part);
    if (!ip) throw syntax_error("bad address '" + tok + "'", col);
    a.addr = *ip;
    return a;
}

inline port_spec parse_port(const std::string& tok, size_t col) {
    port_spec p;
    if (tok == "any") return p;
    p.any = false;
    auto num = [&](const std::string& t) -> uint16_t {
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw syntax_error("bad port '" + tok + "'", col);
        const long v = std::stol(t);
        if (v < 0 || v > 65535) throw syntax_error("port out of range '" + tok + "'", col);
        return uint16_t(v);
    };
    const size_t colon = tok.find(':');
    if (colon == std::string::npos) {
        p.lo = p.hi = num(tok);
    } else {
        const std::string lo = tok.substr(0, colon), hi = tok.substr(colon + 1);
        p.lo = lo.empty() ? 0 : num(lo);
        p.hi = hi.empty() ? 65535 : num(hi);
        if (p.lo > p.hi) throw syntax_error("inverted port range '" + tok + "'", col);
    }
    return p;
}

inline int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Quoted option value. Content strings additionally honor |..| hex blocks;
// msg keeps '|' literal.
inline bytes_t parse_quoted(rule_cursor& cur, bool hex_blocks) {
    cur.expect('"', "'\"'");
    bytes_t out;
    bool in_hex = false;
    int pending = -1;
    while (true) {
        if (cur.eof()) throw syntax_error("unterminated string", cur.col());
        const char c = cur.s[cur.pos++];
        if (in_hex) {
            if (c == '|') {
                if (pending >= 0) throw syntax_error("odd hex digit count", cur.col());
                in_hex = false;
            } else if (c == ' ') {
                // separators allowed between bytes
            } else {
                const int d = hex_digit(c);
                if (d < 0) throw syntax_error("bad hex digit in content", cur.col());
                if (pending < 0) {
                    pending = d;
                } else {
                    out.push_back(uint8_t(pending << 4 | d));
                    pending = -1;
                }
            }
            continue;
        }
        if (c == '"') return out;
        if (c == '\\') {
            if (cur.eof()) throw syntax_error("dangling escape", cur.col());
            const char e = cur.s[cur.pos++];
            if (e != '"' && e != '\\' && e != ';' && e != '|')
                throw syntax_error("unknown escape in string", cur.col());
            out.push_back(uint8_t(e));
            continue;
        }
        if (c == '|' && hex_blocks) {
            in_hex = true;
            pending = -1;
            continue;
        }
        out.push_back(uint8_t(c));
    }
}

// Raw value for options we preserve but do not interpret.
inline std::string parse_raw_value(rule_cursor& cur) {
    cur.skip_ws();
    std::string out;
    bool quoted = false;
    while (!cur.eof()) {
        const char c = cur.s[cur.pos];
        if (!quoted && (c == ';' || c == ')')) break;
        if (c == '"') quoted = !quoted;
        if (quoted && c == '\\' && cur.pos + 1 < cur.s.size()) {
            out.push_back(c);
            ++cur.pos;
            out.push_back(cur.s[cur.pos]);
            ++cur.pos;
            continue;
        }
        out.push_back(c);
        ++cur.pos;
    }
    if (quoted) throw syntax_error("unterminated string", cur.col());
    while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
    return out;
}

inline uint32_t parse_positive_int(const std::string& v, const char* what, size_t col) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw syntax_error(std::string("bad ") + what + " value '" + v + "'", col);
    const unsigned long n = std::stoul(v);
    if (n < 1 || n > 0xfffffffful)
        throw syntax_error(std::string(what) + " must be a positive integer", col);
    return uint32_t(n);
}

} // namespace detail

// Parses one rule line:
//   alert proto src_addr src_port -> dst_addr dst_port ( option; ... )
inline Rule parse_rule(const std::string& line) {
    detail::rule_cursor cur(line);
    Rule r;

    size_t col = cur.col();
    cur.skip_ws();
    col = cur.col();
    const std::string action = cur.word();
    if (action != "alert") throw syntax_error("unknown action '" + action + "'", col);

    cur.skip_ws();
    col = cur.col();
    const std::string proto = cur.word();
    if (proto == "tcp") r.proto = rule_proto::tcp;
    else if (proto == "udp") r.proto = rule_proto::udp;
    else if (proto == "icmp") r.proto = rule_proto::icmp;
    else if (proto == "ip") r.proto = rule_proto::ip;
    else if (proto == "arp") r.proto = rule_proto::arp;
    else if (proto == "http") r.proto = rule_proto::http;
    else throw syntax_error("unknown protocol '" + proto + "'", col);

    cur.skip_ws();
    col = cur.col();
    r.src_addr = detail::parse_addr(cur.word(), col);
    cur.skip_ws();
    col = cur.col();
    r.src_port = detail::parse_port(cur.word(), col);

    cur.skip_ws();
    col = cur.col();
    if (cur.word() != "->") throw syntax_error("expected '->'", col);

    cur.skip_ws();
    col = cur.col();
    r.dst_addr = detail::parse_addr(cur.word(), col);
    cur.skip_ws();
    col = cur.col();
    r.dst_port = detail::parse_port(cur.word(), col);

    cur.expect('(', "'('");
    bool saw_sid = false;
    while (true) {
        cur.skip_ws();
        if (cur.eof()) throw syntax_error("unterminated option list", cur.col());
        if (cur.peek() == ')') {
            ++cur.pos;
            break;
        }
        col = cur.col();
        std::string name;
        while (!cur.eof() && cur.peek() != ':' && cur.peek() != ';' && cur.peek() != ')')
            name.push_back(cur.s[cur.pos++]);
        while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
        if (name.empty()) throw syntax_error("empty option name", col);

        const bool has_value = !cur.eof() && cur.peek() == ':';
        if (has_value) ++cur.pos;

        if (name == "nocase") {
            if (has_value) throw syntax_error("nocase takes no value", col);
            if (r.contents.empty())
                throw syntax_error("nocase without a preceding content", col);
            r.contents.back().nocase = true;
        } else if (name == "msg") {
            if (!has_value) throw syntax_error("msg requires a value", col);
            const bytes_t raw = detail::parse_quoted(cur, false);
            r.msg.assign(raw.begin(), raw.end());
        } else if (name == "content") {
            if (!has_value) throw syntax_error("content requires a value", col);
            content_pattern cp;
            cp.pattern = detail::parse_quoted(cur, true);
            if (cp.pattern.empty()) throw syntax_error("empty content pattern", col);
            cp.folded = detail::fold_copy(cp.pattern);
            r.contents.push_back(std::move(cp));
        } else if (name == "sid") {
            if (!has_value) throw syntax_error("sid requires a value", col);
            r.sid = detail::parse_positive_int(detail::parse_raw_value(cur), "sid", col);
            saw_sid = true;
        } else if (name == "rev") {
            if (!has_value) throw syntax_error("rev requires a value", col);
            r.rev = detail::parse_positive_int(detail::parse_raw_value(cur), "rev", col);
        } else if (name == "classtype") {
            if (!has_value) throw syntax_error("classtype requires a value", col);
            r.classtype = detail::parse_raw_value(cur);
        } else {
            r.extra_options.emplace_back(name,
                                         has_value ? detail::parse_raw_value(cur) : "");
        }

        cur.skip_ws();
        if (!cur.eof() && cur.peek() == ';') {
            ++cur.pos;
        } else if (!cur.eof() && cur.peek() == ')') {
            // final semicolon optional
        } else {
            throw syntax_error("expected ';'", cur.col());
        }
    }
    cur.skip_ws();
    if (!cur.eof()) throw syntax_error("trailing characters after ')'", cur.col());

    if (!saw_sid) throw missing_sid("rule has no sid: " + line);
    return r;
}

struct RuleSet {
    std::vector<Rule> rules;
    std::map<rule_category, size_t> by_category;

    const Rule* find_sid(uint32_t sid) const {
        const auto it = sid_index.find(sid);
        return it == sid_index.end() ? nullptr : &rules[it->second];
    }

    std::map<uint32_t, size_t> sid_index;
};

// Parses a rule file. Blank lines and comments are skipped; a
// `# category: NAME` comment assigns that category to every rule after it
// (until the next directive). Rules before any directive land in OTHER.
inline RuleSet parse_ruleset(const std::string& text) {
    RuleSet set;
    rule_category current = rule_category::other;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i == line.size()) continue;
        if (line[i] == '#') {
            std::string rest = line.substr(i + 1);
            size_t j = 0;
            while (j < rest.size() && (rest[j] == ' ' || rest[j] == '\t')) ++j;
            if (rest.compare(j, 9, "category:") == 0) {
                std::string name = rest.substr(j + 9);
                size_t a = name.find_first_not_of(" \t");
                size_t b = name.find_last_not_of(" \t");
                if (a == std::string::npos)
                    throw syntax_error("line " + std::to_string(lineno) +
                                           ": empty category directive",
                                       i + 1);
                name = name.substr(a, b - a + 1);
                const auto cat = category_from_name(name);
                if (!cat)
                    throw syntax_error("line " + std::to_string(lineno) +
                                           ": unknown category '" + name + "'",
                                       i + 1);
                current = *cat;
            }
            continue;
        }
        try {
            Rule r = parse_rule(line);
            r.category = current;
            if (set.sid_index.count(r.sid))
                throw duplicate_sid("line " + std::to_string(lineno) + ": duplicate sid " +
                                    std::to_string(r.sid));
            set.sid_index[r.sid] = set.rules.size();
            set.by_category[r.category]++;
            set.rules.push_back(std::move(r));
        } catch (const syntax_error& e) {
            throw syntax_error("line " + std::to_string(lineno) + ": " + e.what(), e.column);
        } catch (const missing_sid& e) {
            throw missing_sid("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return set;
}

namespace detail {

inline bool proto_matches(rule_proto rp, const DecodedPacket& p) {
    switch (rp) {
    case rule_proto::tcp: return p.proto == proto_t::tcp;
    case rule_proto::udp: return p.proto == proto_t::udp;
    case rule_proto::icmp: return p.proto == proto_t::icmp;
    case rule_proto::arp: return p.proto == proto_t::arp;
    case rule_proto::ip: return p.has_ipv4();
    case rule_proto::http: return p.proto == proto_t::tcp;
    }
    return false;
}

// folded_payload may be null; it is an optimization hook for scan() so the
// payload is lowercased at most once per packet.
inline bool match_with_scratch(const Rule& r, const DecodedPacket& p,
                               const bytes_t* folded_payload, bytes_t& scratch) {
    if (!proto_matches(r.proto, p)) return false;
    if (!r.src_addr.matches(p.src_ip) || !r.dst_addr.matches(p.dst_ip)) return false;
    if (p.has_ports()) {
        if (!r.src_port.matches(p.src_port) || !r.dst_port.matches(p.dst_port)) return false;
    } else {
        // port constraints cannot be satisfied by port-less protocols
        if (!r.src_port.any || !r.dst_port.any) return false;
    }
    for (const content_pattern& c : r.contents) {
        if (c.nocase) {
            if (!folded_payload) {
                scratch = fold_copy(p.payload);
                folded_payload = &scratch;
            }
            if (!contains(folded_payload->data(), folded_payload->size(), c.folded.data(),
                          c.folded.size()))
                return false;
        } else {
            if (!contains(p.payload.data(), p.payload.size(), c.pattern.data(),
                          c.pattern.size()))
                return false;
        }
    }
    return true;
}

} // namespace detail

inline bool match_rule(const Rule& r, const DecodedPacket& p) {
    bytes_t scratch;
    return detail::match_with_scratch(r, p, nullptr, scratch);
}

// All matching sids in ruleset order. Semantically identical to calling
// match_rule per rule; the only shortcut is sharing one case-folded copy of
// the payload across nocase rules.
inline std::vector<uint32_t> scan(const RuleSet& set, const DecodedPacket& p) {
    std::vector<uint32_t> sids;
    bytes_t scratch;
    const bytes_t* folded = nullptr;
    for (const Rule& r : set.rules) {
        if (detail::match_with_scratch(r, p, folded, scratch)) sids.push_back(r.sid);
        if (!folded && !scratch.empty()) folded = &scratch;
    }
    return sids;
}

} // namespace minids

#endif
