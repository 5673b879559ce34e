#pragma once
// Text utilities: normalization for content hashing, whitespace tokenization,
// entropy and link-marker heuristics, URL canonicalization.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace prism {

inline bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space_byte(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space_byte(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string ascii_casefold(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;  // swallow leading whitespace
    for (unsigned char c : s) {
        if (is_space_byte(c)) {
            if (!in_ws) out.push_back(' ');
            in_ws = true;
        } else {
            out.push_back(static_cast<char>(c));
            in_ws = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// Normalization behind content hashes: casefold + whitespace collapse.
// Input is treated as NFC; byte-identical mirrors with case/spacing noise
// collapse to one hash.
inline std::string normalize_for_hash(std::string_view body) {
    return collapse_whitespace(ascii_casefold(body));
}

inline std::vector<std::string> tokenize_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space_byte(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space_byte(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Character-level Shannon entropy of the byte distribution, in bits.
inline double shannon_entropy_bits(std::string_view s) {
    if (s.empty()) return 0.0;
    std::size_t counts[256] = {};
    for (unsigned char c : s) ++counts[c];
    const double n = static_cast<double>(s.size());
    double h = 0.0;
    for (std::size_t c = 0; c < 256; ++c) {
        if (counts[c] == 0) continue;
        const double p = static_cast<double>(counts[c]) / n;
        h -= p * std::log2(p);
    }
    return h;
}

inline bool looks_like_url(std::string_view t) {
    return t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.");
}

// A line counts as a link marker if it is a bare URL or a short menu token
// (<= 3 words, no sentence punctuation).
inline bool is_link_marker_line(std::string_view line) {
    std::string t = trim(line);
    if (t.empty()) return false;
    auto tokens = tokenize_ws(t);
    if (tokens.size() == 1 && looks_like_url(tokens[0])) return true;
    if (tokens.size() <= 3 &&
        t.find('.') == std::string::npos &&
        t.find('!') == std::string::npos &&
        t.find('?') == std::string::npos) {
        return true;
    }
    return false;
}

// Fraction of non-empty lines that are link markers.
inline double link_marker_density(std::string_view body) {
    std::size_t nonempty = 0, markers = 0;
    for (const auto& line : split(body, '\n')) {
        if (trim(line).empty()) continue;
        ++nonempty;
        if (is_link_marker_line(line)) ++markers;
    }
    if (nonempty == 0) return 0.0;
    return static_cast<double>(markers) / static_cast<double>(nonempty);
}

// Lowercases scheme and host, strips the fragment and common tracking
// parameters. Everything else is preserved verbatim.
inline std::string canonicalize_url(std::string_view url) {
    std::string u(url);
    if (auto frag = u.find('#'); frag != std::string::npos) u.resize(frag);

    std::size_t scheme_end = u.find("://");
    std::size_t host_start = 0;
    if (scheme_end != std::string::npos) {
        for (std::size_t i = 0; i < scheme_end; ++i)
            u[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(u[i])));
        host_start = scheme_end + 3;
    }
    std::size_t host_end = u.find_first_of("/?", host_start);
    if (host_end == std::string::npos) host_end = u.size();
    for (std::size_t i = host_start; i < host_end; ++i)
        u[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(u[i])));

    std::size_t qpos = u.find('?', host_end);
    if (qpos != std::string::npos) {
        auto is_tracking = [](std::string_view param) {
            auto key = param.substr(0, param.find('='));
            return key.starts_with("utm_") || key == "gclid" || key == "fbclid" || key == "ref";
        };
        std::vector<std::string> kept;
        for (const auto& p : split(std::string_view(u).substr(qpos + 1), '&')) {
            if (!p.empty() && !is_tracking(p)) kept.push_back(p);
        }
        u.resize(qpos);
        if (!kept.empty()) u += "?" + join(kept, "&");
    }
    return u;
}

inline bool contains_casefold(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    std::string h = ascii_casefold(haystack);
    std::string n = ascii_casefold(needle);
    return h.find(n) != std::string::npos;
}

} // namespace prism
