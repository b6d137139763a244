#pragma once
// UTF-8 handling for Latin-script bibliographic text: compatibility folding
// of the typographic characters that show up in API output (curly quotes,
// en/em dashes, exotic spaces, fullwidth forms, ligatures), plus punctuation
// and case helpers used by the canonicalization rules.
//
// Codepoints outside the mapped compatibility classes pass through unchanged.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace citeaudit::uni {

// Lenient UTF-8 decode: invalid bytes decode as their Latin-1 value so that
// malformed input never throws and round-trips stay deterministic.
inline std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
    while (i < s.size()) {
        unsigned char c = byte(i);
        if (c < 0x80) {
            out.push_back(c);
            ++i;
        } else if ((c >> 5) == 0x6 && i + 1 < s.size() && (byte(i + 1) & 0xC0) == 0x80) {
            out.push_back(((c & 0x1Fu) << 6) | (byte(i + 1) & 0x3Fu));
            i += 2;
        } else if ((c >> 4) == 0xE && i + 2 < s.size() && (byte(i + 1) & 0xC0) == 0x80 &&
                   (byte(i + 2) & 0xC0) == 0x80) {
            out.push_back(((c & 0x0Fu) << 12) | ((byte(i + 1) & 0x3Fu) << 6) | (byte(i + 2) & 0x3Fu));
            i += 3;
        } else if ((c >> 3) == 0x1E && i + 3 < s.size() && (byte(i + 1) & 0xC0) == 0x80 &&
                   (byte(i + 2) & 0xC0) == 0x80 && (byte(i + 3) & 0xC0) == 0x80) {
            out.push_back(((c & 0x07u) << 18) | ((byte(i + 1) & 0x3Fu) << 12) |
                          ((byte(i + 2) & 0x3Fu) << 6) | (byte(i + 3) & 0x3Fu));
            i += 4;
        } else {
            out.push_back(c);  // stray continuation or truncated sequence
            ++i;
        }
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

// Compatibility mapping for one codepoint. Returns nullptr when the
// codepoint has no mapping (caller keeps it as is).
inline const char* compat_map(char32_t cp) {
    switch (cp) {
        // quotes
        case 0x2018: case 0x2019: case 0x201A: case 0x201B: case 0x2032: return "'";
        case 0x201C: case 0x201D: case 0x201E: case 0x201F: case 0x2033: return "\"";
        case 0x00AB: case 0x00BB: case 0x2039: case 0x203A: return "\"";
        // dashes and hyphens
        case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014:
        case 0x2015: case 0x2212: return "-";
        // spaces
        case 0x00A0: case 0x1680: case 0x2000: case 0x2001: case 0x2002:
        case 0x2003: case 0x2004: case 0x2005: case 0x2006: case 0x2007:
        case 0x2008: case 0x2009: case 0x200A: case 0x202F: case 0x205F:
        case 0x3000: return " ";
        case 0x200B: case 0xFEFF: return "";  // zero-width
        case 0x2026: return "...";
        case 0x2044: return "/";
        case 0x2022: case 0x00B7: case 0x2023: case 0x25E6: return "*";  // list bullets
        case 0xFB01: return "fi";
        case 0xFB02: return "fl";
        default: return nullptr;
    }
}

// Folds typographic/compatibility characters to their ASCII equivalents.
// Fullwidth ASCII (U+FF01..U+FF5E) folds by offset.
inline std::string nfkc_fold(std::string_view s) {
    auto cps = decode_utf8(s);
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : cps) {
        if (cp >= 0xFF01 && cp <= 0xFF5E) {
            out.push_back(static_cast<char>(cp - 0xFF01 + 0x21));
            continue;
        }
        if (const char* m = compat_map(cp)) {
            out += m;
            continue;
        }
        append_utf8(out, cp);
    }
    return out;
}

inline bool is_punct_cp(char32_t cp) {
    if (cp < 0x80) {
        char c = static_cast<char>(cp);
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
               (c >= '{' && c <= '~');
    }
    // general punctuation, supplemental punctuation, CJK symbols
    if (cp >= 0x2010 && cp <= 0x2027) return true;
    if (cp >= 0x2030 && cp <= 0x205E) return true;
    if (cp >= 0x2E00 && cp <= 0x2E7F) return true;
    if (cp >= 0x3001 && cp <= 0x3003) return true;
    if (cp == 0x00A1 || cp == 0x00BF || cp == 0x00AB || cp == 0x00BB || cp == 0x00B7) return true;
    return false;
}

inline char32_t lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    // Latin-1 supplement
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 32;
    // Latin extended-A: even/odd case pairs
    if (cp >= 0x0100 && cp <= 0x0177 && (cp % 2 == 0)) return cp + 1;
    if (cp >= 0x0179 && cp <= 0x017E && (cp % 2 == 1)) return cp + 1;
    return cp;
}

inline std::string lower(std::string_view s) {
    auto cps = decode_utf8(s);
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : cps) append_utf8(out, lower_cp(cp));
    return out;
}

}  // namespace citeaudit::uni
