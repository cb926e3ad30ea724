#include "trajprism/text.hpp"

#include <array>
#include <cctype>
#include <cstdint>

namespace trajprism {

namespace {

// Base letters for U+0100..U+017F (Latin Extended-A), one entry per code point.
constexpr std::array<const char*, 128> kLatinExtA = {
    "a", "a", "a", "a", "a", "a",                               // 0100
    "c", "c", "c", "c", "c", "c", "c", "c",                     // 0106
    "d", "d", "d", "d",                                         // 010E
    "e", "e", "e", "e", "e", "e", "e", "e", "e", "e",           // 0112
    "g", "g", "g", "g", "g", "g", "g", "g",                     // 011C
    "h", "h", "h", "h",                                         // 0124
    "i", "i", "i", "i", "i", "i", "i", "i", "i", "i",           // 0128
    "ij", "ij", "j", "j", "k", "k", "k",                        // 0132
    "l", "l", "l", "l", "l", "l", "l", "l", "l", "l",           // 0139
    "n", "n", "n", "n", "n", "n", "n", "n", "n",                // 0143
    "o", "o", "o", "o", "o", "o", "oe", "oe",                   // 014C
    "r", "r", "r", "r", "r", "r",                               // 0154
    "s", "s", "s", "s", "s", "s", "s", "s",                     // 015A
    "t", "t", "t", "t", "t", "t",                               // 0162
    "u", "u", "u", "u", "u", "u", "u", "u", "u", "u", "u", "u", // 0168
    "w", "w", "y", "y", "y",                                    // 0174
    "z", "z", "z", "z", "z", "z", "s",                          // 0179
};

const char* latin1_base(char32_t cp) {
    if (cp >= 0xC0 && cp <= 0xC5) return "a";
    if (cp == 0xC6) return "ae";
    if (cp == 0xC7) return "c";
    if (cp >= 0xC8 && cp <= 0xCB) return "e";
    if (cp >= 0xCC && cp <= 0xCF) return "i";
    if (cp == 0xD0) return "d";
    if (cp == 0xD1) return "n";
    if ((cp >= 0xD2 && cp <= 0xD6) || cp == 0xD8) return "o";
    if (cp >= 0xD9 && cp <= 0xDC) return "u";
    if (cp == 0xDD) return "y";
    if (cp == 0xDE) return "th";
    if (cp == 0xDF) return "ss";
    if (cp >= 0xE0 && cp <= 0xE5) return "a";
    if (cp == 0xE6) return "ae";
    if (cp == 0xE7) return "c";
    if (cp >= 0xE8 && cp <= 0xEB) return "e";
    if (cp >= 0xEC && cp <= 0xEF) return "i";
    if (cp == 0xF0) return "d";
    if (cp == 0xF1) return "n";
    if ((cp >= 0xF2 && cp <= 0xF6) || cp == 0xF8) return "o";
    if (cp >= 0xF9 && cp <= 0xFC) return "u";
    if (cp == 0xFD || cp == 0xFF) return "y";
    if (cp == 0xFE) return "th";
    return nullptr;
}

// Decodes one UTF-8 sequence starting at s[i]; malformed bytes decode as
// themselves so that arbitrary input never throws.
char32_t decode(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) {
            i += 2;
            return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            i += 3;
            return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            i += 4;
            return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
                   char32_t(c3);
        }
    }
    ++i;
    return b0;
}

void encode(char32_t cp, std::string& out) {
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

bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
           cp == 0xA0;
}

} // namespace

std::string normalize_name(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::size_t i = 0;
    while (i < s.size()) {
        const char32_t cp = decode(s, i);
        if (is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (cp >= 0x300 && cp <= 0x36F) {
            continue; // combining marks
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        if (cp < 0x80) {
            out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
        } else if (const char* base = latin1_base(cp)) {
            out += base;
        } else if (cp >= 0x100 && cp <= 0x17F) {
            out += kLatinExtA[cp - 0x100];
        } else {
            encode(cp, out);
        }
    }
    return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
    const std::string norm = normalize_name(s);
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : norm) {
        const auto u = static_cast<unsigned char>(c);
        if (u >= 0x80 || std::isalnum(u)) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

bool starts_with_word(std::string_view text, std::string_view word) {
    const auto toks = word_tokens(text);
    return !toks.empty() && toks.front() == normalize_name(word);
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::size_t find_token_run(const std::vector<std::string>& haystack,
                           const std::vector<std::string>& needle, std::size_t from) {
    if (needle.empty() || needle.size() > haystack.size()) return std::string::npos;
    for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size(); ++k) {
            if (haystack[i + k] != needle[k]) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::string::npos;
}

std::size_t count_words(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

} // namespace trajprism
