#include "archsearch/text.hpp"

#include <cctype>
#include <cstdint>

namespace archsearch {

namespace {

struct Decoded {
    char32_t cp;
    std::size_t len;
    bool valid;
};

// Minimal UTF-8 decoder; invalid bytes decode as themselves with valid=false so
// they can be passed through untouched.
Decoded decode(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1, true};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {b0, 1, false};
    }
    if (i + len > s.size()) return {b0, 1, false};
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return {b0, 1, false};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len, true};
}

bool is_space(char32_t cp) {
    switch (cp) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_dash(char32_t cp) {
    return (cp >= 0x2010 && cp <= 0x2015) || cp == 0x2212 || cp == 0xFE58 || cp == 0xFE63 ||
           cp == 0xFF0D;
}

bool is_token_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
}

bool has_digit(std::string_view s) {
    for (char c : s) {
        if (c >= '0' && c <= '9') return true;
    }
    return false;
}

}  // namespace

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto d = decode(s, i);
        if (d.valid && is_space(d.cp)) {
            pending_space = !out.empty();
            i += d.len;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        if (d.valid && is_dash(d.cp)) {
            out.push_back('-');
        } else if (d.len == 1) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
        } else {
            out.append(s.substr(i, d.len));
        }
        i += d.len;
    }
    return out;
}

std::string normalize_identifier(std::string_view s) {
    const auto norm = normalize_text(s);
    std::string out;
    out.reserve(norm.size());
    for (char c : norm) {
        if (c == ' ') continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    const auto norm = normalize_text(s);
    std::vector<std::string> tokens;
    std::vector<std::string> chain;  // dash-joined parts of the current run
    std::string current;

    auto flush_chain = [&] {
        if (chain.size() >= 2) {
            std::string joined;
            for (const auto& part : chain) joined += part;
            if (has_digit(joined)) tokens.push_back(std::move(joined));
        }
        chain.clear();
    };

    for (std::size_t i = 0; i <= norm.size(); ++i) {
        const char c = i < norm.size() ? norm[i] : ' ';
        if (is_token_byte(c)) {
            current.push_back(c);
            continue;
        }
        if (!current.empty()) {
            tokens.push_back(current);
            chain.push_back(std::move(current));
            current.clear();
        }
        // A single dash between two token runs continues the chain.
        const bool continues = c == '-' && !chain.empty() && i + 1 < norm.size() &&
                               is_token_byte(norm[i + 1]);
        if (!continues) flush_chain();
    }
    return tokens;
}

std::string truncate_code_points(std::string_view s, std::size_t max_chars) {
    std::size_t i = 0;
    std::size_t count = 0;
    while (i < s.size() && count < max_chars) {
        i += decode(s, i).len;
        ++count;
    }
    return std::string(s.substr(0, i));
}

std::size_t count_code_points(std::string_view s) {
    std::size_t i = 0;
    std::size_t count = 0;
    while (i < s.size()) {
        i += decode(s, i).len;
        ++count;
    }
    return count;
}

std::string to_upper_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace archsearch
