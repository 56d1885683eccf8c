// SPDX-License-Identifier: Apache-2.0
//
// response_parser.hpp
//
// Extraction of the (answer, confidence, format-compliance) triple from raw
// model output. Answers arrive inside the last `\boxed{...}` macro, verbalized
// confidence inside the last `\confidence{...}` macro. Absence of either is a
// value, not an error: downstream code treats a missing confidence as a
// deferral signal and a confidence-output-ratio miss.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

// ============================================================================
// Token usage
// ============================================================================

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    // True when the counts were locally estimated instead of reported by the
    // serving side (see count_tokens_fallback in backends.hpp).
    bool estimated = false;
};

// ============================================================================
// Raw and parsed responses
// ============================================================================

struct RawResponse {
    std::string text;
    TokenUsage usage;
    // Per-token probabilities in [0,1], when the backend supplies them.
    std::optional<std::vector<double>> token_probs;

    void validate() const {
        if (usage.prompt_tokens < 0 || usage.completion_tokens < 0) {
            throw std::invalid_argument("RawResponse: negative token count");
        }
        if (token_probs) {
            for (double p : *token_probs) {
                if (!(p >= 0.0 && p <= 1.0)) {
                    throw std::invalid_argument(
                        "RawResponse: token probability outside [0,1]");
                }
            }
        }
    }
};

struct ParsedResponse {
    std::string reasoning;               // full completion text
    std::optional<std::string> answer;   // content of the last \boxed{...}
    std::optional<double> confidence;    // last \confidence{...}, clamped to [0,1]
    bool has_boxed = false;
    bool has_confidence_macro = false;
    bool language_consistent = false;
    TokenUsage usage;
};

// ============================================================================
// Macro extraction
// ============================================================================

namespace detail {

// Content of the LAST occurrence of `opener` (e.g. "\boxed{"), with nested
// braces resolved by depth counting. Unbalanced braces at that occurrence
// yield absent; earlier occurrences are not considered.
inline std::optional<std::string> last_braced_content(std::string_view text,
                                                      std::string_view opener) {
    const auto pos = text.rfind(opener);
    if (pos == std::string_view::npos) return std::nullopt;
    const std::size_t start = pos + opener.size();
    int depth = 1;
    for (std::size_t i = start; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            if (--depth == 0) {
                return std::string(text.substr(start, i - start));
            }
        }
    }
    return std::nullopt; // unbalanced: recorded as a format failure upstream
}

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r';
    };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Strict decimal parse: the whole trimmed string must be a number.
inline std::optional<double> parse_decimal(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (std::isnan(value)) return std::nullopt;
    return value;
}

} // namespace detail

// Content of the LAST balanced `\boxed{...}`; absent when the macro is
// missing or its braces do not balance.
inline std::optional<std::string> extract_answer(std::string_view text) {
    return detail::last_braced_content(text, "\\boxed{");
}

// Value of the LAST `\confidence{...}` as a fraction. Values outside [0,1]
// clamp to the nearest bound; non-numeric content reads as absent.
inline std::optional<double> extract_confidence(std::string_view text) {
    const auto content = detail::last_braced_content(text, "\\confidence{");
    if (!content) return std::nullopt;
    const auto value = detail::parse_decimal(*content);
    if (!value) return std::nullopt;
    return std::min(1.0, std::max(0.0, *value));
}

// ============================================================================
// Language consistency heuristic
// ============================================================================

namespace detail {

enum class Script { None, Latin, Greek, Cyrillic, Hebrew, Arabic, Devanagari, Hangul, Cjk };

inline Script classify_script(char32_t cp) {
    if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return Script::Latin;
    if (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7) return Script::Latin;
    if (cp >= 0x0370 && cp <= 0x03FF) return Script::Greek;
    if (cp >= 0x0400 && cp <= 0x04FF) return Script::Cyrillic;
    if (cp >= 0x0590 && cp <= 0x05FF) return Script::Hebrew;
    if (cp >= 0x0600 && cp <= 0x06FF) return Script::Arabic;
    if (cp >= 0x0900 && cp <= 0x097F) return Script::Devanagari;
    if ((cp >= 0x1100 && cp <= 0x11FF) || (cp >= 0xAC00 && cp <= 0xD7AF)) return Script::Hangul;
    // Han, Hiragana and Katakana share one bucket so mixed-kana text does
    // not flap against its own prompt.
    if ((cp >= 0x3040 && cp <= 0x30FF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
        (cp >= 0x4E00 && cp <= 0x9FFF)) {
        return Script::Cjk;
    }
    return Script::None;
}

// Dominant script of the letters in a UTF-8 string; Script::None when the
// string carries no letters. Invalid UTF-8 bytes are skipped.
inline Script dominant_script(std::string_view text) {
    std::size_t counts[9] = {};
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char b0 = static_cast<unsigned char>(text[i]);
        char32_t cp = 0;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < text.size()) {
            cp = static_cast<char32_t>((b0 & 0x1F) << 6 |
                                       (text[i + 1] & 0x3F));
            len = 2;
        } else if ((b0 >> 4) == 0xE && i + 2 < text.size()) {
            cp = static_cast<char32_t>((b0 & 0x0F) << 12 |
                                       (text[i + 1] & 0x3F) << 6 |
                                       (text[i + 2] & 0x3F));
            len = 3;
        } else if ((b0 >> 3) == 0x1E && i + 3 < text.size()) {
            cp = static_cast<char32_t>((b0 & 0x07) << 18 |
                                       (text[i + 1] & 0x3F) << 12 |
                                       (text[i + 2] & 0x3F) << 6 |
                                       (text[i + 3] & 0x3F));
            len = 4;
        }
        i += len;
        const Script s = classify_script(cp);
        if (s != Script::None) ++counts[static_cast<int>(s)];
    }
    Script best = Script::None;
    std::size_t best_count = 0;
    for (int s = 1; s < 9; ++s) {
        if (counts[s] > best_count) {
            best_count = counts[s];
            best = static_cast<Script>(s);
        }
    }
    return best;
}

} // namespace detail

// True when the dominant Unicode script of the completion's letters matches
// the prompt's. A letterless completion never matches (an empty reply cannot
// be language-consistent); a letterless prompt always does. With the
// heuristic disabled the check passes unconditionally.
inline bool check_language_consistency(std::string_view prompt,
                                       std::string_view completion,
                                       bool enabled = true) {
    if (!enabled) return true;
    const auto completion_script = detail::dominant_script(completion);
    if (completion_script == detail::Script::None) return false;
    const auto prompt_script = detail::dominant_script(prompt);
    if (prompt_script == detail::Script::None) return true;
    return completion_script == prompt_script;
}

// ============================================================================
// Composition
// ============================================================================

struct ParseOptions {
    // Prompt the completion is checked against; without one the language
    // flag falls back to "completion has letters at all".
    std::optional<std::string> prompt;
    bool check_language = true;
};

inline ParsedResponse parse(const RawResponse& raw, const ParseOptions& options = {}) {
    raw.validate();
    ParsedResponse out;
    out.reasoning = raw.text;
    out.answer = extract_answer(raw.text);
    out.confidence = extract_confidence(raw.text);
    out.has_boxed = out.answer.has_value();
    out.has_confidence_macro = out.confidence.has_value();
    out.language_consistent = check_language_consistency(
        options.prompt ? std::string_view(*options.prompt) : std::string_view{},
        raw.text, options.check_language);
    out.usage = raw.usage;
    return out;
}

} // namespace cascade
