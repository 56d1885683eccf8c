// SPDX-License-Identifier: Apache-2.0
//
// rewards.hpp
//
// Composite reward for confidence-calibrated RL training:
//
//     R = R_correct + R_format + R_confidence
//
// R_correct is binary answer correctness under a pluggable verifier,
// R_format the mean of three binary format checks, and R_confidence a
// negative distance between the verbalized confidence y_c and the
// correctness probability p. Group-level variants estimate p as the rollout
// group's accuracy and share it across the group; sample-level variants
// substitute the response's own correctness indicator.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/response_parser.hpp"

namespace cascade {

// ============================================================================
// Configuration
// ============================================================================

enum class RewardVariant { L1, L2, Kl, SampleL1, SampleL2, SampleKl };

// The clipped-normalized KL reward as printed is maximized when y_c is far
// from p (the normalization divides by a negative log). The default negates
// it so the maximum sits at y_c = p; AsPrinted keeps the literal form for
// fidelity experiments.
enum class KlSign { CalibrationConsistent, AsPrinted };

struct RewardConfig {
    RewardVariant variant = RewardVariant::L1;
    double epsilon = 0.01; // KL clipping factor, in (0,1)
    KlSign kl_sign = KlSign::CalibrationConsistent;
    double missing_confidence_reward = -1.0; // in [-1, 0]

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0)) {
            throw std::invalid_argument("RewardConfig: epsilon must be in (0,1)");
        }
        if (!(missing_confidence_reward >= -1.0 && missing_confidence_reward <= 0.0)) {
            throw std::invalid_argument(
                "RewardConfig: missing_confidence_reward must be in [-1,0]");
        }
    }
};

inline bool is_sample_level(RewardVariant v) {
    return v == RewardVariant::SampleL1 || v == RewardVariant::SampleL2 ||
           v == RewardVariant::SampleKl;
}

inline const char* reward_variant_name(RewardVariant v) {
    switch (v) {
        case RewardVariant::L1: return "L1";
        case RewardVariant::L2: return "L2";
        case RewardVariant::Kl: return "KL";
        case RewardVariant::SampleL1: return "sample_L1";
        case RewardVariant::SampleL2: return "sample_L2";
        case RewardVariant::SampleKl: return "sample_KL";
    }
    return "?";
}

inline std::optional<RewardVariant> reward_variant_from_name(std::string_view name) {
    if (name == "L1" || name == "l1") return RewardVariant::L1;
    if (name == "L2" || name == "l2") return RewardVariant::L2;
    if (name == "KL" || name == "kl") return RewardVariant::Kl;
    if (name == "sample_L1" || name == "sample_l1") return RewardVariant::SampleL1;
    if (name == "sample_L2" || name == "sample_l2" || name == "brier" ||
        name == "Brier") {
        return RewardVariant::SampleL2;
    }
    if (name == "sample_KL" || name == "sample_kl") return RewardVariant::SampleKl;
    return std::nullopt;
}

// ============================================================================
// Answer verification seam
// ============================================================================

// Equivalence between an extracted answer and the gold answer. The default
// normalizes (whitespace, one layer of math delimiters, ASCII case) and
// compares numeric strings as numbers; symbolic math equivalence plugs in
// here when needed.
using AnswerVerifier = std::function<bool(std::string_view answer, std::string_view gold)>;

namespace detail {

inline std::string_view strip_math_delimiters(std::string_view s) {
    if (s.size() >= 2) {
        if (s.front() == '$' && s.back() == '$') return s.substr(1, s.size() - 2);
        const auto starts = [&](std::string_view p) { return s.substr(0, 2) == p; };
        const auto ends = [&](std::string_view p) { return s.substr(s.size() - 2) == p; };
        if (s.size() >= 4 && starts("\\(") && ends("\\)")) return s.substr(2, s.size() - 4);
        if (s.size() >= 4 && starts("\\[") && ends("\\]")) return s.substr(2, s.size() - 4);
    }
    return s;
}

inline std::string normalize_answer(std::string_view s) {
    s = trim(s);
    s = trim(strip_math_delimiters(s));
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
    return out;
}

} // namespace detail

inline bool default_verifier(std::string_view answer, std::string_view gold) {
    const std::string a = detail::normalize_answer(answer);
    const std::string g = detail::normalize_answer(gold);
    if (a == g) return true;
    const auto av = detail::parse_decimal(a);
    const auto gv = detail::parse_decimal(g);
    return av && gv && *av == *gv;
}

// ============================================================================
// Rollout groups
// ============================================================================

struct RolloutGroup {
    std::string question;
    std::string gold_answer;
    std::vector<ParsedResponse> responses; // the N sampled responses

    void validate() const {
        if (responses.empty()) {
            throw std::invalid_argument("RolloutGroup: needs at least one response");
        }
        if (gold_answer.empty()) {
            throw std::invalid_argument("RolloutGroup: empty gold answer");
        }
    }
};

// ============================================================================
// Reward components
// ============================================================================

struct RewardBreakdown {
    double r_correct = 0.0;    // {0,1}
    double r_format = 0.0;     // [0,1]
    double r_confidence = 0.0; // [-1,0] under calibration-consistent configs
    double total = 0.0;        // exact sum of the three
};

inline int correctness(const std::optional<std::string>& answer,
                       const std::string& gold,
                       const AnswerVerifier& verifier = default_verifier) {
    if (gold.empty()) throw std::invalid_argument("correctness: empty gold answer");
    if (!answer) return 0;
    return verifier(*answer, gold) ? 1 : 0;
}

// Mean of the three binary checks the prompt instruction asks for: boxed
// answer, confidence macro, consistent language.
inline double format_reward(const ParsedResponse& parsed) {
    const int hits = (parsed.has_boxed ? 1 : 0) +
                     (parsed.has_confidence_macro ? 1 : 0) +
                     (parsed.language_consistent ? 1 : 0);
    return hits / 3.0;
}

// Group accuracy estimate over the N rollout responses.
inline double estimate_group_accuracy(const RolloutGroup& group,
                                      const AnswerVerifier& verifier = default_verifier) {
    group.validate();
    std::size_t correct = 0;
    for (const auto& r : group.responses) {
        correct += static_cast<std::size_t>(correctness(r.answer, group.gold_answer, verifier));
    }
    return static_cast<double>(correct) / static_cast<double>(group.responses.size());
}

// Unclipped log-score distance; unbounded as y_c approaches {0,1}, which is
// why the trainable variant clips and normalizes instead.
inline double kl_confidence_reward_unclipped(double p, double y_c) {
    const auto term = [](double w, double num, double den) {
        if (w == 0.0) return 0.0;
        return -w * std::log(num / den);
    };
    return term(p, p, y_c) + term(1.0 - p, 1.0 - p, 1.0 - y_c);
}

namespace detail {

inline double clipped_kl_bracket(double p, double y_c, double epsilon) {
    const double log_eps = std::log(epsilon);
    return p * std::log(std::max(y_c, epsilon)) / log_eps +
           (1.0 - p) * std::log(std::max(1.0 - y_c, epsilon)) / log_eps;
}

} // namespace detail

// Confidence reward for one response. `p` is the group accuracy estimate;
// sample-level variants replace it with the response's own correctness
// indicator. A missing y_c earns the configured floor reward.
inline double confidence_reward(const RewardConfig& config, double p,
                                std::optional<double> y_c, bool correct) {
    config.validate();
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("confidence_reward: p outside [0,1]");
    }
    if (!y_c) return config.missing_confidence_reward;
    if (!(*y_c >= 0.0 && *y_c <= 1.0)) {
        throw std::invalid_argument("confidence_reward: y_c outside [0,1]");
    }
    const double target = is_sample_level(config.variant) ? (correct ? 1.0 : 0.0) : p;
    const double c = *y_c;
    switch (config.variant) {
        case RewardVariant::L1:
        case RewardVariant::SampleL1:
            return -std::abs(target - c);
        case RewardVariant::L2:
        case RewardVariant::SampleL2:
            return -(target - c) * (target - c);
        case RewardVariant::Kl:
        case RewardVariant::SampleKl: {
            const double bracket = detail::clipped_kl_bracket(target, c, config.epsilon);
            return config.kl_sign == KlSign::CalibrationConsistent ? -bracket : bracket;
        }
    }
    throw std::logic_error("confidence_reward: unhandled variant");
}

inline RewardBreakdown composite_reward(const ParsedResponse& parsed, double p_hat,
                                        const std::string& gold, const RewardConfig& config,
                                        const AnswerVerifier& verifier = default_verifier) {
    RewardBreakdown b;
    b.r_correct = correctness(parsed.answer, gold, verifier);
    b.r_format = format_reward(parsed);
    b.r_confidence = confidence_reward(config, p_hat, parsed.confidence, b.r_correct == 1.0);
    b.total = b.r_correct + b.r_format + b.r_confidence;
    return b;
}

// Scores every response in a rollout group. Group-level variants score all N
// against the single shared group accuracy; sample-level ones against each
// response's own correctness indicator.
inline std::vector<RewardBreakdown> score_group(const RolloutGroup& group,
                                                const RewardConfig& config,
                                                const AnswerVerifier& verifier = default_verifier) {
    group.validate();
    const double p_hat = estimate_group_accuracy(group, verifier);
    std::vector<RewardBreakdown> out;
    out.reserve(group.responses.size());
    for (const auto& r : group.responses) {
        out.push_back(composite_reward(r, p_hat, group.gold_answer, config, verifier));
    }
    return out;
}

} // namespace cascade
