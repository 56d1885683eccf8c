// SPDX-License-Identifier: Apache-2.0
//
// calibration.hpp
//
// Calibration and accuracy metrics over (confidence, correctness) records:
// Pass@1, expected calibration error over equal-width bins, AUROC in its
// probability-of-correct-ranking form, and the confidence output ratio.
// Records without a confidence are excluded from ECE/AUROC but still count
// toward Pass@1 and the output ratio — metrics about confidence require one.

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cascade/response_parser.hpp"

namespace cascade {

struct PredictionRecord {
    std::optional<double> confidence; // in [0,1] when present
    bool correct = false;
};

struct CalibrationBin {
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct EceResult {
    double ece = 0.0;
    std::vector<CalibrationBin> bins;
};

namespace detail {

inline void require_confidence_range(const PredictionRecord& r) {
    if (r.confidence && !(*r.confidence >= 0.0 && *r.confidence <= 1.0)) {
        throw std::invalid_argument("PredictionRecord: confidence outside [0,1]");
    }
}

} // namespace detail

// ============================================================================
// ECE
// ============================================================================

// Equal-width bins over [0,1], left-closed, last bin right-closed.
// ECE = sum over bins of (|B_m|/N) * |acc(B_m) - conf(B_m)|; empty bins
// contribute zero. Faults on empty input (or input with no confidences).
inline EceResult ece(std::span<const PredictionRecord> records, std::size_t num_bins = 10) {
    if (num_bins < 1) throw std::invalid_argument("ece: need at least one bin");
    std::vector<std::size_t> counts(num_bins, 0);
    std::vector<double> conf_sums(num_bins, 0.0);
    std::vector<std::size_t> correct_counts(num_bins, 0);
    std::size_t n = 0;
    for (const auto& r : records) {
        detail::require_confidence_range(r);
        if (!r.confidence) continue;
        const auto bin = std::min(
            static_cast<std::size_t>(*r.confidence * static_cast<double>(num_bins)),
            num_bins - 1);
        ++counts[bin];
        conf_sums[bin] += *r.confidence;
        correct_counts[bin] += r.correct ? 1 : 0;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("ece: no records with confidence");

    EceResult result;
    result.bins.resize(num_bins);
    for (std::size_t m = 0; m < num_bins; ++m) {
        auto& bin = result.bins[m];
        bin.count = counts[m];
        if (counts[m] == 0) continue;
        bin.mean_confidence = conf_sums[m] / static_cast<double>(counts[m]);
        bin.accuracy = static_cast<double>(correct_counts[m]) / static_cast<double>(counts[m]);
        result.ece += (static_cast<double>(counts[m]) / static_cast<double>(n)) *
                      std::abs(bin.accuracy - bin.mean_confidence);
    }
    return result;
}

// ============================================================================
// AUROC
// ============================================================================

// Probability that a correct record outranks an incorrect one under the
// confidence score, ties counted half. Computed as the Mann-Whitney rank
// statistic; absent when the records are all-correct or all-incorrect
// (no discrimination is measurable).
inline std::optional<double> auroc(std::span<const PredictionRecord> records) {
    struct Scored {
        double confidence;
        bool correct;
    };
    std::vector<Scored> scored;
    scored.reserve(records.size());
    for (const auto& r : records) {
        detail::require_confidence_range(r);
        if (r.confidence) scored.push_back({*r.confidence, r.correct});
    }
    if (scored.empty()) throw std::invalid_argument("auroc: no records with confidence");

    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.confidence < b.confidence; });

    std::size_t n_pos = 0;
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].confidence == scored[i].confidence) ++j;
        // average rank of the tie run [i, j), 1-based ranks
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (scored[k].correct) {
                ++n_pos;
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    const std::size_t n_neg = scored.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double u = rank_sum_pos -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// ============================================================================
// Pass@1 and confidence output ratio
// ============================================================================

inline double pass_at_1(std::span<const PredictionRecord> records) {
    if (records.empty()) throw std::invalid_argument("pass_at_1: empty records");
    std::size_t correct = 0;
    for (const auto& r : records) correct += r.correct ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

inline double confidence_output_ratio(std::span<const ParsedResponse> responses) {
    if (responses.empty()) {
        throw std::invalid_argument("confidence_output_ratio: empty input");
    }
    std::size_t with_macro = 0;
    for (const auto& r : responses) with_macro += r.has_confidence_macro ? 1 : 0;
    return static_cast<double>(with_macro) / static_cast<double>(responses.size());
}

// ============================================================================
// Combined report
// ============================================================================

struct CalibrationReport {
    double pass1 = 0.0;
    std::optional<double> ece;   // absent when no record carries a confidence
    std::optional<double> auroc; // absent when degenerate (one class only)
    double confidence_output_ratio = 0.0;
    std::vector<CalibrationBin> bins;
};

inline CalibrationReport calibration_report(std::span<const PredictionRecord> records,
                                            std::size_t num_bins = 10) {
    if (records.empty()) throw std::invalid_argument("calibration_report: empty records");
    CalibrationReport report;
    report.pass1 = pass_at_1(records);
    std::size_t with_conf = 0;
    for (const auto& r : records) with_conf += r.confidence ? 1 : 0;
    report.confidence_output_ratio =
        static_cast<double>(with_conf) / static_cast<double>(records.size());
    if (with_conf > 0) {
        auto e = ece(records, num_bins);
        report.ece = e.ece;
        report.bins = std::move(e.bins);
        report.auroc = auroc(records);
    }
    return report;
}

} // namespace cascade
