// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "cascade/calibration.hpp"

using namespace cascade;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<PredictionRecord> records_of(std::initializer_list<std::pair<double, bool>> pairs) {
    std::vector<PredictionRecord> out;
    for (const auto& [c, ok] : pairs) out.push_back({c, ok});
    return out;
}

// Hand-binning oracle: explicit per-record bin assignment and a direct sum,
// independent of the production accumulation.
double ece_oracle(const std::vector<PredictionRecord>& records, std::size_t m) {
    std::vector<std::vector<PredictionRecord>> bins(m);
    std::size_t n = 0;
    for (const auto& r : records) {
        if (!r.confidence) continue;
        std::size_t idx = m - 1;
        for (std::size_t b = 0; b < m; ++b) {
            const double lo = static_cast<double>(b) / static_cast<double>(m);
            const double hi = static_cast<double>(b + 1) / static_cast<double>(m);
            if (*r.confidence >= lo && (*r.confidence < hi || b == m - 1)) {
                idx = b;
                break;
            }
        }
        bins[idx].push_back(r);
        ++n;
    }
    double total = 0.0;
    for (const auto& bin : bins) {
        if (bin.empty()) continue;
        double conf = 0.0, acc = 0.0;
        for (const auto& r : bin) {
            conf += *r.confidence;
            acc += r.correct ? 1.0 : 0.0;
        }
        conf /= static_cast<double>(bin.size());
        acc /= static_cast<double>(bin.size());
        total += (static_cast<double>(bin.size()) / static_cast<double>(n)) *
                 std::abs(acc - conf);
    }
    return total;
}

// Pairwise comparison oracle for AUROC: every (correct, incorrect) pair,
// half credit on ties.
std::optional<double> auroc_oracle(const std::vector<PredictionRecord>& records) {
    std::vector<double> pos, neg;
    for (const auto& r : records) {
        if (!r.confidence) continue;
        (r.correct ? pos : neg).push_back(*r.confidence);
    }
    if (pos.empty() || neg.empty()) return std::nullopt;
    double score = 0.0;
    for (double p : pos) {
        for (double q : neg) {
            if (p > q) score += 1.0;
            else if (p == q) score += 0.5;
        }
    }
    return score / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::vector<PredictionRecord> random_records(std::mt19937& rng, bool require_both_classes) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<PredictionRecord> records;
    const std::size_t n = 2 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
        // quantized confidences so ties actually occur
        const double c = static_cast<double>(rng() % 11) / 10.0;
        records.push_back({c, unit(rng) < 0.5});
    }
    if (require_both_classes) {
        records[0].correct = true;
        records[1].correct = false;
    }
    return records;
}

} // namespace

TEST_CASE("ece worked examples") {
    SECTION("perfect calibration") {
        const auto records = records_of({{1.0, true}, {1.0, true}, {1.0, true}});
        CHECK(ece(records).ece == 0.0);
    }
    SECTION("hand-binned four-record example") {
        const auto records =
            records_of({{0.75, true}, {0.75, false}, {0.95, true}, {0.95, true}});
        const auto result = ece(records, 10);
        // bin [0.7,0.8): |0.5 - 0.75| * 2/4 ; bin [0.9,1.0]: |1.0 - 0.95| * 2/4
        CHECK_THAT(result.ece, WithinAbs(0.15, 1e-12));
        CHECK_THAT(result.ece, WithinAbs(ece_oracle(records, 10), 1e-15));
        CHECK(result.bins.size() == 10);
        CHECK(result.bins[7].count == 2);
        CHECK(result.bins[9].count == 2);
    }
    SECTION("maximal miscalibration") {
        const auto records = records_of({{1.0, false}, {1.0, false}});
        CHECK(ece(records).ece == 1.0);
    }
    SECTION("faults") {
        CHECK_THROWS_AS(ece(std::vector<PredictionRecord>{}), std::invalid_argument);
        CHECK_THROWS_AS(ece(records_of({{0.5, true}}), 0), std::invalid_argument);
        std::vector<PredictionRecord> no_conf{{std::nullopt, true}};
        CHECK_THROWS_AS(ece(no_conf), std::invalid_argument);
        CHECK_THROWS_AS(ece(records_of({{1.5, true}})), std::invalid_argument);
    }
}

TEST_CASE("ece matches the hand-binning oracle on random inputs") {
    std::mt19937 rng(11);
    for (int round = 0; round < 100; ++round) {
        const auto records = random_records(rng, false);
        const std::size_t m = 1 + rng() % 15;
        CHECK_THAT(ece(records, m).ece, WithinAbs(ece_oracle(records, m), 1e-12));
    }
}

TEST_CASE("ece invariances") {
    std::mt19937 rng(13);
    for (int round = 0; round < 50; ++round) {
        auto records = random_records(rng, false);
        const double base = ece(records, 10).ece;

        auto shuffled = records;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK_THAT(ece(shuffled, 10).ece, WithinAbs(base, 1e-12));

        std::vector<PredictionRecord> doubled = records;
        doubled.insert(doubled.end(), records.begin(), records.end());
        CHECK_THAT(ece(doubled, 10).ece, WithinAbs(base, 1e-12));
    }
}

TEST_CASE("ece bin bookkeeping") {
    std::mt19937 rng(17);
    for (int round = 0; round < 50; ++round) {
        const auto records = random_records(rng, false);
        const auto result = ece(records, 10);

        std::size_t total_count = 0;
        double weighted_conf = 0.0;
        for (const auto& bin : result.bins) {
            total_count += bin.count;
            weighted_conf += static_cast<double>(bin.count) * bin.mean_confidence;
        }
        double mean_conf = 0.0;
        for (const auto& r : records) mean_conf += *r.confidence;
        mean_conf /= static_cast<double>(records.size());

        CHECK(total_count == records.size());
        CHECK_THAT(weighted_conf / static_cast<double>(records.size()),
                   WithinAbs(mean_conf, 1e-12));
    }
}

TEST_CASE("auroc worked examples") {
    SECTION("perfect separation") {
        const auto records =
            records_of({{0.9, true}, {0.8, true}, {0.3, false}, {0.2, false}});
        CHECK(auroc(records) == 1.0);
    }
    SECTION("all ties, mixed correctness") {
        const auto records = records_of({{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}});
        CHECK(auroc(records) == 0.5);
    }
    SECTION("worked 4-record example") {
        const auto records =
            records_of({{0.9, true}, {0.8, false}, {0.7, true}, {0.3, false}});
        const auto got = auroc(records);
        REQUIRE(got.has_value());
        CHECK(*got == 0.75); // 3 of 4 (correct, incorrect) pairs ordered correctly
        CHECK(got == auroc_oracle(records));
    }
    SECTION("degenerate inputs are undefined, not 0.5") {
        CHECK_FALSE(auroc(records_of({{0.9, true}, {0.7, true}})).has_value());
        CHECK_FALSE(auroc(records_of({{0.9, false}, {0.7, false}})).has_value());
        CHECK_THROWS_AS(auroc(std::vector<PredictionRecord>{}), std::invalid_argument);
    }
}

TEST_CASE("auroc matches the pairwise oracle on random inputs") {
    std::mt19937 rng(19);
    for (int round = 0; round < 100; ++round) {
        const auto records = random_records(rng, true);
        const auto fast = auroc(records);
        const auto slow = auroc_oracle(records);
        REQUIRE(fast.has_value());
        REQUIRE(slow.has_value());
        CHECK_THAT(*fast, WithinAbs(*slow, 1e-12));
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    std::mt19937 rng(23);
    const std::vector<std::pair<const char*, double (*)(double)>> transforms = {
        {"square", [](double x) { return x * x; }},
        {"sqrt", [](double x) { return std::sqrt(x); }},
        {"affine", [](double x) { return 0.1 + 0.8 * x; }},
    };
    for (int round = 0; round < 30; ++round) {
        const auto records = random_records(rng, true);
        const auto base = auroc(records);
        for (const auto& [name, f] : transforms) {
            auto transformed = records;
            for (auto& r : transformed) r.confidence = f(*r.confidence);
            INFO(name);
            CHECK_THAT(*auroc(transformed), WithinAbs(*base, 1e-12));
        }
    }
}

TEST_CASE("auroc complement under swapped labels") {
    std::mt19937 rng(29);
    for (int round = 0; round < 100; ++round) {
        const auto records = random_records(rng, true);
        auto swapped = records;
        for (auto& r : swapped) r.correct = !r.correct;
        const auto a = auroc(records);
        const auto b = auroc(swapped);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        CHECK_THAT(*a + *b, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("pass@1") {
    CHECK(pass_at_1(records_of({{0.5, true}, {0.5, true}, {0.5, true}, {0.5, false}})) == 0.75);
    CHECK(pass_at_1(records_of({{0.5, true}, {0.5, true}})) == 1.0);
    CHECK_THROWS_AS(pass_at_1(std::vector<PredictionRecord>{}), std::invalid_argument);

    SECTION("1000-record log with 690 correct lands on 0.690 exactly") {
        std::vector<PredictionRecord> records;
        for (int i = 0; i < 1000; ++i) records.push_back({1.0, i < 690});
        CHECK(pass_at_1(records) == 0.690);
    }
}

TEST_CASE("confidence output ratio over parsed responses") {
    const auto with_macro = [](bool has) {
        ParsedResponse p;
        p.has_confidence_macro = has;
        return p;
    };
    std::vector<ParsedResponse> all = {with_macro(true), with_macro(true)};
    CHECK(confidence_output_ratio(all) == 1.0);
    std::vector<ParsedResponse> none = {with_macro(false), with_macro(false)};
    CHECK(confidence_output_ratio(none) == 0.0);
    // two of the three reference samples emit the macro
    std::vector<ParsedResponse> mixed = {with_macro(true), with_macro(true), with_macro(false)};
    CHECK_THAT(confidence_output_ratio(mixed), WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THROWS_AS(confidence_output_ratio(std::vector<ParsedResponse>{}),
                    std::invalid_argument);
}

TEST_CASE("calibration report composes the metrics") {
    SECTION("records without confidence stay in pass1 and the ratio only") {
        std::vector<PredictionRecord> records = {
            {0.9, true}, {0.8, false}, {std::nullopt, true}, {std::nullopt, false}};
        const auto report = calibration_report(records, 10);
        CHECK(report.pass1 == 0.5);
        CHECK(report.confidence_output_ratio == 0.5);
        REQUIRE(report.ece.has_value());
        CHECK_THAT(*report.ece, WithinAbs(ece_oracle(records, 10), 1e-12));
        REQUIRE(report.auroc.has_value());
        CHECK(*report.auroc == 1.0);
        std::size_t bin_total = 0;
        for (const auto& b : report.bins) bin_total += b.count;
        CHECK(bin_total == 2);
    }
    SECTION("no confidences at all: ece and auroc are absent") {
        std::vector<PredictionRecord> records = {{std::nullopt, true}, {std::nullopt, false}};
        const auto report = calibration_report(records, 10);
        CHECK(report.pass1 == 0.5);
        CHECK(report.confidence_output_ratio == 0.0);
        CHECK_FALSE(report.ece.has_value());
        CHECK_FALSE(report.auroc.has_value());
    }
}
