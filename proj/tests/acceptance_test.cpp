// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Every criterion runs with scripted backends on a laptop;
// each prints one PASS/FAIL line and the process exits nonzero if any fail.
// Headline accuracy/cost figures require trained model weights and GPU
// inference and are out of reach here; what is checked instead is exact
// replay of the cost and metric arithmetic from constructed logs plus the
// property suites, at the tolerances stated inline.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include "cascade/calibration.hpp"
#include "cascade/harness.hpp"
#include "cascade/rewards.hpp"

using namespace cascade;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("%s  %d. %s%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    if (!ok) ++g_failures;
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(CASCADE_FIXTURES_DIR) + "/" + name, std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture " + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

// ----------------------------------------------------------------------------
// 1. Reward correctness on the (p, y_c) grid, to 1e-9, plus argmax placement.
// ----------------------------------------------------------------------------

double brute_force_reward(RewardVariant variant, KlSign sign, double eps, double p, double y) {
    // Independent coding of the confidence reward formulas.
    if (variant == RewardVariant::L1 || variant == RewardVariant::SampleL1) {
        return -(p > y ? p - y : y - p);
    }
    if (variant == RewardVariant::L2 || variant == RewardVariant::SampleL2) {
        return -((p - y) * (p - y));
    }
    const double first = p * std::log(y > eps ? y : eps) / std::log(eps);
    const double second = (1.0 - p) * std::log((1.0 - y) > eps ? (1.0 - y) : eps) / std::log(eps);
    return sign == KlSign::AsPrinted ? first + second : -(first + second);
}

void criterion_1() {
    bool ok = true;
    std::string detail;
    for (const auto variant : {RewardVariant::L1, RewardVariant::L2, RewardVariant::Kl,
                               RewardVariant::SampleL1, RewardVariant::SampleL2,
                               RewardVariant::SampleKl}) {
        for (const auto sign : {KlSign::CalibrationConsistent, KlSign::AsPrinted}) {
            RewardConfig config;
            config.variant = variant;
            config.kl_sign = sign;
            config.epsilon = 0.01;
            for (int pi = 0; pi <= 20 && ok; ++pi) {
                for (int yi = 0; yi <= 20 && ok; ++yi) {
                    const double p = pi / 20.0;
                    const double y = yi / 20.0;
                    double got, want;
                    if (is_sample_level(variant)) {
                        const bool correct = pi >= 10;
                        got = confidence_reward(config, p, y, correct);
                        want = brute_force_reward(variant, sign, 0.01, correct ? 1.0 : 0.0, y);
                    } else {
                        got = confidence_reward(config, p, y, false);
                        want = brute_force_reward(variant, sign, 0.01, p, y);
                    }
                    if (!near(got, want, 1e-9)) {
                        ok = false;
                        detail = std::string(reward_variant_name(variant)) + " at p=" +
                                 std::to_string(p) + " y=" + std::to_string(y);
                    }
                }
            }
        }
    }

    // Group-level argmax: exact at y_c = p for L1/L2, within one 0.01 grid
    // step for calibration-consistent KL with epsilon = 0.01.
    for (const auto variant : {RewardVariant::L1, RewardVariant::L2, RewardVariant::Kl}) {
        RewardConfig config;
        config.variant = variant;
        config.epsilon = 0.01;
        for (int pi = 0; pi <= 10 && ok; ++pi) {
            const double p = pi / 10.0;
            double best = -2.0;
            int best_yi = -1;
            for (int yi = 0; yi <= 100; ++yi) {
                const double r = confidence_reward(config, p, yi / 100.0, false);
                if (r > best) {
                    best = r;
                    best_yi = yi;
                }
            }
            const double tolerance = variant == RewardVariant::Kl ? 0.01 + 1e-12 : 1e-12;
            if (std::fabs(best_yi / 100.0 - p) > tolerance) {
                ok = false;
                detail = std::string("argmax off for ") + reward_variant_name(variant) +
                         " at p=" + std::to_string(p);
            }
        }
    }
    report(1, "reward correctness vs brute force (1e-9) and argmax placement", ok, detail);
}

// ----------------------------------------------------------------------------
// 2. Improperness of sample_L1: the expected reward peaks at an endpoint.
// ----------------------------------------------------------------------------

void criterion_2() {
    RewardConfig config;
    config.variant = RewardVariant::SampleL1;
    bool ok = true;
    std::string detail;
    for (const double p : {0.3, 0.7}) {
        double best = -2.0;
        int best_yi = -1;
        for (int yi = 0; yi <= 100; ++yi) {
            const double y = yi / 100.0;
            const double expected = p * confidence_reward(config, p, y, true) +
                                    (1.0 - p) * confidence_reward(config, p, y, false);
            if (expected > best) {
                best = expected;
                best_yi = yi;
            }
        }
        const double at_p = p * confidence_reward(config, p, p, true) +
                            (1.0 - p) * confidence_reward(config, p, p, false);
        if (!((best_yi == 0 || best_yi == 100) && best > at_p)) {
            ok = false;
            detail = "p=" + std::to_string(p) + " argmax at y=" + std::to_string(best_yi / 100.0);
        }
    }
    report(2, "sample_L1 expected reward is maximized at an endpoint (not proper)", ok, detail);
}

// ----------------------------------------------------------------------------
// 3. Calibration oracles.
// ----------------------------------------------------------------------------

void criterion_3() {
    bool ok = true;
    std::string detail;

    const std::vector<PredictionRecord> worked_ece = {
        {0.75, true}, {0.75, false}, {0.95, true}, {0.95, true}};
    if (!near(ece(worked_ece, 10).ece, 0.15, 1e-12)) {
        ok = false;
        detail = "worked ECE off";
    }

    const std::vector<PredictionRecord> worked_auroc = {
        {0.9, true}, {0.8, false}, {0.7, true}, {0.3, false}};
    if (auroc(worked_auroc) != 0.75) {
        ok = false;
        detail = "worked AUROC off";
    }

    // Perfectly calibrated records by construction: bin centers c = (2m-1)/20
    // with exactly c*20 of 20 records correct per bin.
    std::vector<PredictionRecord> calibrated;
    for (int m = 1; m <= 10; ++m) {
        const double c = (2 * m - 1) / 20.0;
        const int correct = 2 * m - 1; // of 20
        for (int i = 0; i < 20; ++i) calibrated.push_back({c, i < correct});
    }
    if (!(ece(calibrated, 10).ece <= 1e-12)) {
        ok = false;
        detail = "synthetic calibrated ECE above 1e-12";
    }

    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 100 && ok; ++round) {
        std::vector<PredictionRecord> records;
        const std::size_t n = 2 + rng() % 50;
        for (std::size_t i = 0; i < n; ++i) {
            records.push_back({static_cast<double>(rng() % 21) / 20.0, unit(rng) < 0.5});
        }
        records[0].correct = true;
        records[1].correct = false;
        auto swapped = records;
        for (auto& r : swapped) r.correct = !r.correct;
        const auto a = auroc(records);
        const auto b = auroc(swapped);
        if (!a || !b || !near(*a + *b, 1.0, 1e-12)) {
            ok = false;
            detail = "label-swap complement failed";
        }
    }
    report(3, "calibration oracles: ECE 0.15, AUROC 0.75, calibrated ECE<=1e-12, label swap",
           ok, detail);
}

// ----------------------------------------------------------------------------
// 4. Cost arithmetic replay from constructed logs.
// ----------------------------------------------------------------------------

RunLogRow cost_row(const std::string& id, std::optional<double> conf, bool slm_correct,
                   bool llm_correct, StageUsage slm_u, StageUsage llm_u, double threshold) {
    RunLogRow row;
    row.question_id = id;
    row.repeat_index = 0;
    row.question = "q " + id;
    row.gold = "1";
    StageLogRecord slm;
    slm.text = "s";
    slm.usage = {slm_u.prompt_tokens, slm_u.completion_tokens, false};
    slm.confidence = conf;
    slm.has_confidence_macro = conf.has_value();
    slm.answer = slm_correct ? "1" : "0";
    slm.has_boxed = true;
    slm.language_consistent = true;
    slm.correct = slm_correct;
    row.slm = slm;
    StageLogRecord llm;
    llm.text = "l";
    llm.usage = {llm_u.prompt_tokens, llm_u.completion_tokens, false};
    llm.answer = llm_correct ? "1" : "0";
    llm.has_boxed = true;
    llm.language_consistent = true;
    llm.correct = llm_correct;
    row.llm = llm;
    row.decision.confidence_used = conf;
    row.decision.deferred = !conf || *conf < threshold;
    row.decision.final_correct = row.decision.deferred ? llm_correct : slm_correct;
    return row;
}

void criterion_4() {
    bool ok = true;
    std::string detail;
    const double ratio = 32.0 / 7.0;

    // (a) six hand-built rows at threshold 0.7
    RunLog six;
    six.meta.policy.threshold = 0.7;
    six.meta.cost.slm_params = 7.0;
    six.meta.cost.llm_params = 32.0;
    six.meta.repeats = 1;
    six.rows.push_back(cost_row("r1", 0.9, true, true, {120, 380}, {100, 300}, 0.7));
    six.rows.push_back(cost_row("r2", 0.8, true, true, {90, 210}, {100, 300}, 0.7));
    six.rows.push_back(cost_row("r3", 0.5, false, true, {100, 200}, {100, 300}, 0.7));
    six.rows.push_back(cost_row("r4", std::nullopt, false, true, {80, 50}, {150, 400}, 0.7));
    six.rows.push_back(cost_row("r5", 0.7, true, true, {60, 100}, {100, 300}, 0.7));
    six.rows.push_back(cost_row("r6", 0.1, false, true, {10, 10}, {200, 500}, 0.7));

    // hand sum, written out term by term:
    //   kept rows charge the SLM alone, deferred rows add the scaled LLM cost
    const double hand_sum = (120.0 + 4.0 * 380.0)                          // r1 kept
                            + (90.0 + 4.0 * 210.0)                         // r2 kept
                            + (100.0 + 4.0 * 200.0) + (100.0 + 4.0 * 300.0) * ratio // r3 deferred
                            + (80.0 + 4.0 * 50.0) + (150.0 + 4.0 * 400.0) * ratio   // r4 deferred
                            + (60.0 + 4.0 * 100.0)                         // r5 kept (boundary)
                            + (10.0 + 4.0 * 10.0) + (200.0 + 4.0 * 500.0) * ratio;  // r6 deferred
    const auto six_report = aggregate(six);
    if (six_report.avg_cost != hand_sum / 6.0) {
        ok = false;
        detail = "six-row hand sum mismatch";
    }
    // sanity against the closed-form value: 4260 + 5250*(32/7) = 28260, /6 = 4710
    if (!near(six_report.avg_cost, 4710.0, 1e-9)) {
        ok = false;
        detail = "six-row closed form off";
    }

    // (b) a 1000-row log constructed to a reference operating point:
    // 35.5% deferral, Pass@1 77.9, Avg Cost 7978 against a standalone-LLM
    // cost near 10164 per question; the emitted saving must round to -21.5%.
    RunLog corea;
    corea.meta.policy.threshold = 0.796; // the standalone LLM's Pass@1 as threshold
    corea.meta.cost.slm_params = 7.0;
    corea.meta.cost.llm_params = 32.0;
    corea.meta.repeats = 1;
    int correct_total = 0;
    for (int i = 0; i < 1000; ++i) {
        const bool deferred = i < 355;
        bool slm_correct, llm_correct;
        if (deferred) {
            llm_correct = i < 134; // 134 of the deferred rows come back right
            slm_correct = false;
        } else {
            slm_correct = true; // all 645 kept rows are right
            llm_correct = true;
        }
        correct_total += deferred ? (llm_correct ? 1 : 0) : 1;
        corea.rows.push_back(cost_row("c" + std::to_string(i),
                                      deferred ? 0.5 : 0.9, slm_correct, llm_correct,
                                      {170, 1050}, {223, 500}, 0.796));
    }
    if (correct_total != 779) {
        ok = false;
        detail = "constructed correctness count off";
    }
    const auto corea_report = aggregate(corea);
    if (std::llround(corea_report.avg_cost) != 7978 || corea_report.llm_percent != 35.5 ||
        round1(100.0 * corea_report.pass1) != 77.9) {
        ok = false;
        detail = "constructed aggregate off: cost " +
                 std::to_string(corea_report.avg_cost) + ", llm% " +
                 std::to_string(corea_report.llm_percent);
    }
    const std::vector<double> own{0.796};
    const auto points = sweep(corea, own);
    if (round1(points[0].cost_delta_vs_llm_percent) != -21.5) {
        ok = false;
        detail = "saving " + std::to_string(points[0].cost_delta_vs_llm_percent) +
                 " does not round to -21.5";
    }
    report(4, "cost replay: exact six-row hand sum; constructed log saving -21.5%", ok, detail);
}

// ----------------------------------------------------------------------------
// 5. Threshold endpoints and LLM% monotonicity on record-both logs.
// ----------------------------------------------------------------------------

RunLog make_record_both_log(std::uint64_t seed, int questions, ConfidenceRule rule) {
    std::vector<DatasetRecord> dataset;
    for (int i = 0; i < questions; ++i) {
        const std::string q = "sweep question " + std::to_string(i);
        dataset.push_back({"s" + std::to_string(i), q, canonical_answer(q)});
    }
    BackendSpec slm_spec;
    slm_spec.kind = BackendKind::Scripted;
    slm_spec.model_name = "slm";
    slm_spec.seed = seed;
    slm_spec.profile = ScriptedProfile{};
    slm_spec.profile->confidence_rule = rule;
    slm_spec.profile->noise_sigma = 0.25;
    for (int i = 0; i < questions; ++i) {
        slm_spec.profile->accuracy_by_question[dataset[i].question] =
            (2 * i + 1) / (2.0 * questions);
    }
    BackendSpec llm_spec;
    llm_spec.kind = BackendKind::Scripted;
    llm_spec.model_name = "llm";
    llm_spec.seed = seed + 1;
    llm_spec.profile = ScriptedProfile{};
    llm_spec.profile->accuracy = 0.9;
    llm_spec.profile->confidence_rule = ConfidenceRule::OverconfidentConstant;

    ScriptedBackend slm(slm_spec), llm(llm_spec);
    RunPlan plan;
    plan.policy.threshold = 0.69;
    plan.repeats = 2;
    plan.concurrency = 4;
    plan.record_both = true;
    plan.seed = seed;
    return run_eval(dataset, slm, llm, nullptr, plan);
}

void criterion_5() {
    bool ok = true;
    std::string detail;
    int round = 0;
    for (const auto rule : {ConfidenceRule::PerfectlyCalibrated, ConfidenceRule::Noisy,
                            ConfidenceRule::OverconfidentConstant}) {
        const auto log = make_record_both_log(100 + round, 40, rule);
        ++round;

        std::vector<double> grid;
        for (int i = 0; i <= 11; ++i) grid.push_back(i * 0.1);
        const auto points = sweep(log, grid);
        const auto slm_alone = standalone_slm_aggregate(log);
        const auto llm_alone = standalone_llm_aggregate(log);

        if (points.front().report.pass1 != slm_alone.pass1 ||
            points.front().report.avg_cost != slm_alone.avg_cost ||
            points.front().report.llm_percent != 0.0) {
            ok = false;
            detail = "T=0 endpoint differs from the standalone SLM aggregate";
        }
        if (points.back().report.pass1 != llm_alone.pass1 ||
            points.back().report.avg_cost != llm_alone.avg_cost ||
            points.back().report.llm_percent != 100.0) {
            ok = false;
            detail = "T=1.1 endpoint differs from the standalone LLM aggregate";
        }
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i].report.llm_percent < points[i - 1].report.llm_percent) {
                ok = false;
                detail = "LLM% decreased along an ascending grid";
            }
        }
    }
    report(5, "sweep endpoints equal standalone aggregates; LLM% nondecreasing", ok, detail);
}

// ----------------------------------------------------------------------------
// 6. Routing exactness and byte-identical determinism.
// ----------------------------------------------------------------------------

void criterion_6() {
    bool ok = true;
    std::string detail;

    std::vector<DatasetRecord> dataset;
    std::vector<double> accuracy(200);
    for (int i = 0; i < 200; ++i) {
        const std::string q = "routing question " + std::to_string(i);
        dataset.push_back({"r" + std::to_string(i), q, canonical_answer(q)});
        accuracy[i] = (2 * i + 1) / 400.0; // 0.0025 .. 0.9975, never exactly 0.69
    }

    for (const std::uint64_t seed : {11ull, 222ull, 3333ull}) {
        BackendSpec slm_spec;
        slm_spec.kind = BackendKind::Scripted;
        slm_spec.model_name = "slm";
        slm_spec.seed = seed;
        slm_spec.profile = ScriptedProfile{};
        slm_spec.profile->confidence_rule = ConfidenceRule::PerfectlyCalibrated;
        for (int i = 0; i < 200; ++i) {
            slm_spec.profile->accuracy_by_question[dataset[i].question] = accuracy[i];
        }
        BackendSpec llm_spec = slm_spec;
        llm_spec.model_name = "llm";
        llm_spec.profile = ScriptedProfile{};
        llm_spec.profile->accuracy = 0.95;
        llm_spec.profile->confidence_rule = ConfidenceRule::OverconfidentConstant;

        RunPlan plan;
        plan.policy.threshold = 0.69;
        plan.record_both = false;
        plan.concurrency = 4;
        plan.seed = seed;

        ScriptedBackend slm_a(slm_spec), llm_a(llm_spec);
        const auto log = run_eval(dataset, slm_a, llm_a, nullptr, plan);
        for (int i = 0; i < 200; ++i) {
            const bool expected_defer = accuracy[i] < 0.69;
            if (log.rows[i].decision.deferred != expected_defer) {
                ok = false;
                detail = "deferred set mismatch at question " + std::to_string(i) + " (seed " +
                         std::to_string(seed) + ")";
            }
        }

        ScriptedBackend slm_b(slm_spec), llm_b(llm_spec);
        const auto again = run_eval(dataset, slm_b, llm_b, nullptr, plan);
        std::stringstream first, second;
        write_run_log(log, first);
        write_run_log(again, second);
        if (first.str() != second.str()) {
            ok = false;
            detail = "repeated run with seed " + std::to_string(seed) + " is not byte-identical";
        }
    }
    report(6, "deferred set equals {i : a_i < 0.69} across 3 seeds; logs byte-identical", ok,
           detail);
}

// ----------------------------------------------------------------------------
// 7. Parser fixtures.
// ----------------------------------------------------------------------------

void criterion_7() {
    bool ok = true;
    std::string detail;
    const auto check = [&](const std::string& name, std::optional<std::string> answer,
                           std::optional<double> confidence) {
        const auto parsed = parse({read_fixture(name), {}, std::nullopt});
        if (parsed.answer != answer || parsed.confidence != confidence) {
            ok = false;
            detail = name + " parsed to (" + parsed.answer.value_or("<none>") + ", " +
                     (parsed.confidence ? std::to_string(*parsed.confidence) : "<none>") + ")";
        }
    };
    check("slm_base.txt", "12", std::nullopt); // no-macro case
    check("slm_rlvr.txt", "9", 1.0);
    check("slm_calibrated.txt", "9", 0.8);

    // confidence output ratio over the three samples: two carry the macro
    std::vector<ParsedResponse> parsed;
    for (const char* name : {"slm_base.txt", "slm_rlvr.txt", "slm_calibrated.txt"}) {
        parsed.push_back(parse({read_fixture(name), {}, std::nullopt}));
    }
    if (!near(confidence_output_ratio(parsed), 2.0 / 3.0, 1e-12)) {
        ok = false;
        detail = "confidence output ratio over the fixtures is not 2/3";
    }
    report(7, "reference samples parse to (12, none), (9, 1.0), (9, 0.8)", ok, detail);
}

// ----------------------------------------------------------------------------
// 8. End-to-end: calibration enables useful deferral.
// ----------------------------------------------------------------------------

void criterion_8() {
    bool ok = true;
    std::string detail;
    const int n = 2000;

    std::vector<DatasetRecord> dataset;
    for (int i = 0; i < n; ++i) {
        const std::string q = "e2e question " + std::to_string(i);
        dataset.push_back({"e" + std::to_string(i), q, canonical_answer(q)});
    }

    BackendSpec llm_spec;
    llm_spec.kind = BackendKind::Scripted;
    llm_spec.model_name = "llm";
    llm_spec.seed = 8;
    llm_spec.profile = ScriptedProfile{};
    llm_spec.profile->accuracy = 0.9;
    llm_spec.profile->confidence_rule = ConfidenceRule::OverconfidentConstant;

    // overconfident-constant SLM: accuracy 0.5, confidence pinned at 1.0
    BackendSpec over_spec;
    over_spec.kind = BackendKind::Scripted;
    over_spec.model_name = "slm-over";
    over_spec.seed = 4242;
    over_spec.profile = ScriptedProfile{};
    over_spec.profile->accuracy = 0.5;
    over_spec.profile->confidence_rule = ConfidenceRule::OverconfidentConstant;

    double overconfident_pass1_at_069 = 0.0;
    for (const double t : {0.0, 0.5, 0.69, 1.0}) {
        ScriptedBackend slm(over_spec), llm(llm_spec);
        RunPlan plan;
        plan.policy.threshold = t;
        plan.record_both = false;
        plan.concurrency = 4;
        const auto report_t = aggregate(run_eval(dataset, slm, llm, nullptr, plan));
        if (report_t.llm_percent != 0.0) {
            ok = false;
            detail = "overconfident profile deferred at T=" + std::to_string(t);
        }
        if (!near(report_t.pass1, 0.5, 0.03)) {
            ok = false;
            detail = "overconfident pass1 " + std::to_string(report_t.pass1) + " at T=" +
                     std::to_string(t);
        }
        if (t == 0.69) overconfident_pass1_at_069 = report_t.pass1;
    }

    // perfectly calibrated SLM at the same overall accuracy 0.5: half the
    // questions easy (0.9), half hard (0.1), so T=0.69 defers exactly half
    BackendSpec cal_spec = over_spec;
    cal_spec.model_name = "slm-cal";
    cal_spec.profile = ScriptedProfile{};
    cal_spec.profile->confidence_rule = ConfidenceRule::PerfectlyCalibrated;
    for (int i = 0; i < n; ++i) {
        cal_spec.profile->accuracy_by_question[dataset[i].question] = i % 2 == 0 ? 0.9 : 0.1;
    }

    ScriptedBackend slm(cal_spec), llm(llm_spec);
    RunPlan plan;
    plan.policy.threshold = 0.69;
    plan.record_both = false;
    plan.concurrency = 4;
    const auto calibrated = aggregate(run_eval(dataset, slm, llm, nullptr, plan));

    if (!near(calibrated.llm_percent, 50.0, 3.0)) {
        ok = false;
        detail = "calibrated LLM% " + std::to_string(calibrated.llm_percent);
    }
    if (!(calibrated.pass1 > overconfident_pass1_at_069)) {
        ok = false;
        detail = "calibrated pass1 " + std::to_string(calibrated.pass1) +
                 " not above overconfident " + std::to_string(overconfident_pass1_at_069);
    }
    // quantitative gap check: expected system pass1 is (0.9 + 0.9)/2
    if (!near(calibrated.pass1, 0.9, 0.03)) {
        ok = false;
        detail = "calibrated pass1 " + std::to_string(calibrated.pass1) + " not near 0.9";
    }
    report(8, "calibration enables useful deferral (LLM%~50, higher Pass@1, tol 3%)", ok, detail);
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (g_failures == 0) {
        std::printf("acceptance: all 8 criteria passed\n");
    } else {
        std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
