// SPDX-License-Identifier: Apache-2.0
//
// harness.hpp
//
// Dataset ingestion, repeated-run orchestration, run-log persistence,
// aggregation, and offline threshold sweeps. A single record-both pass —
// where both solver stages run for every question while the decision stays
// the policy's — yields a log from which any threshold's (Pass@1, Avg Cost,
// LLM%) triple replays without another model call. Faults never abort a
// run: faulted rows count as incorrect with zero extra cost and the fault
// count is reported, so the denominator stays the full dataset.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cascade/calibration.hpp"
#include "cascade/engine.hpp"
#include "cascade/rewards.hpp"
#include "cascade/runlog.hpp"

namespace cascade {

// ============================================================================
// Datasets
// ============================================================================

struct DatasetRecord {
    std::string id;
    std::string question;
    std::string gold;
};

// Strict JSONL loader: every line must carry nonempty {id, question, answer};
// duplicate ids and malformed lines fault with their line number.
inline std::vector<DatasetRecord> load_dataset(std::istream& in, const std::string& name = "dataset") {
    std::vector<DatasetRecord> records;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(name + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("id") || !j.contains("question") || !j.contains("answer")) {
            throw std::runtime_error(name + " line " + std::to_string(line_no) +
                                     ": needs {id, question, answer}");
        }
        DatasetRecord r{j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                        j.at("answer").get<std::string>()};
        if (r.id.empty() || r.question.empty() || r.gold.empty()) {
            throw std::runtime_error(name + " line " + std::to_string(line_no) +
                                     ": empty field");
        }
        if (!seen.insert(r.id).second) {
            throw std::runtime_error(name + " line " + std::to_string(line_no) +
                                     ": duplicate id '" + r.id + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open " + path);
    return load_dataset(in, path);
}

// ============================================================================
// Run orchestration
// ============================================================================

struct RunPlan {
    CascadePolicy policy;
    CostConfig cost;
    int repeats = 1;
    std::uint64_t seed = 0;
    int concurrency = 1;
    bool record_both = true;
    bool llm_instruction = true;
    bool language_check = true;
    AnswerVerifier verifier = default_verifier;
    ordered_json backends_meta = ordered_json::object();

    RunMeta meta() const {
        RunMeta m;
        m.policy = policy;
        m.cost = cost;
        m.repeats = repeats;
        m.seed = seed;
        m.concurrency = concurrency;
        m.record_both = record_both;
        m.llm_instruction = llm_instruction;
        m.language_check = language_check;
        m.backends = backends_meta;
        return m;
    }
};

namespace detail {

inline StageLogRecord stage_log_record(const StageRecord& stage, const std::string& gold,
                                       const AnswerVerifier& verifier) {
    StageLogRecord r;
    r.text = stage.raw.text;
    r.usage = stage.raw.usage;
    r.token_probs = stage.raw.token_probs;
    r.answer = stage.parsed.answer;
    r.confidence = stage.parsed.confidence;
    r.has_boxed = stage.parsed.has_boxed;
    r.has_confidence_macro = stage.parsed.has_confidence_macro;
    r.language_consistent = stage.parsed.language_consistent;
    if (!gold.empty()) r.correct = correctness(stage.parsed.answer, gold, verifier) == 1;
    return r;
}

inline RunLogRow row_from_decision(const CascadeDecision& decision, const DatasetRecord& record,
                                   int repeat, const AnswerVerifier& verifier,
                                   std::optional<std::string> fault) {
    RunLogRow row;
    row.question_id = record.id;
    row.repeat_index = repeat;
    row.question = record.question;
    row.gold = record.gold;
    if (decision.slm) row.slm = stage_log_record(*decision.slm, record.gold, verifier);
    if (decision.llm) row.llm = stage_log_record(*decision.llm, record.gold, verifier);
    if (decision.router) {
        RouterLogRecord rr;
        rr.text = decision.router->raw.text;
        rr.usage = decision.router->raw.usage;
        rr.probability = decision.router->probability;
        row.router = rr;
    }
    row.decision.confidence_used = decision.confidence_used;
    row.decision.deferred = decision.deferred;
    row.decision.final_answer = decision.final_answer;
    row.decision.fault = std::move(fault);
    row.costs = decision.costs;
    if (row.decision.fault) {
        row.decision.final_correct = false;
    } else if (!record.gold.empty()) {
        row.decision.final_correct =
            correctness(decision.final_answer, record.gold, verifier) == 1;
    }
    return row;
}

// Charge profile for one row given a decision. Missing records fault unless
// the row itself recorded a stage fault (then the stage simply isn't
// charged: zero extra cost).
inline CostBreakdown charge_row(const RunLogRow& row, bool deferred, bool llm_only,
                                RoutingMode mode, const CostConfig& cost) {
    const bool tolerate = row.decision.fault.has_value();
    const auto need_stage = [&](const char* what) -> void {
        if (!tolerate) {
            throw std::runtime_error(std::string("cost replay: row '") + row.question_id +
                                     "' lacks the " + what + " record it would be charged for");
        }
    };
    double s = 0.0, l = 0.0, r = 0.0;
    if (llm_only) {
        if (row.llm) {
            const auto u = row.llm->stage_usage();
            l = llm_cost(u.prompt_tokens, u.completion_tokens, cost);
        } else {
            need_stage("llm");
        }
        return make_cost_breakdown(0.0, l, 0.0);
    }
    if (mode == RoutingMode::Routed) {
        if (row.router) {
            const auto u = row.router->stage_usage();
            r = router_cost(u.prompt_tokens, u.completion_tokens, cost);
        } else {
            need_stage("router");
        }
    }
    const bool charge_slm = mode == RoutingMode::Direct || !deferred;
    if (charge_slm) {
        if (row.slm) {
            const auto u = row.slm->stage_usage();
            s = slm_cost(u.prompt_tokens, u.completion_tokens, cost);
        } else {
            need_stage("slm");
        }
    }
    if (deferred) {
        if (row.llm) {
            const auto u = row.llm->stage_usage();
            l = llm_cost(u.prompt_tokens, u.completion_tokens, cost);
        } else {
            need_stage("llm");
        }
    }
    return make_cost_breakdown(s, l, r);
}

} // namespace detail

// R independent passes over the dataset, decisions recorded row by row in
// (repeat, dataset order). Rows execute concurrently up to the plan's bound;
// results are independent of completion order.
inline RunLog run_eval(std::span<const DatasetRecord> dataset, Backend& slm, Backend& llm,
                       Backend* router, const RunPlan& plan) {
    if (plan.repeats < 1) throw std::invalid_argument("run_eval: repeats must be >= 1");
    if (plan.concurrency < 1) throw std::invalid_argument("run_eval: concurrency must be >= 1");
    plan.policy.validate();
    plan.cost.validate();

    RunLog log;
    log.meta = plan.meta();
    const std::size_t questions = dataset.size();
    const std::size_t total = questions * static_cast<std::size_t>(plan.repeats);
    log.rows.resize(total);

    EngineOptions options;
    options.record_both = plan.record_both;
    options.llm_instruction = plan.llm_instruction;
    options.language_check = plan.language_check;

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load()) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= total) break;
            const int repeat = static_cast<int>(idx / questions);
            const auto& record = dataset[idx % questions];
            CallContext ctx;
            ctx.question_id = record.id;
            ctx.repeat_index = repeat;
            ctx.run_seed = plan.seed;
            try {
                try {
                    const auto decision = answer(record.id, record.question, slm, llm, router,
                                                 plan.policy, plan.cost, options, ctx);
                    log.rows[idx] = detail::row_from_decision(decision, record, repeat,
                                                              plan.verifier, std::nullopt);
                } catch (const CascadeFault& fault) {
                    auto row = detail::row_from_decision(fault.partial(), record, repeat,
                                                         plan.verifier, std::string(fault.what()));
                    // Re-derive the verdict the policy implies for whatever
                    // confidence the pipeline got to, then charge only the
                    // stages that completed.
                    row.decision.deferred =
                        plan.policy.threshold > 1.0 ||
                        decide(row.decision.confidence_used, plan.policy.threshold) ==
                            Verdict::Defer;
                    row.decision.final_answer = std::nullopt;
                    row.costs = detail::charge_row(row, row.decision.deferred,
                                                   plan.policy.threshold > 1.0,
                                                   plan.policy.routing_mode(), plan.cost);
                    log.rows[idx] = std::move(row);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(plan.concurrency), std::max<std::size_t>(total, 1));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return log;
}

// ============================================================================
// Aggregation
// ============================================================================

struct AggregateReport {
    std::size_t rows = 0;
    std::size_t questions = 0;
    int repeats = 0;
    double pass1 = 0.0;       // fraction
    double avg_cost = 0.0;    // cost units per question
    double llm_percent = 0.0; // 0..100
    std::size_t fault_count = 0;
    std::vector<double> per_repeat_pass1;
    std::vector<double> per_repeat_avg_cost;
    std::vector<double> per_repeat_llm_percent;
    std::optional<CalibrationReport> calibration; // SLM-only records
};

// Calibration inputs: the SLM's own (confidence, correctness) pairs.
inline std::vector<PredictionRecord> slm_prediction_records(const RunLog& log) {
    std::vector<PredictionRecord> records;
    for (const auto& row : log.rows) {
        if (!row.slm) continue;
        records.push_back({row.slm->confidence, row.slm->correct.value_or(false)});
    }
    return records;
}

namespace detail {

struct RowVerdict {
    bool deferred = false;
    bool llm_only = false;
    // Standalone-SLM accounting: charge the SLM record alone even when the
    // log was recorded under a routed policy.
    bool slm_only = false;
};

template <typename DecideFn>
AggregateReport aggregate_rows(const RunLog& log, const CostConfig& cost, DecideFn&& verdict_for,
                               std::size_t calibration_bins = 10) {
    if (log.rows.empty()) throw std::invalid_argument("aggregate: empty log");
    const RoutingMode mode = log.meta.policy.routing_mode();
    const int repeats = std::max(log.meta.repeats, 1);

    AggregateReport report;
    report.rows = log.rows.size();
    report.repeats = repeats;
    std::set<std::string> ids;

    std::vector<std::size_t> repeat_rows(repeats, 0), repeat_correct(repeats, 0),
        repeat_llm(repeats, 0);
    std::vector<double> repeat_cost(repeats, 0.0);
    std::size_t correct = 0, llm_charged = 0;
    double cost_sum = 0.0;

    for (const auto& row : log.rows) {
        ids.insert(row.question_id);
        const RowVerdict v = verdict_for(row);
        const bool row_correct =
            row.decision.fault
                ? false
                : (v.llm_only || v.deferred
                       ? (row.llm && row.llm->correct ? *row.llm->correct : false)
                       : (row.slm && row.slm->correct ? *row.slm->correct : false));
        const auto charged =
            charge_row(row, v.deferred, v.llm_only, v.slm_only ? RoutingMode::Direct : mode, cost);
        const bool llm_used = (v.llm_only || v.deferred) && row.llm.has_value();

        correct += row_correct ? 1 : 0;
        cost_sum += charged.total;
        llm_charged += llm_used ? 1 : 0;
        report.fault_count += row.decision.fault ? 1 : 0;

        const int r = std::clamp(row.repeat_index, 0, repeats - 1);
        ++repeat_rows[r];
        repeat_correct[r] += row_correct ? 1 : 0;
        repeat_cost[r] += charged.total;
        repeat_llm[r] += llm_used ? 1 : 0;
    }

    report.questions = ids.size();
    const double n = static_cast<double>(report.rows);
    report.pass1 = static_cast<double>(correct) / n;
    report.avg_cost = cost_sum / n;
    report.llm_percent = 100.0 * static_cast<double>(llm_charged) / n;
    for (int r = 0; r < repeats; ++r) {
        const double rn = static_cast<double>(std::max<std::size_t>(repeat_rows[r], 1));
        report.per_repeat_pass1.push_back(static_cast<double>(repeat_correct[r]) / rn);
        report.per_repeat_avg_cost.push_back(repeat_cost[r] / rn);
        report.per_repeat_llm_percent.push_back(100.0 * static_cast<double>(repeat_llm[r]) / rn);
    }

    const auto records = slm_prediction_records(log);
    if (!records.empty()) report.calibration = calibration_report(records, calibration_bins);
    return report;
}

} // namespace detail

// Aggregate with each row's recorded decision; the cost arithmetic is
// replayed from the stored token usages rather than trusted.
inline AggregateReport aggregate(const RunLog& log, const CostConfig& cost) {
    const bool llm_only = log.meta.policy.threshold > 1.0;
    return detail::aggregate_rows(log, cost, [&](const RunLogRow& row) {
        return detail::RowVerdict{row.decision.deferred, llm_only};
    });
}

inline AggregateReport aggregate(const RunLog& log) { return aggregate(log, log.meta.cost); }

// Aggregates of the two degenerate deployments recorded in the same log.
inline AggregateReport standalone_slm_aggregate(const RunLog& log) {
    return detail::aggregate_rows(log, log.meta.cost, [](const RunLogRow&) {
        return detail::RowVerdict{false, false, true};
    });
}

inline AggregateReport standalone_llm_aggregate(const RunLog& log) {
    return detail::aggregate_rows(log, log.meta.cost, [](const RunLogRow&) {
        return detail::RowVerdict{true, true, false};
    });
}

// ============================================================================
// Threshold sweeps
// ============================================================================

struct SweepPoint {
    double threshold = 0.0;
    AggregateReport report;
    // Percent change versus the standalone-LLM cost of the same log;
    // negative means cheaper than running the LLM alone.
    double cost_delta_vs_llm_percent = 0.0;
};

// Confidence a sweep re-decides a row with: the decision's own value when
// the run consulted one, otherwise derived from the recorded stage exactly
// as the engine would have (a row recorded above the confidence ceiling
// never consulted anything, but record-both kept the material).
inline std::optional<double> stored_confidence(const RunLogRow& row, ConfidenceSource source) {
    if (row.decision.confidence_used) return row.decision.confidence_used;
    switch (source) {
        case ConfidenceSource::Verbalized:
            return row.slm ? row.slm->confidence : std::nullopt;
        case ConfidenceSource::AvgTokenProb:
            if (row.slm && row.slm->token_probs && !row.slm->token_probs->empty()) {
                return avg_prob_confidence(*row.slm->token_probs);
            }
            return std::nullopt;
        case ConfidenceSource::ExternalRouter:
            if (row.router) return row.router->probability;
            return std::nullopt;
    }
    return std::nullopt;
}

// Re-derives every row's decision from the stored confidence at each
// threshold and recomputes the aggregates without any backend call. Requires
// a record-both log: a clean row missing the LLM record it would be charged
// for is a fault. Thresholds above 1.0 reproduce the standalone-LLM
// deployment (no confidence can reach them, so the SLM is never consulted).
inline std::vector<SweepPoint> sweep(const RunLog& log, std::span<const double> thresholds) {
    const double llm_avg = standalone_llm_aggregate(log).avg_cost;
    std::vector<SweepPoint> points;
    points.reserve(thresholds.size());
    for (const double t : thresholds) {
        if (!(t >= 0.0 && t <= 1.1)) {
            throw std::invalid_argument("sweep: threshold must be in [0, 1.1]");
        }
        const bool llm_only = t > 1.0;
        SweepPoint point;
        point.threshold = t;
        point.report = detail::aggregate_rows(log, log.meta.cost, [&](const RunLogRow& row) {
            const bool deferred =
                llm_only ||
                decide(stored_confidence(row, log.meta.policy.source), t) == Verdict::Defer;
            return detail::RowVerdict{deferred, llm_only};
        });
        point.cost_delta_vs_llm_percent =
            llm_avg > 0.0 ? (point.report.avg_cost / llm_avg - 1.0) * 100.0 : 0.0;
        points.push_back(std::move(point));
    }
    return points;
}

// ============================================================================
// Replay
// ============================================================================

// Re-runs the full pipeline against replay backends built from the log
// itself; with the recorded configuration this reproduces every row.
inline RunLog replay_run(const RunLog& log) {
    std::vector<DatasetRecord> dataset;
    std::set<std::string> seen;
    for (const auto& row : log.rows) {
        if (seen.insert(row.question_id).second) {
            dataset.push_back({row.question_id, row.question, row.gold});
        }
    }
    BackendSpec spec;
    spec.kind = BackendKind::Replay;
    spec.model_name = "replay";
    ReplayBackend backend(spec, log);

    RunPlan plan;
    plan.policy = log.meta.policy;
    plan.cost = log.meta.cost;
    plan.repeats = log.meta.repeats;
    plan.seed = log.meta.seed;
    plan.concurrency = log.meta.concurrency;
    plan.record_both = log.meta.record_both;
    plan.llm_instruction = log.meta.llm_instruction;
    plan.language_check = log.meta.language_check;
    plan.backends_meta = log.meta.backends;

    Backend* router =
        log.meta.policy.source == ConfidenceSource::ExternalRouter ? &backend : nullptr;
    return run_eval(dataset, backend, backend, router, plan);
}

// ============================================================================
// Report emission
// ============================================================================

namespace detail {

// Presentation rounding: percents to one decimal, costs to whole units.
inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

inline ordered_json report_json(const AggregateReport& r) {
    ordered_json j;
    j["pass1_percent"] = round1(100.0 * r.pass1);
    j["avg_cost"] = static_cast<std::int64_t>(std::llround(r.avg_cost));
    j["llm_percent"] = round1(r.llm_percent);
    j["rows"] = r.rows;
    j["questions"] = r.questions;
    j["repeats"] = r.repeats;
    j["fault_count"] = r.fault_count;
    ordered_json per;
    per["pass1_percent"] = ordered_json::array();
    per["avg_cost"] = ordered_json::array();
    per["llm_percent"] = ordered_json::array();
    for (double v : r.per_repeat_pass1) per["pass1_percent"].push_back(round1(100.0 * v));
    for (double v : r.per_repeat_avg_cost) {
        per["avg_cost"].push_back(static_cast<std::int64_t>(std::llround(v)));
    }
    for (double v : r.per_repeat_llm_percent) per["llm_percent"].push_back(round1(v));
    j["per_repeat"] = per;
    if (r.calibration) {
        const auto& c = *r.calibration;
        ordered_json cj;
        cj["pass1"] = c.pass1;
        cj["ece"] = opt_num(c.ece);
        cj["auroc"] = opt_num(c.auroc);
        cj["confidence_output_ratio"] = c.confidence_output_ratio;
        ordered_json bins = ordered_json::array();
        for (const auto& b : c.bins) {
            ordered_json bj;
            bj["count"] = b.count;
            bj["mean_confidence"] = b.mean_confidence;
            bj["accuracy"] = b.accuracy;
            bins.push_back(bj);
        }
        cj["bins"] = bins;
        j["calibration"] = cj;
    } else {
        j["calibration"] = nullptr;
    }
    return j;
}

inline std::string percent1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

} // namespace detail

inline constexpr std::string_view kAggregateCsvHeader =
    "repeat,pass1_percent,avg_cost,llm_percent";
inline constexpr std::string_view kSweepCsvHeader =
    "threshold,pass1_percent,avg_cost,llm_percent,cost_delta_vs_llm_percent";
inline constexpr std::string_view kReliabilityCsvHeader =
    "bin_low,bin_high,count,mean_confidence,accuracy";

enum class ReportFormat { Json, Csv };

inline void emit_report(const AggregateReport& report, ReportFormat format, std::ostream& out) {
    if (format == ReportFormat::Json) {
        out << detail::report_json(report).dump(2) << "\n";
        return;
    }
    out << kAggregateCsvHeader << "\n";
    out << "all," << detail::percent1(100.0 * report.pass1) << ","
        << std::llround(report.avg_cost) << "," << detail::percent1(report.llm_percent) << "\n";
    for (int r = 0; r < report.repeats; ++r) {
        out << r << "," << detail::percent1(100.0 * report.per_repeat_pass1[r]) << ","
            << std::llround(report.per_repeat_avg_cost[r]) << ","
            << detail::percent1(report.per_repeat_llm_percent[r]) << "\n";
    }
}

inline void emit_report(const AggregateReport& report, ReportFormat format,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    emit_report(report, format, out);
}

inline void emit_sweep(std::span<const SweepPoint> points, ReportFormat format,
                       std::ostream& out) {
    if (format == ReportFormat::Json) {
        ordered_json arr = ordered_json::array();
        for (const auto& p : points) {
            ordered_json j;
            j["threshold"] = p.threshold;
            j["pass1_percent"] = detail::round1(100.0 * p.report.pass1);
            j["avg_cost"] = static_cast<std::int64_t>(std::llround(p.report.avg_cost));
            j["llm_percent"] = detail::round1(p.report.llm_percent);
            j["cost_delta_vs_llm_percent"] = detail::round1(p.cost_delta_vs_llm_percent);
            arr.push_back(j);
        }
        out << arr.dump(2) << "\n";
        return;
    }
    out << kSweepCsvHeader << "\n";
    for (const auto& p : points) {
        out << detail::format_double(p.threshold) << ","
            << detail::percent1(100.0 * p.report.pass1) << ","
            << std::llround(p.report.avg_cost) << "," << detail::percent1(p.report.llm_percent)
            << "," << detail::percent1(p.cost_delta_vs_llm_percent) << "\n";
    }
}

inline void emit_sweep(std::span<const SweepPoint> points, ReportFormat format,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("sweep report: cannot write " + path);
    emit_sweep(points, format, out);
}

inline void emit_reliability_csv(const CalibrationReport& report, std::ostream& out) {
    out << kReliabilityCsvHeader << "\n";
    const std::size_t m = report.bins.size();
    for (std::size_t i = 0; i < m; ++i) {
        const double lo = static_cast<double>(i) / static_cast<double>(m);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(m);
        out << detail::format_double(lo) << "," << detail::format_double(hi) << ","
            << report.bins[i].count << "," << detail::format_double(report.bins[i].mean_confidence)
            << "," << detail::format_double(report.bins[i].accuracy) << "\n";
    }
}

// ============================================================================
// Rollout-group JSONL (the trainer integration boundary)
// ============================================================================

// One group per line: {question, gold, responses:[{text} | pre-parsed]}.
// Raw texts run through the parser with the solver prompt for the language
// check; pre-parsed entries carry their own fields.
inline std::vector<RolloutGroup> load_rollout_groups(std::istream& in,
                                                     const std::string& name = "groups") {
    std::vector<RolloutGroup> groups;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(name + " line " + std::to_string(line_no) + ": " + e.what());
        }
        RolloutGroup group;
        group.question = j.at("question").get<std::string>();
        group.gold_answer = j.at("gold").get<std::string>();
        for (const auto& rj : j.at("responses")) {
            if (rj.contains("text")) {
                RawResponse raw;
                raw.text = rj.at("text").get<std::string>();
                ParseOptions opts;
                opts.prompt = build_prompt(group.question, PromptRole::Solver);
                group.responses.push_back(parse(raw, opts));
            } else {
                ParsedResponse p;
                p.answer = detail::get_opt<std::string>(rj, "answer");
                p.confidence = detail::get_opt<double>(rj, "confidence");
                p.has_boxed = rj.contains("has_boxed") ? rj.at("has_boxed").get<bool>()
                                                       : p.answer.has_value();
                p.has_confidence_macro = rj.contains("has_confidence_macro")
                                             ? rj.at("has_confidence_macro").get<bool>()
                                             : p.confidence.has_value();
                p.language_consistent = rj.contains("language_consistent")
                                            ? rj.at("language_consistent").get<bool>()
                                            : true;
                group.responses.push_back(std::move(p));
            }
        }
        group.validate();
        groups.push_back(std::move(group));
    }
    return groups;
}

inline std::vector<RolloutGroup> load_rollout_groups(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("groups: cannot open " + path);
    return load_rollout_groups(in, path);
}

} // namespace cascade
