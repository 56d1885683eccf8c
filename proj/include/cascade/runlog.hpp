// SPDX-License-Identifier: Apache-2.0
//
// runlog.hpp
//
// Append-only per-question-per-repeat run log: one JSONL row per decision,
// preceded by a schema-versioned header line that embeds the run
// configuration (never credentials). Rows carry enough raw material — stage
// texts, token usage, token probabilities, the question and gold answer —
// that threshold sweeps, aggregation, and full replays run offline from the
// file alone, byte-identically.

#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/cost_model.hpp"
#include "cascade/policy.hpp"
#include "cascade/response_parser.hpp"

namespace cascade {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kRunLogSchema = "cascade-runlog/1";

// ============================================================================
// Row records
// ============================================================================

struct StageLogRecord {
    std::string text;
    TokenUsage usage;
    std::optional<std::vector<double>> token_probs;
    std::optional<std::string> answer;
    std::optional<double> confidence;
    bool has_boxed = false;
    bool has_confidence_macro = false;
    bool language_consistent = false;
    std::optional<bool> correct; // absent when no gold answer was available

    StageUsage stage_usage() const {
        return {usage.prompt_tokens, usage.completion_tokens};
    }
};

struct RouterLogRecord {
    std::string text;
    TokenUsage usage;
    double probability = 0.0;

    StageUsage stage_usage() const {
        return {usage.prompt_tokens, usage.completion_tokens};
    }
};

struct DecisionLog {
    std::optional<double> confidence_used;
    bool deferred = false;
    std::optional<std::string> final_answer;
    std::optional<bool> final_correct;
    std::optional<std::string> fault; // "<stage>: <message>" when a stage failed
};

struct RunLogRow {
    std::string question_id;
    int repeat_index = 0;
    std::string question;
    std::string gold;
    std::optional<StageLogRecord> slm;
    std::optional<StageLogRecord> llm;
    std::optional<RouterLogRecord> router;
    DecisionLog decision;
    CostBreakdown costs;
};

// ============================================================================
// Run metadata (header line)
// ============================================================================

struct RunMeta {
    CascadePolicy policy;
    CostConfig cost;
    int repeats = 1;
    std::uint64_t seed = 0;
    int concurrency = 1;
    bool record_both = true;
    bool llm_instruction = true;  // deferred LLM prompt reuses the solver suffix
    bool language_check = true;
    ordered_json backends = ordered_json::object(); // provenance only
};

struct RunLog {
    RunMeta meta;
    std::vector<RunLogRow> rows;
};

// ============================================================================
// JSON serialization
// ============================================================================

namespace detail {

inline ordered_json opt_str(const std::optional<std::string>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}
inline ordered_json opt_num(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}
inline ordered_json opt_flag(const std::optional<bool>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

} // namespace detail

inline ordered_json to_json(const StageLogRecord& r) {
    ordered_json j;
    j["text"] = r.text;
    j["prompt_tokens"] = r.usage.prompt_tokens;
    j["completion_tokens"] = r.usage.completion_tokens;
    j["usage_estimated"] = r.usage.estimated;
    if (r.token_probs) j["token_probs"] = *r.token_probs;
    j["answer"] = detail::opt_str(r.answer);
    j["confidence"] = detail::opt_num(r.confidence);
    j["has_boxed"] = r.has_boxed;
    j["has_confidence_macro"] = r.has_confidence_macro;
    j["language_consistent"] = r.language_consistent;
    j["correct"] = detail::opt_flag(r.correct);
    return j;
}

inline StageLogRecord stage_record_from_json(const ordered_json& j) {
    StageLogRecord r;
    r.text = j.at("text").get<std::string>();
    r.usage.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    r.usage.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    r.usage.estimated = j.at("usage_estimated").get<bool>();
    if (j.contains("token_probs") && !j.at("token_probs").is_null()) {
        r.token_probs = j.at("token_probs").get<std::vector<double>>();
    }
    r.answer = detail::get_opt<std::string>(j, "answer");
    r.confidence = detail::get_opt<double>(j, "confidence");
    r.has_boxed = j.at("has_boxed").get<bool>();
    r.has_confidence_macro = j.at("has_confidence_macro").get<bool>();
    r.language_consistent = j.at("language_consistent").get<bool>();
    r.correct = detail::get_opt<bool>(j, "correct");
    return r;
}

inline ordered_json to_json(const RouterLogRecord& r) {
    ordered_json j;
    j["text"] = r.text;
    j["prompt_tokens"] = r.usage.prompt_tokens;
    j["completion_tokens"] = r.usage.completion_tokens;
    j["usage_estimated"] = r.usage.estimated;
    j["probability"] = r.probability;
    return j;
}

inline RouterLogRecord router_record_from_json(const ordered_json& j) {
    RouterLogRecord r;
    r.text = j.at("text").get<std::string>();
    r.usage.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    r.usage.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    r.usage.estimated = j.at("usage_estimated").get<bool>();
    r.probability = j.at("probability").get<double>();
    return r;
}

inline ordered_json to_json(const RunLogRow& row) {
    ordered_json j;
    j["question_id"] = row.question_id;
    j["repeat_index"] = row.repeat_index;
    j["question"] = row.question;
    j["gold"] = row.gold;
    j["slm"] = row.slm ? to_json(*row.slm) : ordered_json(nullptr);
    j["llm"] = row.llm ? to_json(*row.llm) : ordered_json(nullptr);
    j["router"] = row.router ? to_json(*row.router) : ordered_json(nullptr);
    ordered_json d;
    d["confidence_used"] = detail::opt_num(row.decision.confidence_used);
    d["deferred"] = row.decision.deferred;
    d["final_answer"] = detail::opt_str(row.decision.final_answer);
    d["final_correct"] = detail::opt_flag(row.decision.final_correct);
    d["fault"] = detail::opt_str(row.decision.fault);
    j["decision"] = d;
    ordered_json c;
    c["slm"] = row.costs.slm_cost;
    c["llm"] = row.costs.llm_cost;
    c["router"] = row.costs.router_cost;
    c["total"] = row.costs.total;
    j["costs"] = c;
    return j;
}

inline RunLogRow row_from_json(const ordered_json& j) {
    RunLogRow row;
    row.question_id = j.at("question_id").get<std::string>();
    row.repeat_index = j.at("repeat_index").get<int>();
    row.question = j.at("question").get<std::string>();
    row.gold = j.at("gold").get<std::string>();
    if (!j.at("slm").is_null()) row.slm = stage_record_from_json(j.at("slm"));
    if (!j.at("llm").is_null()) row.llm = stage_record_from_json(j.at("llm"));
    if (!j.at("router").is_null()) row.router = router_record_from_json(j.at("router"));
    const auto& d = j.at("decision");
    row.decision.confidence_used = detail::get_opt<double>(d, "confidence_used");
    row.decision.deferred = d.at("deferred").get<bool>();
    row.decision.final_answer = detail::get_opt<std::string>(d, "final_answer");
    row.decision.final_correct = detail::get_opt<bool>(d, "final_correct");
    row.decision.fault = detail::get_opt<std::string>(d, "fault");
    const auto& c = j.at("costs");
    row.costs.slm_cost = c.at("slm").get<double>();
    row.costs.llm_cost = c.at("llm").get<double>();
    row.costs.router_cost = c.at("router").get<double>();
    row.costs.total = c.at("total").get<double>();
    return row;
}

inline ordered_json to_json(const RunMeta& meta) {
    ordered_json j;
    j["schema"] = std::string(kRunLogSchema);
    ordered_json p;
    p["threshold"] = meta.policy.threshold;
    p["source"] = confidence_source_name(meta.policy.source);
    j["policy"] = p;
    ordered_json c;
    c["output_multiplier"] = meta.cost.output_multiplier;
    c["slm_params"] = meta.cost.slm_params;
    c["llm_params"] = meta.cost.llm_params;
    c["router_params"] = detail::opt_num(meta.cost.router_params);
    j["cost"] = c;
    j["repeats"] = meta.repeats;
    j["seed"] = meta.seed;
    j["concurrency"] = meta.concurrency;
    j["record_both"] = meta.record_both;
    j["llm_instruction"] = meta.llm_instruction;
    j["language_check"] = meta.language_check;
    j["backends"] = meta.backends;
    return j;
}

inline RunMeta meta_from_json(const ordered_json& j) {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != kRunLogSchema) {
        throw std::runtime_error("run log: missing or unsupported schema header");
    }
    RunMeta meta;
    const auto& p = j.at("policy");
    meta.policy.threshold = p.at("threshold").get<double>();
    const auto source = confidence_source_from_name(p.at("source").get<std::string>());
    if (!source) throw std::runtime_error("run log: unknown confidence source");
    meta.policy.source = *source;
    const auto& c = j.at("cost");
    meta.cost.output_multiplier = c.at("output_multiplier").get<double>();
    meta.cost.slm_params = c.at("slm_params").get<double>();
    meta.cost.llm_params = c.at("llm_params").get<double>();
    meta.cost.router_params = detail::get_opt<double>(c, "router_params");
    meta.repeats = j.at("repeats").get<int>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.concurrency = j.at("concurrency").get<int>();
    meta.record_both = j.at("record_both").get<bool>();
    meta.llm_instruction = j.at("llm_instruction").get<bool>();
    meta.language_check = j.at("language_check").get<bool>();
    if (j.contains("backends")) meta.backends = j.at("backends");
    return meta;
}

// ============================================================================
// File IO
// ============================================================================

inline void write_run_log(const RunLog& log, std::ostream& out) {
    out << to_json(log.meta).dump() << "\n";
    for (const auto& row : log.rows) {
        out << to_json(row).dump() << "\n";
    }
}

inline void write_run_log(const RunLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("run log: cannot write " + path);
    write_run_log(log, out);
}

inline RunLog read_run_log(std::istream& in) {
    RunLog log;
    std::string line;
    std::size_t line_no = 0;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("run log line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
        if (!have_meta) {
            log.meta = meta_from_json(j);
            have_meta = true;
        } else {
            log.rows.push_back(row_from_json(j));
        }
    }
    if (!have_meta) throw std::runtime_error("run log: empty file");
    return log;
}

inline RunLog read_run_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("run log: cannot open " + path);
    return read_run_log(in);
}

} // namespace cascade
