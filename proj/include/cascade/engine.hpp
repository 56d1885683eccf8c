// SPDX-License-Identifier: Apache-2.0
//
// engine.hpp
//
// The routing core. A query is answered by the SLM unless the configured
// confidence source reports a value below the threshold (or none at all), in
// which case the original query is passed to the LLM; with an external
// router the routing verdict precedes — and selects — the single solver
// stage that runs. Thresholds above 1.0 are unreachable by any confidence,
// so the engine treats them as an LLM-only deployment and skips the SLM
// stage outright.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "cascade/backends.hpp"
#include "cascade/cost_model.hpp"
#include "cascade/policy.hpp"
#include "cascade/prompts.hpp"
#include "cascade/response_parser.hpp"

namespace cascade {

// ============================================================================
// Decision rule
// ============================================================================

enum class Verdict { Keep, Defer };

// Deferral is strictly "falls below": equality keeps the SLM's answer, and a
// missing confidence always defers.
inline Verdict decide(std::optional<double> confidence, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.1)) {
        throw std::invalid_argument("decide: threshold must be in [0, 1.1]");
    }
    if (!confidence || *confidence < threshold) return Verdict::Defer;
    return Verdict::Keep;
}

// ============================================================================
// Confidence sources
// ============================================================================

inline double avg_prob_confidence(std::span<const double> token_probs) {
    if (token_probs.empty()) {
        throw std::invalid_argument("avg_prob_confidence: empty probability sequence");
    }
    double sum = 0.0;
    for (double p : token_probs) sum += p;
    return sum / static_cast<double>(token_probs.size());
}

// First decimal number in [0,1] found in the router's completion; an
// unparseable reply reads as 0 (always defer).
inline double router_confidence_from_text(std::string_view completion) {
    std::size_t i = 0;
    while (i < completion.size()) {
        const char c = completion[i];
        const bool starts_number =
            (c >= '0' && c <= '9') ||
            ((c == '.' || c == '-' || c == '+') && i + 1 < completion.size() &&
             completion[i + 1] >= '0' && completion[i + 1] <= '9');
        if (starts_number) {
            std::size_t j = i;
            if (completion[j] == '-' || completion[j] == '+') ++j;
            bool seen_dot = false;
            while (j < completion.size() &&
                   ((completion[j] >= '0' && completion[j] <= '9') ||
                    (completion[j] == '.' && !seen_dot))) {
                seen_dot = seen_dot || completion[j] == '.';
                ++j;
            }
            if (const auto v = detail::parse_decimal(completion.substr(i, j - i));
                v && *v >= 0.0 && *v <= 1.0) {
                return *v;
            }
            i = j;
        } else {
            ++i;
        }
    }
    return 0.0;
}

inline double router_confidence(const std::string& question, Backend& router,
                                const CallContext& ctx) {
    const auto raw = router.complete(build_prompt(question, PromptRole::Router), ctx);
    return router_confidence_from_text(raw.text);
}

// ============================================================================
// Decision record
// ============================================================================

struct StageRecord {
    RawResponse raw;
    ParsedResponse parsed;
};

struct RouterRecord {
    RawResponse raw;
    double probability = 0.0;
};

struct CascadeDecision {
    std::string question_id;
    std::optional<double> confidence_used;
    bool deferred = false;
    std::optional<std::string> final_answer;
    std::optional<StageRecord> slm; // absent when the SLM stage never ran
    std::optional<StageRecord> llm;
    std::optional<RouterRecord> router;
    CostBreakdown costs;
};

struct EngineOptions {
    // Invoke both solver stages regardless of the verdict, so one recorded
    // pass supports offline threshold sweeps. The decision and costs are
    // still those of the policy.
    bool record_both = false;
    // Append the solver instruction suffix to the deferred LLM prompt.
    bool llm_instruction = true;
    bool language_check = true;
};

// Raised when a stage fails mid-decision; carries whatever provenance the
// pipeline had already gathered.
class CascadeFault : public StageError {
public:
    CascadeFault(const StageError& cause, CascadeDecision partial)
        : StageError(cause), partial_(std::move(partial)) {}

    const CascadeDecision& partial() const { return partial_; }

private:
    CascadeDecision partial_;
};

// ============================================================================
// Pipeline
// ============================================================================

namespace detail {

inline StageRecord run_solver_stage(Backend& backend, const std::string& question,
                                    bool with_instruction, bool language_check,
                                    CallContext ctx, Stage stage) {
    ctx.stage = stage;
    const std::string prompt =
        with_instruction ? build_prompt(question, PromptRole::Solver) : question;
    StageRecord record;
    record.raw = backend.complete(prompt, ctx);
    ParseOptions opts;
    opts.prompt = prompt;
    opts.check_language = language_check;
    record.parsed = parse(record.raw, opts);
    return record;
}

inline std::optional<double> derive_confidence(const StageRecord& slm, ConfidenceSource source) {
    if (source == ConfidenceSource::Verbalized) return slm.parsed.confidence;
    // AvgTokenProb: no usable probabilities means no confidence, hence defer.
    if (slm.raw.token_probs && !slm.raw.token_probs->empty()) {
        return avg_prob_confidence(*slm.raw.token_probs);
    }
    return std::nullopt;
}

} // namespace detail

// One full cascade decision. ExternalRouter additionally requires `router`;
// a stage fault surfaces as CascadeFault with partial provenance.
inline CascadeDecision answer(const std::string& question_id, const std::string& question,
                              Backend& slm, Backend& llm, Backend* router,
                              const CascadePolicy& policy, const CostConfig& cost,
                              const EngineOptions& options = {},
                              const CallContext& base_ctx = {}) {
    policy.validate();
    cost.validate();
    if (policy.source == ConfidenceSource::ExternalRouter && router == nullptr) {
        throw std::invalid_argument("answer: ExternalRouter source needs a router backend");
    }

    CascadeDecision decision;
    decision.question_id = question_id;
    CallContext ctx = base_ctx;
    ctx.question_id = question_id;

    const bool llm_only = policy.threshold > 1.0;
    const RoutingMode mode = policy.routing_mode();

    auto run_stage = [&](Backend& backend, Stage stage) {
        try {
            return detail::run_solver_stage(backend, question, options.llm_instruction || stage == Stage::Slm,
                                            options.language_check, ctx, stage);
        } catch (const StageError& e) {
            throw CascadeFault(e, decision);
        }
    };

    // Router verdict comes first in routed mode; in direct mode the SLM must
    // speak before any confidence exists.
    if (mode == RoutingMode::Routed && !llm_only) {
        CallContext rctx = ctx;
        rctx.stage = Stage::Router;
        RouterRecord record;
        try {
            record.raw = router->complete(build_prompt(question, PromptRole::Router), rctx);
        } catch (const StageError& e) {
            throw CascadeFault(e, decision);
        }
        record.probability = router_confidence_from_text(record.raw.text);
        decision.router = std::move(record);
        decision.confidence_used = decision.router->probability;
    }

    if (mode == RoutingMode::Direct && !llm_only) {
        decision.slm = run_stage(slm, Stage::Slm);
        decision.confidence_used = detail::derive_confidence(*decision.slm, policy.source);
    }

    decision.deferred =
        llm_only || decide(decision.confidence_used, policy.threshold) == Verdict::Defer;

    // Invoke the remaining stages the decision (or record-both mode) needs.
    if (mode == RoutingMode::Routed && !llm_only) {
        if (!decision.deferred || options.record_both) decision.slm = run_stage(slm, Stage::Slm);
        if (decision.deferred || options.record_both) decision.llm = run_stage(llm, Stage::Llm);
    } else {
        if (llm_only && options.record_both) {
            decision.slm = run_stage(slm, Stage::Slm);
            if (mode == RoutingMode::Routed) {
                CallContext rctx = ctx;
                rctx.stage = Stage::Router;
                RouterRecord record;
                try {
                    record.raw = router->complete(build_prompt(question, PromptRole::Router), rctx);
                } catch (const StageError& e) {
                    throw CascadeFault(e, decision);
                }
                record.probability = router_confidence_from_text(record.raw.text);
                decision.router = std::move(record);
            }
        }
        if (decision.deferred || options.record_both) decision.llm = run_stage(llm, Stage::Llm);
    }

    decision.final_answer = decision.deferred
                                ? (decision.llm ? decision.llm->parsed.answer : std::nullopt)
                                : decision.slm->parsed.answer;

    // Charge only the stages the policy's decision invokes, even when
    // record-both ran extra ones.
    SystemUsages usages;
    if (decision.slm) {
        usages.slm = StageUsage{decision.slm->raw.usage.prompt_tokens,
                                decision.slm->raw.usage.completion_tokens};
    }
    if (decision.llm) {
        usages.llm = StageUsage{decision.llm->raw.usage.prompt_tokens,
                                decision.llm->raw.usage.completion_tokens};
    }
    if (decision.router) {
        usages.router = StageUsage{decision.router->raw.usage.prompt_tokens,
                                   decision.router->raw.usage.completion_tokens};
    }
    decision.costs = llm_only ? llm_only_cost(usages, cost)
                              : system_cost(decision.deferred, usages, mode, cost);
    return decision;
}

} // namespace cascade
