// SPDX-License-Identifier: Apache-2.0
//
// cost_model.hpp
//
// Token-level cost accounting. Output tokens cost a configurable multiple of
// input tokens (default 4x, matching prevailing API pricing), and pricing
// scales proportionally with parameter count: an SLM input token is the base
// unit, LLM and router tokens scale by their parameter ratio to the SLM.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "cascade/error.hpp"

namespace cascade {

struct CostConfig {
    double output_multiplier = 4.0;
    double slm_params = 7.0;  // billions
    double llm_params = 32.0; // billions
    std::optional<double> router_params; // defaults to the SLM's

    void validate() const {
        if (!(output_multiplier > 0.0) || !(slm_params > 0.0) || !(llm_params > 0.0) ||
            (router_params && !(*router_params > 0.0))) {
            throw std::invalid_argument("CostConfig: all counts must be positive");
        }
    }

    double llm_ratio() const { return llm_params / slm_params; }
    double router_ratio() const {
        return (router_params ? *router_params : slm_params) / slm_params;
    }
};

struct StageUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct CostBreakdown {
    double slm_cost = 0.0;
    double llm_cost = 0.0;
    double router_cost = 0.0;
    double total = 0.0; // exact sum of the three
};

inline CostBreakdown make_cost_breakdown(double slm, double llm, double router) {
    return {slm, llm, router, slm + llm + router};
}

namespace detail {

inline double base_cost(std::int64_t n_prompt, std::int64_t n_out, const CostConfig& config) {
    if (n_prompt < 0 || n_out < 0) {
        throw std::invalid_argument("cost: negative token count");
    }
    return static_cast<double>(n_prompt) +
           config.output_multiplier * static_cast<double>(n_out);
}

} // namespace detail

// SLM cost, normalized to a base input-token cost of 1.
inline double slm_cost(std::int64_t n_prompt, std::int64_t n_out, const CostConfig& config) {
    config.validate();
    return detail::base_cost(n_prompt, n_out, config);
}

// Router cost: same form as the SLM cost, scaled by the router/SLM parameter
// ratio (1 when the router shares the SLM base model).
inline double router_cost(std::int64_t n_prompt, std::int64_t n_out, const CostConfig& config) {
    config.validate();
    return detail::base_cost(n_prompt, n_out, config) * config.router_ratio();
}

// LLM cost: base form scaled by the LLM/SLM parameter ratio.
inline double llm_cost(std::int64_t n_prompt, std::int64_t n_out, const CostConfig& config) {
    config.validate();
    return detail::base_cost(n_prompt, n_out, config) * config.llm_ratio();
}

// ============================================================================
// Per-decision system cost
// ============================================================================

enum class RoutingMode { Direct, Routed };

struct SystemUsages {
    std::optional<StageUsage> slm;
    std::optional<StageUsage> llm;
    std::optional<StageUsage> router;
};

namespace detail {

inline StageUsage require_usage(const std::optional<StageUsage>& usage, Stage stage) {
    if (!usage) {
        throw std::invalid_argument(std::string("system_cost: usage missing for invoked stage ") +
                                    stage_name(stage));
    }
    return *usage;
}

} // namespace detail

// Piecewise system cost per query.
//   Direct mode:  kept -> SLM; deferred -> SLM + LLM (the SLM spend is sunk).
//   Routed mode:  kept -> router + SLM; deferred -> router + LLM (the SLM is
//                 never invoked on deferral).
inline CostBreakdown system_cost(bool deferred, const SystemUsages& usages,
                                 RoutingMode mode, const CostConfig& config) {
    config.validate();
    if (mode == RoutingMode::Direct) {
        const auto slm = detail::require_usage(usages.slm, Stage::Slm);
        const double s = slm_cost(slm.prompt_tokens, slm.completion_tokens, config);
        if (!deferred) return make_cost_breakdown(s, 0.0, 0.0);
        const auto llm = detail::require_usage(usages.llm, Stage::Llm);
        return make_cost_breakdown(s, llm_cost(llm.prompt_tokens, llm.completion_tokens, config),
                                   0.0);
    }
    const auto router = detail::require_usage(usages.router, Stage::Router);
    const double r = router_cost(router.prompt_tokens, router.completion_tokens, config);
    if (!deferred) {
        const auto slm = detail::require_usage(usages.slm, Stage::Slm);
        return make_cost_breakdown(slm_cost(slm.prompt_tokens, slm.completion_tokens, config),
                                   0.0, r);
    }
    const auto llm = detail::require_usage(usages.llm, Stage::Llm);
    return make_cost_breakdown(0.0, llm_cost(llm.prompt_tokens, llm.completion_tokens, config), r);
}

// Standalone-LLM charge profile: what a query costs when the cascade is
// bypassed entirely. Thresholds above the confidence ceiling (T > 1.0)
// describe exactly this deployment, since no verbalized confidence can
// reach them.
inline CostBreakdown llm_only_cost(const SystemUsages& usages, const CostConfig& config) {
    config.validate();
    const auto llm = detail::require_usage(usages.llm, Stage::Llm);
    return make_cost_breakdown(0.0, llm_cost(llm.prompt_tokens, llm.completion_tokens, config),
                               0.0);
}

} // namespace cascade
