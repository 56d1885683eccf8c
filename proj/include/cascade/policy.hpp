// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>

#include "cascade/cost_model.hpp"

namespace cascade {

// Where the routing confidence for a query comes from: the SLM's own
// verbalized score, the mean token probability of its response, or an
// external router model consulted before either stage.
enum class ConfidenceSource { Verbalized, AvgTokenProb, ExternalRouter };

inline const char* confidence_source_name(ConfidenceSource s) {
    switch (s) {
        case ConfidenceSource::Verbalized: return "verbalized";
        case ConfidenceSource::AvgTokenProb: return "avg_token_prob";
        case ConfidenceSource::ExternalRouter: return "external_router";
    }
    return "?";
}

inline std::optional<ConfidenceSource> confidence_source_from_name(std::string_view name) {
    if (name == "verbalized") return ConfidenceSource::Verbalized;
    if (name == "avg_token_prob") return ConfidenceSource::AvgTokenProb;
    if (name == "external_router") return ConfidenceSource::ExternalRouter;
    return std::nullopt;
}

struct CascadePolicy {
    // Confidence threshold T. Verbalized confidence caps at 1.0, so values
    // above 1.0 (up to the 1.1 ceiling) force every query to the LLM.
    double threshold = 0.69;
    ConfidenceSource source = ConfidenceSource::Verbalized;

    void validate() const {
        if (!(threshold >= 0.0 && threshold <= 1.1)) {
            throw std::invalid_argument("CascadePolicy: threshold must be in [0, 1.1]");
        }
    }

    RoutingMode routing_mode() const {
        return source == ConfidenceSource::ExternalRouter ? RoutingMode::Routed
                                                          : RoutingMode::Direct;
    }
};

} // namespace cascade
