// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

// Pipeline stage a fault is attributed to.
enum class Stage { Slm, Llm, Router };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Slm: return "slm";
        case Stage::Llm: return "llm";
        case Stage::Router: return "router";
    }
    return "unknown";
}

// Classification of backend/stage faults. Transport and Timeout are
// retriable; the rest indicate a response or log that will not improve
// on retry.
enum class FaultKind {
    Transport,
    Timeout,
    HttpStatus,
    BadResponse,
    ReplayMiss,
};

class StageError : public std::runtime_error {
public:
    StageError(Stage stage, FaultKind kind, const std::string& message)
        : std::runtime_error(std::string(stage_name(stage)) + ": " + message),
          stage_(stage),
          kind_(kind) {}

    Stage stage() const { return stage_; }
    FaultKind kind() const { return kind_; }
    bool retriable() const {
        return kind_ == FaultKind::Transport || kind_ == FaultKind::Timeout;
    }

private:
    Stage stage_;
    FaultKind kind_;
};

} // namespace cascade
