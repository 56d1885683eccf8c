// SPDX-License-Identifier: Apache-2.0
//
// prompts.hpp
//
// Prompt construction for the two model roles. The solver instruction elicits
// the boxed answer plus verbalized confidence the parser expects; the router
// template asks for a standalone solvability probability.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cascade {

inline constexpr std::string_view kSolverInstruction =
    "Please reason step by step, and put your final answer within \\boxed{}, "
    "then output the confidence (0.0-1.0) that your answer is correct within "
    "\\confidence{}.";

inline constexpr std::string_view kRouterPromptPrefix = "Question: ";

inline constexpr std::string_view kRouterPromptSuffix =
    " Instruction: Estimate and output the probability (0.0-1.0) that a small "
    "language model (≤10B) can answer the question correctly.";

enum class PromptRole { Solver, Router };

inline std::string build_prompt(const std::string& question, PromptRole role) {
    if (question.empty()) {
        throw std::invalid_argument("build_prompt: empty question");
    }
    if (role == PromptRole::Solver) {
        return question + " " + std::string(kSolverInstruction);
    }
    return std::string(kRouterPromptPrefix) + question + std::string(kRouterPromptSuffix);
}

} // namespace cascade
