// SPDX-License-Identifier: Apache-2.0
//
// backends.hpp
//
// Uniform completion interface over three backend kinds:
//
//   remote   — chat-completion HTTP endpoint; token usage is taken from the
//              endpoint's usage report verbatim (the serving side owns the
//              tokenizer), with an opt-in local fallback count that is
//              flagged as estimated.
//   scripted — deterministic simulator for tests and desk-scale experiments:
//              either a fixture table (question -> completion text) or a
//              generative profile with a per-question accuracy and a
//              confidence rule. Identical (seed, question, repeat) yields a
//              byte-identical response.
//   replay   — serves recorded responses from a run log, keyed by
//              (question id, repeat index, stage).

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cascade/error.hpp"
#include "cascade/prompts.hpp"
#include "cascade/response_parser.hpp"
#include "cascade/runlog.hpp"

namespace cascade {

// ============================================================================
// Utilities
// ============================================================================

// Whitespace-delimited token count; only a stand-in for a real tokenizer and
// flagged as estimated wherever it feeds usage accounting.
inline std::int64_t count_tokens_fallback(std::string_view text) {
    std::int64_t count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<unsigned char>(v >> (i * 8));
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Shortest round-trip decimal form, so a confidence printed into a macro
// parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace detail

// Deterministic "right" answer for a synthetic question; the scripted
// backend emits it on correct draws and datasets built with it make
// correctness checkable without real model calls.
inline std::string canonical_answer(std::string_view question) {
    return std::to_string(detail::fnv1a(question) % 90000 + 10000);
}

// Recovers the bare question from a prompt built by build_prompt; returns
// the prompt unchanged when no known decoration is present.
inline std::string_view question_from_prompt(std::string_view prompt) {
    const std::string solver_suffix = " " + std::string(kSolverInstruction);
    if (prompt.size() > solver_suffix.size() &&
        prompt.substr(prompt.size() - solver_suffix.size()) == solver_suffix) {
        return prompt.substr(0, prompt.size() - solver_suffix.size());
    }
    if (prompt.size() > kRouterPromptPrefix.size() + kRouterPromptSuffix.size() &&
        prompt.substr(0, kRouterPromptPrefix.size()) == kRouterPromptPrefix &&
        prompt.substr(prompt.size() - kRouterPromptSuffix.size()) == kRouterPromptSuffix) {
        return prompt.substr(kRouterPromptPrefix.size(),
                             prompt.size() - kRouterPromptPrefix.size() -
                                 kRouterPromptSuffix.size());
    }
    return prompt;
}

// ============================================================================
// Specs
// ============================================================================

enum class BackendKind { Remote, Scripted, Replay };

enum class ConfidenceRule { PerfectlyCalibrated, OverconfidentConstant, Noisy };

inline const char* confidence_rule_name(ConfidenceRule r) {
    switch (r) {
        case ConfidenceRule::PerfectlyCalibrated: return "perfectly_calibrated";
        case ConfidenceRule::OverconfidentConstant: return "overconfident_constant";
        case ConfidenceRule::Noisy: return "noisy";
    }
    return "?";
}

inline std::optional<ConfidenceRule> confidence_rule_from_name(std::string_view name) {
    if (name == "perfectly_calibrated") return ConfidenceRule::PerfectlyCalibrated;
    if (name == "overconfident_constant") return ConfidenceRule::OverconfidentConstant;
    if (name == "noisy") return ConfidenceRule::Noisy;
    return std::nullopt;
}

struct ScriptedProfile {
    double accuracy = 1.0; // per-question accuracy unless overridden below
    std::map<std::string, double> accuracy_by_question;
    ConfidenceRule confidence_rule = ConfidenceRule::PerfectlyCalibrated;
    double noise_sigma = 0.0;
    std::vector<std::string> answer_pool; // wrong-answer candidates

    double question_accuracy(std::string_view question) const {
        const auto it = accuracy_by_question.find(std::string(question));
        return it == accuracy_by_question.end() ? accuracy : it->second;
    }
};

struct BackendSpec {
    BackendKind kind = BackendKind::Scripted;
    std::string model_name;
    double temperature = 0.6;
    int max_tokens = 4096;
    double param_count = 7.0; // billions

    // remote
    std::string endpoint;
    bool want_logprobs = false;
    bool allow_estimated_usage = false;
    std::string api_key_env = "CASCADE_API_KEY";
    int timeout_ms = 120000;

    // scripted
    std::uint64_t seed = 0;
    std::map<std::string, std::string> fixtures; // question -> completion text
    std::optional<ScriptedProfile> profile;

    // replay
    std::string log_path;

    void validate() const {
        if (!(temperature >= 0.0)) throw std::invalid_argument("BackendSpec: temperature < 0");
        if (max_tokens < 1) throw std::invalid_argument("BackendSpec: max_tokens < 1");
        if (!(param_count > 0.0)) throw std::invalid_argument("BackendSpec: param_count <= 0");
        if (kind == BackendKind::Remote && endpoint.empty()) {
            throw std::invalid_argument("BackendSpec: remote backend needs an endpoint");
        }
        if (kind == BackendKind::Scripted && fixtures.empty() && !profile) {
            throw std::invalid_argument("BackendSpec: scripted backend needs fixtures or a profile");
        }
    }
};

// Identifies one completion call within a run; scripted backends fold it
// into their RNG stream, replay backends use it as the lookup key.
struct CallContext {
    std::string question_id;
    int repeat_index = 0;
    std::uint64_t run_seed = 0;
    Stage stage = Stage::Slm;
};

// ============================================================================
// Backend interface
// ============================================================================

class Backend {
public:
    virtual ~Backend() = default;
    virtual RawResponse complete(const std::string& prompt, const CallContext& ctx) = 0;
    virtual const BackendSpec& spec() const = 0;
};

// ============================================================================
// Scripted backend
// ============================================================================

class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(BackendSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
    }

    RawResponse complete(const std::string& prompt, const CallContext& ctx) override {
        const std::string question(question_from_prompt(prompt));
        if (const auto it = spec_.fixtures.find(question); it != spec_.fixtures.end()) {
            return make_response(prompt, it->second, std::nullopt);
        }
        if (!spec_.profile) {
            throw StageError(ctx.stage, FaultKind::BadResponse,
                             "scripted backend has no fixture for question: " + question);
        }
        return profile_response(prompt, question, ctx);
    }

    const BackendSpec& spec() const override { return spec_; }

private:
    RawResponse make_response(std::string_view prompt, std::string text,
                              std::optional<std::vector<double>> probs) const {
        RawResponse r;
        r.text = std::move(text);
        r.usage.prompt_tokens = count_tokens_fallback(prompt);
        r.usage.completion_tokens = count_tokens_fallback(r.text);
        r.token_probs = std::move(probs);
        return r;
    }

    std::mt19937_64 stream_for(std::string_view question, const CallContext& ctx) const {
        std::uint64_t h = detail::fnv1a(spec_.model_name);
        h = detail::fnv1a_u64(spec_.seed, h);
        h = detail::fnv1a_u64(ctx.run_seed, h);
        h = detail::fnv1a(question, h);
        h = detail::fnv1a_u64(static_cast<std::uint64_t>(ctx.repeat_index) + 1, h);
        return std::mt19937_64(detail::splitmix64(h));
    }

    RawResponse profile_response(std::string_view prompt, const std::string& question,
                                 const CallContext& ctx) const {
        static const char* kFiller[] = {
            "first",  "note",   "that",  "the",     "terms",  "combine", "after",
            "expanding", "both", "sides", "so",     "we",     "can",     "compare",
            "each",   "factor", "and",   "simplify", "until", "only",    "one",
            "quantity", "remains", "which", "gives", "a",     "direct",  "value",
        };
        const auto& profile = *spec_.profile;
        const double accuracy = profile.question_accuracy(question);

        auto rng = stream_for(question, ctx);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const bool correct = unit(rng) < accuracy;
        const std::size_t filler_len = 12 + static_cast<std::size_t>(rng() % 24);
        const std::uint64_t wrong_draw = rng();

        const std::string right = canonical_answer(question);
        std::string answer;
        if (correct) {
            answer = right;
        } else if (!profile.answer_pool.empty()) {
            answer = profile.answer_pool[wrong_draw % profile.answer_pool.size()];
            if (answer == right) answer = right + "1";
        } else {
            answer = std::to_string(std::stoll(right) + 1 + wrong_draw % 7);
        }

        double confidence = 1.0;
        switch (profile.confidence_rule) {
            case ConfidenceRule::PerfectlyCalibrated:
                confidence = accuracy;
                break;
            case ConfidenceRule::OverconfidentConstant:
                confidence = 1.0;
                break;
            case ConfidenceRule::Noisy: {
                std::normal_distribution<double> noise(0.0, profile.noise_sigma);
                confidence = std::min(1.0, std::max(0.0, accuracy + noise(rng)));
                break;
            }
        }

        std::string text = "Let me work through this.";
        for (std::size_t i = 0; i < filler_len; ++i) {
            text += ' ';
            text += kFiller[(wrong_draw + i) % std::size(kFiller)];
        }
        text += " The final answer is \\[ \\boxed{" + answer + "} \\]. \\confidence{" +
                detail::format_double(confidence) + "}";

        const auto n_tokens = count_tokens_fallback(text);
        std::vector<double> probs(static_cast<std::size_t>(n_tokens), confidence);
        return make_response(prompt, std::move(text), std::move(probs));
    }

    BackendSpec spec_;
};

// ============================================================================
// Replay backend
// ============================================================================

class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(BackendSpec spec) : spec_(std::move(spec)) {
        load(read_run_log(spec_.log_path));
    }

    ReplayBackend(BackendSpec spec, const RunLog& log) : spec_(std::move(spec)) { load(log); }

    RawResponse complete(const std::string&, const CallContext& ctx) override {
        const auto& table = table_for(ctx.stage);
        const auto it = table.find({ctx.question_id, ctx.repeat_index});
        if (it == table.end()) {
            throw StageError(ctx.stage, FaultKind::ReplayMiss,
                             "replay log has no record for question '" + ctx.question_id +
                                 "' repeat " + std::to_string(ctx.repeat_index));
        }
        return it->second;
    }

    const BackendSpec& spec() const override { return spec_; }

private:
    using Key = std::pair<std::string, int>;

    static RawResponse from_stage(const StageLogRecord& r) {
        return {r.text, r.usage, r.token_probs};
    }

    void load(const RunLog& log) {
        for (const auto& row : log.rows) {
            const Key key{row.question_id, row.repeat_index};
            if (row.slm) slm_.emplace(key, from_stage(*row.slm));
            if (row.llm) llm_.emplace(key, from_stage(*row.llm));
            if (row.router) {
                router_.emplace(key, RawResponse{row.router->text, row.router->usage, std::nullopt});
            }
        }
    }

    const std::map<Key, RawResponse>& table_for(Stage stage) const {
        switch (stage) {
            case Stage::Slm: return slm_;
            case Stage::Llm: return llm_;
            case Stage::Router: return router_;
        }
        return slm_;
    }

    BackendSpec spec_;
    std::map<Key, RawResponse> slm_;
    std::map<Key, RawResponse> llm_;
    std::map<Key, RawResponse> router_;
};

// ============================================================================
// Remote backend
// ============================================================================

class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(BackendSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        split_endpoint();
        if (const char* key = std::getenv(spec_.api_key_env.c_str())) {
            bearer_ = key;
        }
    }

    RawResponse complete(const std::string& prompt, const CallContext& ctx) override {
        nlohmann::json body;
        body["model"] = spec_.model_name;
        body["messages"] = nlohmann::json::array({
            nlohmann::json{{"role", "user"}, {"content", prompt}},
        });
        body["temperature"] = spec_.temperature;
        body["max_tokens"] = spec_.max_tokens;
        if (spec_.want_logprobs) body["logprobs"] = true;

        httplib::Client client(base_url_);
        client.set_connection_timeout(spec_.timeout_ms / 1000, spec_.timeout_ms % 1000 * 1000);
        client.set_read_timeout(spec_.timeout_ms / 1000, spec_.timeout_ms % 1000 * 1000);
        httplib::Headers headers;
        if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);

        const auto result = client.Post(path_, headers, body.dump(), "application/json");
        if (!result) {
            const auto err = result.error();
            const bool timeout = err == httplib::Error::ConnectionTimeout ||
                                 err == httplib::Error::Read || err == httplib::Error::Write;
            throw StageError(ctx.stage, timeout ? FaultKind::Timeout : FaultKind::Transport,
                             "request failed: " + httplib::to_string(err));
        }
        if (result->status < 200 || result->status >= 300) {
            throw StageError(ctx.stage, FaultKind::HttpStatus,
                             "endpoint returned status " + std::to_string(result->status));
        }
        return parse_completion(result->body, prompt, ctx);
    }

    const BackendSpec& spec() const override { return spec_; }

private:
    void split_endpoint() {
        const auto scheme_end = spec_.endpoint.find("://");
        const auto path_start = scheme_end == std::string::npos
                                    ? spec_.endpoint.find('/')
                                    : spec_.endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            base_url_ = spec_.endpoint;
            path_ = "/v1/chat/completions";
        } else {
            base_url_ = spec_.endpoint.substr(0, path_start);
            path_ = spec_.endpoint.substr(path_start);
        }
    }

    RawResponse parse_completion(const std::string& body, const std::string& prompt,
                                 const CallContext& ctx) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const std::exception& e) {
            throw StageError(ctx.stage, FaultKind::BadResponse,
                             std::string("response is not JSON: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
            throw StageError(ctx.stage, FaultKind::BadResponse, "response has no choices");
        }
        const auto& choice = j["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content")) {
            throw StageError(ctx.stage, FaultKind::BadResponse, "choice has no message content");
        }

        RawResponse r;
        r.text = choice["message"]["content"].get<std::string>();

        if (j.contains("usage") && j["usage"].contains("prompt_tokens") &&
            j["usage"].contains("completion_tokens")) {
            r.usage.prompt_tokens = j["usage"]["prompt_tokens"].get<std::int64_t>();
            r.usage.completion_tokens = j["usage"]["completion_tokens"].get<std::int64_t>();
        } else if (spec_.allow_estimated_usage) {
            r.usage.prompt_tokens = count_tokens_fallback(prompt);
            r.usage.completion_tokens = count_tokens_fallback(r.text);
            r.usage.estimated = true;
        } else {
            throw StageError(ctx.stage, FaultKind::BadResponse,
                             "response missing usage counts");
        }

        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
            std::vector<double> probs;
            for (const auto& tok : choice["logprobs"]["content"]) {
                if (tok.contains("logprob")) {
                    const double p = std::exp(tok["logprob"].get<double>());
                    probs.push_back(std::min(1.0, std::max(0.0, p)));
                }
            }
            if (!probs.empty()) r.token_probs = std::move(probs);
        }
        return r;
    }

    BackendSpec spec_;
    std::string base_url_;
    std::string path_;
    std::string bearer_;
};

// ============================================================================
// Factory
// ============================================================================

inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
    switch (spec.kind) {
        case BackendKind::Remote: return std::make_unique<RemoteBackend>(spec);
        case BackendKind::Scripted: return std::make_unique<ScriptedBackend>(spec);
        case BackendKind::Replay: return std::make_unique<ReplayBackend>(spec);
    }
    throw std::invalid_argument("make_backend: unknown backend kind");
}

} // namespace cascade
