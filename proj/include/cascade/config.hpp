// SPDX-License-Identifier: Apache-2.0
//
// config.hpp
//
// Run configuration: a single JSON file binding the dataset path, backend
// specs, routing policy, cost model, repeat count, seed, and concurrency
// bound. Credentials never live here — remote backends read their bearer
// token from the environment variable the config merely names, and a config
// that tries to inline a key is rejected outright.

#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "cascade/backends.hpp"
#include "cascade/harness.hpp"

namespace cascade {

struct RunConfig {
    std::string dataset_path;
    BackendSpec slm;
    BackendSpec llm;
    std::optional<BackendSpec> router;
    RunPlan plan;
};

namespace detail {

inline ScriptedProfile profile_from_json(const ordered_json& j) {
    ScriptedProfile p;
    if (j.contains("accuracy")) p.accuracy = j.at("accuracy").get<double>();
    if (j.contains("accuracy_by_question")) {
        for (const auto& [q, a] : j.at("accuracy_by_question").items()) {
            p.accuracy_by_question[q] = a.get<double>();
        }
    }
    if (j.contains("confidence_rule")) {
        const auto rule = confidence_rule_from_name(j.at("confidence_rule").get<std::string>());
        if (!rule) throw std::runtime_error("config: unknown confidence_rule");
        p.confidence_rule = *rule;
    }
    if (j.contains("noise_sigma")) p.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("answer_pool")) {
        p.answer_pool = j.at("answer_pool").get<std::vector<std::string>>();
    }
    return p;
}

inline BackendSpec backend_from_json(const ordered_json& j, const std::string& label) {
    for (const char* banned : {"api_key", "bearer_token", "token", "credential"}) {
        if (j.contains(banned)) {
            throw std::runtime_error("config: credentials must come from the environment, not "
                                     "the config file (found '" +
                                     std::string(banned) + "' under " + label + ")");
        }
    }
    BackendSpec spec;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "remote") {
        spec.kind = BackendKind::Remote;
    } else if (kind == "scripted") {
        spec.kind = BackendKind::Scripted;
    } else if (kind == "replay") {
        spec.kind = BackendKind::Replay;
    } else {
        throw std::runtime_error("config: unknown backend kind '" + kind + "' under " + label);
    }
    if (j.contains("model_name")) spec.model_name = j.at("model_name").get<std::string>();
    if (j.contains("temperature")) spec.temperature = j.at("temperature").get<double>();
    if (j.contains("max_tokens")) spec.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("param_count")) spec.param_count = j.at("param_count").get<double>();
    if (j.contains("endpoint")) spec.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("want_logprobs")) spec.want_logprobs = j.at("want_logprobs").get<bool>();
    if (j.contains("allow_estimated_usage")) {
        spec.allow_estimated_usage = j.at("allow_estimated_usage").get<bool>();
    }
    if (j.contains("api_key_env")) spec.api_key_env = j.at("api_key_env").get<std::string>();
    if (j.contains("timeout_ms")) spec.timeout_ms = j.at("timeout_ms").get<int>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fixtures")) {
        for (const auto& [q, text] : j.at("fixtures").items()) {
            spec.fixtures[q] = text.get<std::string>();
        }
    }
    if (j.contains("profile")) spec.profile = profile_from_json(j.at("profile"));
    if (j.contains("log_path")) spec.log_path = j.at("log_path").get<std::string>();
    spec.validate();
    return spec;
}

// Provenance snapshot of a backend for the run-log header: identifying
// fields only, no fixtures, no secrets.
inline ordered_json backend_meta(const BackendSpec& spec) {
    ordered_json j;
    switch (spec.kind) {
        case BackendKind::Remote: j["kind"] = "remote"; break;
        case BackendKind::Scripted: j["kind"] = "scripted"; break;
        case BackendKind::Replay: j["kind"] = "replay"; break;
    }
    j["model_name"] = spec.model_name;
    j["param_count"] = spec.param_count;
    j["temperature"] = spec.temperature;
    j["max_tokens"] = spec.max_tokens;
    if (spec.kind == BackendKind::Remote) j["endpoint"] = spec.endpoint;
    if (spec.kind == BackendKind::Scripted) j["seed"] = spec.seed;
    return j;
}

} // namespace detail

inline RunConfig run_config_from_json(const ordered_json& j) {
    RunConfig config;
    config.dataset_path = j.at("dataset").get<std::string>();
    config.slm = detail::backend_from_json(j.at("slm"), "slm");
    config.llm = detail::backend_from_json(j.at("llm"), "llm");
    if (j.contains("router") && !j.at("router").is_null()) {
        config.router = detail::backend_from_json(j.at("router"), "router");
    }

    const auto& p = j.at("policy");
    config.plan.policy.threshold = p.at("threshold").get<double>();
    const auto source = confidence_source_from_name(p.at("source").get<std::string>());
    if (!source) throw std::runtime_error("config: unknown confidence source");
    config.plan.policy.source = *source;
    config.plan.policy.validate();
    if (config.plan.policy.source == ConfidenceSource::ExternalRouter && !config.router) {
        throw std::runtime_error("config: external_router source needs a router backend");
    }

    if (j.contains("cost")) {
        const auto& c = j.at("cost");
        if (c.contains("output_multiplier")) {
            config.plan.cost.output_multiplier = c.at("output_multiplier").get<double>();
        }
        if (c.contains("slm_params")) config.plan.cost.slm_params = c.at("slm_params").get<double>();
        if (c.contains("llm_params")) config.plan.cost.llm_params = c.at("llm_params").get<double>();
        if (c.contains("router_params") && !c.at("router_params").is_null()) {
            config.plan.cost.router_params = c.at("router_params").get<double>();
        }
    } else {
        config.plan.cost.slm_params = config.slm.param_count;
        config.plan.cost.llm_params = config.llm.param_count;
        if (config.router) config.plan.cost.router_params = config.router->param_count;
    }
    config.plan.cost.validate();

    if (j.contains("repeats")) config.plan.repeats = j.at("repeats").get<int>();
    if (j.contains("seed")) config.plan.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("concurrency")) config.plan.concurrency = j.at("concurrency").get<int>();
    if (j.contains("record_both")) config.plan.record_both = j.at("record_both").get<bool>();
    if (j.contains("llm_instruction")) {
        config.plan.llm_instruction = j.at("llm_instruction").get<bool>();
    }
    if (j.contains("language_check")) {
        config.plan.language_check = j.at("language_check").get<bool>();
    }

    ordered_json meta;
    meta["slm"] = detail::backend_meta(config.slm);
    meta["llm"] = detail::backend_meta(config.llm);
    if (config.router) meta["router"] = detail::backend_meta(*config.router);
    config.plan.backends_meta = meta;
    return config;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

} // namespace cascade
