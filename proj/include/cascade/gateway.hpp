// SPDX-License-Identifier: Apache-2.0
//
// gateway.hpp
//
// Gateway mode: one network endpoint, POST /answer, accepting {id, question}
// and returning the decision as JSON in the run-log row schema (correctness
// fields stay null — the gateway has no gold answers). Decision-faithful by
// construction: the LLM is invoked only on deferral.

#pragma once

#include <memory>
#include <string>

#include <httplib.h>

#include "cascade/config.hpp"
#include "cascade/engine.hpp"
#include "cascade/harness.hpp"

namespace cascade {

class GatewayServer {
public:
    GatewayServer(std::unique_ptr<Backend> slm, std::unique_ptr<Backend> llm,
                  std::unique_ptr<Backend> router, const RunPlan& plan)
        : slm_(std::move(slm)), llm_(std::move(llm)), router_(std::move(router)), plan_(plan) {
        server_.Post("/answer", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res);
        });
    }

    explicit GatewayServer(const RunConfig& config)
        : GatewayServer(make_backend(config.slm), make_backend(config.llm),
                        config.router ? make_backend(*config.router) : nullptr, config.plan) {}

    // Binds an ephemeral port and serves on a background thread; returns the
    // bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        int bound = port;
        if (port == 0) {
            bound = server_.bind_to_any_port(host);
            if (bound <= 0) throw std::runtime_error("gateway: cannot bind a port");
        } else if (!server_.bind_to_port(host, port)) {
            throw std::runtime_error("gateway: cannot bind port " + std::to_string(port));
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~GatewayServer() { stop(); }

private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        ordered_json body;
        try {
            body = ordered_json::parse(req.body);
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(ordered_json{{"error", std::string("bad json: ") + e.what()}}.dump(),
                            "application/json");
            return;
        }
        if (!body.contains("id") || !body.contains("question")) {
            res.status = 400;
            res.set_content(ordered_json{{"error", "body must carry {id, question}"}}.dump(),
                            "application/json");
            return;
        }
        const auto id = body.at("id").get<std::string>();
        const auto question = body.at("question").get<std::string>();

        EngineOptions options; // decision-faithful: no record-both over the wire
        options.llm_instruction = plan_.llm_instruction;
        options.language_check = plan_.language_check;
        CallContext ctx;
        ctx.question_id = id;
        ctx.run_seed = plan_.seed;

        try {
            const auto decision = answer(id, question, *slm_, *llm_, router_.get(),
                                         plan_.policy, plan_.cost, options, ctx);
            DatasetRecord record{id, question, ""};
            const auto row =
                detail::row_from_decision(decision, record, 0, plan_.verifier, std::nullopt);
            res.set_content(to_json(row).dump(), "application/json");
        } catch (const CascadeFault& fault) {
            res.status = 502;
            res.set_content(ordered_json{{"error", fault.what()}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(ordered_json{{"error", e.what()}}.dump(), "application/json");
        }
    }

    std::unique_ptr<Backend> slm_;
    std::unique_ptr<Backend> llm_;
    std::unique_ptr<Backend> router_;
    RunPlan plan_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace cascade
