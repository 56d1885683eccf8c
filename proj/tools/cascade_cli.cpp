// SPDX-License-Identifier: Apache-2.0
//
// cascade — CLI over the cascade toolkit.
//
//   eval          run a configured experiment and write the run log
//   sweep         offline threshold sweep over a record-both log
//   replay        re-run a log through replay backends and re-aggregate
//   reward-score  score rollout groups (the trainer integration boundary)
//   calibrate     calibration metrics from a run log
//   parse         parse one completion text file
//   serve         gateway mode: POST /answer on a network port

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cascade/config.hpp"
#include "cascade/gateway.hpp"
#include "cascade/harness.hpp"

namespace {

using cascade::ordered_json;

std::vector<double> parse_threshold_list(const std::string& list) {
    std::vector<double> thresholds;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        thresholds.push_back(std::stod(item));
    }
    if (thresholds.empty()) throw std::runtime_error("no thresholds given");
    return thresholds;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_summary(const cascade::AggregateReport& report) {
    std::cout << cascade::detail::report_json(report).dump(2) << "\n";
}

int cmd_eval(const std::string& config_path, bool force_record_both, const std::string& out_path,
             const std::string& report_path, const std::string& csv_path) {
    auto config = cascade::load_run_config(config_path);
    if (force_record_both) config.plan.record_both = true;
    const auto dataset = cascade::load_dataset(config.dataset_path);
    auto slm = cascade::make_backend(config.slm);
    auto llm = cascade::make_backend(config.llm);
    std::unique_ptr<cascade::Backend> router;
    if (config.router) router = cascade::make_backend(*config.router);

    const auto log = cascade::run_eval(dataset, *slm, *llm, router.get(), config.plan);
    cascade::write_run_log(log, out_path);
    const auto report = cascade::aggregate(log);
    print_summary(report);
    if (!report_path.empty()) {
        cascade::emit_report(report, cascade::ReportFormat::Json, report_path);
    }
    if (!csv_path.empty()) {
        cascade::emit_report(report, cascade::ReportFormat::Csv, csv_path);
    }
    std::cerr << "log written to " << out_path << " (" << log.rows.size() << " rows, "
              << report.fault_count << " faults)\n";
    return report.fault_count == 0 ? 0 : 3;
}

int cmd_sweep(const std::string& log_path, const std::string& thresholds_list,
              const std::string& json_path, const std::string& csv_path) {
    const auto log = cascade::read_run_log(log_path);
    const auto thresholds = parse_threshold_list(thresholds_list);
    const auto points = cascade::sweep(log, thresholds);
    cascade::emit_sweep(points, cascade::ReportFormat::Csv, std::cout);
    if (!json_path.empty()) cascade::emit_sweep(points, cascade::ReportFormat::Json, json_path);
    if (!csv_path.empty()) cascade::emit_sweep(points, cascade::ReportFormat::Csv, csv_path);
    return 0;
}

int cmd_replay(const std::string& log_path, const std::string& out_path,
               const std::string& report_path) {
    const auto original = cascade::read_run_log(log_path);
    const auto replayed = cascade::replay_run(original);
    if (!out_path.empty()) cascade::write_run_log(replayed, out_path);
    const auto report = cascade::aggregate(replayed);
    print_summary(report);
    if (!report_path.empty()) {
        cascade::emit_report(report, cascade::ReportFormat::Json, report_path);
    }

    const auto original_report = cascade::aggregate(original);
    const bool closed = original_report.pass1 == report.pass1 &&
                        original_report.avg_cost == report.avg_cost &&
                        original_report.llm_percent == report.llm_percent;
    std::cerr << (closed ? "replay matches the original aggregate\n"
                         : "replay DIVERGES from the original aggregate\n");
    return closed ? 0 : 4;
}

int cmd_reward_score(const std::string& groups_path, const std::string& variant_name,
                     double epsilon, const std::string& kl_sign_name, double missing_reward,
                     const std::string& out_path) {
    cascade::RewardConfig config;
    const auto variant = cascade::reward_variant_from_name(variant_name);
    if (!variant) throw std::runtime_error("unknown reward variant '" + variant_name + "'");
    config.variant = *variant;
    config.epsilon = epsilon;
    if (kl_sign_name == "as_printed") {
        config.kl_sign = cascade::KlSign::AsPrinted;
    } else if (kl_sign_name == "calibration_consistent") {
        config.kl_sign = cascade::KlSign::CalibrationConsistent;
    } else {
        throw std::runtime_error("unknown kl sign '" + kl_sign_name + "'");
    }
    config.missing_confidence_reward = missing_reward;
    config.validate();

    const auto groups = cascade::load_rollout_groups(groups_path);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        out = &file;
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto breakdowns = cascade::score_group(groups[g], config);
        for (std::size_t i = 0; i < breakdowns.size(); ++i) {
            ordered_json j;
            j["group"] = g;
            j["index"] = i;
            j["r_correct"] = breakdowns[i].r_correct;
            j["r_format"] = breakdowns[i].r_format;
            j["r_confidence"] = breakdowns[i].r_confidence;
            j["total"] = breakdowns[i].total;
            *out << j.dump() << "\n";
        }
    }
    return 0;
}

int cmd_calibrate(const std::string& log_path, int bins, const std::string& json_path,
                  const std::string& csv_path) {
    const auto log = cascade::read_run_log(log_path);
    const auto records = cascade::slm_prediction_records(log);
    if (records.empty()) throw std::runtime_error("log has no SLM records to calibrate");
    const auto report = cascade::calibration_report(records, static_cast<std::size_t>(bins));

    ordered_json j;
    j["pass1"] = report.pass1;
    j["ece"] = report.ece ? ordered_json(*report.ece) : ordered_json(nullptr);
    j["auroc"] = report.auroc ? ordered_json(*report.auroc) : ordered_json(nullptr);
    j["confidence_output_ratio"] = report.confidence_output_ratio;
    ordered_json bins_json = ordered_json::array();
    for (const auto& b : report.bins) {
        bins_json.push_back(ordered_json{
            {"count", b.count}, {"mean_confidence", b.mean_confidence}, {"accuracy", b.accuracy}});
    }
    j["bins"] = bins_json;
    std::cout << j.dump(2) << "\n";

    if (!json_path.empty()) {
        std::ofstream out(json_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + json_path);
        out << j.dump(2) << "\n";
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + csv_path);
        cascade::emit_reliability_csv(report, out);
    }
    return 0;
}

int cmd_parse(const std::string& text_path, const std::string& prompt_path) {
    cascade::RawResponse raw;
    raw.text = read_file(text_path);
    cascade::ParseOptions options;
    if (!prompt_path.empty()) options.prompt = read_file(prompt_path);
    const auto parsed = cascade::parse(raw, options);

    ordered_json j;
    j["answer"] = parsed.answer ? ordered_json(*parsed.answer) : ordered_json(nullptr);
    j["confidence"] = parsed.confidence ? ordered_json(*parsed.confidence) : ordered_json(nullptr);
    j["has_boxed"] = parsed.has_boxed;
    j["has_confidence_macro"] = parsed.has_confidence_macro;
    j["language_consistent"] = parsed.language_consistent;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_serve(const std::string& config_path, const std::string& host, int port) {
    const auto config = cascade::load_run_config(config_path);
    cascade::GatewayServer server(config);
    const int bound = server.start(host, port);
    std::cerr << "gateway listening on " << host << ":" << bound << " (POST /answer)\n";
    // Serve until interrupted.
    static std::atomic<bool> stop_requested{false};
    std::signal(SIGINT, [](int) { stop_requested.store(true); });
    std::signal(SIGTERM, [](int) { stop_requested.store(true); });
    while (!stop_requested.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    server.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"confidence-calibrated SLM-to-LLM cascade toolkit"};
    app.require_subcommand(1);

    struct {
        std::string config, out = "run_log.jsonl", report, csv;
        bool record_both = false;
    } eval_args;
    auto* eval = app.add_subcommand("eval", "run a configured experiment");
    eval->add_option("--config", eval_args.config, "run configuration JSON")->required();
    eval->add_flag("--record-both", eval_args.record_both,
                   "invoke both stages for every question");
    eval->add_option("--out", eval_args.out, "run log output path");
    eval->add_option("--report", eval_args.report, "aggregate report JSON path");
    eval->add_option("--csv", eval_args.csv, "aggregate report CSV path");

    struct {
        std::string log, thresholds, json, csv;
    } sweep_args;
    auto* sweep = app.add_subcommand("sweep", "offline threshold sweep over a record-both log");
    sweep->add_option("--log", sweep_args.log, "run log path")->required();
    sweep->add_option("--thresholds", sweep_args.thresholds, "comma-separated thresholds")
        ->required();
    sweep->add_option("--json", sweep_args.json, "sweep JSON output path");
    sweep->add_option("--csv", sweep_args.csv, "sweep CSV output path");

    struct {
        std::string log, out, report;
    } replay_args;
    auto* replay = app.add_subcommand("replay", "re-run a log through replay backends");
    replay->add_option("--log", replay_args.log, "run log path")->required();
    replay->add_option("--out", replay_args.out, "replayed log output path");
    replay->add_option("--report", replay_args.report, "aggregate report JSON path");

    struct {
        std::string groups, variant = "L1", kl_sign = "calibration_consistent", out;
        double epsilon = 0.01, missing_reward = -1.0;
    } reward_args;
    auto* reward = app.add_subcommand("reward-score", "score rollout groups from JSONL");
    reward->add_option("--groups", reward_args.groups, "rollout groups JSONL")->required();
    reward->add_option("--variant", reward_args.variant,
                       "L1 | L2 | KL | sample_L1 | sample_L2 | sample_KL");
    reward->add_option("--epsilon", reward_args.epsilon, "KL clipping factor in (0,1)");
    reward->add_option("--kl-sign", reward_args.kl_sign, "calibration_consistent | as_printed");
    reward->add_option("--missing-reward", reward_args.missing_reward,
                       "reward for a missing confidence, in [-1,0]");
    reward->add_option("--out", reward_args.out, "breakdown JSONL output path (default stdout)");

    struct {
        std::string log, json, csv;
        int bins = 10;
    } calibrate_args;
    auto* calibrate = app.add_subcommand("calibrate", "calibration metrics from a run log");
    calibrate->add_option("--log", calibrate_args.log, "run log path")->required();
    calibrate->add_option("--bins", calibrate_args.bins, "ECE bin count")
        ->check(CLI::PositiveNumber);
    calibrate->add_option("--json", calibrate_args.json, "report JSON output path");
    calibrate->add_option("--csv", calibrate_args.csv, "reliability table CSV output path");

    struct {
        std::string text, prompt;
    } parse_args;
    auto* parse = app.add_subcommand("parse", "parse one completion text file");
    parse->add_option("--text", parse_args.text, "completion text file")->required();
    parse->add_option("--prompt", parse_args.prompt, "prompt text file for the language check");

    struct {
        std::string config, host = "127.0.0.1";
        int port = 8080;
    } serve_args;
    auto* serve = app.add_subcommand("serve", "gateway mode: POST /answer");
    serve->add_option("--config", serve_args.config, "run configuration JSON")->required();
    serve->add_option("--host", serve_args.host, "bind address");
    serve->add_option("--port", serve_args.port, "bind port");

    CLI11_PARSE(app, argc, argv);

    try {
        if (eval->parsed()) {
            return cmd_eval(eval_args.config, eval_args.record_both, eval_args.out,
                            eval_args.report, eval_args.csv);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_args.log, sweep_args.thresholds, sweep_args.json,
                             sweep_args.csv);
        }
        if (replay->parsed()) return cmd_replay(replay_args.log, replay_args.out, replay_args.report);
        if (reward->parsed()) {
            return cmd_reward_score(reward_args.groups, reward_args.variant, reward_args.epsilon,
                                    reward_args.kl_sign, reward_args.missing_reward,
                                    reward_args.out);
        }
        if (calibrate->parsed()) {
            return cmd_calibrate(calibrate_args.log, calibrate_args.bins, calibrate_args.json,
                                 calibrate_args.csv);
        }
        if (parse->parsed()) return cmd_parse(parse_args.text, parse_args.prompt);
        if (serve->parsed()) return cmd_serve(serve_args.config, serve_args.host, serve_args.port);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
