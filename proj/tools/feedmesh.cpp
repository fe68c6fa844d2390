#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "feedmesh/engine.hpp"
#include "feedmesh/experiment.hpp"
#include "feedmesh/generator.hpp"

using namespace feedmesh;

namespace {

int cmd_run(const std::string& config_path, const std::string& faults_path) {
    auto config = harness::ExperimentConfig::parse_file(config_path);
    if (!faults_path.empty()) config.fault_path = faults_path;
    auto result = harness::run_experiment(config);
    std::cout << result.to_text();
    if (!result.identity_holds || result.budget_violations > 0) {
        std::cerr << "error: accounting identity violated\n";
        return 2;
    }
    return 0;
}

int cmd_gen(int port, double rate, double duration, std::uint64_t seed, const std::string& tag) {
    adaptors::TcpGeneratorOptions options;
    options.port = port;
    options.rate = rate;
    options.duration_seconds = duration;
    options.seed = seed;
    options.tag = tag;
    auto sent = adaptors::run_tcp_generator(options);
    std::cout << "sent " << sent << " records\n";
    return 0;
}

int cmd_summarize(const std::string& csv_path) {
    auto summary = harness::summarize_file(csv_path);
    std::cout << summary.to_text();
    return summary.identity_holds ? 0 : 2;
}

// Interactive / scripted DDL against a fresh simulated cluster. Statements
// run as they arrive; `show catalog;` and `show pipelines;` print state, and
// the simulation advances --ticks after the script ends.
int cmd_ddl(const std::string& ddl_path, size_t nodes, std::uint64_t seed, Tick ticks) {
    EngineConfig ec;
    ec.nodes = nodes;
    ec.seed = seed;
    Engine engine(ec);

    std::string text;
    if (!ddl_path.empty()) {
        std::ifstream in(ddl_path);
        if (!in) {
            std::cerr << "error: cannot open " << ddl_path << "\n";
            return 1;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    } else {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        text = buf.str();
    }

    int failures = 0;
    for (const auto& stmt : ddl::split_statements(text)) {
        try {
            engine.apply_one(stmt);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            ++failures;
        }
    }
    if (ticks > 0) {
        engine.run_until(ticks);
        engine.finalize();
        std::cout << engine.show_pipelines();
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedmesh: a data-feed ingestion engine on a simulated cluster"};
    app.require_subcommand(1);

    std::string config_path;
    std::string faults_path;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "experiment config (key=value)")->required();
    run->add_option("--faults", faults_path, "fault script path (overrides the config)");

    int port = 9000;
    double rate = 1000;
    double duration = 10;
    std::uint64_t seed = 1;
    std::string tag = "g0";
    auto* gen = app.add_subcommand("gen", "real-mode tweet generator (push source over TCP)");
    gen->add_option("--port", port, "listen port");
    gen->add_option("--rate", rate, "records per second");
    gen->add_option("--duration", duration, "seconds to run");
    gen->add_option("--seed", seed, "content seed");
    gen->add_option("--tag", tag, "tweetId prefix");

    std::string csv_path;
    auto* summarize = app.add_subcommand("summarize", "summarize a metrics CSV");
    summarize->add_option("csv", csv_path, "metrics CSV path")->required();

    std::string ddl_path;
    size_t nodes = 4;
    std::uint64_t ddl_seed = 42;
    Tick ticks = 0;
    auto* ddl = app.add_subcommand("ddl", "apply DDL statements (file or stdin) on a sim cluster");
    ddl->add_option("--ddl", ddl_path, "statement file; stdin when omitted");
    ddl->add_option("--nodes", nodes, "simulated node count");
    ddl->add_option("--seed", ddl_seed, "engine seed");
    ddl->add_option("--ticks", ticks, "ticks to simulate after the script");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, faults_path);
        if (gen->parsed()) return cmd_gen(port, rate, duration, seed, tag);
        if (summarize->parsed()) return cmd_summarize(csv_path);
        if (ddl->parsed()) return cmd_ddl(ddl_path, nodes, ddl_seed, ticks);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
