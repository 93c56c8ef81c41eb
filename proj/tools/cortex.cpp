// Desk-scale multi-agent runtime harness: memory sweeps, compression and
// landmark-quality benchmarks, injection equivalence checks, and a scripted
// end-to-end demo. Exits nonzero iff any benchmark verdict fails.

#include "cortex/bench.hpp"
#include "cortex/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using cortex::harness::BenchReport;

void write_reports(const BenchReport& rep, const std::string& out_dir) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    const auto base = std::filesystem::path(out_dir) / rep.name;
    std::ofstream csv(base.string() + ".csv");
    csv << rep.to_csv();
    std::ofstream json(base.string() + ".json");
    json << rep.to_json().dump(2) << '\n';
}

cortex::Script load_script(const std::string& path, int vocab_size) {
    std::ifstream in(path);
    if (!in) throw cortex::config_error("cannot open script file: " + path);
    nlohmann::json j;
    in >> j;
    cortex::Script script;
    for (const auto& entry : j.at("thoughts")) {
        cortex::ScriptEntry se;
        if (entry.contains("tokens")) {
            se.tokens = entry.at("tokens").get<std::vector<int>>();
        } else if (entry.contains("text")) {
            se.tokens = cortex::tokenize_bytes(entry.at("text").get<std::string>());
        } else {
            throw cortex::config_error("script entry needs \"tokens\" or \"text\"");
        }
        for (int t : se.tokens) {
            if (t < 0 || t >= vocab_size)
                throw cortex::config_error("script token outside vocabulary");
        }
        if (entry.contains("forced_score")) {
            se.forced_score = entry.at("forced_score").get<double>();
        }
        script.thoughts.push_back(std::move(se));
    }
    return script;
}

std::string printable(const std::string& raw) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (char c : raw) {
        const auto u = static_cast<unsigned char>(c);
        if (u == '\n' || (u >= 0x20 && u < 0x7f)) {
            out.push_back(c);
        } else {
            out += "\\x";
            out.push_back(hex[u >> 4]);
            out.push_back(hex[u & 0xf]);
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cortex: shared-weight multi-agent inference runtime harness"};

    std::string bench;
    std::vector<int64_t> agents = {10, 50, 100, 1000};
    int k = 64;
    double lambda = 0.5;
    double theta = 0.5;
    uint64_t seed = 42;
    std::string out_dir;
    bool single_lane = false;
    std::string prompt = "the quick brown fox [TASK: check the fox] jumps over the lazy dog";
    std::string script_path;
    int tokens = 64;

    app.add_option("--bench", bench, "memory|compression|landmarks|injection|demo")
        ->required()
        ->check(CLI::IsMember({"memory", "compression", "landmarks", "injection", "demo"}));
    app.add_option("--agents", agents,
                   "agent counts for the memory sweep (cap for the demo)")
        ->delimiter(',');
    app.add_option("--k", k, "landmark count");
    app.add_option("--lambda", lambda, "hybrid mixing weight in [0,1]");
    app.add_option("--theta", theta, "gate threshold in [-1,1]");
    app.add_option("--seed", seed, "model and benchmark seed");
    app.add_option("--out", out_dir, "directory for CSV/JSON reports");
    app.add_flag("--single-lane", single_lane,
                 "run side agents at token boundaries (deterministic)");
    app.add_option("--prompt", prompt, "demo prompt");
    app.add_option("--script", script_path, "demo script JSON file");
    app.add_option("--tokens", tokens, "demo: river tokens to generate");

    CLI11_PARSE(app, argc, argv);

    if (const char* env_seed = std::getenv("CORTEX_SEED")) {
        seed = std::strtoull(env_seed, nullptr, 10);
    }

    cortex::ModelConfig cfg;
    cfg.seed = seed;
    cortex::RuntimeConfig rc;
    rc.k = k;
    rc.lambda = lambda;
    rc.theta = theta;
    rc.single_lane = single_lane;
    rc.river_budget = tokens;
    if (!agents.empty() && bench == "demo")
        rc.max_stream_agents = static_cast<int>(agents.front());

    try {
        cfg.validate();
        rc.validate(cfg);

        if (bench == "demo") {
            std::optional<cortex::Script> script;
            if (!script_path.empty()) script = load_script(script_path, cfg.vocab_size);
            const auto run = cortex::harness::demo(cfg, rc, prompt,
                                                   script ? &*script : nullptr);
            std::cout << "--- transcript (" << run.transcript_tokens.size()
                      << " tokens, prompt " << run.prompt_length << ") ---\n"
                      << printable(run.transcript_text) << "\n--- audit log ---\n"
                      << run.audit_csv();
            if (!run.gates.empty()) std::cout << "--- gates ---\n" << run.gates_csv();
            if (!run.injections.empty())
                std::cout << "--- injections ---\n" << run.injections_csv();
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                const std::filesystem::path dir(out_dir);
                std::ofstream(dir / "transcript.txt") << run.transcript_text;
                std::ofstream(dir / "transcript.json") << run.transcript_json() << '\n';
                std::ofstream(dir / "audit.csv") << run.audit_csv();
                std::ofstream(dir / "gates.csv") << run.gates_csv();
                std::ofstream(dir / "injections.csv") << run.injections_csv();
                std::ofstream(dir / "triggers.csv") << run.triggers_csv();
            }
            return 0;
        }

        BenchReport rep;
        if (bench == "memory") {
            rep = cortex::harness::bench_memory(cfg, rc, agents);
        } else if (bench == "compression") {
            rep = cortex::harness::bench_compression(cfg, k, {64, 4096, 32768});
        } else if (bench == "landmarks") {
            rep = cortex::harness::bench_landmarks(seed, 100, 256, 16, lambda);
        } else { // injection
            rep = cortex::harness::bench_injection(cfg, rc, seed);
        }
        std::cout << rep.to_csv() << '\n' << rep.summary();
        write_reports(rep, out_dir);
        return rep.all_pass() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
