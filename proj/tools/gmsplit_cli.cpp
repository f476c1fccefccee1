// gmsplit command-line front end: gen-library, truth, run, compare.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gmsplit/harness.hpp"

namespace {

struct RunFlags {
    std::string scenario = "polar";
    std::vector<std::string> heuristics;
    std::string library;
    std::string out = "out";
    std::string config;
    std::string madem_cov;
    std::string propagation;
    int depth = -1;
    int L = 0;
    double lambda = 0.0;
    double gamma = -1.0;
    double threshold = -1.0;
    long long mc_samples = -1;
    long long seed = -1;
    unsigned threads = 0;
};

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("--scenario", f.scenario, "polar | twobody | cr3bp-nrho");
    cmd->add_option("--heuristics", f.heuristics, "comma-separated heuristic names (default: all)")->delimiter(',');
    cmd->add_option("--depth", f.depth, "recursion depth");
    cmd->add_option("--library", f.library, "split library file (JSONL)");
    cmd->add_option("--L", f.L, "library entry size");
    cmd->add_option("--lambda", f.lambda, "library entry variance penalty");
    cmd->add_option("--mc-samples", f.mc_samples, "Monte Carlo truth sample count");
    cmd->add_option("--seed", f.seed, "Monte Carlo seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--gamma", f.gamma, "weight exponent of the adaptive criterion");
    cmd->add_option("--threshold", f.threshold, "adaptive split threshold (turns benchmark mode off)");
    cmd->add_option("--madem-cov", f.madem_cov, "approx | linear | mc");
    cmd->add_option("--propagation", f.propagation, "linear | unscented");
    cmd->add_option("--config", f.config, "JSON config; its keys override flags");
    cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");
}

// Flags become JSON keys so that a config file can be merged on top.
gmsplit::RunConfig resolve(const RunFlags& f)
{
    nlohmann::json j;
    j["scenario"] = f.scenario;
    j["out"] = f.out;
    j["threads"] = f.threads;
    if (!f.heuristics.empty()) {
        j["heuristics"] = f.heuristics;
    }
    if (f.depth >= 0) {
        j["depth"] = f.depth;
    }
    if (!f.library.empty()) {
        j["library"] = f.library;
    }
    if (f.L > 0) {
        j["L"] = f.L;
    }
    if (f.lambda > 0.0) {
        j["lambda"] = f.lambda;
    }
    if (f.mc_samples >= 0) {
        j["samples"] = f.mc_samples;
    }
    if (f.seed >= 0) {
        j["seed"] = f.seed;
    }
    if (f.gamma >= 0.0) {
        j["gamma"] = f.gamma;
    }
    if (f.threshold >= 0.0) {
        j["threshold"] = f.threshold;
        j["benchmark"] = false;
    }
    if (!f.madem_cov.empty()) {
        j["madem_cov"] = f.madem_cov;
    }
    if (!f.propagation.empty()) {
        j["propagation"] = f.propagation;
    }
    if (!f.config.empty()) {
        j.merge_patch(gmsplit::read_json_file(f.config));
    }
    return gmsplit::resolve_run_config(j);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian-mixture splitting for nonlinear uncertainty propagation"};
    app.require_subcommand(1);

    std::vector<int> lib_L{3};
    std::vector<double> lib_lambda{1e-3};
    std::string lib_out = "library.jsonl";
    auto* gen = app.add_subcommand("gen-library", "optimize univariate split entries and write a library");
    gen->add_option("--L", lib_L, "entry sizes")->delimiter(',');
    gen->add_option("--lambda", lib_lambda, "variance penalties")->delimiter(',');
    gen->add_option("--out", lib_out, "output file");

    RunFlags truth_flags;
    auto* truth = app.add_subcommand("truth", "write the analytic-truth marker or the Monte Carlo sample cache");
    add_run_flags(truth, truth_flags);

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "split, propagate and score each heuristic");
    add_run_flags(run, run_flags);

    std::vector<std::string> csvs;
    std::vector<std::string> labels;
    std::string cmp_out;
    auto* cmp = app.add_subcommand("compare", "join metric CSVs on the method column");
    cmp->add_option("csv", csvs, "metric CSV files")->required();
    cmp->add_option("--labels", labels, "column prefixes, one per CSV")->delimiter(',');
    cmp->add_option("--out", cmp_out, "output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto lib = gmsplit::cmd_gen_library(lib_L, lib_lambda, lib_out);
            std::cerr << "wrote " << lib.size() << " entries to " << lib_out << "\n";
            return 0;
        }
        if (*truth) {
            const auto r = gmsplit::cmd_truth(resolve(truth_flags), false);
            std::cout << r.path << "\n";
            return 0;
        }
        if (*run) {
            const auto cfg = resolve(run_flags);
            std::cerr << "config hash " << cfg.hash() << "\n";
            const auto r = gmsplit::cmd_run(cfg);
            std::cout << r.csv;
            for (const auto& o : r.outcomes) {
                if (!o.ok) {
                    std::cerr << gmsplit::to_string(o.kind) << ": " << o.error << "\n";
                }
            }
            return r.any_error ? 2 : 0;
        }
        if (*cmp) {
            const auto table = gmsplit::cmd_compare(csvs, labels);
            if (cmp_out.empty()) {
                std::cout << table;
            } else {
                gmsplit::write_text(cmp_out, table);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
