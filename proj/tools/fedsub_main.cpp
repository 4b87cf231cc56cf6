#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fedsub/errors.hpp"
#include "fedsub/harness.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    const fedsub::ExperimentConfig cfg = fedsub::parse_config(config_path);
    const fedsub::ExperimentResult result = fedsub::run_from_config(cfg);

    std::filesystem::create_directories(cfg.output_dir);
    fedsub::write_rounds_csv(cfg.output_dir + "/rounds.csv", result.dataset, result.reports);
    std::ofstream summary(cfg.output_dir + "/summary.json");
    if (!summary) throw std::runtime_error("cannot write summary.json");
    summary << fedsub::summary_json(cfg, result.reports);

    if (!result.reports.empty()) {
        const fedsub::RoundReport& last = result.reports.back();
        std::cout << "final mean f1 " << last.mean_f1 << " (ci95 " << last.ci95_f1
                  << "), mean loss " << last.mean_loss << " (ci95 " << last.ci95_loss << ")\n";
    }
    std::cout << "wrote " << cfg.output_dir << "/rounds.csv and summary.json\n";
    return 0;
}

int cmd_analyze(const std::string& config_path) {
    const fedsub::ExperimentConfig cfg = fedsub::parse_config(config_path);
    const fedsub::Dataset ds = fedsub::load_dataset(cfg);
    std::cout << fedsub::analyze_dataset(ds, cfg.seed);
    return 0;
}

int cmd_merge_test(const std::string& config_path, const std::string& a, const std::string& b) {
    const fedsub::ExperimentConfig cfg = fedsub::parse_config(config_path);
    const fedsub::Dataset ds = fedsub::load_dataset(cfg);
    const fedsub::MergeTestResult result = fedsub::merge_test(cfg, ds, a, b);
    std::cout << fedsub::merge_test_table(result, a, b);
    return 0;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path) {
    const fedsub::ExperimentConfig cfg = fedsub::parse_config(config_path);
    const fedsub::Dataset ds = fedsub::generate_synthetic(cfg.synth);
    fedsub::write_csv(ds, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedSub personalized federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, client_a, client_b, out_path;

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "config file")->required();

    CLI::App* analyze = app.add_subcommand("analyze", "per-class Hopkins statistics");
    analyze->add_option("config", config_path, "config file")->required();

    CLI::App* merge = app.add_subcommand("merge-test", "naive model-averaging disruption test");
    merge->add_option("config", config_path, "config file")->required();
    merge->add_option("--a", client_a, "first client id")->required();
    merge->add_option("--b", client_b, "second client id")->required();

    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
    gen->add_option("config", config_path, "config file")->required();
    gen->add_option("--out", out_path, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (analyze->parsed()) return cmd_analyze(config_path);
        if (merge->parsed()) return cmd_merge_test(config_path, client_a, client_b);
        if (gen->parsed()) return cmd_gen_data(config_path, out_path);
    } catch (const fedsub::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
