#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedsub/config.hpp"
#include "fedsub/federation.hpp"

namespace fedsub {

struct ExperimentResult {
    Dataset dataset;
    std::vector<RoundReport> reports;
};

// Build dataset, split and (for dynamic scenarios) the reintroduction
// schedule from the config, then run all rounds.
ExperimentResult run_from_config(const ExperimentConfig& cfg);

// rounds.csv with columns round,client_id,f1,loss; refuses non-finite values.
void write_rounds_csv(const std::string& path, const Dataset& dataset,
                      const std::vector<RoundReport>& reports);

// JSON summary: config echo, final-round and whole-run aggregates, and
// per-round cluster diagnostics.
std::string summary_json(const ExperimentConfig& cfg, const std::vector<RoundReport>& reports);

// Per-class Hopkins statistic over per-client class prototypes, as JSON.
std::string analyze_dataset(const Dataset& dataset, std::uint64_t seed);

// Local models of two clients before and after naive elementwise averaging.
struct MergeTestResult {
    std::vector<int> labels;
    std::map<int, double> acc_a;        // model A on A's test set
    std::map<int, double> acc_b;        // model B on B's test set
    std::map<int, double> acc_merged_a; // merged model on A's test set
    std::map<int, double> acc_merged_b; // merged model on B's test set
};

MergeTestResult merge_test(const ExperimentConfig& cfg, const Dataset& dataset,
                           const std::string& client_a, const std::string& client_b);

std::string merge_test_table(const MergeTestResult& result, const std::string& client_a,
                             const std::string& client_b);

} // namespace fedsub
