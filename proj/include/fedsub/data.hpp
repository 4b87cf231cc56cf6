#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsub/nn.hpp"

namespace fedsub {

struct ClientData {
    std::string id;
    std::vector<Sample> samples;
};

struct Dataset {
    int feature_dim = 0;
    std::vector<int> label_universe; // sorted, distinct
    std::vector<ClientData> clients;

    int client_index(const std::string& id) const; // -1 when unknown
};

// CSV contract: header "client_id,label,f0,...,f{d-1}", one sample per row.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& dataset, const std::string& path);

// Shift/scale every feature dimension to zero mean and unit variance,
// computed over the pooled samples of all clients.
void standardize(Dataset& dataset);

// Synthetic non-IID generator: global class means plus a per-client,
// per-class jitter offset; per-client label proportions from a symmetric
// Dirichlet (small concentration = heavy label skew). With groups > 0 the
// per-class offsets come from `groups` archetypes per class, drawn from a
// pattern pool shared across classes: clients of the same group form a tight
// per-class cluster, and a pool location claimed by different classes for
// different clients makes their distributions genuinely conflict. groups = 0
// gives every client an independent offset instead.
struct SynthConfig {
    int clients = 20;
    int classes = 6;
    int feature_dim = 8;
    int samples_per_client = 300;
    double class_scale = 0.25;   // spread of the global class means
    double jitter = 3.0;         // archetype / per-client offset scale
    double noise = 0.5;          // within-class sample stddev
    double concentration = 0.3;  // Dirichlet concentration for label skew
    int groups = 4;              // archetypes per class (0 = iid offsets)
    std::uint64_t seed = 1;
};

Dataset generate_synthetic(const SynthConfig& cfg);

// Per-client index sets; validation is carved out of the training portion
// and held out of training for scoring.
struct Split {
    struct ClientSplit {
        std::vector<int> train;
        std::vector<int> validation;
        std::vector<int> test;
    };
    std::vector<ClientSplit> clients;
};

// Per client and class: floor(test_fraction * n) test samples (at least one
// when the class has two or more), then 10% of the remaining train samples
// per class become validation.
Split stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Withheld labels per affected client, reintroduced one per period.
struct DynamicSchedule {
    struct ClientPlan {
        std::vector<int> withheld; // reintroduction order
    };
    std::vector<ClientPlan> clients;
    int period = 0; // rounds between reintroductions (R)

    // Visible from round (position in withheld list + 1) * period onwards.
    bool label_visible(int client, int label, int round) const;
};

DynamicSchedule make_dynamic_schedule(const Dataset& dataset, double affected_fraction,
                                      int period, std::uint64_t seed);

// Indices of `candidates` whose sample labels are visible this round.
std::vector<int> visible_indices(const Dataset& dataset, const DynamicSchedule* schedule,
                                 int client, const std::vector<int>& candidates, int round);

} // namespace fedsub
