#pragma once

#include <map>
#include <utility>
#include <vector>

#include "fedsub/nn.hpp"

namespace fedsub {

enum class Provenance { Computed, Predicted };

// Per-class mean feature vector of one client's local data.
struct Prototype {
    int label = 0;
    std::vector<double> vec;
    Provenance provenance = Provenance::Computed;
};

struct PrototypeSet {
    int client = 0; // client index
    std::map<int, Prototype> entries;

    bool has(int label) const { return entries.count(label) != 0; }
};

PrototypeSet compute_prototypes(int client, const std::vector<Sample>& data);

// Mean cosine similarity over labels both clients hold with computed
// provenance; 0 when the shared-label set is empty. A zero-norm prototype
// contributes 0 to the average.
double client_similarity(const PrototypeSet& a, const PrototypeSet& b);

struct PredictionOutcome {
    std::vector<PrototypeSet> sets;
    int predicted = 0;
    // (client, label) pairs that stayed missing because no donor exists.
    std::vector<std::pair<int, int>> unfilled;
};

// Fill each client's missing labels with the similarity-weighted average of
// the n most similar donors holding a computed prototype for that label.
// Clients with no positive-similarity donor fall back to the plain mean of
// all donors. Computed entries are never touched.
PredictionOutcome predict_missing_prototypes(const std::vector<PrototypeSet>& all,
                                             const std::vector<int>& label_universe, int n);

} // namespace fedsub
