#include "fedsub/prototypes.hpp"

#include <algorithm>
#include <cmath>

#include "fedsub/errors.hpp"
#include "fedsub/matrix.hpp"

namespace fedsub {

PrototypeSet compute_prototypes(int client, const std::vector<Sample>& data) {
    if (data.empty()) throw DataError("empty dataset");
    PrototypeSet set;
    set.client = client;
    std::map<int, long> counts;
    for (const Sample& s : data) {
        auto [it, inserted] = set.entries.try_emplace(s.label);
        Prototype& p = it->second;
        if (inserted) {
            p.label = s.label;
            p.vec.assign(s.features.size(), 0.0);
            p.provenance = Provenance::Computed;
        }
        if (p.vec.size() != s.features.size())
            throw ShapeError("inconsistent feature dimension in dataset");
        for (std::size_t i = 0; i < s.features.size(); ++i) p.vec[i] += s.features[i];
        ++counts[s.label];
    }
    for (auto& [label, proto] : set.entries) {
        const double inv = 1.0 / static_cast<double>(counts[label]);
        for (double& v : proto.vec) v *= inv;
    }
    return set;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = euclidean_norm(a), nb = euclidean_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot / (na * nb);
}

} // namespace

double client_similarity(const PrototypeSet& a, const PrototypeSet& b) {
    double total = 0.0;
    int shared = 0;
    for (const auto& [label, pa] : a.entries) {
        if (pa.provenance != Provenance::Computed) continue;
        auto it = b.entries.find(label);
        if (it == b.entries.end() || it->second.provenance != Provenance::Computed) continue;
        total += cosine(pa.vec, it->second.vec);
        ++shared;
    }
    return shared == 0 ? 0.0 : total / static_cast<double>(shared);
}

PredictionOutcome predict_missing_prototypes(const std::vector<PrototypeSet>& all,
                                             const std::vector<int>& label_universe, int n) {
    if (n < 1) throw ParamError("neighbor count must be >= 1");
    PredictionOutcome out;
    out.sets = all;

    const std::size_t m = all.size();
    // Pairwise similarities over computed prototypes only, so predictions
    // never bootstrap off other predictions within a round.
    std::vector<std::vector<double>> sim(m, std::vector<double>(m, 0.0));
    for (std::size_t u = 0; u < m; ++u)
        for (std::size_t v = u + 1; v < m; ++v)
            sim[u][v] = sim[v][u] = client_similarity(all[u], all[v]);

    for (std::size_t u = 0; u < m; ++u) {
        for (int label : label_universe) {
            if (out.sets[u].has(label)) continue;

            std::vector<std::size_t> donors;
            for (std::size_t v = 0; v < m; ++v) {
                if (v == u) continue;
                auto it = all[v].entries.find(label);
                if (it != all[v].entries.end() &&
                    it->second.provenance == Provenance::Computed)
                    donors.push_back(v);
            }
            if (donors.empty()) {
                out.unfilled.emplace_back(static_cast<int>(u), label);
                continue;
            }

            const std::size_t dim = all[donors.front()].entries.at(label).vec.size();
            Prototype pred;
            pred.label = label;
            pred.provenance = Provenance::Predicted;
            pred.vec.assign(dim, 0.0);

            std::vector<std::size_t> positive;
            for (std::size_t v : donors)
                if (sim[u][v] > 0.0) positive.push_back(v);

            if (positive.empty()) {
                // Similarity-weighted averaging needs a positive weight sum;
                // degrade to the unweighted donor mean.
                for (std::size_t v : donors) {
                    const std::vector<double>& pv = all[v].entries.at(label).vec;
                    for (std::size_t i = 0; i < dim; ++i) pred.vec[i] += pv[i];
                }
                for (double& x : pred.vec) x /= static_cast<double>(donors.size());
            } else {
                std::stable_sort(positive.begin(), positive.end(),
                                 [&](std::size_t x, std::size_t y) {
                                     if (sim[u][x] != sim[u][y]) return sim[u][x] > sim[u][y];
                                     return x < y;
                                 });
                if (positive.size() > static_cast<std::size_t>(n))
                    positive.resize(static_cast<std::size_t>(n));
                double weight_sum = 0.0;
                for (std::size_t v : positive) {
                    const double w = sim[u][v];
                    const std::vector<double>& pv = all[v].entries.at(label).vec;
                    for (std::size_t i = 0; i < dim; ++i) pred.vec[i] += w * pv[i];
                    weight_sum += w;
                }
                for (double& x : pred.vec) x /= weight_sum;
            }
            out.sets[u].entries.emplace(label, std::move(pred));
            ++out.predicted;
        }
    }
    return out;
}

} // namespace fedsub
