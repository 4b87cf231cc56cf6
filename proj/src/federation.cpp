#include "fedsub/federation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "fedsub/clustering.hpp"
#include "fedsub/errors.hpp"
#include "fedsub/util.hpp"

namespace fedsub {

namespace {

// seed-stream tags
constexpr std::uint64_t kInitTag = 0x1417u;
constexpr std::uint64_t kTrainTag = 0x7EA1u;
constexpr std::uint64_t kSampleTag = 0x5A3Eu;
constexpr std::uint64_t kClusterTag = 0xC157u;

void mean_ci(const std::vector<double>& xs, double& mean, double& ci) {
    const std::size_t n = xs.size();
    mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    if (n < 2) {
        ci = 0.0;
        return;
    }
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    ci = 1.96 * std::sqrt(var / static_cast<double>(n));
}

} // namespace

Federation::Federation(Dataset dataset, Split split, ServerConfig cfg,
                       const DynamicSchedule* schedule)
    : dataset_(std::move(dataset)), split_(std::move(split)), cfg_(std::move(cfg)),
      schedule_(schedule) {
    if (dataset_.clients.empty()) throw DataError("no clients in dataset");
    if (split_.clients.size() != dataset_.clients.size())
        throw ParamError("split does not match dataset");
    const int n = static_cast<int>(dataset_.clients.size());
    if (cfg_.clients_per_round < 0 || cfg_.clients_per_round > n)
        throw ParamError("clients_per_round out of range");

    int max_label = 0;
    for (int y : dataset_.label_universe) max_label = std::max(max_label, y);
    std::vector<std::size_t> dims;
    dims.push_back(static_cast<std::size_t>(dataset_.feature_dim));
    for (std::size_t h : cfg_.hidden_dims) dims.push_back(h);
    dims.push_back(static_cast<std::size_t>(max_label + 1));

    // every client starts from the same seeded initialization
    const Mlp init = make_mlp(dims, mix_seed(cfg_.seed, {kInitTag}));
    states_.resize(dataset_.clients.size());
    for (std::size_t u = 0; u < states_.size(); ++u) {
        states_[u].index = static_cast<int>(u);
        states_[u].id = dataset_.clients[u].id;
        states_[u].model = init;
    }
}

std::vector<Sample> Federation::train_samples(int client, int round) const {
    std::vector<Sample> out;
    for (int i : visible_indices(dataset_, schedule_, client, split_.clients[client].train, round))
        out.push_back(dataset_.clients[client].samples[i]);
    return out;
}

std::vector<Sample> Federation::validation_samples(int client, int round) const {
    std::vector<Sample> out;
    for (int i :
         visible_indices(dataset_, schedule_, client, split_.clients[client].validation, round))
        out.push_back(dataset_.clients[client].samples[i]);
    return out;
}

std::vector<Sample> Federation::test_samples(int client, int round) const {
    std::vector<Sample> out;
    for (int i : visible_indices(dataset_, schedule_, client, split_.clients[client].test, round))
        out.push_back(dataset_.clients[client].samples[i]);
    return out;
}

std::vector<int> Federation::sample_participants(int round) {
    const int n = static_cast<int>(states_.size());
    const int m = cfg_.clients_per_round == 0 ? n : cfg_.clients_per_round;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg_.seed, {kSampleTag, static_cast<std::uint64_t>(round)}));
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

ClientArtifacts Federation::client_round(int client, int round) {
    ClientState& state = states_[client];
    if (!state.pending.empty()) {
        state.model = apply_update(state.model, state.pending, cfg_.depth);
        state.pending = ModelUpdate{};
    }

    const std::vector<Sample> train = train_samples(client, round);
    if (train.empty()) throw DataError("client " + state.id + " has no visible training data");

    TrainConfig tc = cfg_.train;
    tc.rng_seed = mix_seed(cfg_.seed, {kTrainTag, static_cast<std::uint64_t>(round),
                                       static_cast<std::uint64_t>(client)});
    state.model = train_sgd(state.model, train, tc);

    ClientArtifacts artifacts;
    artifacts.prototypes = compute_prototypes(client, train);
    artifacts.subnets = extract_subnetworks(state.model, train, cfg_.depth);
    for (const Sample& s : train) ++artifacts.supports[s.label];

    const std::vector<Sample> val = validation_samples(client, round);
    if (!val.empty())
        artifacts.val_accuracy = evaluate(state.model, val).per_class_accuracy;

    state.last_prototypes = artifacts.prototypes;
    return artifacts;
}

void Federation::evaluate_all(RoundReport& report, int round) {
    const std::size_t n = states_.size();
    report.f1.assign(n, 0.0);
    report.loss.assign(n, 0.0);
    parallel_for(n, [&](std::size_t u) {
        const std::vector<Sample> test = test_samples(static_cast<int>(u), round);
        if (test.empty())
            throw DataError("client " + states_[u].id + " has no visible test data");
        const Metrics m = evaluate(states_[u].model, test);
        report.f1[u] = m.macro_f1;
        report.loss[u] = m.mean_loss;
    });
    mean_ci(report.f1, report.mean_f1, report.ci95_f1);
    mean_ci(report.loss, report.mean_loss, report.ci95_loss);
}

RoundReport Federation::server_round(int round) {
    RoundReport report;
    report.round = round;
    report.participants = sample_participants(round);
    const std::size_t m = report.participants.size();

    std::vector<ClientArtifacts> artifacts(m);
    parallel_for(m, [&](std::size_t i) {
        artifacts[i] = client_round(report.participants[i], round);
    });

    // Alg. 3: collaborative-filtering completion of missing prototypes.
    std::vector<PrototypeSet> sets;
    sets.reserve(m);
    for (const ClientArtifacts& a : artifacts) sets.push_back(a.prototypes);
    PredictionOutcome completed =
        predict_missing_prototypes(sets, dataset_.label_universe, cfg_.neighbors);
    report.predicted_prototypes = completed.predicted;

    std::map<int, std::size_t> slot_of; // client index -> artifact slot
    for (std::size_t i = 0; i < m; ++i) slot_of[report.participants[i]] = i;

    // Per class: cluster the prototype holders, fuse each cluster, and hand
    // every member a pointer to its cluster's fused matrices.
    std::deque<FusedCluster> fused_store;
    std::map<int, std::vector<const FusedCluster*>> clusters_of_client;
    for (int label : dataset_.label_universe) {
        std::vector<int> holders;
        std::vector<std::vector<double>> protos;
        for (std::size_t i = 0; i < m; ++i) {
            const PrototypeSet& ps = completed.sets[i];
            auto it = ps.entries.find(label);
            if (it == ps.entries.end()) continue;
            holders.push_back(report.participants[i]);
            protos.push_back(it->second.vec);
        }
        if (holders.empty()) continue;

        const ClusterAssignment assignment = select_clusters(
            label, holders, protos, cfg_.k_max,
            mix_seed(cfg_.seed, {kClusterTag, static_cast<std::uint64_t>(round),
                                 static_cast<std::uint64_t>(label)}));
        report.clusters_per_class[label] = static_cast<int>(assignment.clusters.size());

        for (const std::vector<int>& cluster : assignment.clusters) {
            std::vector<const Subnetwork*> member_subnets;
            std::vector<MemberScore> member_scores;
            std::vector<int> member_ids;
            for (int u : cluster) {
                const ClientArtifacts& a = artifacts[slot_of[u]];
                auto it = a.subnets.find(label);
                if (it == a.subnets.end()) continue; // predicted-only member
                member_subnets.push_back(&it->second);
                member_ids.push_back(u);
                MemberScore ms;
                ms.client = u;
                ms.support = a.supports.count(label) ? a.supports.at(label) : 0;
                ms.accuracy =
                    a.val_accuracy.count(label) ? a.val_accuracy.at(label) : 0.0;
                member_scores.push_back(ms);
            }
            if (member_subnets.empty()) continue; // nothing to fuse for this cluster

            const std::vector<double> scores = score_clients(member_scores, cfg_.strategy);
            FusedCluster fused;
            switch (cfg_.strategy) {
            case FusionStrategy::ClusterAvg:
                fused = fuse_cluster_avg(member_subnets, scores);
                break;
            case FusionStrategy::ClusterLeadership:
                fused = fuse_cluster_leadership(member_subnets, scores, member_ids);
                break;
            case FusionStrategy::OverlappingComponents:
                fused = fuse_overlapping(member_subnets, scores);
                break;
            }
            fused_store.push_back(std::move(fused));
            for (int u : cluster) clusters_of_client[u].push_back(&fused_store.back());
        }
    }

    // Assemble and stage one update per participant; it is applied when the
    // client next participates.
    for (std::size_t i = 0; i < m; ++i) {
        const int u = report.participants[i];
        ClientState& state = states_[u];
        auto it = clusters_of_client.find(u);
        if (it == clusters_of_client.end()) continue;
        ClientUpdate upd =
            assemble_client_update(u, state.model, union_mask(artifacts[i].subnets), it->second,
                                   cfg_.strategy, cfg_.depth);
        if (cfg_.strategy == FusionStrategy::OverlappingComponents && !upd.update.empty())
            normalize_layers(upd.update, layer_norms(state.model, cfg_.depth));
        state.pending = std::move(upd.update);
    }

    evaluate_all(report, round);
    return report;
}

RoundReport Federation::fedavg_round(int round) {
    RoundReport report;
    report.round = round;
    report.participants = sample_participants(round);
    const std::size_t m = report.participants.size();

    std::vector<long> sizes(m, 0);
    parallel_for(m, [&](std::size_t i) {
        const int u = report.participants[i];
        const std::vector<Sample> train = train_samples(u, round);
        if (train.empty())
            throw DataError("client " + states_[u].id + " has no visible training data");
        TrainConfig tc = cfg_.train;
        tc.rng_seed = mix_seed(cfg_.seed, {kTrainTag, static_cast<std::uint64_t>(round),
                                           static_cast<std::uint64_t>(u)});
        states_[u].model = train_sgd(states_[u].model, train, tc);
        sizes[i] = static_cast<long>(train.size());
    });

    std::vector<const Mlp*> models;
    models.reserve(m);
    for (int u : report.participants) models.push_back(&states_[u].model);
    const Mlp global = fedavg_average(models, sizes);
    for (ClientState& state : states_) state.model = global;

    evaluate_all(report, round);
    return report;
}

Mlp fedavg_average(const std::vector<const Mlp*>& models, const std::vector<long>& sizes) {
    if (models.empty() || models.size() != sizes.size())
        throw ParamError("fedavg_average needs matching models and sizes");
    double total = 0.0;
    for (long s : sizes) {
        if (s < 0) throw ParamError("negative sample size");
        total += static_cast<double>(s);
    }
    if (total <= 0.0) throw ParamError("total sample size must be positive");

    Mlp global = *models.front();
    for (DenseLayer& layer : global.layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
    for (std::size_t i = 0; i < models.size(); ++i) {
        const double w = static_cast<double>(sizes[i]) / total;
        for (std::size_t k = 0; k < global.layers.size(); ++k) {
            const DenseLayer& src = models[i]->layers[k];
            DenseLayer& dst = global.layers[k];
            if (!dst.weights.same_shape(src.weights))
                throw ShapeError("models disagree on layer shapes");
            for (std::size_t j = 0; j < dst.weights.data.size(); ++j)
                dst.weights.data[j] += w * src.weights.data[j];
            for (std::size_t j = 0; j < dst.biases.size(); ++j)
                dst.biases[j] += w * src.biases[j];
        }
    }
    return global;
}

std::vector<RoundReport> run_experiment(Algorithm algorithm, Dataset dataset, Split split,
                                        const ServerConfig& cfg,
                                        const DynamicSchedule* schedule) {
    Federation fed(std::move(dataset), std::move(split), cfg, schedule);
    std::vector<RoundReport> reports;
    reports.reserve(cfg.rounds);
    for (int round = 0; round < cfg.rounds; ++round) {
        reports.push_back(algorithm == Algorithm::FedSub ? fed.server_round(round)
                                                         : fed.fedavg_round(round));
    }
    return reports;
}

} // namespace fedsub
