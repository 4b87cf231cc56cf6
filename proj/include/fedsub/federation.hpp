#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsub/data.hpp"
#include "fedsub/fusion.hpp"
#include "fedsub/prototypes.hpp"

namespace fedsub {

enum class Algorithm { FedSub, FedAvg };

struct ServerConfig {
    int rounds = 300;
    int clients_per_round = 0; // 0 = every client participates
    FusionStrategy strategy = FusionStrategy::OverlappingComponents;
    DepthSetting depth = DepthSetting::partial(2);
    int neighbors = 3;
    int k_max = 10;
    std::vector<std::size_t> hidden_dims = {128, 512};
    TrainConfig train; // learning rate, epochs E, batch size
    std::uint64_t seed = 1;
};

struct ClientState {
    int index = 0;
    std::string id;
    Mlp model;
    PrototypeSet last_prototypes;
    ModelUpdate pending; // delivered at the next participation
};

struct RoundReport {
    int round = 0;
    std::vector<double> f1;   // per client index
    std::vector<double> loss; // per client index
    double mean_f1 = 0.0, ci95_f1 = 0.0;
    double mean_loss = 0.0, ci95_loss = 0.0;
    std::map<int, int> clusters_per_class;
    int predicted_prototypes = 0;
    std::vector<int> participants;
};

// Everything a client uploads after its local round.
struct ClientArtifacts {
    PrototypeSet prototypes;
    std::map<int, Subnetwork> subnets;
    std::map<int, long> supports;       // per-class training-set size
    std::map<int, double> val_accuracy; // per-class validation accuracy
};

class Federation {
  public:
    Federation(Dataset dataset, Split split, ServerConfig cfg,
               const DynamicSchedule* schedule = nullptr);

    // Local round: apply any pending update, train E epochs, then recompute
    // prototypes and subnetworks from the round's visible training data.
    ClientArtifacts client_round(int client, int round);

    // One FedSub communication round: sample, run clients, predict missing
    // prototypes, cluster per class, fuse, assemble updates, evaluate.
    RoundReport server_round(int round);

    // FedAvg baseline: sampled clients train; every model is replaced by the
    // sample-size-weighted average of the participants' models.
    RoundReport fedavg_round(int round);

    std::vector<ClientState>& clients() { return states_; }
    const Dataset& dataset() const { return dataset_; }
    const ServerConfig& config() const { return cfg_; }

    std::vector<Sample> train_samples(int client, int round) const;
    std::vector<Sample> validation_samples(int client, int round) const;
    std::vector<Sample> test_samples(int client, int round) const;

  private:
    std::vector<int> sample_participants(int round);
    void evaluate_all(RoundReport& report, int round);

    Dataset dataset_;
    Split split_;
    ServerConfig cfg_;
    const DynamicSchedule* schedule_;
    std::vector<ClientState> states_;
};

// Elementwise weighted average of models (weights proportional to sizes).
Mlp fedavg_average(const std::vector<const Mlp*>& models, const std::vector<long>& sizes);

std::vector<RoundReport> run_experiment(Algorithm algorithm, Dataset dataset, Split split,
                                        const ServerConfig& cfg,
                                        const DynamicSchedule* schedule = nullptr);

} // namespace fedsub
