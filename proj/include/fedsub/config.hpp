#pragma once

#include <string>

#include "fedsub/data.hpp"
#include "fedsub/federation.hpp"

namespace fedsub {

enum class Scenario { Static, Dynamic };
enum class DataSource { Csv, Synthetic };

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::FedSub;
    Scenario scenario = Scenario::Static;
    FusionStrategy fusion = FusionStrategy::OverlappingComponents;
    DepthSetting depth = DepthSetting::partial(2);
    int rounds = 300;
    int clients_per_round = 0; // 0 = all
    int epochs = 1;
    double learning_rate = 0.05;
    int batch_size = 32;
    int neighbors = 3;
    int k_max = 10;
    int reintroduction_period = 50;
    std::uint64_t seed = 1;
    DataSource source = DataSource::Synthetic;
    std::string csv_path;
    SynthConfig synth;
    std::string output_dir = "out";

    ServerConfig server() const;
};

// Strict "key = value" file with one optional [synthetic] table; unknown keys
// are rejected.
ExperimentConfig parse_config(const std::string& path);

// Dataset per the config source, standardized; synthetic data comes from the
// [synthetic] table.
Dataset load_dataset(const ExperimentConfig& cfg);

} // namespace fedsub
