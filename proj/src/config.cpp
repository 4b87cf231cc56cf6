#include "fedsub/config.hpp"

#include <fstream>
#include <limits>

#include "fedsub/errors.hpp"

namespace fedsub {

ServerConfig ExperimentConfig::server() const {
    ServerConfig s;
    s.rounds = rounds;
    s.clients_per_round = clients_per_round;
    s.strategy = fusion;
    s.depth = depth;
    s.neighbors = neighbors;
    s.k_max = k_max;
    s.train.learning_rate = learning_rate;
    s.train.epochs = epochs;
    s.train.batch_size = batch_size;
    s.seed = seed;
    return s;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

long to_long(const std::string& key, const std::string& value, long lo,
             long hi = std::numeric_limits<long>::max()) {
    long v = 0;
    try {
        std::size_t pos = 0;
        v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + value + "' is not an integer");
    }
    if (v < lo || v > hi)
        throw ConfigError(key + ": value " + value + " out of range");
    return v;
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + value + "' is not a number");
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);

    ExperimentConfig cfg;
    bool saw_csv_path = false, saw_depth_layers = false;
    std::string section; // "" or "synthetic"
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "synthetic")
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");

        if (section == "synthetic") {
            if (key == "clients")
                cfg.synth.clients = static_cast<int>(to_long(key, value, 1));
            else if (key == "classes")
                cfg.synth.classes = static_cast<int>(to_long(key, value, 2));
            else if (key == "feature_dim")
                cfg.synth.feature_dim = static_cast<int>(to_long(key, value, 1));
            else if (key == "samples_per_client")
                cfg.synth.samples_per_client = static_cast<int>(to_long(key, value, 1));
            else if (key == "class_scale")
                cfg.synth.class_scale = to_double(key, value);
            else if (key == "jitter")
                cfg.synth.jitter = to_double(key, value);
            else if (key == "noise")
                cfg.synth.noise = to_double(key, value);
            else if (key == "concentration")
                cfg.synth.concentration = to_double(key, value);
            else if (key == "groups")
                cfg.synth.groups = static_cast<int>(to_long(key, value, 0));
            else if (key == "seed")
                cfg.synth.seed = static_cast<std::uint64_t>(to_long(key, value, 0));
            else
                throw ConfigError("unknown key '" + key + "' in [synthetic]");
            continue;
        }

        if (key == "algorithm") {
            if (value == "fedsub")
                cfg.algorithm = Algorithm::FedSub;
            else if (value == "fedavg")
                cfg.algorithm = Algorithm::FedAvg;
            else
                throw ConfigError("algorithm: expected fedsub or fedavg, got '" + value + "'");
        } else if (key == "scenario") {
            if (value == "static")
                cfg.scenario = Scenario::Static;
            else if (value == "dynamic")
                cfg.scenario = Scenario::Dynamic;
            else
                throw ConfigError("scenario: expected static or dynamic, got '" + value + "'");
        } else if (key == "fusion") {
            if (value == "cluster_avg")
                cfg.fusion = FusionStrategy::ClusterAvg;
            else if (value == "leadership")
                cfg.fusion = FusionStrategy::ClusterLeadership;
            else if (value == "overlapping")
                cfg.fusion = FusionStrategy::OverlappingComponents;
            else
                throw ConfigError(
                    "fusion: expected cluster_avg, leadership or overlapping, got '" + value +
                    "'");
        } else if (key == "depth") {
            if (value == "full")
                cfg.depth = DepthSetting::full();
            else if (value == "partial")
                cfg.depth = DepthSetting::partial(saw_depth_layers ? cfg.depth.layers : 2);
            else
                throw ConfigError("depth: expected full or partial, got '" + value + "'");
        } else if (key == "partial_layers") {
            saw_depth_layers = true;
            cfg.depth.layers = static_cast<int>(to_long(key, value, 1));
        } else if (key == "rounds") {
            cfg.rounds = static_cast<int>(to_long(key, value, 0));
        } else if (key == "clients_per_round") {
            cfg.clients_per_round = static_cast<int>(to_long(key, value, 0));
        } else if (key == "epochs") {
            cfg.epochs = static_cast<int>(to_long(key, value, 1));
        } else if (key == "learning_rate") {
            cfg.learning_rate = to_double(key, value);
            if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<int>(to_long(key, value, 1));
        } else if (key == "neighbors") {
            cfg.neighbors = static_cast<int>(to_long(key, value, 1));
        } else if (key == "k_max") {
            cfg.k_max = static_cast<int>(to_long(key, value, 2));
        } else if (key == "reintroduction_period") {
            cfg.reintroduction_period = static_cast<int>(to_long(key, value, 1));
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(to_long(key, value, 0));
        } else if (key == "data") {
            if (value == "synthetic")
                cfg.source = DataSource::Synthetic;
            else if (value == "csv")
                cfg.source = DataSource::Csv;
            else
                throw ConfigError("data: expected synthetic or csv, got '" + value + "'");
        } else if (key == "csv_path") {
            cfg.csv_path = value;
            saw_csv_path = true;
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }

    if (cfg.source == DataSource::Csv && !saw_csv_path)
        throw ConfigError("csv_path: required when data = csv");
    return cfg;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    Dataset ds = cfg.source == DataSource::Csv ? load_csv(cfg.csv_path)
                                               : generate_synthetic(cfg.synth);
    standardize(ds);
    return ds;
}

} // namespace fedsub
