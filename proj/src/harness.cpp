#include "fedsub/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedsub/clustering.hpp"
#include "fedsub/errors.hpp"
#include "fedsub/util.hpp"

namespace fedsub {

namespace {

constexpr std::uint64_t kMergeTag = 0x3E26u;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

ExperimentResult run_from_config(const ExperimentConfig& cfg) {
    ExperimentResult result;
    result.dataset = load_dataset(cfg);
    const Split split = stratified_split(result.dataset, 0.30, cfg.seed);

    DynamicSchedule schedule;
    const DynamicSchedule* schedule_ptr = nullptr;
    if (cfg.scenario == Scenario::Dynamic) {
        schedule =
            make_dynamic_schedule(result.dataset, 0.6, cfg.reintroduction_period, cfg.seed);
        schedule_ptr = &schedule;
    }
    result.reports =
        run_experiment(cfg.algorithm, result.dataset, split, cfg.server(), schedule_ptr);
    return result;
}

void write_rounds_csv(const std::string& path, const Dataset& dataset,
                      const std::vector<RoundReport>& reports) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "round,client_id,f1,loss\n";
    for (const RoundReport& r : reports) {
        for (std::size_t u = 0; u < r.f1.size(); ++u) {
            if (!std::isfinite(r.f1[u]) || !std::isfinite(r.loss[u]))
                throw std::runtime_error("non-finite metric for client " +
                                         dataset.clients[u].id);
            out << r.round << "," << dataset.clients[u].id << "," << fmt_double(r.f1[u]) << ","
                << fmt_double(r.loss[u]) << "\n";
        }
    }
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RoundReport>& reports) {
    nlohmann::ordered_json j;

    nlohmann::ordered_json conf;
    conf["algorithm"] = cfg.algorithm == Algorithm::FedSub ? "fedsub" : "fedavg";
    conf["scenario"] = cfg.scenario == Scenario::Static ? "static" : "dynamic";
    switch (cfg.fusion) {
    case FusionStrategy::ClusterAvg: conf["fusion"] = "cluster_avg"; break;
    case FusionStrategy::ClusterLeadership: conf["fusion"] = "leadership"; break;
    case FusionStrategy::OverlappingComponents: conf["fusion"] = "overlapping"; break;
    }
    conf["depth"] = cfg.depth.kind == DepthSetting::Kind::Full ? "full" : "partial";
    if (cfg.depth.kind == DepthSetting::Kind::Partial) conf["partial_layers"] = cfg.depth.layers;
    conf["rounds"] = cfg.rounds;
    conf["clients_per_round"] = cfg.clients_per_round;
    conf["epochs"] = cfg.epochs;
    conf["learning_rate"] = cfg.learning_rate;
    conf["batch_size"] = cfg.batch_size;
    conf["neighbors"] = cfg.neighbors;
    conf["k_max"] = cfg.k_max;
    conf["reintroduction_period"] = cfg.reintroduction_period;
    conf["seed"] = cfg.seed;
    conf["data"] = cfg.source == DataSource::Csv ? "csv" : "synthetic";
    if (cfg.source == DataSource::Csv) {
        conf["csv_path"] = cfg.csv_path;
    } else {
        nlohmann::ordered_json synth;
        synth["clients"] = cfg.synth.clients;
        synth["classes"] = cfg.synth.classes;
        synth["feature_dim"] = cfg.synth.feature_dim;
        synth["samples_per_client"] = cfg.synth.samples_per_client;
        synth["class_scale"] = cfg.synth.class_scale;
        synth["jitter"] = cfg.synth.jitter;
        synth["noise"] = cfg.synth.noise;
        synth["concentration"] = cfg.synth.concentration;
        synth["seed"] = cfg.synth.seed;
        conf["synthetic"] = synth;
    }
    j["config"] = conf;

    if (!reports.empty()) {
        const RoundReport& last = reports.back();
        j["final"] = {{"mean_f1", last.mean_f1},
                      {"ci95_f1", last.ci95_f1},
                      {"mean_loss", last.mean_loss},
                      {"ci95_loss", last.ci95_loss}};
        double f1 = 0.0, loss = 0.0;
        for (const RoundReport& r : reports) {
            f1 += r.mean_f1;
            loss += r.mean_loss;
        }
        j["mean_over_rounds"] = {{"f1", f1 / reports.size()}, {"loss", loss / reports.size()}};
    }

    nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
    for (const RoundReport& r : reports) {
        nlohmann::ordered_json e;
        e["round"] = r.round;
        e["mean_f1"] = r.mean_f1;
        e["ci95_f1"] = r.ci95_f1;
        e["mean_loss"] = r.mean_loss;
        e["ci95_loss"] = r.ci95_loss;
        e["participants"] = r.participants.size();
        e["predicted_prototypes"] = r.predicted_prototypes;
        nlohmann::ordered_json cc;
        for (const auto& [label, count] : r.clusters_per_class)
            cc[std::to_string(label)] = count;
        e["clusters_per_class"] = cc;
        rounds.push_back(e);
    }
    j["rounds"] = rounds;
    return j.dump(2) + "\n";
}

std::string analyze_dataset(const Dataset& dataset, std::uint64_t seed) {
    std::map<int, std::vector<std::vector<double>>> protos_by_label;
    std::map<int, long> samples_by_label;
    for (const ClientData& c : dataset.clients) {
        const PrototypeSet set = compute_prototypes(0, c.samples);
        for (const auto& [label, proto] : set.entries)
            protos_by_label[label].push_back(proto.vec);
        for (const Sample& s : c.samples) ++samples_by_label[s.label];
    }

    nlohmann::ordered_json j;
    j["clients"] = dataset.clients.size();
    j["feature_dim"] = dataset.feature_dim;
    nlohmann::ordered_json classes;
    for (const auto& [label, protos] : protos_by_label) {
        nlohmann::ordered_json e;
        e["clients"] = protos.size();
        e["samples"] = samples_by_label[label];
        if (protos.size() >= 2) {
            const int m = std::max(1, std::min(50, static_cast<int>(protos.size()) / 2));
            e["hopkins"] = hopkins(protos, m,
                                   mix_seed(seed, {static_cast<std::uint64_t>(label)}));
        } else {
            e["hopkins"] = nullptr;
        }
        classes[std::to_string(label)] = e;
    }
    j["classes"] = classes;
    return j.dump(2) + "\n";
}

MergeTestResult merge_test(const ExperimentConfig& cfg, const Dataset& dataset,
                           const std::string& client_a, const std::string& client_b) {
    const int ia = dataset.client_index(client_a);
    const int ib = dataset.client_index(client_b);
    if (ia < 0) throw ConfigError("unknown client id '" + client_a + "'");
    if (ib < 0) throw ConfigError("unknown client id '" + client_b + "'");

    const Split split = stratified_split(dataset, 0.30, cfg.seed);
    int max_label = 0;
    for (int y : dataset.label_universe) max_label = std::max(max_label, y);

    std::vector<std::size_t> dims = {static_cast<std::size_t>(dataset.feature_dim), 128, 512,
                                     static_cast<std::size_t>(max_label + 1)};

    // enough epochs for the local models to settle (the federated rounds use
    // E per round; here there is a single training run)
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.epochs = 50;

    auto local_model = [&](int u) {
        std::vector<Sample> train;
        for (int i : split.clients[u].train) train.push_back(dataset.clients[u].samples[i]);
        for (int i : split.clients[u].validation)
            train.push_back(dataset.clients[u].samples[i]);
        TrainConfig local = tc;
        local.rng_seed = mix_seed(cfg.seed, {kMergeTag, static_cast<std::uint64_t>(u)});
        const Mlp init = make_mlp(dims, mix_seed(cfg.seed, {kMergeTag, 0xBEEFu}));
        return train_sgd(init, train, local);
    };
    auto test_set = [&](int u) {
        std::vector<Sample> test;
        for (int i : split.clients[u].test) test.push_back(dataset.clients[u].samples[i]);
        return test;
    };

    const Mlp model_a = local_model(ia);
    const Mlp model_b = ia == ib ? model_a : local_model(ib);

    Mlp merged = model_a;
    for (std::size_t k = 0; k < merged.layers.size(); ++k) {
        for (std::size_t i = 0; i < merged.layers[k].weights.data.size(); ++i)
            merged.layers[k].weights.data[i] =
                0.5 * (model_a.layers[k].weights.data[i] + model_b.layers[k].weights.data[i]);
        for (std::size_t j = 0; j < merged.layers[k].biases.size(); ++j)
            merged.layers[k].biases[j] =
                0.5 * (model_a.layers[k].biases[j] + model_b.layers[k].biases[j]);
    }

    const std::vector<Sample> test_a = test_set(ia);
    const std::vector<Sample> test_b = test_set(ib);

    MergeTestResult result;
    result.acc_a = evaluate(model_a, test_a).per_class_accuracy;
    result.acc_b = evaluate(model_b, test_b).per_class_accuracy;
    result.acc_merged_a = evaluate(merged, test_a).per_class_accuracy;
    result.acc_merged_b = evaluate(merged, test_b).per_class_accuracy;

    std::set<int> labels;
    for (const auto& [y, acc] : result.acc_a) labels.insert(y);
    for (const auto& [y, acc] : result.acc_b) labels.insert(y);
    result.labels.assign(labels.begin(), labels.end());
    return result;
}

std::string merge_test_table(const MergeTestResult& result, const std::string& client_a,
                             const std::string& client_b) {
    std::ostringstream out;
    auto cell = [](const std::map<int, double>& accs, int label) {
        auto it = accs.find(label);
        if (it == accs.end()) return std::string("    -");
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%5.2f", it->second);
        return std::string(buf);
    };
    out << "class | " << client_a << " on " << client_a << " | " << client_b << " on "
        << client_b << " | merged on " << client_a << " | merged on " << client_b << "\n";
    for (int label : result.labels) {
        out << label << " | " << cell(result.acc_a, label) << " | " << cell(result.acc_b, label)
            << " | " << cell(result.acc_merged_a, label) << " | "
            << cell(result.acc_merged_b, label) << "\n";
    }
    return out.str();
}

} // namespace fedsub
