#include "fedsub/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fedsub/errors.hpp"
#include "fedsub/util.hpp"

namespace fedsub {

int Dataset::client_index(const std::string& id) const {
    for (std::size_t i = 0; i < clients.size(); ++i)
        if (clients[i].id == id) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

} // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_fields(line);
    if (header.size() < 3 || header[0] != "client_id" || header[1] != "label")
        parse_fail(line_no, "header must be client_id,label,f0,...");
    const int dim = static_cast<int>(header.size()) - 2;
    for (int d = 0; d < dim; ++d)
        if (header[d + 2] != "f" + std::to_string(d))
            parse_fail(line_no, "unexpected feature column name '" + header[d + 2] + "'");

    Dataset ds;
    ds.feature_dim = dim;
    std::map<std::string, int> index_of;
    std::set<int> labels;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (static_cast<int>(fields.size()) != dim + 2)
            parse_fail(line_no, "expected " + std::to_string(dim + 2) + " fields, got " +
                                    std::to_string(fields.size()));
        if (fields[0].empty()) parse_fail(line_no, "empty client_id");

        Sample s;
        try {
            std::size_t pos = 0;
            s.label = std::stoi(fields[1], &pos);
            if (pos != fields[1].size()) throw std::invalid_argument(fields[1]);
        } catch (const std::exception&) {
            parse_fail(line_no, "label '" + fields[1] + "' is not an integer");
        }
        if (s.label < 0) parse_fail(line_no, "label must be non-negative");

        s.features.resize(dim);
        for (int d = 0; d < dim; ++d) {
            try {
                std::size_t pos = 0;
                s.features[d] = std::stod(fields[d + 2], &pos);
                if (pos != fields[d + 2].size()) throw std::invalid_argument(fields[d + 2]);
            } catch (const std::exception&) {
                parse_fail(line_no, "feature '" + fields[d + 2] + "' is not numeric");
            }
            if (!std::isfinite(s.features[d])) parse_fail(line_no, "non-finite feature value");
        }

        auto [it, inserted] = index_of.try_emplace(fields[0], static_cast<int>(ds.clients.size()));
        if (inserted) ds.clients.push_back({fields[0], {}});
        labels.insert(s.label);
        ds.clients[it->second].samples.push_back(std::move(s));
    }
    if (ds.clients.empty()) throw DataError("dataset has no samples");
    ds.label_universe.assign(labels.begin(), labels.end());
    return ds;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "client_id,label";
    for (int d = 0; d < dataset.feature_dim; ++d) out << ",f" << d;
    out << "\n";
    char buf[40];
    for (const ClientData& c : dataset.clients) {
        for (const Sample& s : c.samples) {
            out << c.id << "," << s.label;
            for (double v : s.features) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << "," << buf;
            }
            out << "\n";
        }
    }
}

void standardize(Dataset& dataset) {
    const int dim = dataset.feature_dim;
    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    long n = 0;
    for (const ClientData& c : dataset.clients)
        for (const Sample& s : c.samples) {
            for (int d = 0; d < dim; ++d) mean[d] += s.features[d];
            ++n;
        }
    if (n == 0) throw DataError("dataset has no samples");
    for (double& m : mean) m /= static_cast<double>(n);
    for (const ClientData& c : dataset.clients)
        for (const Sample& s : c.samples)
            for (int d = 0; d < dim; ++d) {
                const double delta = s.features[d] - mean[d];
                var[d] += delta * delta;
            }
    for (double& v : var) v = std::sqrt(v / static_cast<double>(n));
    for (ClientData& c : dataset.clients)
        for (Sample& s : c.samples)
            for (int d = 0; d < dim; ++d) {
                s.features[d] -= mean[d];
                if (var[d] > 0.0) s.features[d] /= var[d];
            }
}

Dataset generate_synthetic(const SynthConfig& cfg) {
    if (cfg.clients < 1 || cfg.classes < 2 || cfg.feature_dim < 1 || cfg.samples_per_client < 1)
        throw ParamError("invalid synthetic config");
    if (cfg.class_scale < 0.0 || cfg.jitter < 0.0 || cfg.noise <= 0.0 ||
        cfg.concentration <= 0.0 || cfg.groups < 0)
        throw ParamError("synthetic scales must be positive");

    std::mt19937_64 rng(splitmix64(cfg.seed));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // global class means
    std::vector<std::vector<double>> class_mean(cfg.classes,
                                                std::vector<double>(cfg.feature_dim));
    for (auto& mu : class_mean)
        for (double& v : mu) v = cfg.class_scale * gauss(rng);

    // Archetype offsets come from a pattern pool shared across classes, so a
    // location claimed by class y for one group of clients can be claimed by
    // a different class for another group. Clients in the same group form a
    // tight per-class cluster, while a global model sees conflicting labels
    // at shared locations.
    std::vector<std::vector<double>> patterns;
    std::vector<std::vector<int>> class_patterns(cfg.classes); // per class: pool index per group
    if (cfg.groups > 0) {
        const int pool = std::max(cfg.groups, cfg.classes * cfg.groups / 2);
        patterns.assign(pool, std::vector<double>(cfg.feature_dim));
        for (auto& p : patterns)
            for (double& v : p) v = cfg.jitter * gauss(rng);
        std::vector<int> all(pool);
        std::iota(all.begin(), all.end(), 0);
        for (int y = 0; y < cfg.classes; ++y) {
            std::shuffle(all.begin(), all.end(), rng);
            class_patterns[y].assign(all.begin(), all.begin() + cfg.groups);
        }
    }
    const double within_group = 0.05 * cfg.jitter;

    Dataset ds;
    ds.feature_dim = cfg.feature_dim;
    for (int y = 0; y < cfg.classes; ++y) ds.label_universe.push_back(y);

    std::gamma_distribution<double> gamma(cfg.concentration, 1.0);
    for (int u = 0; u < cfg.clients; ++u) {
        std::mt19937_64 crng(mix_seed(cfg.seed, {0xC11E57u, static_cast<std::uint64_t>(u)}));

        // label proportions: symmetric Dirichlet via normalized gammas
        std::vector<double> props(cfg.classes);
        double total = 0.0;
        for (double& p : props) {
            p = gamma(crng);
            total += p;
        }
        if (total <= 0.0) {
            std::fill(props.begin(), props.end(), 1.0 / cfg.classes);
        } else {
            for (double& p : props) p /= total;
        }

        // per-client offset of each class mean; each class takes a distinct
        // pattern location so the client's own classes never collide
        std::vector<std::vector<double>> offset(cfg.classes,
                                                std::vector<double>(cfg.feature_dim));
        std::set<int> used_patterns;
        for (int y = 0; y < cfg.classes; ++y) {
            if (cfg.groups > 0) {
                std::vector<int> candidates;
                for (int g = 0; g < cfg.groups; ++g)
                    if (!used_patterns.count(class_patterns[y][g])) candidates.push_back(g);
                int g;
                if (candidates.empty()) {
                    std::uniform_int_distribution<int> pick(0, cfg.groups - 1);
                    g = pick(crng);
                } else {
                    std::uniform_int_distribution<int> pick(
                        0, static_cast<int>(candidates.size()) - 1);
                    g = candidates[pick(crng)];
                }
                const int pat = class_patterns[y][g];
                used_patterns.insert(pat);
                for (int d = 0; d < cfg.feature_dim; ++d)
                    offset[y][d] = patterns[pat][d] + within_group * gauss(crng);
            } else {
                for (double& v : offset[y]) v = cfg.jitter * gauss(crng);
            }
        }

        ClientData client;
        client.id = "c" + std::to_string(u);
        client.samples.reserve(cfg.samples_per_client);
        std::discrete_distribution<int> label_dist(props.begin(), props.end());
        for (int s = 0; s < cfg.samples_per_client; ++s) {
            Sample sample;
            sample.label = label_dist(crng);
            sample.features.resize(cfg.feature_dim);
            for (int d = 0; d < cfg.feature_dim; ++d)
                sample.features[d] = class_mean[sample.label][d] + offset[sample.label][d] +
                                     cfg.noise * gauss(crng);
            client.samples.push_back(std::move(sample));
        }
        ds.clients.push_back(std::move(client));
    }
    return ds;
}

Split stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ParamError("test_fraction must be in [0, 1)");
    Split split;
    split.clients.resize(dataset.clients.size());

    for (std::size_t u = 0; u < dataset.clients.size(); ++u) {
        std::mt19937_64 rng(mix_seed(seed, {0x5417u, static_cast<std::uint64_t>(u)}));
        std::map<int, std::vector<int>> by_label;
        for (std::size_t i = 0; i < dataset.clients[u].samples.size(); ++i)
            by_label[dataset.clients[u].samples[i].label].push_back(static_cast<int>(i));

        Split::ClientSplit& cs = split.clients[u];
        for (auto& [label, idx] : by_label) {
            std::shuffle(idx.begin(), idx.end(), rng);
            const long n = static_cast<long>(idx.size());
            long n_test = static_cast<long>(std::floor(test_fraction * static_cast<double>(n)));
            if (n >= 2 && test_fraction > 0.0) n_test = std::max<long>(n_test, 1);
            if (n < 2) n_test = 0; // lone samples stay in training
            const long n_train_pool = n - n_test;
            const long n_val = static_cast<long>(std::floor(0.1 * static_cast<double>(n_train_pool)));

            for (long i = 0; i < n; ++i) {
                if (i < n_test)
                    cs.test.push_back(idx[i]);
                else if (i < n_test + n_val)
                    cs.validation.push_back(idx[i]);
                else
                    cs.train.push_back(idx[i]);
            }
        }
        std::sort(cs.train.begin(), cs.train.end());
        std::sort(cs.validation.begin(), cs.validation.end());
        std::sort(cs.test.begin(), cs.test.end());
    }
    return split;
}

bool DynamicSchedule::label_visible(int client, int label, int round) const {
    if (period <= 0) return true;
    if (client < 0 || static_cast<std::size_t>(client) >= clients.size()) return true;
    const std::vector<int>& withheld = clients[client].withheld;
    for (std::size_t pos = 0; pos < withheld.size(); ++pos) {
        if (withheld[pos] == label)
            return round >= static_cast<int>(pos + 1) * period;
    }
    return true;
}

DynamicSchedule make_dynamic_schedule(const Dataset& dataset, double affected_fraction,
                                      int period, std::uint64_t seed) {
    if (period < 1) throw ParamError("reintroduction period must be >= 1");
    if (affected_fraction < 0.0 || affected_fraction > 1.0)
        throw ParamError("affected fraction must be in [0, 1]");

    DynamicSchedule schedule;
    schedule.period = period;
    schedule.clients.resize(dataset.clients.size());

    std::mt19937_64 rng(mix_seed(seed, {0xD15Cu}));
    std::vector<int> order(dataset.clients.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t affected =
        static_cast<std::size_t>(std::llround(affected_fraction * dataset.clients.size()));

    const int classes = static_cast<int>(dataset.label_universe.size());
    const int target_withheld = (classes - 1 + 1) / 2; // ceil((C-1)/2)

    for (std::size_t pos = 0; pos < affected && pos < order.size(); ++pos) {
        const int u = order[pos];
        std::map<int, long> counts;
        for (const Sample& s : dataset.clients[u].samples) ++counts[s.label];
        if (counts.size() < 2) continue; // must retain at least one label

        std::vector<int> local;
        long testable = 0; // labels with >= 2 samples get test coverage
        for (const auto& [label, n] : counts) {
            local.push_back(label);
            if (n >= 2) ++testable;
        }
        if (testable == 0) continue; // client would become unevaluable

        std::mt19937_64 crng(mix_seed(seed, {0xD15C2u, static_cast<std::uint64_t>(u)}));
        std::shuffle(local.begin(), local.end(), crng);

        // withhold up to the target, always retaining one testable label
        std::vector<int>& withheld = schedule.clients[u].withheld;
        long retained = static_cast<long>(local.size());
        long retained_testable = testable;
        for (int label : local) {
            if (static_cast<int>(withheld.size()) >= target_withheld) break;
            const bool is_testable = counts[label] >= 2;
            if (retained <= 1) break;
            if (is_testable && retained_testable <= 1) continue;
            withheld.push_back(label);
            --retained;
            if (is_testable) --retained_testable;
        }
    }
    return schedule;
}

std::vector<int> visible_indices(const Dataset& dataset, const DynamicSchedule* schedule,
                                 int client, const std::vector<int>& candidates, int round) {
    if (schedule == nullptr) return candidates;
    std::vector<int> out;
    out.reserve(candidates.size());
    for (int i : candidates) {
        const int label = dataset.clients[client].samples[i].label;
        if (schedule->label_visible(client, label, round)) out.push_back(i);
    }
    return out;
}

} // namespace fedsub
