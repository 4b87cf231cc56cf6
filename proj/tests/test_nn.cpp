#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fedsub/errors.hpp"
#include "fedsub/nn.hpp"
#include "fedsub/util.hpp"

using namespace fedsub;

namespace {

Mlp zero_model(const std::vector<std::size_t>& dims) {
    Mlp m;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer layer;
        layer.weights = Matrix(dims[k], dims[k + 1]);
        layer.biases.assign(dims[k + 1], 0.0);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

Mlp random_model(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    Mlp m = zero_model(dims);
    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> g(0.0, 0.8);
    for (DenseLayer& l : m.layers) {
        for (double& w : l.weights.data) w = g(rng);
        for (double& b : l.biases) b = g(rng);
    }
    return m;
}

std::vector<Sample> random_batch(std::size_t n, std::size_t dim, int classes,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, classes - 1);
    std::vector<Sample> out(n);
    for (Sample& s : out) {
        s.features.resize(dim);
        for (double& f : s.features) f = g(rng);
        s.label = label(rng);
    }
    return out;
}

// central finite differences of the mean cross-entropy loss
std::vector<LayerParams> fd_gradient(Mlp model, const std::vector<Sample>& batch, double h) {
    auto batch_loss = [&](const Mlp& m) {
        double total = 0.0;
        for (const Sample& s : batch) total += cross_entropy(m, s.features, s.label);
        return total / static_cast<double>(batch.size());
    };
    std::vector<LayerParams> grads;
    for (DenseLayer& layer : model.layers) {
        LayerParams g = LayerParams::zeros_like(layer);
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
            const double keep = layer.weights.data[i];
            layer.weights.data[i] = keep + h;
            const double up = batch_loss(model);
            layer.weights.data[i] = keep - h;
            const double down = batch_loss(model);
            layer.weights.data[i] = keep;
            g.weights.data[i] = (up - down) / (2.0 * h);
        }
        for (std::size_t j = 0; j < layer.biases.size(); ++j) {
            const double keep = layer.biases[j];
            layer.biases[j] = keep + h;
            const double up = batch_loss(model);
            layer.biases[j] = keep - h;
            const double down = batch_loss(model);
            layer.biases[j] = keep;
            g.biases[j] = (up - down) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double max_rel_error(const std::vector<LayerParams>& a, const std::vector<LayerParams>& b) {
    double worst = 0.0;
    auto update = [&](double x, double y) {
        // relative error with an absolute floor; below ~1e-5 the
        // finite-difference roundoff dominates the quotient
        const double mag = std::max({std::abs(x), std::abs(y), 1e-5});
        worst = std::max(worst, std::abs(x - y) / mag);
    };
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < a[k].weights.data.size(); ++i)
            update(a[k].weights.data[i], b[k].weights.data[i]);
        for (std::size_t j = 0; j < a[k].biases.size(); ++j)
            update(a[k].biases[j], b[k].biases[j]);
    }
    return worst;
}

bool same_params(const Mlp& a, const Mlp& b) {
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        if (a.layers[k].weights.data != b.layers[k].weights.data) return false;
        if (a.layers[k].biases != b.layers[k].biases) return false;
    }
    return true;
}

} // namespace

TEST_CASE("forward: zero model yields the uniform distribution") {
    const Mlp m = zero_model({3, 4, 2});
    const auto p = forward(m, {0.3, -1.0, 2.0});
    CHECK(p.size() == 2);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("forward: hand-computed softmax of [0, ln 3]") {
    Mlp m;
    DenseLayer out;
    out.weights = Matrix(1, 2);
    out.weights(0, 0) = 0.0;
    out.weights(0, 1) = std::log(3.0);
    out.biases = {0.0, 0.0};
    m.layers.push_back(out);
    const auto p = forward(m, {1.0});
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("forward: wrong input length raises a shape error") {
    const Mlp m = zero_model({3, 4, 2});
    CHECK_THROWS_AS(forward(m, {1.0, 2.0}), ShapeError);
}

TEST_CASE("softmax output is a distribution for random models") {
    for (std::uint64_t t = 0; t < 40; ++t) {
        const Mlp m = random_model({5, 7, 3}, 100 + t);
        const auto batch = random_batch(1, 5, 3, 200 + t);
        const auto p = forward(m, batch[0].features);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("forward_traced: probabilities match forward exactly") {
    for (std::uint64_t t = 0; t < 100; ++t) {
        const Mlp m = random_model({4, 6, 5, 3}, 300 + t);
        const auto x = random_batch(1, 4, 3, 400 + t)[0].features;
        const auto [probs, trace] = forward_traced(m, x);
        const auto direct = forward(m, x);
        CHECK(probs == direct);
        REQUIRE(trace.layers.size() == 3);
        CHECK(trace.layers[0].input == x);
        for (double v : trace.layers[0].output) CHECK(v >= 0.0);
    }
}

TEST_CASE("forward_traced: ReLU kills all-negative pre-activations") {
    Mlp m = zero_model({2, 2, 2});
    m.layers[0].weights(0, 0) = -1.0;
    m.layers[0].weights(1, 1) = -1.0;
    const auto [probs, trace] = forward_traced(m, {3.0, 4.0});
    for (double v : trace.layers[0].output) CHECK(v == 0.0);
    CHECK(probs[0] == doctest::Approx(0.5));
}

TEST_CASE("forward_traced: single-layer model records one pair") {
    Mlp m = zero_model({2, 3});
    const auto [probs, trace] = forward_traced(m, {1.0, -1.0});
    CHECK(trace.layers.size() == 1);
    CHECK(probs.size() == 3);
}

TEST_CASE("gradient: output-layer bias gradient sums to zero") {
    const Mlp m = zero_model({2, 3, 2});
    const std::vector<Sample> batch = {{{1.0, 0.5}, 0}, {{-0.5, 2.0}, 1}};
    const auto g = gradient(m, batch);
    double sum = 0.0;
    for (double v : g.back().biases) sum += v;
    CHECK(std::abs(sum) < 1e-15);
}

TEST_CASE("gradient: matches central finite differences on a 3-4-2 model") {
    const Mlp m = random_model({3, 4, 2}, 17);
    const auto batch = random_batch(5, 3, 2, 18);
    const auto g = gradient(m, batch);
    const auto fd = fd_gradient(m, batch, 1e-5);
    CHECK(max_rel_error(g, fd) < 1e-4);
}

TEST_CASE("gradient: finite-difference agreement across random models") {
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Mlp m = random_model({4, 5, 3}, 500 + t);
        const auto batch = random_batch(4, 4, 3, 600 + t);
        CHECK(max_rel_error(gradient(m, batch), fd_gradient(m, batch, 1e-5)) < 1e-4);
    }
}

TEST_CASE("gradient: duplicating the batch leaves the mean unchanged") {
    const Mlp m = random_model({3, 5, 2}, 21);
    const auto batch = random_batch(6, 3, 2, 22);
    std::vector<Sample> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    const auto g1 = gradient(m, batch);
    const auto g2 = gradient(m, doubled);
    for (std::size_t k = 0; k < g1.size(); ++k)
        for (std::size_t i = 0; i < g1[k].weights.data.size(); ++i)
            CHECK(g1[k].weights.data[i] ==
                  doctest::Approx(g2[k].weights.data[i]).epsilon(1e-12));
}

TEST_CASE("gradient: empty batch raises") {
    const Mlp m = zero_model({2, 3, 2});
    CHECK_THROWS_AS(gradient(m, {}), DataError);
}

TEST_CASE("train_sgd: zero learning rate is the identity") {
    const Mlp m = random_model({3, 4, 2}, 31);
    const auto data = random_batch(20, 3, 2, 32);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.rng_seed = 5;
    const Mlp trained = train_sgd(m, data, cfg);
    CHECK(same_params(m, trained));
}

TEST_CASE("train_sgd: separable blobs reach at least 0.95 accuracy") {
    std::vector<Sample> data;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 0.4);
    for (int i = 0; i < 40; ++i) {
        data.push_back({{2.0 + g(rng), 2.0 + g(rng)}, 0});
        data.push_back({{-2.0 + g(rng), -2.0 + g(rng)}, 1});
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 50;
    cfg.rng_seed = 9;
    const Mlp model = train_sgd(make_mlp({2, 8, 2}, 11), data, cfg);
    int correct = 0;
    for (const Sample& s : data)
        if (predict_label(model, s.features) == s.label) ++correct;
    CHECK(static_cast<double>(correct) / data.size() >= 0.95);
}

TEST_CASE("train_sgd: equal seeds give bit-identical models") {
    const Mlp m = make_mlp({3, 6, 4, 2}, 13);
    const auto data = random_batch(30, 3, 2, 14);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.rng_seed = 99;
    CHECK(same_params(train_sgd(m, data, cfg), train_sgd(m, data, cfg)));
}

TEST_CASE("train_sgd: training reduces mean loss on a separable set") {
    std::vector<Sample> data;
    for (int i = 0; i < 10; ++i) {
        data.push_back({{1.0 + 0.01 * i, 0.0}, 0});
        data.push_back({{-1.0 - 0.01 * i, 0.0}, 1});
    }
    const Mlp before = make_mlp({2, 6, 2}, 3);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 10;
    cfg.rng_seed = 4;
    const Mlp after = train_sgd(before, data, cfg);
    CHECK(mean_loss(after, data) <= mean_loss(before, data));
}

TEST_CASE("train_sgd: label out of range raises") {
    const Mlp m = zero_model({2, 3, 2});
    TrainConfig cfg;
    CHECK_THROWS_AS(train_sgd(m, {{{1.0, 1.0}, 7}}, cfg), DataError);
    CHECK_THROWS_AS(train_sgd(m, {}, cfg), DataError);
}

TEST_CASE("evaluate: perfect predictor scores macro-F1 1") {
    // hidden unit 0 fires on positive x0, unit 1 on negative x0
    Mlp m = zero_model({2, 2, 2});
    m.layers[0].weights(0, 0) = 1.0;
    m.layers[0].weights(0, 1) = -1.0;
    m.layers[1].weights(0, 0) = 5.0;
    m.layers[1].weights(1, 1) = 5.0;
    const std::vector<Sample> data = {{{1.0, 0.0}, 0}, {{-1.0, 0.0}, 1}, {{2.0, 0.0}, 0}};
    const Metrics metrics = evaluate(m, data);
    CHECK(metrics.macro_f1 == doctest::Approx(1.0));
    for (const auto& [label, acc] : metrics.per_class_accuracy) CHECK(acc == 1.0);
}

TEST_CASE("evaluate: constant predictor on a balanced set scores 1/3") {
    Mlp m = zero_model({2, 2, 2});
    m.layers[1].biases[0] = 3.0; // always predict class 0
    const std::vector<Sample> data = {{{0.5, 1.0}, 0}, {{1.5, -1.0}, 0},
                                      {{-0.5, 0.1}, 1}, {{0.2, 0.3}, 1}};
    const Metrics metrics = evaluate(m, data);
    CHECK(metrics.macro_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(metrics.per_class_accuracy.at(0) == 1.0);
    CHECK(metrics.per_class_accuracy.at(1) == 0.0);
}

TEST_CASE("evaluate: uniform predictor loss is ln C") {
    const Mlp m = zero_model({3, 4, 5});
    const auto data = random_batch(12, 3, 5, 77);
    CHECK(std::abs(evaluate(m, data).mean_loss - std::log(5.0)) < 1e-9);
}

TEST_CASE("evaluate: empty dataset raises") {
    const Mlp m = zero_model({2, 3, 2});
    CHECK_THROWS_AS(evaluate(m, {}), DataError);
}

TEST_CASE("make_mlp: seeded initialization is reproducible and bounded") {
    const Mlp a = make_mlp({4, 8, 3}, 42);
    const Mlp b = make_mlp({4, 8, 3}, 42);
    CHECK(same_params(a, b));
    const double bound0 = std::sqrt(6.0 / (4 + 8));
    for (double w : a.layers[0].weights.data) CHECK(std::abs(w) <= bound0);
    for (double bias : a.layers[0].biases) CHECK(bias == 0.0);
}
