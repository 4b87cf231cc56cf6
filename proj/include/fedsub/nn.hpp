#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "fedsub/matrix.hpp"

namespace fedsub {

// One labeled observation.
struct Sample {
    std::vector<double> features;
    int label = 0;
};

// Weight matrix is in_dim x out_dim; biases has out_dim entries.
struct DenseLayer {
    Matrix weights;
    std::vector<double> biases;

    std::size_t in_dim() const { return weights.rows; }
    std::size_t out_dim() const { return weights.cols; }
};

// Feedforward net: ReLU on hidden layers, softmax on the output layer.
struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
};

// Matching (weights, biases) pair for one layer; used for gradients, masks,
// activation frequencies and parameter updates alike.
struct LayerParams {
    Matrix weights;
    std::vector<double> biases;

    static LayerParams zeros_like(const DenseLayer& l) {
        LayerParams p;
        p.weights = Matrix(l.weights.rows, l.weights.cols);
        p.biases.assign(l.biases.size(), 0.0);
        return p;
    }
};

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 1;
    int batch_size = 32;
    std::uint64_t rng_seed = 0;
};

// Per-layer (input, post-activation output) pairs recorded during a forward
// pass of a single sample.
struct ForwardTrace {
    struct Layer {
        std::vector<double> input;
        std::vector<double> output;
    };
    std::vector<Layer> layers;
};

struct Metrics {
    double macro_f1 = 0.0;
    double mean_loss = 0.0;
    std::map<int, double> per_class_accuracy; // recall per true class
};

// Glorot-uniform weights, zero biases; dims = {in, hidden..., out}.
Mlp make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

std::vector<double> forward(const Mlp& model, const std::vector<double>& x);
std::pair<std::vector<double>, ForwardTrace> forward_traced(const Mlp& model,
                                                            const std::vector<double>& x);

// Mean gradient of the cross-entropy loss over the batch.
std::vector<LayerParams> gradient(const Mlp& model, const std::vector<Sample>& batch);

// Mini-batch SGD for cfg.epochs passes; shuffling derives only from cfg.rng_seed.
Mlp train_sgd(const Mlp& model, const std::vector<Sample>& data, const TrainConfig& cfg);

// Cross-entropy of one (probabilities, label) pair, computed in log space.
double cross_entropy(const Mlp& model, const std::vector<double>& x, int label);

double mean_loss(const Mlp& model, const std::vector<Sample>& data);

Metrics evaluate(const Mlp& model, const std::vector<Sample>& data);

int predict_label(const Mlp& model, const std::vector<double>& x);

} // namespace fedsub
