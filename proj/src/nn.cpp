#include "fedsub/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fedsub/errors.hpp"
#include "fedsub/util.hpp"

namespace fedsub {

namespace {

void check_model(const Mlp& model) {
    if (model.layers.empty()) throw ShapeError("model has no layers");
    for (std::size_t k = 1; k < model.layers.size(); ++k) {
        if (model.layers[k - 1].out_dim() != model.layers[k].in_dim())
            throw ShapeError("layer dimensions do not chain");
    }
}

void check_input(const Mlp& model, const std::vector<double>& x) {
    if (x.size() != model.input_dim())
        throw ShapeError("input length does not match model input dimension");
}

void check_labels(const Mlp& model, const std::vector<Sample>& data) {
    if (data.empty()) throw DataError("empty dataset");
    const int out = static_cast<int>(model.output_dim());
    for (const Sample& s : data) {
        if (s.label < 0 || s.label >= out) throw DataError("label out of range");
        check_input(model, s.features);
    }
}

// in-place y = x * W + b
void affine(const DenseLayer& layer, const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t in = layer.in_dim(), out = layer.out_dim();
    y.assign(layer.biases.begin(), layer.biases.end());
    const double* w = layer.weights.data.data();
    for (std::size_t i = 0; i < in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* row = w + i * out;
        for (std::size_t j = 0; j < out; ++j) y[j] += xi * row[j];
    }
}

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// log softmax(z)[label], without forming the probabilities
double log_softmax_at(const std::vector<double>& z, int label) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    return z[label] - m - std::log(sum);
}

// Forward pass keeping every layer input; logits of the final layer are left
// un-normalized in `logits`.
void forward_stash(const Mlp& model, const std::vector<double>& x,
                   std::vector<std::vector<double>>& inputs, std::vector<double>& logits) {
    inputs.clear();
    inputs.reserve(model.layers.size());
    std::vector<double> cur = x;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        inputs.push_back(cur);
        std::vector<double> next;
        affine(model.layers[k], cur, next);
        if (k + 1 < model.layers.size()) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
            cur = std::move(next);
        } else {
            logits = std::move(next);
        }
    }
}

// Accumulate the gradient of one sample into grads; returns the sample loss.
double accumulate_gradient(const Mlp& model, const Sample& s, std::vector<LayerParams>& grads) {
    std::vector<std::vector<double>> inputs;
    std::vector<double> logits;
    forward_stash(model, s.features, inputs, logits);
    const double loss = -log_softmax_at(logits, s.label);

    // delta at the output: softmax(z) - onehot
    std::vector<double> delta = logits;
    softmax_inplace(delta);
    delta[s.label] -= 1.0;

    for (std::size_t k = model.layers.size(); k-- > 0;) {
        const DenseLayer& layer = model.layers[k];
        const std::vector<double>& in = inputs[k];
        const std::size_t nin = layer.in_dim(), nout = layer.out_dim();

        double* gw = grads[k].weights.data.data();
        double* gb = grads[k].biases.data();
        for (std::size_t j = 0; j < nout; ++j) gb[j] += delta[j];
        for (std::size_t i = 0; i < nin; ++i) {
            const double a = in[i];
            if (a == 0.0) continue;
            double* row = gw + i * nout;
            for (std::size_t j = 0; j < nout; ++j) row[j] += a * delta[j];
        }

        if (k == 0) break;
        // propagate: delta_prev = (W delta) * relu'(input_k)  — input_k is the
        // post-activation of layer k-1, zero exactly where ReLU clamped.
        std::vector<double> prev(nin, 0.0);
        const double* w = layer.weights.data.data();
        for (std::size_t i = 0; i < nin; ++i) {
            if (in[i] <= 0.0) continue; // ReLU inactive or zero input
            const double* row = w + i * nout;
            double acc = 0.0;
            for (std::size_t j = 0; j < nout; ++j) acc += row[j] * delta[j];
            prev[i] = acc;
        }
        delta = std::move(prev);
    }
    return loss;
}

} // namespace

Mlp make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 3) throw ShapeError("need at least two layers (one hidden)");
    std::mt19937_64 rng(splitmix64(seed));
    Mlp model;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer layer;
        layer.weights = Matrix(dims[k], dims[k + 1]);
        layer.biases.assign(dims[k + 1], 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[k] + dims[k + 1]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : layer.weights.data) w = dist(rng);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

std::vector<double> forward(const Mlp& model, const std::vector<double>& x) {
    check_model(model);
    check_input(model, x);
    std::vector<double> cur = x, next;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        affine(model.layers[k], cur, next);
        if (k + 1 < model.layers.size()) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        } else {
            softmax_inplace(next);
        }
        cur = std::move(next);
    }
    return cur;
}

std::pair<std::vector<double>, ForwardTrace> forward_traced(const Mlp& model,
                                                            const std::vector<double>& x) {
    check_model(model);
    check_input(model, x);
    ForwardTrace trace;
    trace.layers.resize(model.layers.size());
    std::vector<double> cur = x, next;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        trace.layers[k].input = cur;
        affine(model.layers[k], cur, next);
        if (k + 1 < model.layers.size()) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        } else {
            softmax_inplace(next);
        }
        trace.layers[k].output = next;
        cur = std::move(next);
    }
    return {cur, std::move(trace)};
}

std::vector<LayerParams> gradient(const Mlp& model, const std::vector<Sample>& batch) {
    check_model(model);
    check_labels(model, batch);
    std::vector<LayerParams> grads;
    grads.reserve(model.layers.size());
    for (const DenseLayer& l : model.layers) grads.push_back(LayerParams::zeros_like(l));
    for (const Sample& s : batch) accumulate_gradient(model, s, grads);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (LayerParams& g : grads) {
        for (double& v : g.weights.data) v *= inv;
        for (double& v : g.biases) v *= inv;
    }
    return grads;
}

Mlp train_sgd(const Mlp& model, const std::vector<Sample>& data, const TrainConfig& cfg) {
    check_model(model);
    check_labels(model, data);
    if (cfg.learning_rate < 0.0) throw ParamError("learning_rate must be non-negative");
    if (cfg.epochs < 1) throw ParamError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ParamError("batch_size must be >= 1");

    Mlp current = model;
    std::mt19937_64 rng(splitmix64(cfg.rng_seed));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<LayerParams> grads;
    grads.reserve(current.layers.size());
    for (const DenseLayer& l : current.layers) grads.push_back(LayerParams::zeros_like(l));

    std::vector<Sample> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);

            for (LayerParams& g : grads) {
                std::fill(g.weights.data.begin(), g.weights.data.end(), 0.0);
                std::fill(g.biases.begin(), g.biases.end(), 0.0);
            }
            for (const Sample& s : batch) accumulate_gradient(current, s, grads);
            const double step = cfg.learning_rate / static_cast<double>(batch.size());
            for (std::size_t k = 0; k < current.layers.size(); ++k) {
                DenseLayer& layer = current.layers[k];
                const LayerParams& g = grads[k];
                for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
                    layer.weights.data[i] -= step * g.weights.data[i];
                for (std::size_t j = 0; j < layer.biases.size(); ++j)
                    layer.biases[j] -= step * g.biases[j];
            }
        }
    }
    return current;
}

double cross_entropy(const Mlp& model, const std::vector<double>& x, int label) {
    std::vector<std::vector<double>> inputs;
    std::vector<double> logits;
    forward_stash(model, x, inputs, logits);
    return -log_softmax_at(logits, label);
}

double mean_loss(const Mlp& model, const std::vector<Sample>& data) {
    if (data.empty()) throw DataError("empty dataset");
    double total = 0.0;
    for (const Sample& s : data) total += cross_entropy(model, s.features, s.label);
    return total / static_cast<double>(data.size());
}

int predict_label(const Mlp& model, const std::vector<double>& x) {
    const std::vector<double> p = forward(model, x);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

Metrics evaluate(const Mlp& model, const std::vector<Sample>& data) {
    check_model(model);
    check_labels(model, data);
    Metrics m;

    std::map<int, long> truth_count, predicted_count, correct_count;
    double loss = 0.0;
    std::vector<std::vector<double>> inputs;
    std::vector<double> logits;
    for (const Sample& s : data) {
        forward_stash(model, s.features, inputs, logits);
        const int pred =
            static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        loss += -log_softmax_at(logits, s.label);
        ++truth_count[s.label];
        ++predicted_count[pred];
        if (pred == s.label) ++correct_count[s.label];
    }
    m.mean_loss = loss / static_cast<double>(data.size());

    // Macro-F1 over classes present in the truth set; a truth class that is
    // never predicted scores 0, predictions outside the truth set are ignored.
    double f1_total = 0.0;
    for (const auto& [label, support] : truth_count) {
        const long tp = correct_count.count(label) ? correct_count[label] : 0;
        const long predicted = predicted_count.count(label) ? predicted_count[label] : 0;
        const double recall = static_cast<double>(tp) / static_cast<double>(support);
        double f1 = 0.0;
        if (predicted > 0 && tp > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
            f1 = 2.0 * precision * recall / (precision + recall);
        }
        f1_total += f1;
        m.per_class_accuracy[label] = recall;
    }
    m.macro_f1 = f1_total / static_cast<double>(truth_count.size());
    return m;
}

} // namespace fedsub
