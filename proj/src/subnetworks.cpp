#include "fedsub/subnetworks.hpp"

#include "fedsub/errors.hpp"

namespace fedsub {

std::size_t DepthSetting::covered(const Mlp& model) const {
    if (kind == Kind::Full) return model.layers.size();
    if (layers < 1 || static_cast<std::size_t>(layers) >= model.layers.size())
        throw ParamError("partial depth must satisfy 1 <= L < layer count");
    return static_cast<std::size_t>(layers);
}

std::vector<LayerParams> Subnetwork::mask() const {
    std::vector<LayerParams> m;
    m.reserve(freq.size());
    for (const LayerParams& f : freq) {
        LayerParams layer;
        layer.weights = Matrix(f.weights.rows, f.weights.cols);
        layer.biases.assign(f.biases.size(), 0.0);
        for (std::size_t i = 0; i < f.weights.data.size(); ++i)
            layer.weights.data[i] = f.weights.data[i] > 0.0 ? 1.0 : 0.0;
        for (std::size_t j = 0; j < f.biases.size(); ++j)
            layer.biases[j] = f.biases[j] > 0.0 ? 1.0 : 0.0;
        m.push_back(std::move(layer));
    }
    return m;
}

std::vector<LayerParams> activation_map(const Mlp& model, const ForwardTrace& trace,
                                        DepthSetting depth) {
    if (trace.layers.size() != model.layers.size())
        throw ShapeError("trace does not match model layer count");
    const std::size_t covered = depth.covered(model);
    std::vector<LayerParams> masks;
    masks.reserve(covered);
    for (std::size_t k = 0; k < covered; ++k) {
        const DenseLayer& layer = model.layers[k];
        const ForwardTrace::Layer& t = trace.layers[k];
        if (t.input.size() != layer.in_dim() || t.output.size() != layer.out_dim())
            throw ShapeError("trace layer shape does not match model");
        const bool is_output_layer = (k + 1 == model.layers.size());

        LayerParams mask = LayerParams::zeros_like(layer);
        const std::size_t nin = layer.in_dim(), nout = layer.out_dim();
        for (std::size_t j = 0; j < nout; ++j) {
            // softmax outputs are always positive, so the output layer's units
            // count as active from input nonzeroness alone
            const bool active = is_output_layer || t.output[j] > 0.0;
            mask.biases[j] = active ? 1.0 : 0.0;
        }
        for (std::size_t i = 0; i < nin; ++i) {
            if (t.input[i] == 0.0) continue;
            double* row = mask.weights.data.data() + i * nout;
            for (std::size_t j = 0; j < nout; ++j) row[j] = mask.biases[j];
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

std::map<int, Subnetwork> extract_subnetworks(const Mlp& model, const std::vector<Sample>& data,
                                              DepthSetting depth) {
    if (data.empty()) throw DataError("empty dataset");
    const std::size_t covered = depth.covered(model);

    std::map<int, Subnetwork> result;
    for (const Sample& s : data) {
        auto [it, inserted] = result.try_emplace(s.label);
        Subnetwork& sub = it->second;
        if (inserted) {
            sub.label = s.label;
            for (std::size_t k = 0; k < covered; ++k)
                sub.freq.push_back(LayerParams::zeros_like(model.layers[k]));
        }
        ++sub.support;

        auto [probs, trace] = forward_traced(model, s.features);
        (void)probs;
        // Accumulate the per-sample mask. It is the outer product of the
        // input-nonzero and output-active indicator vectors, so it never
        // needs to be materialized.
        for (std::size_t k = 0; k < covered; ++k) {
            const ForwardTrace::Layer& t = trace.layers[k];
            const bool is_output_layer = (k + 1 == model.layers.size());
            LayerParams& acc = sub.freq[k];
            const std::size_t nin = t.input.size(), nout = t.output.size();
            for (std::size_t j = 0; j < nout; ++j)
                if (is_output_layer || t.output[j] > 0.0) acc.biases[j] += 1.0;
            for (std::size_t i = 0; i < nin; ++i) {
                if (t.input[i] == 0.0) continue;
                double* row = acc.weights.data.data() + i * nout;
                for (std::size_t j = 0; j < nout; ++j)
                    if (is_output_layer || t.output[j] > 0.0) row[j] += 1.0;
            }
        }
    }

    for (auto& [label, sub] : result) {
        const double inv = 1.0 / static_cast<double>(sub.support);
        sub.values.reserve(covered);
        for (std::size_t k = 0; k < covered; ++k) {
            LayerParams& f = sub.freq[k];
            for (double& v : f.weights.data) v *= inv;
            for (double& v : f.biases) v *= inv;

            LayerParams masked = LayerParams::zeros_like(model.layers[k]);
            const Matrix& w = model.layers[k].weights;
            for (std::size_t i = 0; i < w.data.size(); ++i)
                masked.weights.data[i] = w.data[i] * f.weights.data[i];
            for (std::size_t j = 0; j < masked.biases.size(); ++j)
                masked.biases[j] = model.layers[k].biases[j] * f.biases[j];
            sub.values.push_back(std::move(masked));
        }
    }
    return result;
}

Mlp apply_update(const Mlp& model, const ModelUpdate& update, DepthSetting depth) {
    const std::size_t covered = depth.covered(model);
    if (update.empty()) return model;
    if (update.values.size() != covered || update.replace.size() != covered)
        throw ShapeError("update layer count does not match covered depth");

    Mlp next = model;
    for (std::size_t k = 0; k < covered; ++k) {
        DenseLayer& layer = next.layers[k];
        const LayerParams& vals = update.values[k];
        const LayerParams& rep = update.replace[k];
        require_same_shape(layer.weights, vals.weights, "update weight shape mismatch");
        require_same_shape(layer.weights, rep.weights, "replace mask shape mismatch");
        if (vals.biases.size() != layer.biases.size() || rep.biases.size() != layer.biases.size())
            throw ShapeError("update bias shape mismatch");

        for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
            if (rep.weights.data[i] != 0.0) layer.weights.data[i] = vals.weights.data[i];
        for (std::size_t j = 0; j < layer.biases.size(); ++j)
            if (rep.biases[j] != 0.0) layer.biases[j] = vals.biases[j];
    }
    return next;
}

} // namespace fedsub
