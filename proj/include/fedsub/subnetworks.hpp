#pragma once

#include <map>
#include <vector>

#include "fedsub/nn.hpp"

namespace fedsub {

// Which layers participate in collaboration: all of them, or only the first
// L, with the remaining head trained purely locally.
struct DepthSetting {
    enum class Kind { Full, Partial };
    Kind kind = Kind::Partial;
    int layers = 2;

    static DepthSetting full() { return {Kind::Full, 0}; }
    static DepthSetting partial(int l) { return {Kind::Partial, l}; }

    std::size_t covered(const Mlp& model) const;
};

// Per-class slice of a model: activation-frequency-weighted parameters plus
// the frequencies themselves. The binary mask is freq > 0.
struct Subnetwork {
    int label = -1;
    std::vector<LayerParams> values; // weights * freq per element
    std::vector<LayerParams> freq;   // activation frequency in [0, 1]
    long support = 0;                // sample count for the label

    std::vector<LayerParams> mask() const;
};

// Binary per-layer mask for one sample: weight (i, j) is active iff its input
// endpoint is nonzero and its output endpoint survived the activation
// (ReLU output > 0; softmax outputs always count as active).
std::vector<LayerParams> activation_map(const Mlp& model, const ForwardTrace& trace,
                                        DepthSetting depth);

std::map<int, Subnetwork> extract_subnetworks(const Mlp& model, const std::vector<Sample>& data,
                                              DepthSetting depth);

// Parameter update for the covered layers: new values plus a binary
// replace-vs-retain mask.
struct ModelUpdate {
    std::vector<LayerParams> values;
    std::vector<LayerParams> replace;

    bool empty() const { return values.empty(); }
};

// Replace covered-layer parameters where the update says so; retain the rest.
// Uncovered head layers are returned bit-identical.
Mlp apply_update(const Mlp& model, const ModelUpdate& update, DepthSetting depth);

} // namespace fedsub
