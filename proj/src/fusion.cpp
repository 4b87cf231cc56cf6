#include "fedsub/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "fedsub/errors.hpp"

namespace fedsub {

std::vector<double> score_clients(const std::vector<MemberScore>& members,
                                  FusionStrategy strategy) {
    if (members.empty()) throw ParamError("cluster has no members to score");
    std::vector<double> raw(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        const MemberScore& m = members[i];
        if (m.support < 0 || m.accuracy < 0.0) throw ParamError("negative score input");
        raw[i] = strategy == FusionStrategy::ClusterLeadership
                     ? m.accuracy * static_cast<double>(m.support)
                     : static_cast<double>(m.support);
    }
    double total = 0.0;
    for (double v : raw) total += v;
    if (total <= 0.0) {
        std::fill(raw.begin(), raw.end(), 1.0 / static_cast<double>(members.size()));
        return raw;
    }
    for (double& v : raw) v /= total;
    return raw;
}

namespace {

void check_members(const std::vector<const Subnetwork*>& members,
                   const std::vector<double>& scores) {
    if (members.empty()) throw ParamError("cluster has no subnetworks to fuse");
    if (members.size() != scores.size()) throw ParamError("member/score count mismatch");
    for (const Subnetwork* m : members) {
        if (m->values.size() != members.front()->values.size())
            throw ShapeError("members cover different layer counts");
        for (std::size_t k = 0; k < m->values.size(); ++k)
            if (!m->values[k].weights.same_shape(members.front()->values[k].weights))
                throw ShapeError("member layer shapes differ");
    }
}

std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& shape) {
    std::vector<LayerParams> out;
    out.reserve(shape.size());
    for (const LayerParams& l : shape) {
        LayerParams z;
        z.weights = Matrix(l.weights.rows, l.weights.cols);
        z.biases.assign(l.biases.size(), 0.0);
        out.push_back(std::move(z));
    }
    return out;
}

} // namespace

FusedCluster fuse_cluster_avg(const std::vector<const Subnetwork*>& members,
                              const std::vector<double>& scores) {
    check_members(members, scores);
    FusedCluster fused;
    fused.values = zeros_like(members.front()->values);
    fused.freq = zeros_like(members.front()->values);
    for (std::size_t m = 0; m < members.size(); ++m) {
        const double p = scores[m];
        for (std::size_t k = 0; k < fused.values.size(); ++k) {
            const LayerParams& mv = members[m]->values[k];
            const LayerParams& mf = members[m]->freq[k];
            LayerParams& fv = fused.values[k];
            LayerParams& ff = fused.freq[k];
            for (std::size_t i = 0; i < fv.weights.data.size(); ++i) {
                fv.weights.data[i] += mv.weights.data[i] * p;
                ff.weights.data[i] += mf.weights.data[i] * p;
            }
            for (std::size_t j = 0; j < fv.biases.size(); ++j) {
                fv.biases[j] += mv.biases[j] * p;
                ff.biases[j] += mf.biases[j] * p;
            }
        }
    }
    return fused;
}

FusedCluster fuse_cluster_leadership(const std::vector<const Subnetwork*>& members,
                                     const std::vector<double>& scores,
                                     const std::vector<int>& client_ids) {
    check_members(members, scores);
    if (client_ids.size() != members.size()) throw ParamError("member/client id count mismatch");
    std::size_t leader = 0;
    for (std::size_t m = 1; m < members.size(); ++m) {
        if (scores[m] > scores[leader] ||
            (scores[m] == scores[leader] && client_ids[m] < client_ids[leader]))
            leader = m;
    }
    FusedCluster fused;
    fused.values = members[leader]->values;
    fused.freq = members[leader]->freq;
    return fused;
}

FusedCluster fuse_overlapping(const std::vector<const Subnetwork*>& members,
                              const std::vector<double>& scores) {
    FusedCluster fused = fuse_cluster_avg(members, scores);
    fused.has_overlap = true;
    fused.overlap = zeros_like(fused.values);
    for (std::size_t k = 0; k < fused.values.size(); ++k) {
        LayerParams& ov = fused.overlap[k];
        for (std::size_t i = 0; i < ov.weights.data.size(); ++i) {
            bool all = true;
            for (const Subnetwork* m : members)
                if (m->freq[k].weights.data[i] <= 0.0) {
                    all = false;
                    break;
                }
            ov.weights.data[i] = all ? 1.0 : 0.0;
            if (!all) {
                fused.values[k].weights.data[i] = 0.0;
                fused.freq[k].weights.data[i] = 0.0;
            }
        }
        for (std::size_t j = 0; j < ov.biases.size(); ++j) {
            bool all = true;
            for (const Subnetwork* m : members)
                if (m->freq[k].biases[j] <= 0.0) {
                    all = false;
                    break;
                }
            ov.biases[j] = all ? 1.0 : 0.0;
            if (!all) {
                fused.values[k].biases[j] = 0.0;
                fused.freq[k].biases[j] = 0.0;
            }
        }
    }
    return fused;
}

ClientUpdate assemble_client_update(int client, const Mlp& model,
                                    const std::vector<LayerParams>& own_union_mask,
                                    const std::vector<const FusedCluster*>& clusters,
                                    FusionStrategy strategy, DepthSetting depth) {
    const std::size_t covered = depth.covered(model);
    ClientUpdate out;
    out.client = client;
    if (clusters.empty()) return out; // keep the local model this round

    for (const FusedCluster* c : clusters) {
        if (c->values.size() != covered)
            throw ShapeError("fused cluster does not match covered depth");
    }
    const bool overlapping = strategy == FusionStrategy::OverlappingComponents;
    if (overlapping && own_union_mask.size() != covered)
        throw ShapeError("own activation mask does not match covered depth");

    out.update.values.reserve(covered);
    out.update.replace.reserve(covered);
    for (std::size_t k = 0; k < covered; ++k) {
        const DenseLayer& layer = model.layers[k];
        LayerParams vals = LayerParams::zeros_like(layer);
        LayerParams rep = LayerParams::zeros_like(layer);

        for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
            double sum = 0.0;
            int contributing = 0;
            for (const FusedCluster* c : clusters) {
                const double f = c->freq[k].weights.data[i];
                if (f <= 0.0) continue;
                sum += c->values[k].weights.data[i] / f;
                ++contributing;
            }
            if (contributing == 0) continue;
            if (overlapping) {
                if (own_union_mask[k].weights.data[i] == 0.0) continue;
                vals.weights.data[i] = (layer.weights.data[i] + sum) /
                                       static_cast<double>(contributing + 1);
            } else {
                vals.weights.data[i] = sum / static_cast<double>(contributing);
            }
            rep.weights.data[i] = 1.0;
        }
        for (std::size_t j = 0; j < layer.biases.size(); ++j) {
            double sum = 0.0;
            int contributing = 0;
            for (const FusedCluster* c : clusters) {
                const double f = c->freq[k].biases[j];
                if (f <= 0.0) continue;
                sum += c->values[k].biases[j] / f;
                ++contributing;
            }
            if (contributing == 0) continue;
            if (overlapping) {
                if (own_union_mask[k].biases[j] == 0.0) continue;
                vals.biases[j] = (layer.biases[j] + sum) / static_cast<double>(contributing + 1);
            } else {
                vals.biases[j] = sum / static_cast<double>(contributing);
            }
            rep.biases[j] = 1.0;
        }

        // Overlapping updates are normalized against the whole layer, so the
        // update carries the fully resolved matrix (retained entries keep the
        // client's current parameters).
        if (overlapping) {
            for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
                if (rep.weights.data[i] == 0.0) vals.weights.data[i] = layer.weights.data[i];
                rep.weights.data[i] = 1.0;
            }
            for (std::size_t j = 0; j < layer.biases.size(); ++j) {
                if (rep.biases[j] == 0.0) vals.biases[j] = layer.biases[j];
                rep.biases[j] = 1.0;
            }
        }
        out.update.values.push_back(std::move(vals));
        out.update.replace.push_back(std::move(rep));
    }
    return out;
}

std::vector<LayerNorms> layer_norms(const Mlp& model, DepthSetting depth) {
    const std::size_t covered = depth.covered(model);
    std::vector<LayerNorms> norms(covered);
    for (std::size_t k = 0; k < covered; ++k) {
        norms[k].weights = model.layers[k].weights.frobenius_norm();
        norms[k].biases = euclidean_norm(model.layers[k].biases);
    }
    return norms;
}

void normalize_layers(ModelUpdate& update, const std::vector<LayerNorms>& reference) {
    if (update.empty()) return;
    if (update.values.size() != reference.size())
        throw ShapeError("reference norms do not match update layers");
    for (std::size_t k = 0; k < update.values.size(); ++k) {
        LayerParams& vals = update.values[k];
        const double wn = vals.weights.frobenius_norm();
        if (wn > 0.0 && reference[k].weights > 0.0) {
            const double scale = reference[k].weights / wn;
            for (double& v : vals.weights.data) v *= scale;
        }
        const double bn = euclidean_norm(vals.biases);
        if (bn > 0.0 && reference[k].biases > 0.0) {
            const double scale = reference[k].biases / bn;
            for (double& v : vals.biases) v *= scale;
        }
    }
}

std::vector<LayerParams> union_mask(const std::map<int, Subnetwork>& subnets) {
    std::vector<LayerParams> mask;
    for (const auto& [label, sub] : subnets) {
        if (mask.empty()) {
            mask = zeros_like(sub.freq);
        }
        for (std::size_t k = 0; k < mask.size(); ++k) {
            for (std::size_t i = 0; i < mask[k].weights.data.size(); ++i)
                if (sub.freq[k].weights.data[i] > 0.0) mask[k].weights.data[i] = 1.0;
            for (std::size_t j = 0; j < mask[k].biases.size(); ++j)
                if (sub.freq[k].biases[j] > 0.0) mask[k].biases[j] = 1.0;
        }
    }
    return mask;
}

} // namespace fedsub
