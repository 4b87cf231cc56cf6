#pragma once

#include <vector>

#include "fedsub/subnetworks.hpp"

namespace fedsub {

enum class FusionStrategy { ClusterAvg, ClusterLeadership, OverlappingComponents };

// Scoring inputs for one cluster member.
struct MemberScore {
    int client = 0;
    long support = 0;      // |D_y| for the cluster's label
    double accuracy = 0.0; // local validation accuracy on the label
};

// Normalized reliability scores (sum to 1). ClusterAvg and Overlapping weight
// by support; Leadership by accuracy * support. All-zero raw scores degrade
// to uniform weights.
std::vector<double> score_clients(const std::vector<MemberScore>& members,
                                  FusionStrategy strategy);

// Score-weighted aggregate of one cluster's subnetworks. `values` follows the
// strategy's fusion rule; `freq` carries the matching aggregate of the
// members' activation frequencies so the assembler can recover weight-scale
// parameters; `overlap` (OverlappingComponents only) is the AND of the
// member masks.
struct FusedCluster {
    std::vector<LayerParams> values;
    std::vector<LayerParams> freq;
    std::vector<LayerParams> overlap;
    bool has_overlap = false;
};

FusedCluster fuse_cluster_avg(const std::vector<const Subnetwork*>& members,
                              const std::vector<double>& scores);

// Picks the member with the highest score (ties: lowest client id).
FusedCluster fuse_cluster_leadership(const std::vector<const Subnetwork*>& members,
                                     const std::vector<double>& scores,
                                     const std::vector<int>& client_ids);

// Weighted sum restricted to elements active in every member.
FusedCluster fuse_overlapping(const std::vector<const Subnetwork*>& members,
                              const std::vector<double>& scores);

struct ClientUpdate {
    int client = 0;
    ModelUpdate update;
};

// Combine the fused matrices of every cluster the client belongs to into one
// parameter update for its covered layers. Cluster values are divided by
// their aggregated frequencies first, which restores weight scale (a fused
// subnetwork entry is weight x frequency). For OverlappingComponents the
// client's own parameters join the average wherever its union activation
// mask is set, and the caller is expected to normalize afterwards.
ClientUpdate assemble_client_update(int client, const Mlp& model,
                                    const std::vector<LayerParams>& own_union_mask,
                                    const std::vector<const FusedCluster*>& clusters,
                                    FusionStrategy strategy, DepthSetting depth);

struct LayerNorms {
    double weights = 0.0;
    double biases = 0.0;
};

std::vector<LayerNorms> layer_norms(const Mlp& model, DepthSetting depth);

// Rescale each covered layer of the update so its Frobenius (weights) and
// Euclidean (biases) norms match the reference; zero-norm layers untouched.
void normalize_layers(ModelUpdate& update, const std::vector<LayerNorms>& reference);

// Elementwise OR of the masks of every subnetwork the client extracted.
std::vector<LayerParams> union_mask(const std::map<int, Subnetwork>& subnets);

} // namespace fedsub
