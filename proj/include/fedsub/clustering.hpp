#pragma once

#include <cstdint>
#include <vector>

namespace fedsub {

struct KmeansResult {
    std::vector<int> assignment; // cluster index per point
    std::vector<std::vector<double>> centroids;
};

// Lloyd's algorithm with k-means++ seeding; at most 100 iterations; empty
// clusters are repaired by stealing the point farthest from its centroid.
KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed);

// Standard Davies-Bouldin index (lower is better). Coincident centroids make
// their pair's ratio +infinity.
double davies_bouldin(const std::vector<std::vector<double>>& points,
                      const std::vector<int>& assignment,
                      const std::vector<std::vector<double>>& centroids);

// Grouping of the clients that supplied a prototype for one label.
struct ClusterAssignment {
    int label = 0;
    std::vector<std::vector<int>> clusters; // client ids per cluster
    std::vector<std::vector<double>> centroids;
};

// K-means over the label's prototypes for k in [2, min(k_max, m-1)], keeping
// the Davies-Bouldin-minimal configuration (ties toward smaller k). Fewer
// than 3 prototypes, or zero variance, short-circuit to a single cluster.
ClusterAssignment select_clusters(int label, const std::vector<int>& client_ids,
                                  const std::vector<std::vector<double>>& prototypes, int k_max,
                                  std::uint64_t seed);

// Hopkins clustering-tendency statistic in [0, 1]; ~0.5 for uniform data,
// near 1 for strongly clustered data. Returns 0.5 when all points coincide.
double hopkins(const std::vector<std::vector<double>>& points, int sample_m, std::uint64_t seed);

} // namespace fedsub
