#include "fedsub/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fedsub/errors.hpp"
#include "fedsub/matrix.hpp"
#include "fedsub/util.hpp"

namespace fedsub {

namespace {

int nearest_centroid(const std::vector<double>& p,
                     const std::vector<std::vector<double>>& centroids) {
    int best = 0;
    double best_d = squared_distance(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

std::vector<std::vector<double>> seed_centroids(const std::vector<std::vector<double>>& points,
                                                int k, std::mt19937_64& rng) {
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
    centroids.push_back(points[first(rng)]);

    std::vector<double> d2(points.size());
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, squared_distance(points[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), cum = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                cum += d2[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng); // all remaining mass zero: duplicate points
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

} // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed) {
    if (k < 1 || static_cast<std::size_t>(k) > points.size())
        throw ParamError("k must satisfy 1 <= k <= point count");

    std::mt19937_64 rng(splitmix64(seed));
    KmeansResult res;
    res.centroids = seed_centroids(points, k, rng);
    res.assignment.assign(points.size(), -1);
    const std::size_t dim = points.front().size();

    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const int c = nearest_centroid(points[i], res.centroids);
            if (c != res.assignment[i]) {
                res.assignment[i] = c;
                changed = true;
            }
        }

        // repair empty clusters by stealing the worst-fitting point
        std::vector<long> counts(k, 0);
        for (int a : res.assignment) ++counts[a];
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t worst = points.size();
            double worst_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (counts[res.assignment[i]] <= 1) continue;
                const double d = squared_distance(points[i], res.centroids[res.assignment[i]]);
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            if (worst == points.size()) break;
            --counts[res.assignment[worst]];
            res.assignment[worst] = c;
            ++counts[c];
            changed = true;
        }

        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            std::vector<double> mean(dim, 0.0);
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (res.assignment[i] != c) continue;
                for (std::size_t d = 0; d < dim; ++d) mean[d] += points[i][d];
            }
            for (double& v : mean) v /= static_cast<double>(counts[c]);
            res.centroids[c] = std::move(mean);
        }
        if (!changed) break;
    }
    return res;
}

double davies_bouldin(const std::vector<std::vector<double>>& points,
                      const std::vector<int>& assignment,
                      const std::vector<std::vector<double>>& centroids) {
    const std::size_t k = centroids.size();
    if (k < 2) throw ParamError("Davies-Bouldin needs at least 2 clusters");
    if (assignment.size() != points.size()) throw ParamError("assignment size mismatch");

    std::vector<double> scatter(k, 0.0);
    std::vector<long> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = assignment[i];
        scatter[c] += std::sqrt(squared_distance(points[i], centroids[c]));
        ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw ParamError("Davies-Bouldin does not allow empty clusters");
        scatter[c] /= static_cast<double>(counts[c]);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double dist = std::sqrt(squared_distance(centroids[i], centroids[j]));
            const double ratio = dist == 0.0 ? std::numeric_limits<double>::infinity()
                                             : (scatter[i] + scatter[j]) / dist;
            worst = std::max(worst, ratio);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

ClusterAssignment select_clusters(int label, const std::vector<int>& client_ids,
                                  const std::vector<std::vector<double>>& prototypes, int k_max,
                                  std::uint64_t seed) {
    if (prototypes.empty()) throw ParamError("select_clusters needs at least one prototype");
    if (client_ids.size() != prototypes.size())
        throw ParamError("client id / prototype count mismatch");

    ClusterAssignment out;
    out.label = label;
    const std::size_t m = prototypes.size();

    auto single_cluster = [&] {
        out.clusters.assign(1, client_ids);
        std::vector<double> mean(prototypes.front().size(), 0.0);
        for (const auto& p : prototypes)
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += p[d];
        for (double& v : mean) v /= static_cast<double>(m);
        out.centroids.assign(1, std::move(mean));
        return out;
    };

    if (m < 3) return single_cluster();

    double scatter = 0.0;
    for (std::size_t i = 1; i < m; ++i) scatter += squared_distance(prototypes[0], prototypes[i]);
    if (scatter <= 1e-24) return single_cluster(); // all prototypes identical

    // Zero-scatter singleton clusters drive the DB index toward 0, which
    // would always favor the largest k; prefer singleton-free configurations
    // and fall back to the plain minimum only when every k produces one.
    const int upper = std::min<int>(k_max, static_cast<int>(m) - 1);
    KmeansResult best;
    double best_score = std::numeric_limits<double>::infinity();
    int best_k = 0;
    bool best_clean = false;
    for (int k = 2; k <= upper; ++k) {
        KmeansResult r = kmeans(prototypes, k, mix_seed(seed, {static_cast<std::uint64_t>(k)}));
        std::vector<int> counts(k, 0);
        for (int a : r.assignment) ++counts[a];
        const bool clean = *std::min_element(counts.begin(), counts.end()) >= 2;
        const double score = davies_bouldin(prototypes, r.assignment, r.centroids);
        if ((clean && !best_clean) || (clean == best_clean && score < best_score)) {
            best_score = score;
            best = std::move(r);
            best_k = k;
            best_clean = clean;
        }
    }
    if (best_k == 0) return single_cluster();

    out.clusters.assign(best_k, {});
    for (std::size_t i = 0; i < m; ++i)
        out.clusters[best.assignment[i]].push_back(client_ids[i]);
    out.centroids = best.centroids;
    return out;
}

double hopkins(const std::vector<std::vector<double>>& points, int sample_m, std::uint64_t seed) {
    if (sample_m < 1) throw ParamError("sample_m must be >= 1");
    if (points.size() < 2 * static_cast<std::size_t>(sample_m))
        throw ParamError("hopkins needs at least 2 * sample_m points");

    const std::size_t dim = points.front().size();
    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (const auto& p : points)
        for (std::size_t d = 0; d < dim; ++d) {
            lo[d] = std::min(lo[d], p[d]);
            hi[d] = std::max(hi[d], p[d]);
        }
    bool degenerate = true;
    for (std::size_t d = 0; d < dim; ++d)
        if (hi[d] > lo[d]) degenerate = false;
    if (degenerate) return 0.5; // all points coincide

    std::mt19937_64 rng(splitmix64(seed));

    double u_sum = 0.0;
    for (int s = 0; s < sample_m; ++s) {
        std::vector<double> q(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            if (hi[d] > lo[d]) {
                std::uniform_real_distribution<double> u(lo[d], hi[d]);
                q[d] = u(rng);
            } else {
                q[d] = lo[d];
            }
        }
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : points) best = std::min(best, squared_distance(q, p));
        u_sum += std::sqrt(best);
    }

    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    double w_sum = 0.0;
    for (int s = 0; s < sample_m; ++s) {
        const std::size_t i = idx[s];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            best = std::min(best, squared_distance(points[i], points[j]));
        }
        w_sum += std::sqrt(best);
    }

    const double total = u_sum + w_sum;
    return total == 0.0 ? 0.5 : u_sum / total;
}

} // namespace fedsub
