#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "fedsub/clustering.hpp"
#include "fedsub/errors.hpp"
#include "fedsub/matrix.hpp"

using namespace fedsub;

namespace {

using Points = std::vector<std::vector<double>>;

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    return std::sqrt(squared_distance(a, b));
}

// independent Davies-Bouldin recomputation straight from the definition
double db_reference(const Points& pts, const std::vector<int>& assignment,
                    const Points& centroids) {
    const std::size_t k = centroids.size();
    std::vector<double> sigma(k, 0.0);
    std::vector<int> count(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        sigma[assignment[i]] += dist(pts[i], centroids[assignment[i]]);
        ++count[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) sigma[c] /= count[c];
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double d = dist(centroids[i], centroids[j]);
            worst = std::max(worst, d == 0.0 ? std::numeric_limits<double>::infinity()
                                             : (sigma[i] + sigma[j]) / d);
        }
        total += worst;
    }
    return total / k;
}

Points random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double spread = 2.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, spread);
    Points pts(n, std::vector<double>(dim));
    for (auto& p : pts)
        for (double& v : p) v = g(rng);
    return pts;
}

// mean of a cluster's points
std::vector<double> centroid_of(const Points& pts, const std::vector<int>& members) {
    std::vector<double> c(pts[0].size(), 0.0);
    for (int i : members)
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += pts[i][d];
    for (double& v : c) v /= members.size();
    return c;
}

// k-means objective
double sse(const Points& pts, const std::vector<int>& assignment, const Points& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        s += squared_distance(pts[i], centroids[assignment[i]]);
    return s;
}

} // namespace

TEST_CASE("kmeans: k = 1 returns the mean") {
    const Points pts = {{0.0, 0.0}, {2.0, 0.0}, {1.0, 3.0}};
    const auto res = kmeans(pts, 1, 1);
    CHECK(res.centroids.size() == 1);
    CHECK(res.centroids[0][0] == doctest::Approx(1.0));
    CHECK(res.centroids[0][1] == doctest::Approx(1.0));
    for (int a : res.assignment) CHECK(a == 0);
}

TEST_CASE("kmeans: two far pairs are split optimally") {
    const Points pts = {{0.0, 0.0}, {0.0, 1.0}, {10.0, 0.0}, {10.0, 1.0}};
    const auto res = kmeans(pts, 2, 3);
    CHECK(res.assignment[0] == res.assignment[1]);
    CHECK(res.assignment[2] == res.assignment[3]);
    CHECK(res.assignment[0] != res.assignment[2]);
    // brute force: enumerate all 2-partitions and compare the objective
    double best = std::numeric_limits<double>::infinity();
    for (int m = 1; m < 15; ++m) {
        std::vector<int> a, b;
        for (int i = 0; i < 4; ++i) ((m >> i) & 1 ? a : b).push_back(i);
        if (a.empty() || b.empty()) continue;
        Points cents = {centroid_of(pts, a), centroid_of(pts, b)};
        std::vector<int> assign(4);
        for (int i : a) assign[i] = 0;
        for (int i : b) assign[i] = 1;
        best = std::min(best, sse(pts, assign, cents));
    }
    CHECK(sse(pts, res.assignment, res.centroids) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("kmeans: k = n puts every point in its own cluster") {
    const Points pts = random_points(6, 3, 17);
    const auto res = kmeans(pts, 6, 5);
    std::set<int> seen(res.assignment.begin(), res.assignment.end());
    CHECK(seen.size() == 6);
}

TEST_CASE("kmeans: deterministic for a fixed seed and rejects bad k") {
    const Points pts = random_points(20, 4, 23);
    const auto a = kmeans(pts, 4, 9);
    const auto b = kmeans(pts, 4, 9);
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
    CHECK_THROWS_AS(kmeans(pts, 21, 9), ParamError);
    CHECK_THROWS_AS(kmeans(pts, 0, 9), ParamError);
}

TEST_CASE("kmeans: result is a partition with no empty cluster") {
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Points pts = random_points(12, 2, 100 + t);
        const auto res = kmeans(pts, 4, t);
        CHECK(res.assignment.size() == pts.size());
        std::vector<int> counts(4, 0);
        for (int a : res.assignment) {
            CHECK(a >= 0);
            CHECK(a < 4);
            ++counts[a];
        }
        for (int c : counts) CHECK(c > 0);
    }
}

TEST_CASE("davies_bouldin: tight distant clusters score 0.01 exactly") {
    const Points pts = {{0.0, 0.0}, {0.0, 0.1}, {10.0, 0.0}, {10.0, 0.1}};
    const std::vector<int> assignment = {0, 0, 1, 1};
    const Points cents = {{0.0, 0.05}, {10.0, 0.05}};
    const double db = davies_bouldin(pts, assignment, cents);
    CHECK(db == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(db < 0.2);
}

TEST_CASE("davies_bouldin: singleton clusters have zero scatter") {
    const Points pts = {{0.0}, {5.0}, {9.0}};
    const std::vector<int> assignment = {0, 1, 2};
    CHECK(davies_bouldin(pts, assignment, pts) == 0.0);
}

TEST_CASE("davies_bouldin: matches the brute-force definition") {
    for (std::uint64_t t = 0; t < 50; ++t) {
        const Points pts = random_points(8, 3, 200 + t);
        const auto res = kmeans(pts, 3, t);
        CHECK(davies_bouldin(pts, res.assignment, res.centroids) ==
              doctest::Approx(db_reference(pts, res.assignment, res.centroids))
                  .epsilon(1e-9));
    }
}

TEST_CASE("davies_bouldin: separated clustering beats every other 2-partition") {
    const Points pts = {{0.0, 0.0}, {0.2, 0.1}, {0.1, 0.3},
                        {8.0, 8.0}, {8.2, 8.1}, {8.1, 8.3}};
    const std::vector<int> good = {0, 0, 0, 1, 1, 1};
    const Points good_cents = {centroid_of(pts, {0, 1, 2}), centroid_of(pts, {3, 4, 5})};
    const double good_db = davies_bouldin(pts, good, good_cents);
    for (int m = 1; m < 63; ++m) {
        std::vector<int> a, b;
        for (int i = 0; i < 6; ++i) ((m >> i) & 1 ? a : b).push_back(i);
        if (a.empty() || b.empty()) continue;
        std::vector<int> assign(6);
        for (int i : a) assign[i] = 0;
        for (int i : b) assign[i] = 1;
        const Points cents = {centroid_of(pts, a), centroid_of(pts, b)};
        CHECK(good_db <= davies_bouldin(pts, assign, cents) + 1e-12);
    }
}

TEST_CASE("davies_bouldin: fewer than two clusters raises") {
    const Points pts = {{0.0}, {1.0}};
    CHECK_THROWS_AS(davies_bouldin(pts, {0, 0}, {{0.5}}), ParamError);
}

TEST_CASE("select_clusters: two clients collapse to one cluster") {
    const auto res = select_clusters(0, {3, 9}, {{0.0, 0.0}, {5.0, 5.0}}, 10, 1);
    REQUIRE(res.clusters.size() == 1);
    CHECK(res.clusters[0] == std::vector<int>{3, 9});
}

TEST_CASE("select_clusters: recovers the k = 2 structure") {
    Points protos;
    std::vector<int> ids;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int i = 0; i < 3; ++i) {
        protos.push_back({0.0 + g(rng), 0.0 + g(rng)});
        ids.push_back(i);
    }
    for (int i = 0; i < 3; ++i) {
        protos.push_back({10.0 + g(rng), 10.0 + g(rng)});
        ids.push_back(3 + i);
    }
    const auto res = select_clusters(0, ids, protos, 5, 7);
    REQUIRE(res.clusters.size() == 2);
    std::set<int> first(res.clusters[0].begin(), res.clusters[0].end());
    CHECK((first == std::set<int>{0, 1, 2} || first == std::set<int>{3, 4, 5}));
}

TEST_CASE("select_clusters: identical prototypes short-circuit to one cluster") {
    const Points protos(5, {1.0, 2.0});
    const auto res = select_clusters(2, {0, 1, 2, 3, 4}, protos, 10, 3);
    CHECK(res.clusters.size() == 1);
    CHECK(res.clusters[0].size() == 5);
}

TEST_CASE("select_clusters: clusters partition the prototype holders") {
    for (std::uint64_t t = 0; t < 10; ++t) {
        const Points protos = random_points(9, 4, 300 + t);
        std::vector<int> ids;
        for (int i = 0; i < 9; ++i) ids.push_back(i * 2);
        const auto res = select_clusters(1, ids, protos, 10, t);
        std::set<int> seen;
        for (const auto& cluster : res.clusters) {
            CHECK(!cluster.empty());
            for (int u : cluster) {
                CHECK(!seen.count(u));
                seen.insert(u);
            }
        }
        CHECK(seen.size() == 9);
    }
}

TEST_CASE("hopkins: uniform data sits near 0.5") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double total = 0.0;
    for (int t = 0; t < 20; ++t) {
        Points pts(500, std::vector<double>(2));
        for (auto& p : pts)
            for (double& v : p) v = u(rng);
        const double h = hopkins(pts, 50, 500 + t);
        CHECK(h >= 0.0);
        CHECK(h <= 1.0);
        total += h;
    }
    const double mean = total / 20.0;
    CHECK(mean > 0.4);
    CHECK(mean < 0.6);
}

TEST_CASE("hopkins: two tight distant blobs score above 0.85") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> g(0.0, 0.05);
    Points pts;
    for (int i = 0; i < 100; ++i) pts.push_back({g(rng), g(rng)});
    for (int i = 0; i < 100; ++i) pts.push_back({10.0 + g(rng), 10.0 + g(rng)});
    CHECK(hopkins(pts, 50, 11) > 0.85);
}

TEST_CASE("hopkins: coincident points return 0.5 by convention") {
    const Points pts(10, {3.0, 3.0});
    CHECK(hopkins(pts, 5, 1) == 0.5);
}

TEST_CASE("hopkins: parameter preconditions") {
    const Points pts = random_points(10, 2, 51);
    CHECK_THROWS_AS(hopkins(pts, 6, 1), ParamError); // needs 2m <= n
    CHECK_THROWS_AS(hopkins(pts, 0, 1), ParamError);
}
