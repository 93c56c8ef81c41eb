#include "cortex/errors.hpp"
#include "cortex/model.hpp"
#include "cortex/rng.hpp"
#include "cortex/synapse.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>
#include <vector>

using namespace cortex;

namespace {

ModelConfig tiny_config() {
    // One layer, one head, width 2: keys are plain 2-D points.
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 1;
    cfg.d_model = 2;
    cfg.d_k = 2;
    cfg.vocab_size = 16;
    cfg.max_positions = 64;
    return cfg;
}

KvCache cache_with_keys(const ModelConfig& cfg,
                        const std::vector<std::vector<float>>& keys) {
    KvCache cache(cfg);
    for (size_t i = 0; i < keys.size(); ++i) {
        std::vector<float> k;
        std::vector<float> v(static_cast<size_t>(cfg.n_layers) * cfg.d_model, 0.5f);
        for (int l = 0; l < cfg.n_layers; ++l)
            k.insert(k.end(), keys[i].begin(), keys[i].end());
        cache.append_entry(static_cast<int64_t>(i), Origin::context, k, v);
    }
    return cache;
}

PointCloud cloud_from(const std::vector<std::vector<float>>& pts) {
    PointCloud c;
    c.count = static_cast<int64_t>(pts.size());
    c.dim = static_cast<int>(pts.front().size());
    for (const auto& p : pts) c.data.insert(c.data.end(), p.begin(), p.end());
    return c;
}

double dist_oracle(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Brute-force top-k by score, descending, ties to the lower index.
std::vector<int64_t> topk_oracle(const std::vector<double>& scores, int k) {
    std::vector<int64_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
            return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
        return a < b;
    });
    idx.resize(std::min<size_t>(static_cast<size_t>(k), idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

PointCloud random_cloud(Rng& rng, int64_t n, int dim, double spread = 2.0) {
    PointCloud c;
    c.count = n;
    c.dim = dim;
    c.data.resize(static_cast<size_t>(n) * dim);
    for (float& v : c.data) v = static_cast<float>(rng.next_gaussian(0.0, spread));
    return c;
}

} // namespace

TEST_CASE("attention_scores: orthogonal query gives a uniform distribution") {
    const auto cfg = tiny_config();
    const auto cache = cache_with_keys(cfg, {{0.0f, 1.0f}, {0.0f, 2.0f}, {0.0f, -3.0f}});
    const std::vector<float> query = {1.0f, 0.0f};
    const auto a = attention_scores(cache, query, 0);
    REQUIRE(a.size() == 3);
    for (double v : a) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("attention_scores: hand-computed two-key example") {
    const auto cfg = tiny_config();
    const auto cache = cache_with_keys(cfg, {{1.0f, 0.0f}, {0.0f, 1.0f}});
    const std::vector<float> query = {1.0f, 0.0f};
    const auto a = attention_scores(cache, query, 0);
    // softmax(1/sqrt(2), 0), evaluated independently.
    const double s = 1.0 / std::sqrt(2.0);
    const double z = std::exp(s) + 1.0;
    CHECK(a[0] == doctest::Approx(std::exp(s) / z).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(1.0 / z).epsilon(1e-12));
}

TEST_CASE("attention_scores: per-head normalization sums to n_heads") {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_model = 16;
    cfg.d_k = 4;
    Rng rng(31);
    KvCache cache(cfg);
    std::vector<float> k(static_cast<size_t>(cfg.n_layers) * cfg.d_model);
    std::vector<float> v(k.size());
    for (int64_t i = 0; i < 11; ++i) {
        for (float& x : k) x = static_cast<float>(rng.next_gaussian(0.0, 1.0));
        for (float& x : v) x = static_cast<float>(rng.next_gaussian(0.0, 1.0));
        cache.append_entry(i, Origin::context, k, v);
    }
    std::vector<float> query(static_cast<size_t>(cfg.d_model));
    for (float& x : query) x = static_cast<float>(rng.next_gaussian(0.0, 1.0));
    const auto a = attention_scores(cache, query, 1);
    const double total = std::accumulate(a.begin(), a.end(), 0.0);
    CHECK(std::abs(total - cfg.n_heads) < 1e-6);
}

TEST_CASE("attention_scores: empty cache is a precondition error") {
    const auto cfg = tiny_config();
    KvCache cache(cfg);
    const std::vector<float> query = {1.0f, 0.0f};
    CHECK_THROWS_AS((void)attention_scores(cache, query, 0), precondition_error);
}

TEST_CASE("coverage_scores: distances to the nearest selected landmark") {
    const auto cfg = tiny_config();
    const auto cache =
        cache_with_keys(cfg, {{0.0f, 0.0f}, {1.0f, 0.0f}, {10.0f, 0.0f}});
    const std::vector<int64_t> selected = {0};
    const auto scores = coverage_scores(cache, selected, 0);
    CHECK(scores[0] == 0.0);
    CHECK(scores[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scores[2] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("coverage_scores: all selected means all zeros") {
    const auto cfg = tiny_config();
    const auto cache = cache_with_keys(cfg, {{0.0f, 1.0f}, {2.0f, 3.0f}});
    const std::vector<int64_t> selected = {0, 1};
    const auto scores = coverage_scores(cache, selected, 0);
    CHECK(scores[0] == 0.0);
    CHECK(scores[1] == 0.0);
}

TEST_CASE("coverage_scores: empty selection uses centroid distances") {
    const auto cloud = cloud_from({{0.0f, 0.0f}, {4.0f, 0.0f}});
    const auto scores = coverage_scores_points(cloud, {});
    // centroid (2, 0): both points at distance 2
    CHECK(scores[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(scores[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("select_landmarks: k >= L keeps every position") {
    const auto cfg = tiny_config();
    const auto cache = cache_with_keys(
        cfg, {{0.0f, 0.0f}, {1.0f, 0.0f}, {2.0f, 0.0f}, {3.0f, 0.0f}});
    const std::vector<float> query = {1.0f, 0.0f};
    const auto snap = select_landmarks(cache, query, 9, 0.5);
    REQUIRE(snap.landmarks.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(snap.landmarks[i].source_position == static_cast<int64_t>(i));
    }
    CHECK(snap.source_length == 4);
    CHECK(snap.k_configured == 9);
}

TEST_CASE("select_landmarks: k < 1 is a configuration error") {
    const auto cloud = cloud_from({{0.0f, 0.0f}});
    const std::vector<double> attn = {1.0};
    CHECK_THROWS_AS((void)select_landmarks_points(cloud, attn, 0, 0.5), config_error);
    CHECK_THROWS_AS((void)select_landmarks_points(cloud, attn, 1, 1.5), config_error);
}

TEST_CASE("select_landmarks: lambda=0 equals brute-force top-k of attention") {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const int64_t n = 1 + static_cast<int64_t>(rng.next_below(64));
        const int k = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
        const auto cloud = random_cloud(rng, n, 8);
        std::vector<double> attn(static_cast<size_t>(n));
        for (double& a : attn) a = rng.next_unit();
        const auto sel = select_landmarks_points(cloud, attn, k, 0.0);
        CHECK(sel.indices == topk_oracle(attn, k));
    }
}

TEST_CASE("select_landmarks: attention ties break to the smaller position") {
    const auto cloud = cloud_from({{0.0f, 0.0f}, {1.0f, 1.0f}, {2.0f, 2.0f}});
    const std::vector<double> attn = {0.5, 0.5, 0.5};
    const auto sel = select_landmarks_points(cloud, attn, 2, 0.0);
    CHECK(sel.indices == std::vector<int64_t>{0, 1});
}

TEST_CASE("select_landmarks: lambda=1 covers two separated clusters") {
    // Two tight clusters; any optimal pair takes one landmark from each.
    std::vector<std::vector<float>> pts;
    for (int i = 0; i < 5; ++i) {
        std::vector<float> a(16, 10.0f);
        a[static_cast<size_t>(i)] = 11.0f;
        pts.push_back(a);
        std::vector<float> b(16, -10.0f);
        b[static_cast<size_t>(i)] = -9.0f;
        pts.push_back(b);
    }
    const auto cloud = cloud_from(pts);
    const std::vector<double> attn(static_cast<size_t>(cloud.count), 0.0);
    const auto sel = select_landmarks_points(cloud, attn, 2, 1.0);
    REQUIRE(sel.indices.size() == 2);
    const bool first_in_a = cloud.point(sel.indices[0])[2] > 0.0f;
    const bool second_in_a = cloud.point(sel.indices[1])[2] > 0.0f;
    CHECK(first_in_a != second_in_a);

    // Exhaustive 2-subset oracle on the directed Hausdorff value.
    double best = std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < cloud.count; ++i) {
        for (int64_t j = i + 1; j < cloud.count; ++j) {
            double worst = 0.0;
            for (int64_t p = 0; p < cloud.count; ++p) {
                const double d = std::min(dist_oracle(cloud.point(p), cloud.point(i)),
                                          dist_oracle(cloud.point(p), cloud.point(j)));
                worst = std::max(worst, d);
            }
            best = std::min(best, worst);
        }
    }
    CHECK(hausdorff_to_subset(cloud, sel.indices) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("select_landmarks: incremental greedy equals a from-scratch greedy") {
    // Independent reimplementation: recompute coverage against the selected
    // set every round instead of maintaining running minimum distances.
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        const int64_t n = 10 + static_cast<int64_t>(rng.next_below(50));
        const int k = 1 + static_cast<int>(rng.next_below(12));
        const double lambda = rng.next_unit();
        const auto cloud = random_cloud(rng, n, 6);
        std::vector<double> attn(static_cast<size_t>(n));
        for (double& a : attn) a = rng.next_unit();

        std::vector<int64_t> selected;
        std::vector<bool> taken(static_cast<size_t>(n), false);
        const int64_t take = std::min<int64_t>(k, n);
        for (int64_t round = 0; round < take; ++round) {
            const auto cov = coverage_scores_points(cloud, selected);
            double amin = 1e300, amax = -1e300, cmin = 1e300, cmax = -1e300;
            for (int64_t i = 0; i < n; ++i) {
                if (taken[static_cast<size_t>(i)]) continue;
                amin = std::min(amin, attn[static_cast<size_t>(i)]);
                amax = std::max(amax, attn[static_cast<size_t>(i)]);
                cmin = std::min(cmin, cov[static_cast<size_t>(i)]);
                cmax = std::max(cmax, cov[static_cast<size_t>(i)]);
            }
            int64_t best = -1;
            double best_score = -1.0;
            for (int64_t i = 0; i < n; ++i) {
                if (taken[static_cast<size_t>(i)]) continue;
                const double na =
                    amax > amin ? (attn[static_cast<size_t>(i)] - amin) / (amax - amin) : 0.0;
                const double nc =
                    cmax > cmin ? (cov[static_cast<size_t>(i)] - cmin) / (cmax - cmin) : 0.0;
                const double h = lambda * nc + (1.0 - lambda) * na;
                if (h > best_score) {
                    best = i;
                    best_score = h;
                }
            }
            taken[static_cast<size_t>(best)] = true;
            selected.push_back(best);
        }
        std::sort(selected.begin(), selected.end());

        const auto sel = select_landmarks_points(cloud, attn, k, lambda);
        CHECK(sel.indices == selected);
    }
}

TEST_CASE("select_landmarks: snapshot keeps reading order and copies K/V") {
    const auto cfg = tiny_config();
    auto cache = cache_with_keys(cfg, {{0.0f, 0.0f},
                                       {5.0f, 0.0f},
                                       {0.0f, 5.0f},
                                       {9.0f, 9.0f},
                                       {1.0f, 1.0f}});
    const std::vector<float> query = {0.3f, 0.7f};
    const auto snap = select_landmarks(cache, query, 3, 0.5);
    REQUIRE(snap.landmarks.size() == 3);
    for (size_t i = 1; i < snap.landmarks.size(); ++i) {
        CHECK(snap.landmarks[i].source_position >
              snap.landmarks[i - 1].source_position);
    }
    // Landmark K/V are copies: growing the cache leaves them untouched.
    const auto frozen = snap.landmarks[0].keys;
    std::vector<float> k = {42.0f, 42.0f}, v = {1.0f, 2.0f};
    cache.append_entry(10, Origin::context, k, v);
    CHECK(snap.landmarks[0].keys == frozen);
}

TEST_CASE("select_landmarks: injected entries are not landmark candidates") {
    const auto cfg = tiny_config();
    auto cache = cache_with_keys(cfg, {{0.0f, 0.0f}, {1.0f, 0.0f}});
    std::vector<float> k = {7.0f, 7.0f}, v = {0.0f, 0.0f};
    cache.append_entry(50, Origin::injected, k, v);
    const std::vector<float> query = {1.0f, 0.0f};
    const auto snap = select_landmarks(cache, query, 8, 0.5);
    CHECK(snap.source_length == 2);
    REQUIRE(snap.landmarks.size() == 2);
    for (const auto& lm : snap.landmarks) CHECK(lm.source_position < 50);
}

TEST_CASE("hausdorff_distance: identity and single-landmark cases") {
    const auto cloud = cloud_from({{0.0f, 0.0f}, {10.0f, 0.0f}});
    CHECK(hausdorff_distance(cloud, cloud) == 0.0);
    const auto single = cloud_from({{0.0f, 0.0f}});
    CHECK(hausdorff_distance(cloud, single) == doctest::Approx(10.0).epsilon(1e-12));
    PointCloud empty;
    empty.dim = 2;
    CHECK_THROWS_AS((void)hausdorff_distance(cloud, empty), precondition_error);
}

TEST_CASE("hausdorff_distance: matches the exhaustive double loop") {
    Rng rng(51);
    const auto cloud = random_cloud(rng, 20, 6);
    const auto rows = std::vector<int64_t>{2, 5, 9, 13, 17};
    PointCloud landmarks;
    landmarks.dim = cloud.dim;
    for (int64_t r : rows) {
        auto p = cloud.point(r);
        landmarks.data.insert(landmarks.data.end(), p.begin(), p.end());
        ++landmarks.count;
    }
    double worst = 0.0;
    for (int64_t i = 0; i < cloud.count; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int64_t r : rows) best = std::min(best, dist_oracle(cloud.point(i), cloud.point(r)));
        worst = std::max(worst, best);
    }
    CHECK(hausdorff_distance(cloud, landmarks) == doctest::Approx(worst).epsilon(1e-12));
    CHECK(hausdorff_to_subset(cloud, rows) == doctest::Approx(worst).epsilon(1e-12));
}

TEST_CASE("mean_pairwise_reduction: line cloud {0,1,2,3} with landmarks {1,2}") {
    const auto cloud = cloud_from({{0.0f, 0.0f}, {1.0f, 0.0f}, {2.0f, 0.0f}, {3.0f, 0.0f}});
    // Pairs: 1+2+3+1+2+1 = 10 over 6 pairs -> 5/3; landmarks mean 1.
    const double expected = 1.0 - 1.0 / (10.0 / 6.0);
    const std::vector<int64_t> rows = {1, 2};
    CHECK(mean_pairwise_reduction_subset(cloud, rows) ==
          doctest::Approx(expected).epsilon(1e-12));
    const std::vector<int64_t> all = {0, 1, 2, 3};
    CHECK(mean_pairwise_reduction_subset(cloud, all) == doctest::Approx(0.0));
}

TEST_CASE("mean_pairwise_reduction: point-set form agrees with the subset form") {
    Rng rng(53);
    const auto cloud = random_cloud(rng, 12, 5);
    const std::vector<int64_t> rows = {1, 4, 7, 9};
    PointCloud landmarks;
    landmarks.dim = cloud.dim;
    for (int64_t r : rows) {
        auto p = cloud.point(r);
        landmarks.data.insert(landmarks.data.end(), p.begin(), p.end());
        ++landmarks.count;
    }
    CHECK(mean_pairwise_reduction(cloud, landmarks) ==
          doctest::Approx(mean_pairwise_reduction_subset(cloud, rows)).epsilon(1e-12));
}

TEST_CASE("coverage_scores: non-context positions are rejected") {
    const auto cfg = tiny_config();
    auto cache = cache_with_keys(cfg, {{0.0f, 0.0f}, {1.0f, 0.0f}});
    const std::vector<int64_t> bogus = {17};
    CHECK_THROWS_AS((void)coverage_scores(cache, bogus, 0), precondition_error);
}

TEST_CASE("mean_pairwise_reduction: degenerate identical cloud is 0 by convention") {
    PointCloud flat;
    flat.dim = 3;
    flat.count = 5;
    flat.data.assign(15, 2.0f);
    const std::vector<int64_t> rows = {0, 3};
    CHECK(mean_pairwise_reduction_subset(flat, rows) == 0.0);
    const std::vector<int64_t> one = {0};
    CHECK_THROWS_AS((void)mean_pairwise_reduction_subset(flat, one), precondition_error);
}

TEST_CASE("synapse buffer: latest wins and versions are monotone") {
    SynapseBuffer buffer;
    CHECK(buffer.read_latest() == nullptr);
    SynapseSnapshot s1;
    s1.source_length = 1;
    SynapseSnapshot s2;
    s2.source_length = 2;
    CHECK(buffer.push(std::move(s1)) == 1);
    CHECK(buffer.push(std::move(s2)) == 2);
    const auto latest = buffer.read_latest();
    REQUIRE(latest != nullptr);
    CHECK(latest->version == 2);
    CHECK(latest->source_length == 2);
}

TEST_CASE("synapse buffer: 1000 pushes stamp versions 1..1000") {
    SynapseBuffer buffer;
    for (int i = 1; i <= 1000; ++i) {
        SynapseSnapshot s;
        CHECK(buffer.push(std::move(s)) == static_cast<uint64_t>(i));
    }
    CHECK(buffer.read_latest()->version == 1000);
}

TEST_CASE("synapse buffer: readers never observe a torn snapshot") {
    SynapseBuffer buffer;
    std::atomic<bool> stop{false};
    std::atomic<int> inconsistent{0};
    std::thread reader([&] {
        while (!stop.load()) {
            const auto snap = buffer.read_latest();
            if (!snap) continue;
            // Writer keeps landmarks.size() == source_length; a torn read
            // would break that pairing.
            if (snap->source_length !=
                static_cast<int64_t>(snap->landmarks.size())) {
                inconsistent.fetch_add(1);
            }
        }
    });
    for (int v = 1; v <= 500; ++v) {
        SynapseSnapshot s;
        s.source_length = v % 7;
        s.landmarks.resize(static_cast<size_t>(v % 7));
        buffer.push(std::move(s));
    }
    stop.store(true);
    reader.join();
    CHECK(inconsistent.load() == 0);
}

TEST_CASE("snapshot json dump carries version, length, positions, scores") {
    const auto cfg = tiny_config();
    const auto cache = cache_with_keys(cfg, {{0.0f, 0.0f}, {3.0f, 4.0f}});
    const std::vector<float> query = {1.0f, 0.0f};
    auto snap = select_landmarks(cache, query, 2, 0.5);
    snap.version = 9;
    const auto j = snap.to_json();
    CHECK(j.find("\"version\":9") != std::string::npos);
    CHECK(j.find("\"source_length\":2") != std::string::npos);
    CHECK(j.find("\"positions\":[0,1]") != std::string::npos);
    CHECK(j.find("hybrid_scores") != std::string::npos);
}
