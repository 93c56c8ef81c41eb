#include "cortex/synapse.hpp"

#include "cortex/errors.hpp"
#include "cortex/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace cortex {

namespace {

double sq_dist(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

double sq_dist(std::span<const float> a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

std::vector<double> centroid_of(const PointCloud& cloud) {
    std::vector<double> c(static_cast<size_t>(cloud.dim), 0.0);
    for (int64_t i = 0; i < cloud.count; ++i) {
        auto p = cloud.point(i);
        for (int j = 0; j < cloud.dim; ++j) c[static_cast<size_t>(j)] += p[static_cast<size_t>(j)];
    }
    for (double& v : c) v /= static_cast<double>(cloud.count);
    return c;
}

} // namespace

ContextCloud context_key_cloud(const KvCache& cache, int layer) {
    const ModelConfig& cfg = cache.config();
    ContextCloud out;
    out.cloud.dim = cfg.d_model;
    for (int64_t i = 0; i < cache.size(); ++i) {
        if (cache.origin(i) != Origin::context) continue;
        auto key = cache.key(layer, i);
        out.cloud.data.insert(out.cloud.data.end(), key.begin(), key.end());
        out.entry_index.push_back(i);
        out.positions.push_back(cache.position(i));
        ++out.cloud.count;
    }
    return out;
}

std::vector<double> attention_scores_points(const PointCloud& keys,
                                            std::span<const float> query,
                                            int n_heads) {
    if (keys.count == 0) throw precondition_error("attention_scores: empty candidate set");
    if (query.size() != static_cast<size_t>(keys.dim))
        throw precondition_error("attention_scores: query width mismatch");
    if (n_heads < 1 || keys.dim % n_heads != 0)
        throw precondition_error("attention_scores: bad head count");
    const int d_k = keys.dim / n_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

    std::vector<double> total(static_cast<size_t>(keys.count), 0.0);
    std::vector<double> scores(static_cast<size_t>(keys.count));
    for (int h = 0; h < n_heads; ++h) {
        const size_t off = static_cast<size_t>(h) * static_cast<size_t>(d_k);
        for (int64_t i = 0; i < keys.count; ++i) {
            auto kp = keys.point(i);
            double dot = 0.0;
            for (int c = 0; c < d_k; ++c) {
                dot += static_cast<double>(query[off + static_cast<size_t>(c)]) *
                       static_cast<double>(kp[off + static_cast<size_t>(c)]);
            }
            scores[static_cast<size_t>(i)] = dot * inv_sqrt_dk;
        }
        const auto probs = kernels::softmax(std::span<const double>(scores));
        for (int64_t i = 0; i < keys.count; ++i) {
            total[static_cast<size_t>(i)] += probs[static_cast<size_t>(i)];
        }
    }
    return total;
}

std::vector<double> attention_scores(const KvCache& cache,
                                     std::span<const float> query, int layer) {
    auto ctx = context_key_cloud(cache, layer);
    if (ctx.cloud.count == 0)
        throw precondition_error("attention_scores: cache has no context entries");
    return attention_scores_points(ctx.cloud, query, cache.config().n_heads);
}

std::vector<double> coverage_scores_points(const PointCloud& cloud,
                                           std::span<const int64_t> selected) {
    std::vector<double> out(static_cast<size_t>(cloud.count), 0.0);
    if (cloud.count == 0) return out;
    if (selected.empty()) {
        const auto c = centroid_of(cloud);
        for (int64_t i = 0; i < cloud.count; ++i) {
            out[static_cast<size_t>(i)] = std::sqrt(sq_dist(cloud.point(i), c));
        }
        return out;
    }
    for (int64_t i = 0; i < cloud.count; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int64_t s : selected) best = std::min(best, sq_dist(cloud.point(i), cloud.point(s)));
        out[static_cast<size_t>(i)] = std::sqrt(best);
    }
    return out;
}

std::vector<double> coverage_scores(const KvCache& cache,
                                    std::span<const int64_t> selected_positions,
                                    int layer) {
    auto ctx = context_key_cloud(cache, layer);
    std::unordered_map<int64_t, int64_t> pos_to_row;
    for (int64_t r = 0; r < ctx.cloud.count; ++r) pos_to_row[ctx.positions[static_cast<size_t>(r)]] = r;
    std::vector<int64_t> rows;
    rows.reserve(selected_positions.size());
    for (int64_t p : selected_positions) {
        auto it = pos_to_row.find(p);
        if (it == pos_to_row.end())
            throw precondition_error("coverage_scores: position is not a context entry");
        rows.push_back(it->second);
    }
    return coverage_scores_points(ctx.cloud, rows);
}

double hausdorff_distance(const PointCloud& cloud, const PointCloud& landmarks) {
    if (cloud.count == 0 || landmarks.count == 0)
        throw precondition_error("hausdorff_distance: empty point set");
    if (cloud.dim != landmarks.dim)
        throw precondition_error("hausdorff_distance: dimension mismatch");
    double worst = 0.0;
    for (int64_t i = 0; i < cloud.count; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < landmarks.count; ++j) {
            best = std::min(best, sq_dist(cloud.point(i), landmarks.point(j)));
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

double hausdorff_to_subset(const PointCloud& cloud,
                           std::span<const int64_t> landmark_rows) {
    if (landmark_rows.empty()) throw precondition_error("hausdorff: empty landmark set");
    double worst = 0.0;
    for (int64_t i = 0; i < cloud.count; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int64_t s : landmark_rows) best = std::min(best, sq_dist(cloud.point(i), cloud.point(s)));
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

namespace {

double mean_pairwise(const PointCloud& cloud) {
    double sum = 0.0;
    int64_t pairs = 0;
    for (int64_t i = 0; i < cloud.count; ++i) {
        for (int64_t j = i + 1; j < cloud.count; ++j) {
            sum += std::sqrt(sq_dist(cloud.point(i), cloud.point(j)));
            ++pairs;
        }
    }
    return pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
}

double mean_pairwise_subset(const PointCloud& cloud, std::span<const int64_t> rows) {
    double sum = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = i + 1; j < rows.size(); ++j) {
            sum += std::sqrt(sq_dist(cloud.point(rows[i]), cloud.point(rows[j])));
            ++pairs;
        }
    }
    return pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
}

} // namespace

double mean_pairwise_reduction(const PointCloud& cloud, const PointCloud& landmarks) {
    if (landmarks.count < 2)
        throw precondition_error("mean_pairwise_reduction: need >= 2 landmarks");
    if (cloud.count < 2)
        throw precondition_error("mean_pairwise_reduction: need >= 2 cloud points");
    const double cloud_mean = mean_pairwise(cloud);
    if (cloud_mean == 0.0) return 0.0; // 0/0 convention for degenerate clouds
    return 1.0 - mean_pairwise(landmarks) / cloud_mean;
}

double mean_pairwise_reduction_subset(const PointCloud& cloud,
                                      std::span<const int64_t> landmark_rows) {
    if (landmark_rows.size() < 2)
        throw precondition_error("mean_pairwise_reduction: need >= 2 landmarks");
    if (cloud.count < 2)
        throw precondition_error("mean_pairwise_reduction: need >= 2 cloud points");
    const double cloud_mean = mean_pairwise(cloud);
    if (cloud_mean == 0.0) return 0.0;
    return 1.0 - mean_pairwise_subset(cloud, landmark_rows) / cloud_mean;
}

SelectionResult select_landmarks_points(const PointCloud& cloud,
                                        std::span<const double> attention, int k,
                                        double lambda) {
    if (k < 1) throw config_error("select_landmarks: k must be >= 1");
    if (lambda < 0.0 || lambda > 1.0)
        throw config_error("select_landmarks: lambda must be in [0,1]");
    if (attention.size() != static_cast<size_t>(cloud.count))
        throw precondition_error("select_landmarks: attention length mismatch");

    const int64_t n = cloud.count;
    const int64_t take = std::min<int64_t>(k, n);
    std::vector<bool> remaining(static_cast<size_t>(n), true);
    std::vector<double> mindist = coverage_scores_points(cloud, {});
    std::vector<std::pair<int64_t, double>> picked; // (row, score)
    picked.reserve(static_cast<size_t>(take));

    auto minmax_remaining = [&](const std::vector<double>& v) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int64_t i = 0; i < n; ++i) {
            if (!remaining[static_cast<size_t>(i)]) continue;
            lo = std::min(lo, v[static_cast<size_t>(i)]);
            hi = std::max(hi, v[static_cast<size_t>(i)]);
        }
        return std::pair<double, double>(lo, hi);
    };

    std::vector<double> attn(attention.begin(), attention.end());
    for (int64_t round = 0; round < take; ++round) {
        const auto [amin, amax] = minmax_remaining(attn);
        const auto [cmin, cmax] = minmax_remaining(mindist);
        int64_t best = -1;
        double best_score = -1.0;
        for (int64_t i = 0; i < n; ++i) {
            if (!remaining[static_cast<size_t>(i)]) continue;
            const double na =
                amax > amin ? (attn[static_cast<size_t>(i)] - amin) / (amax - amin) : 0.0;
            const double nc =
                cmax > cmin ? (mindist[static_cast<size_t>(i)] - cmin) / (cmax - cmin) : 0.0;
            const double hybrid = lambda * nc + (1.0 - lambda) * na;
            if (hybrid > best_score) { // strict > keeps the smallest row on ties
                best = i;
                best_score = hybrid;
            }
        }
        remaining[static_cast<size_t>(best)] = false;
        picked.emplace_back(best, best_score);
        // The centroid convention only seeds the first pick; real coverage
        // distances replace it entirely once a landmark exists.
        auto bp = cloud.point(best);
        for (int64_t i = 0; i < n; ++i) {
            const double d = std::sqrt(sq_dist(cloud.point(i), bp));
            if (round == 0) {
                mindist[static_cast<size_t>(i)] = d;
            } else {
                mindist[static_cast<size_t>(i)] = std::min(mindist[static_cast<size_t>(i)], d);
            }
        }
    }

    std::sort(picked.begin(), picked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    SelectionResult res;
    for (const auto& [row, score] : picked) {
        res.indices.push_back(row);
        res.scores.push_back(score);
    }
    return res;
}

SynapseSnapshot select_landmarks(const KvCache& cache, std::span<const float> query,
                                 int k, double lambda) {
    if (k < 1) throw config_error("select_landmarks: k must be >= 1");
    const ModelConfig& cfg = cache.config();
    const int layer = cfg.n_layers - 1;
    auto ctx = context_key_cloud(cache, layer);

    SynapseSnapshot snap;
    snap.source_length = ctx.cloud.count;
    snap.k_configured = k;
    snap.n_layers = cfg.n_layers;
    snap.d_model = cfg.d_model;
    if (ctx.cloud.count == 0) return snap;

    const auto attn = attention_scores_points(ctx.cloud, query, cfg.n_heads);
    const auto sel = select_landmarks_points(ctx.cloud, attn, k, lambda);

    snap.landmarks.reserve(sel.indices.size());
    for (size_t s = 0; s < sel.indices.size(); ++s) {
        const int64_t entry = ctx.entry_index[static_cast<size_t>(sel.indices[s])];
        LandmarkEntry lm;
        lm.source_position = ctx.positions[static_cast<size_t>(sel.indices[s])];
        lm.hybrid_score = sel.scores[s];
        lm.keys.reserve(static_cast<size_t>(cfg.n_layers) * cfg.d_model);
        lm.values.reserve(static_cast<size_t>(cfg.n_layers) * cfg.d_model);
        for (int l = 0; l < cfg.n_layers; ++l) {
            auto kspan = cache.key(l, entry);
            auto vspan = cache.value(l, entry);
            lm.keys.insert(lm.keys.end(), kspan.begin(), kspan.end());
            lm.values.insert(lm.values.end(), vspan.begin(), vspan.end());
        }
        snap.landmarks.push_back(std::move(lm));
    }
    return snap;
}

std::string SynapseSnapshot::to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["source_length"] = source_length;
    std::vector<int64_t> positions;
    std::vector<double> scores;
    for (const auto& lm : landmarks) {
        positions.push_back(lm.source_position);
        scores.push_back(lm.hybrid_score);
    }
    j["positions"] = positions;
    j["hybrid_scores"] = scores;
    return j.dump();
}

uint64_t SynapseBuffer::push(SynapseSnapshot snap) {
    auto owned = std::make_shared<SynapseSnapshot>(std::move(snap));
    std::lock_guard<std::mutex> lock(mu_);
    owned->version = ++version_;
    latest_ = std::move(owned);
    cv_.notify_all();
    return version_;
}

std::shared_ptr<const SynapseSnapshot> SynapseBuffer::read_latest() const {
    std::lock_guard<std::mutex> lock(mu_);
    return latest_;
}

std::shared_ptr<const SynapseSnapshot>
SynapseBuffer::wait_nonempty(std::chrono::milliseconds timeout) const {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return latest_ != nullptr || shutdown_; });
    return latest_;
}

void SynapseBuffer::shutdown() {
    std::lock_guard<std::mutex> lock(mu_);
    shutdown_ = true;
    cv_.notify_all();
}

} // namespace cortex
