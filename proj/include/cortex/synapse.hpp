#pragma once

#include "cortex/model.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace cortex {

// A flat row-major point set; the latent space the sampler works in.
struct PointCloud {
    int64_t count = 0;
    int dim = 0;
    std::vector<float> data; // count * dim

    std::span<const float> point(int64_t i) const {
        return std::span<const float>(data.data() + static_cast<size_t>(i) * dim,
                                      static_cast<size_t>(dim));
    }
};

// One retained context token: its per-layer K/V copied at selection time so
// later river appends can never mutate a reader's view.
struct LandmarkEntry {
    int64_t source_position = 0;
    double hybrid_score = 0.0;
    std::vector<float> keys;   // n_layers * d_model
    std::vector<float> values; // n_layers * d_model
};

struct SynapseSnapshot {
    uint64_t version = 0;      // stamped by SynapseBuffer::push
    int64_t source_length = 0; // context length L at capture time
    int k_configured = 0;
    int n_layers = 0;
    int d_model = 0;
    std::vector<LandmarkEntry> landmarks; // sorted by source_position

    int64_t kv_bytes() const {
        return static_cast<int64_t>(landmarks.size()) * n_layers * 2 * d_model * 4;
    }
    std::string to_json() const;
};

// The point cloud of a cache's context entries in the chosen layer's key
// space (heads concatenated), with back-references into the cache.
struct ContextCloud {
    PointCloud cloud;
    std::vector<int64_t> entry_index; // cloud row -> cache entry index
    std::vector<int64_t> positions;   // cloud row -> cache position
};
ContextCloud context_key_cloud(const KvCache& cache, int layer);

// A_i = sum over heads of softmax(q_h . k_i,h / sqrt(d_k)), normalized over
// the candidate set per head; the per-row totals therefore sum to n_heads.
std::vector<double> attention_scores_points(const PointCloud& keys,
                                            std::span<const float> query,
                                            int n_heads);
// Candidate set: the cache's context entries, final-layer keys. The query is
// the river's most recent final-layer post-RoPE query. Throws
// precondition_error on a cache without context entries.
std::vector<double> attention_scores(const KvCache& cache,
                                     std::span<const float> query, int layer);

// Farthest-point coverage value per row: distance to the nearest selected
// landmark, or to the cloud centroid while nothing is selected yet.
std::vector<double> coverage_scores_points(const PointCloud& cloud,
                                           std::span<const int64_t> selected);
// Cache-level variant; `selected_positions` are cache positions of context
// entries.
std::vector<double> coverage_scores(const KvCache& cache,
                                    std::span<const int64_t> selected_positions,
                                    int layer);

// Directed Hausdorff from `cloud` to `landmarks`: the worst distance any
// cloud point has to its nearest landmark.
double hausdorff_distance(const PointCloud& cloud, const PointCloud& landmarks);
double hausdorff_to_subset(const PointCloud& cloud,
                           std::span<const int64_t> landmark_rows);

// 1 - mean pairwise distance among landmarks / mean pairwise distance among
// the cloud; 0 when the cloud statistic degenerates to zero.
double mean_pairwise_reduction(const PointCloud& cloud, const PointCloud& landmarks);
double mean_pairwise_reduction_subset(const PointCloud& cloud,
                                      std::span<const int64_t> landmark_rows);

struct SelectionResult {
    std::vector<int64_t> indices; // ascending cloud rows
    std::vector<double> scores;   // hybrid score at selection time
};

// Greedy hybrid density-coverage sampler. Each round min-max rescales both
// criteria over the remaining candidates and picks
//   argmax lambda * coverage + (1 - lambda) * attention,
// ties to the smaller row; coverage is recomputed against the grown
// selection. lambda=0 degenerates to exact top-k by attention, lambda=1 to
// farthest-point sampling seeded at the centroid-farthest point.
SelectionResult select_landmarks_points(const PointCloud& cloud,
                                        std::span<const double> attention, int k,
                                        double lambda);

// Cache-level selection: builds the final-layer context cloud, scores it
// against `query`, and copies the winners' per-layer K/V into a snapshot.
SynapseSnapshot select_landmarks(const KvCache& cache, std::span<const float> query,
                                 int k, double lambda);

// Single-writer multi-reader latest-value buffer. Readers always see a
// complete snapshot; versions are stamped 1, 2, ... at push time.
class SynapseBuffer {
public:
    // Returns the stamped version. Call only from the river lane.
    uint64_t push(SynapseSnapshot snap);

    // nullptr before the first push.
    std::shared_ptr<const SynapseSnapshot> read_latest() const;

    // Blocks until a snapshot exists, the timeout elapses, or shutdown.
    std::shared_ptr<const SynapseSnapshot>
    wait_nonempty(std::chrono::milliseconds timeout) const;

    void shutdown();

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::shared_ptr<const SynapseSnapshot> latest_;
    uint64_t version_ = 0;
    bool shutdown_ = false;
};

} // namespace cortex
