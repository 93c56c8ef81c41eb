#pragma once

#include "cortex/config.hpp"
#include "cortex/rng.hpp"
#include "cortex/scheduler.hpp"
#include "cortex/synapse.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cortex::harness {

struct Verdict {
    std::string criterion; // acceptance check this verdict maps to, e.g. "AC1"
    std::string description;
    bool pass = false;
};

struct BenchReport {
    std::string name;
    nlohmann::json parameters;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<Verdict> verdicts;

    bool all_pass() const;
    std::string to_csv() const;
    nlohmann::json to_json() const;
    std::string summary() const;
};

// A Gaussian-mixture benchmark cloud paired with the synthetic query that
// scores it: one dominant mode plus rare satellite clusters, with centers
// placed orthogonal to the query so attention reads per-point density
// rather than cluster identity.
struct ClusteredCloud {
    PointCloud cloud;
    std::vector<float> query;
    std::vector<int> cluster_of; // row -> cluster index
    int n_clusters = 0;
};
ClusteredCloud make_clustered_cloud(Rng& rng, int64_t count, int dim,
                                    int n_clusters, double separation,
                                    double sigma, int rare_cluster_size = 4);

// Uniform k-subset of rows without replacement.
std::vector<int64_t> random_subset(Rng& rng, int64_t n, int k);

// Relative closeness with a unit floor, used by all oracle comparisons.
double rel_deviation(double a, double b);

// One randomized referential-injection equivalence case: builds a river
// cache, injects an encoded thought at a reserved base, and compares the
// next-token logits against a full-recompute reference with the same mask
// rule. Returns the max relative deviation over the vocabulary.
double injection_equivalence_case(const WeightStore& w, Rng& rng, int prompt_len,
                                  int thought_len, int64_t base);

// Memory sweep: N stream agents sharing one weight store, each holding a
// k-landmark cache; checks the exact affine growth of the total.
BenchReport bench_memory(const ModelConfig& cfg, const RuntimeConfig& rc,
                         const std::vector<int64_t>& agent_counts);

// Analytic snapshot-vs-full-cache ratios for a sweep of context lengths.
BenchReport bench_compression(const ModelConfig& cfg, int k,
                              const std::vector<int64_t>& l_values);

// Hybrid vs random vs attention-only selection quality over seeded
// clustered clouds, plus the exhaustive small-cloud optimality checks.
BenchReport bench_landmarks(uint64_t seed, int n_seeds,
                            int64_t cloud_size, int k, double lambda);

// Injection equivalence scenarios plus the quiescent-purity check.
BenchReport bench_injection(const ModelConfig& cfg, const RuntimeConfig& rc,
                            uint64_t seed);

// Scripted end-to-end run; returns the transcript and full audit trail.
RunResult demo(const ModelConfig& cfg, const RuntimeConfig& rc,
               std::string_view prompt, const Script* script);

} // namespace cortex::harness
