// Throughput comparison between the OpenMP incremental path and the serial
// double-precision reference. The reference recomputes the whole sequence,
// so it is quadratic in length by construction; the per-token cost of the
// incremental path is the number that matters for the runtime.

#include "cortex/kernels.hpp"
#include "cortex/model.hpp"
#include "cortex/ref_model.hpp"
#include "cortex/rng.hpp"

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace cortex;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void bench_config(const char* label, const ModelConfig& cfg, int n_tokens) {
    const WeightStore w = WeightStore::init(cfg);
    Rng rng(cfg.seed);
    std::vector<int> tokens(static_cast<size_t>(n_tokens));
    for (int& t : tokens)
        t = static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.vocab_size)));

    KvCache cache(cfg);
    const auto t0 = Clock::now();
    StepResult last;
    for (int i = 0; i < n_tokens; ++i)
        last = forward_step(w, cache, tokens[static_cast<size_t>(i)], i);
    const double incremental = seconds_since(t0);

    std::vector<ref::SeqItem> items;
    for (int i = 0; i < n_tokens; ++i)
        items.push_back({tokens[static_cast<size_t>(i)], i, Origin::context, 0});
    const auto t1 = Clock::now();
    const auto full = ref::forward_sequence(w, items);
    const double reference = seconds_since(t1);

    // Keep the optimizer honest.
    volatile float sink = last.logits[0] + static_cast<float>(full.logits.back()[0]);
    (void)sink;

    std::printf("%-12s %5d tokens  incremental %8.3f ms (%8.1f tok/s)  "
                "serial reference %8.3f ms  ratio %.2fx\n",
                label, n_tokens, incremental * 1e3,
                n_tokens / std::max(incremental, 1e-9), reference * 1e3,
                reference / std::max(incremental, 1e-9));
}

void bench_matvec() {
    const int n_out = 1024, n_in = 1024, reps = 200;
    Rng rng(5);
    std::vector<float> w(static_cast<size_t>(n_out) * n_in), x(n_in), y(n_out);
    for (float& v : w) v = static_cast<float>(rng.next_gaussian(0.0, 1.0));
    for (float& v : x) v = static_cast<float>(rng.next_gaussian(0.0, 1.0));

    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) kernels::matvec(w, n_out, n_in, x, y);
    const double parallel = seconds_since(t0);

    const auto t1 = Clock::now();
    std::vector<double> yd(static_cast<size_t>(n_out));
    for (int r = 0; r < reps; ++r) {
        for (int row = 0; row < n_out; ++row) {
            double acc = 0.0;
            const float* p = w.data() + static_cast<size_t>(row) * n_in;
            for (int c = 0; c < n_in; ++c) acc += static_cast<double>(p[c]) * x[c];
            yd[static_cast<size_t>(row)] = acc;
        }
    }
    const double serial = seconds_since(t1);
    volatile double sink = y[0] + yd[0];
    (void)sink;

    std::printf("matvec 1024x1024 x%d: parallel %7.2f ms, serial %7.2f ms, "
                "speedup %.2fx\n",
                reps, parallel * 1e3, serial * 1e3, serial / std::max(parallel, 1e-9));
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled (serial build)\n");
#endif
    bench_matvec();

    ModelConfig toy;
    bench_config("toy-4x64", toy, 256);

    ModelConfig mid;
    mid.n_layers = 8;
    mid.n_heads = 8;
    mid.d_model = 256;
    mid.d_k = 32;
    bench_config("mid-8x256", mid, 128);
    return 0;
}
