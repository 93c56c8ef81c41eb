#include "cortex/kernels.hpp"

#include "cortex/errors.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace cortex::kernels {

void matvec(std::span<const float> w, int n_out, int n_in,
            std::span<const float> x, std::span<float> y) {
    assert(w.size() == static_cast<size_t>(n_out) * static_cast<size_t>(n_in));
    assert(x.size() == static_cast<size_t>(n_in));
    assert(y.size() == static_cast<size_t>(n_out));
#pragma omp parallel for schedule(static)
    for (int r = 0; r < n_out; ++r) {
        const float* row = w.data() + static_cast<size_t>(r) * n_in;
        double acc = 0.0;
        for (int c = 0; c < n_in; ++c) {
            acc += static_cast<double>(row[c]) * static_cast<double>(x[c]);
        }
        y[r] = static_cast<float>(acc);
    }
}

void rmsnorm(std::span<const float> x, std::span<const float> gain,
             std::span<float> out, double eps) {
    assert(x.size() == gain.size() && x.size() == out.size());
    double ssq = 0.0;
    for (float v : x) ssq += static_cast<double>(v) * static_cast<double>(v);
    const double inv = 1.0 / std::sqrt(ssq / static_cast<double>(x.size()) + eps);
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(x[i]) * inv *
                                    static_cast<double>(gain[i]));
    }
}

void add_inplace(std::span<float> x, std::span<const float> y) {
    assert(x.size() == y.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

void relu_inplace(std::span<float> x) {
    for (float& v : x) v = std::max(v, 0.0f);
}

void apply_rope(std::span<float> v, int64_t position, double rope_base) {
    assert(v.size() % 2 == 0);
    const int n = static_cast<int>(v.size());
    for (int j = 0; j * 2 < n; ++j) {
        const double freq = std::pow(rope_base, -2.0 * j / static_cast<double>(n));
        const double angle = static_cast<double>(position) * freq;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x0 = v[2 * j];
        const double x1 = v[2 * j + 1];
        v[2 * j] = static_cast<float>(c * x0 - s * x1);
        v[2 * j + 1] = static_cast<float>(s * x0 + c * x1);
    }
}

namespace {

std::vector<double> softmax_impl(std::span<const double> scores) {
    if (scores.empty()) throw precondition_error("softmax: empty input");
    double maxv = -std::numeric_limits<double>::infinity();
    for (double s : scores) {
        if (!std::isfinite(s)) throw precondition_error("softmax: non-finite input");
        maxv = std::max(maxv, s);
    }
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - maxv);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

} // namespace

std::vector<double> softmax(std::span<const double> scores) {
    return softmax_impl(scores);
}

std::vector<double> softmax(std::span<const float> scores) {
    std::vector<double> widened(scores.begin(), scores.end());
    return softmax_impl(widened);
}

int argmax(std::span<const float> v) {
    assert(!v.empty());
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

void attend(std::span<const float> q, std::span<const float> keys,
            std::span<const float> values, int64_t n_entries, int n_heads,
            int d_k, std::span<float> out) {
    const int d_model = n_heads * d_k;
    assert(q.size() == static_cast<size_t>(d_model));
    assert(out.size() == static_cast<size_t>(d_model));
    assert(keys.size() >= static_cast<size_t>(n_entries) * d_model);
    assert(values.size() >= static_cast<size_t>(n_entries) * d_model);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
#pragma omp parallel for schedule(static)
    for (int h = 0; h < n_heads; ++h) {
        const float* qh = q.data() + static_cast<size_t>(h) * d_k;
        std::vector<double> w(static_cast<size_t>(n_entries));
        double maxs = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < n_entries; ++j) {
            const float* kh = keys.data() + static_cast<size_t>(j) * d_model +
                              static_cast<size_t>(h) * d_k;
            double dot = 0.0;
            for (int c = 0; c < d_k; ++c) {
                dot += static_cast<double>(qh[c]) * static_cast<double>(kh[c]);
            }
            w[static_cast<size_t>(j)] = dot * inv_sqrt_dk;
            maxs = std::max(maxs, w[static_cast<size_t>(j)]);
        }
        double sum = 0.0;
        for (int64_t j = 0; j < n_entries; ++j) {
            w[static_cast<size_t>(j)] = std::exp(w[static_cast<size_t>(j)] - maxs);
            sum += w[static_cast<size_t>(j)];
        }
        for (int c = 0; c < d_k; ++c) {
            double acc = 0.0;
            for (int64_t j = 0; j < n_entries; ++j) {
                acc += w[static_cast<size_t>(j)] *
                       static_cast<double>(values[static_cast<size_t>(j) * d_model +
                                                  static_cast<size_t>(h) * d_k + c]);
            }
            out[static_cast<size_t>(h) * d_k + c] = static_cast<float>(acc / sum);
        }
    }
}

} // namespace cortex::kernels
