#include "cortex/ref_model.hpp"

#include "cortex/errors.hpp"

#include <cmath>
#include <limits>

namespace cortex::ref {

namespace {

std::vector<double> rmsnorm_d(const std::vector<double>& x,
                              std::span<const float> gain, double eps = 1e-5) {
    double ssq = 0.0;
    for (double v : x) ssq += v * v;
    const double inv = 1.0 / std::sqrt(ssq / static_cast<double>(x.size()) + eps);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * inv * static_cast<double>(gain[i]);
    }
    return out;
}

std::vector<double> matvec_d(std::span<const float> w, int n_out, int n_in,
                             const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(n_out));
    for (int r = 0; r < n_out; ++r) {
        double acc = 0.0;
        const float* row = w.data() + static_cast<size_t>(r) * n_in;
        for (int c = 0; c < n_in; ++c) acc += static_cast<double>(row[c]) * x[c];
        y[static_cast<size_t>(r)] = acc;
    }
    return y;
}

void rope_d(std::vector<double>& v, size_t offset, int width, int64_t position,
            double base) {
    for (int j = 0; j * 2 < width; ++j) {
        const double freq = std::pow(base, -2.0 * j / static_cast<double>(width));
        const double angle = static_cast<double>(position) * freq;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x0 = v[offset + 2 * j];
        const double x1 = v[offset + 2 * j + 1];
        v[offset + 2 * j] = c * x0 - s * x1;
        v[offset + 2 * j + 1] = s * x0 + c * x1;
    }
}

// Whether item qi may attend item j. Within a segment, standard causal
// masking over positions; across segments, only main-stream queries may
// look at injected entries that were appended earlier.
bool attendable(const SeqItem& query, int qi, const SeqItem& entry, int j) {
    if (j == qi) return true;
    if (j > qi) return false;
    if (entry.segment == query.segment) return entry.position <= query.position;
    return query.segment == 0 && entry.origin == Origin::injected;
}

} // namespace

SeqResult forward_sequence(const WeightStore& w, std::span<const SeqItem> items) {
    if (items.empty()) throw precondition_error("forward_sequence: empty input");
    const ModelConfig& cfg = w.config();
    const int d = cfg.d_model;
    const int dff = cfg.d_ff();
    const size_t n = items.size();

    std::vector<std::vector<double>> x(n);
    for (size_t i = 0; i < n; ++i) {
        auto row = w.embedding_row(items[i].token);
        x[i].assign(row.begin(), row.end());
    }

    SeqResult res;
    res.final_query.resize(n);

    std::vector<std::vector<double>> q(n), k(n), v(n);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& lw = w.layer(l);
        for (size_t i = 0; i < n; ++i) {
            auto normed = rmsnorm_d(x[i], lw.attn_norm);
            q[i] = matvec_d(lw.wq, d, d, normed);
            k[i] = matvec_d(lw.wk, d, d, normed);
            v[i] = matvec_d(lw.wv, d, d, normed);
            for (int h = 0; h < cfg.n_heads; ++h) {
                rope_d(q[i], static_cast<size_t>(h) * cfg.d_k, cfg.d_k,
                       items[i].position, cfg.rope_base);
                rope_d(k[i], static_cast<size_t>(h) * cfg.d_k, cfg.d_k,
                       items[i].position, cfg.rope_base);
            }
        }
        for (size_t i = 0; i < n; ++i) {
            std::vector<double> att(static_cast<size_t>(d), 0.0);
            for (int h = 0; h < cfg.n_heads; ++h) {
                const size_t off = static_cast<size_t>(h) * cfg.d_k;
                std::vector<double> scores;
                std::vector<size_t> idx;
                double maxs = -std::numeric_limits<double>::infinity();
                for (size_t j = 0; j < n; ++j) {
                    if (!attendable(items[i], static_cast<int>(i), items[j],
                                    static_cast<int>(j)))
                        continue;
                    double dot = 0.0;
                    for (int c = 0; c < cfg.d_k; ++c) dot += q[i][off + c] * k[j][off + c];
                    dot /= std::sqrt(static_cast<double>(cfg.d_k));
                    scores.push_back(dot);
                    idx.push_back(j);
                    maxs = std::max(maxs, dot);
                }
                double sum = 0.0;
                for (double& s : scores) {
                    s = std::exp(s - maxs);
                    sum += s;
                }
                for (size_t t = 0; t < idx.size(); ++t) {
                    const double p = scores[t] / sum;
                    for (int c = 0; c < cfg.d_k; ++c) att[off + c] += p * v[idx[t]][off + c];
                }
            }
            auto proj = matvec_d(lw.wo, d, d, att);
            for (int c = 0; c < d; ++c) x[i][static_cast<size_t>(c)] += proj[static_cast<size_t>(c)];

            auto normed = rmsnorm_d(x[i], lw.mlp_norm);
            auto ff = matvec_d(lw.w_in, dff, d, normed);
            for (double& f : ff) f = std::max(f, 0.0);
            auto mlp = matvec_d(lw.w_out, d, dff, ff);
            for (int c = 0; c < d; ++c) x[i][static_cast<size_t>(c)] += mlp[static_cast<size_t>(c)];

            if (l == cfg.n_layers - 1) res.final_query[i] = q[i];
        }
    }

    res.hidden.resize(n);
    res.logits.resize(n);
    for (size_t i = 0; i < n; ++i) {
        res.hidden[i] = rmsnorm_d(x[i], w.final_norm());
        res.logits[i] = matvec_d(w.unembedding(), cfg.vocab_size, d, res.hidden[i]);
    }
    return res;
}

} // namespace cortex::ref
