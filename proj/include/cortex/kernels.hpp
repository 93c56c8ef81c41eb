#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cortex::kernels {

// Hot loops of the forward pass. Parallel regions split work so that every
// output element is produced by exactly one thread with a fixed serial
// accumulation order; results are therefore identical for any thread count.
// Dot products accumulate in double and round to float once at the end.

// y = W x with W row-major [n_out x n_in].
void matvec(std::span<const float> w, int n_out, int n_in,
            std::span<const float> x, std::span<float> y);

void rmsnorm(std::span<const float> x, std::span<const float> gain,
             std::span<float> out, double eps = 1e-5);

void add_inplace(std::span<float> x, std::span<const float> y);

void relu_inplace(std::span<float> x);

// Rotates coordinate pairs (2j, 2j+1) by position * base^(-2j/n) radians.
// Norm-preserving; position 0 is the identity.
void apply_rope(std::span<float> v, int64_t position, double rope_base);

// Max-subtracted softmax in double precision; outputs sum to 1 within 1e-9.
// Throws precondition_error on empty or non-finite input.
std::vector<double> softmax(std::span<const double> scores);
std::vector<double> softmax(std::span<const float> scores);

// Lowest index wins ties, so greedy decoding is replayable.
int argmax(std::span<const float> v);

// Causal attention output for one token. keys/values hold n_entries rows of
// d_model = n_heads * d_k floats (entry-major); every row is attendable.
// out receives the concatenated per-head mixes (d_model floats).
void attend(std::span<const float> q, std::span<const float> keys,
            std::span<const float> values, int64_t n_entries, int n_heads,
            int d_k, std::span<float> out);

} // namespace cortex::kernels
