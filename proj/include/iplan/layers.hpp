#pragma once

#include <random>
#include <string>
#include <vector>

#include "iplan/tensor.hpp"

namespace iplan::num {

/// All layers initialise weights and biases from U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
Tensor uniform_init(std::vector<int> shape, int fan_in, std::mt19937_64& rng);

struct LinearParams {
    Var w;  // [out x in]
    Var b;  // [out]
    static LinearParams init(int in, int out, std::mt19937_64& rng);
    std::vector<Var> params() const { return {w, b}; }
    int in_dim() const { return w->value.dim(1); }
    int out_dim() const { return w->value.dim(0); }
};

Var linear(const LinearParams& p, const Var& x);          // [in] -> [out]
Var linear_rows(const LinearParams& p, const Var& x);     // [B x in] -> [B x out]

/// Gated recurrent cell with one weight/bias triple per gate:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + r * (Un h) + bn)
///   h' = (1 - z) * n + z * h
struct GruParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Var wz, uz, bz;
    Var wr, ur, br;
    Var wn, un, bn;
    static GruParams init(int input_dim, int hidden_dim, std::mt19937_64& rng);
    std::vector<Var> params() const;
};

Var gru_step(const GruParams& p, const Var& x, const Var& h);
/// Batched step over independent sequences: x [B x in], h [B x hidden].
Var gru_step_rows(const GruParams& p, const Var& x, const Var& h);

/// Single-head graph attention over the complete graph of present nodes.
/// Scores use the split form a^T [W x_i || W x_j] = a_src.(W x_i) + a_dst.(W x_j)
/// through a leaky ReLU; rows are softmax-normalised over present nodes
/// (self-edges included) and outputs pass through an ELU.
struct GatParams {
    int in_dim = 0;
    int hidden_dim = 0;
    double leaky_slope = 0.2;
    Var w;      // [hidden x in]
    Var a_src;  // [hidden], first half of the length-2*hidden attention vector
    Var a_dst;  // [hidden], second half
    static GatParams init(int in_dim, int hidden_dim, std::mt19937_64& rng);
    std::vector<Var> params() const { return {w, a_src, a_dst}; }
};

struct GatResult {
    std::vector<Var> node_out;  // one [hidden] per input node; absent nodes are null
    Tensor attention;           // [N x N], absent rows/cols zero
};

/// node_features: one [in_dim] Var per node; present marks participating nodes.
/// Requires at least one present node.
GatResult gat_forward(const GatParams& p, const std::vector<Var>& node_features,
                      const std::vector<bool>& present);

}  // namespace iplan::num
