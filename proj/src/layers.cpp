#include "iplan/layers.hpp"

#include <cmath>

namespace iplan::num {

Tensor uniform_init(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = u(rng);
    return t;
}

LinearParams LinearParams::init(int in, int out, std::mt19937_64& rng) {
    LinearParams p;
    p.w = leaf(uniform_init({out, in}, in, rng));
    p.b = leaf(uniform_init({out}, in, rng));
    return p;
}

Var linear(const LinearParams& p, const Var& x) { return add(matvec(p.w, x), p.b); }

Var linear_rows(const LinearParams& p, const Var& x) { return linear_batch(x, p.w, p.b); }

GruParams GruParams::init(int input_dim, int hidden_dim, std::mt19937_64& rng) {
    if (input_dim <= 0 || hidden_dim <= 0)
        throw NumericsError("gru dims must be positive");
    GruParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    auto wmat = [&](int in) { return leaf(uniform_init({hidden_dim, in}, in, rng)); };
    auto bvec = [&]() { return leaf(uniform_init({hidden_dim}, hidden_dim, rng)); };
    p.wz = wmat(input_dim); p.uz = wmat(hidden_dim); p.bz = bvec();
    p.wr = wmat(input_dim); p.ur = wmat(hidden_dim); p.br = bvec();
    p.wn = wmat(input_dim); p.un = wmat(hidden_dim); p.bn = bvec();
    return p;
}

std::vector<Var> GruParams::params() const {
    return {wz, uz, bz, wr, ur, br, wn, un, bn};
}

Var gru_step(const GruParams& p, const Var& x, const Var& h) {
    if (x->value.size() != p.input_dim || h->value.size() != p.hidden_dim)
        throw NumericsError("gru_step: dimension mismatch");
    Var z = sigmoid(add(add(matvec(p.wz, x), matvec(p.uz, h)), p.bz));
    Var r = sigmoid(add(add(matvec(p.wr, x), matvec(p.ur, h)), p.br));
    Var n = tanh_v(add(add(matvec(p.wn, x), mul(r, matvec(p.un, h))), p.bn));
    // (1 - z) * n + z * h
    Var one_minus_z = add_scalar(neg(z), 1.0);
    return add(mul(one_minus_z, n), mul(z, h));
}

namespace {

// bias broadcast over rows: X W^T + 1 b^T
Var affine_rows(const Var& x, const Var& w, const Var& b) { return linear_batch(x, w, b); }

}  // namespace

Var gru_step_rows(const GruParams& p, const Var& x, const Var& h) {
    if (x->value.rank() != 2 || h->value.rank() != 2 ||
        x->value.dim(1) != p.input_dim || h->value.dim(1) != p.hidden_dim ||
        x->value.dim(0) != h->value.dim(0))
        throw NumericsError("gru_step_rows: dimension mismatch");
    Var zero_b = constant(Tensor({p.hidden_dim}));
    Var z = sigmoid(add(affine_rows(x, p.wz, p.bz), affine_rows(h, p.uz, zero_b)));
    Var r = sigmoid(add(affine_rows(x, p.wr, p.br), affine_rows(h, p.ur, zero_b)));
    Var n = tanh_v(add(affine_rows(x, p.wn, p.bn), mul(r, affine_rows(h, p.un, zero_b))));
    Var one_minus_z = add_scalar(neg(z), 1.0);
    return add(mul(one_minus_z, n), mul(z, h));
}

GatParams GatParams::init(int in_dim, int hidden_dim, std::mt19937_64& rng) {
    if (in_dim <= 0 || hidden_dim <= 0) throw NumericsError("gat dims must be positive");
    GatParams p;
    p.in_dim = in_dim;
    p.hidden_dim = hidden_dim;
    p.w = leaf(uniform_init({hidden_dim, in_dim}, in_dim, rng));
    p.a_src = leaf(uniform_init({hidden_dim}, 2 * hidden_dim, rng));
    p.a_dst = leaf(uniform_init({hidden_dim}, 2 * hidden_dim, rng));
    return p;
}

GatResult gat_forward(const GatParams& p, const std::vector<Var>& node_features,
                      const std::vector<bool>& present) {
    int n = static_cast<int>(node_features.size());
    if (static_cast<int>(present.size()) != n)
        throw NumericsError("gat_forward: mask size mismatch");
    std::vector<int> active;
    for (int i = 0; i < n; ++i)
        if (present[static_cast<size_t>(i)]) active.push_back(i);
    if (active.empty()) throw NumericsError("gat_forward: no present nodes");

    // projected features and the two halves of the attention score
    std::vector<Var> proj(active.size());
    std::vector<Var> s_src(active.size()), s_dst(active.size());
    for (size_t k = 0; k < active.size(); ++k) {
        proj[k] = matvec(p.w, node_features[static_cast<size_t>(active[k])]);
        s_src[k] = dot(p.a_src, proj[k]);
        s_dst[k] = dot(p.a_dst, proj[k]);
    }
    Var dst_vec = stack_scalars(s_dst);

    GatResult res;
    res.node_out.assign(static_cast<size_t>(n), nullptr);
    res.attention = Tensor({n, n});
    for (size_t k = 0; k < active.size(); ++k) {
        Var scores = leaky_relu(add_scalar_bc(dst_vec, s_src[k]), p.leaky_slope);
        Var alpha = softmax(scores);
        for (size_t j = 0; j < active.size(); ++j)
            res.attention.at(active[k], active[j]) = alpha->value[static_cast<int64_t>(j)];
        res.node_out[static_cast<size_t>(active[k])] = elu(weighted_sum(alpha, proj));
    }
    return res;
}

}  // namespace iplan::num
