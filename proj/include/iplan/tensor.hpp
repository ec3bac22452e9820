#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "iplan/error.hpp"

namespace iplan::num {

/// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 and 2 are the
/// shapes used in practice; the layout is general.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> data);
    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
    // 2-d access, row-major
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * dim(1) + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * dim(1) + c]; }

    bool all_finite() const;
    void fill(double v);
    std::vector<double> to_vector() const { return data_; }

  private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in the computation graph. Leaves created with requires_grad
/// accumulate into `grad` on backward(); intermediate nodes free their grad
/// buffers as soon as all consumers have been processed.
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
    bool needs_grad = false;  // true if any ancestor requires grad
    const char* op = "leaf";
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    Tensor& ensure_grad();
};

/// Leaf with requires_grad: a trainable parameter or probed input.
Var leaf(Tensor value, bool requires_grad = true);
/// Leaf without gradient tracking.
Var constant(Tensor value);

bool grad_enabled();
/// RAII switch that disables graph construction (pure inference).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// --- elementwise (shape-preserving, shapes must match where binary) ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sigmoid(const Var& a);
Var tanh_v(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var elu(const Var& a);
Var exp_v(const Var& a);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
/// Zero each entry with probability `rate` and scale survivors by 1/(1-rate)
/// when training; identity in eval mode. rate must lie in [0,1).
Var dropout(const Var& a, double rate, bool training, std::mt19937_64& rng);

// --- shape ---
Var reshape(const Var& a, std::vector<int> shape);
Var slice(const Var& a, int start, int len);          // 1-d
Var concat(const std::vector<Var>& parts);            // 1-d
Var stack_scalars(const std::vector<Var>& scalars);   // scalars -> 1-d
Var stack_rows(const std::vector<Var>& rows);         // 1-d rows -> 2-d
Var hcat(const Var& a, const Var& b);                 // [B x c1], [B x c2] -> [B x (c1+c2)]
Var index(const Var& a, int i);                       // 1-d -> scalar

// --- reductions / contractions ---
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);
Var row_sum(const Var& m);  // [B x C] -> [B]
/// Weighted L1: sum of mask[i] * |pred[i] - target[i]| (zero weight masks an
/// entry out). target/mask are plain tensors with no gradient path.
Var masked_l1(const Var& pred, const Tensor& target, const Tensor& mask);

// --- linear algebra ---
Var matvec(const Var& w, const Var& x);  // [M x N] * [N] -> [M]
/// X [B x In] * W^T [In x Out] + b -> [B x Out]
Var linear_batch(const Var& x, const Var& w, const Var& b);
/// vec + broadcast scalar
Var add_scalar_bc(const Var& v, const Var& s);
/// sum_i coeffs[i] * vecs[i]; coeffs is 1-d of length vecs.size()
Var weighted_sum(const Var& coeffs, const std::vector<Var>& vecs);

// --- softmax family ---
Var softmax(const Var& a);                       // 1-d
Var log_softmax(const Var& a);                   // 1-d
Var log_softmax_rows(const Var& m);              // [B x A]
Var gather_rows(const Var& m, const std::vector<int>& idx);  // [B x A] -> [B]

/// Reverse-mode sweep from a scalar root. Populates grad on every
/// requires_grad leaf reachable from root. Throws NumericsError if the root
/// is not scalar or a NaN shows up in any propagated gradient.
void backward(const Var& root);

void zero_grad(std::span<const Var> params);

}  // namespace iplan::num
