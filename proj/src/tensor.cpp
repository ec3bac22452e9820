#include "iplan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace iplan::num {

namespace {

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw NumericsError("negative tensor extent");
        n *= d;
    }
    return n;
}

thread_local bool g_grad_enabled = true;

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != static_cast<int64_t>(data_.size()))
        throw NumericsError("tensor data length does not match shape");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vec(std::vector<double> data) {
    int n = static_cast<int>(data.size());
    return Tensor({n}, std::move(data));
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Node::ensure_grad() {
    if (grad.empty() && value.size() > 0) grad = Tensor(value.shape());
    if (grad.empty() && value.rank() == 0) grad = Tensor(value.shape());
    return grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

namespace {

// Creates the result node; wires parents/backward only when the graph is
// live and some input needs a gradient.
Var make_node(const char* op, Tensor value, std::initializer_list<Var> parents,
              std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) needs = needs || p->needs_grad;
    }
    if (needs) {
        n->needs_grad = true;
        n->parents.assign(parents.begin(), parents.end());
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

Var make_node_list(const char* op, Tensor value, const std::vector<Var>& parents,
                   std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) needs = needs || p->needs_grad;
    }
    if (needs) {
        n->needs_grad = true;
        n->parents = parents;
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

void check_same_shape(const char* op, const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value))
        throw NumericsError(std::string(op) + ": shape mismatch");
}

void accumulate(Node& p, const double* g, int64_t n) {
    Tensor& pg = p.ensure_grad();
    double* d = pg.data();
    for (int64_t i = 0; i < n; ++i) d[i] += g[i];
}

}  // namespace

// --- elementwise ---

Var add(const Var& a, const Var& b) {
    check_same_shape("add", a, b);
    Tensor out = a->value;
    const double* bd = b->value.data();
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] += bd[i];
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("add", std::move(out), {a, b}, [ap, bp](Node& self) {
        accumulate(*ap, self.grad.data(), self.grad.size());
        accumulate(*bp, self.grad.data(), self.grad.size());
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape("sub", a, b);
    Tensor out = a->value;
    const double* bd = b->value.data();
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] -= bd[i];
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("sub", std::move(out), {a, b}, [ap, bp](Node& self) {
        accumulate(*ap, self.grad.data(), self.grad.size());
        Tensor& bg = bp->ensure_grad();
        for (int64_t i = 0; i < self.grad.size(); ++i) bg[i] -= self.grad[i];
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape("mul", a, b);
    Tensor out = a->value;
    const double* bd = b->value.data();
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] *= bd[i];
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("mul", std::move(out), {a, b}, [ap, bp](Node& self) {
        Tensor& ag = ap->ensure_grad();
        Tensor& bg = bp->ensure_grad();
        const double* av = ap->value.data();
        const double* bv = bp->value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            ag[i] += self.grad[i] * bv[i];
            bg[i] += self.grad[i] * av[i];
        }
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] *= s;
    Node* ap = a.get();
    return make_node("scale", std::move(out), {a}, [ap, s](Node& self) {
        Tensor& ag = ap->ensure_grad();
        for (int64_t i = 0; i < self.grad.size(); ++i) ag[i] += s * self.grad[i];
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] += s;
    Node* ap = a.get();
    return make_node("add_scalar", std::move(out), {a}, [ap](Node& self) {
        accumulate(*ap, self.grad.data(), self.grad.size());
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] = 1.0 / (1.0 + std::exp(-od[i]));
    Node* ap = a.get();
    return make_node("sigmoid", std::move(out), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* y = self.value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += self.grad[i] * y[i] * (1.0 - y[i]);
    });
}

Var tanh_v(const Var& a) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] = std::tanh(od[i]);
    Node* ap = a.get();
    return make_node("tanh", std::move(out), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* y = self.value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += self.grad[i] * (1.0 - y[i] * y[i]);
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i)
        if (od[i] < 0.0) od[i] *= slope;
    Node* ap = a.get();
    return make_node("leaky_relu", std::move(out), {a}, [ap, slope](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* x = ap->value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += self.grad[i] * (x[i] >= 0.0 ? 1.0 : slope);
    });
}

Var elu(const Var& a) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i)
        if (od[i] < 0.0) od[i] = std::expm1(od[i]);
    Node* ap = a.get();
    return make_node("elu", std::move(out), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* x = ap->value.data();
        const double* y = self.value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += self.grad[i] * (x[i] >= 0.0 ? 1.0 : y[i] + 1.0);
    });
}

Var exp_v(const Var& a) {
    Tensor out = a->value;
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] = std::exp(od[i]);
    Node* ap = a.get();
    return make_node("exp", std::move(out), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* y = self.value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i) ag[i] += self.grad[i] * y[i];
    });
}

Var minimum(const Var& a, const Var& b) {
    check_same_shape("minimum", a, b);
    Tensor out = a->value;
    const double* bd = b->value.data();
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] = std::min(od[i], bd[i]);
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("minimum", std::move(out), {a, b}, [ap, bp](Node& self) {
        Tensor& ag = ap->ensure_grad();
        Tensor& bg = bp->ensure_grad();
        const double* av = ap->value.data();
        const double* bv = bp->value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            if (av[i] <= bv[i])
                ag[i] += self.grad[i];
            else
                bg[i] += self.grad[i];
        }
    });
}

Var maximum(const Var& a, const Var& b) {
    check_same_shape("maximum", a, b);
    Tensor out = a->value;
    const double* bd = b->value.data();
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) od[i] = std::max(od[i], bd[i]);
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("maximum", std::move(out), {a, b}, [ap, bp](Node& self) {
        Tensor& ag = ap->ensure_grad();
        Tensor& bg = bp->ensure_grad();
        const double* av = ap->value.data();
        const double* bv = bp->value.data();
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            if (av[i] >= bv[i])
                ag[i] += self.grad[i];
            else
                bg[i] += self.grad[i];
        }
    });
}

Var dropout(const Var& a, double rate, bool training, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw NumericsError("dropout rate must be in [0,1)");
    if (!training || rate == 0.0) return a;
    Tensor out = a->value;
    auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(out.size()));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    double* od = out.data();
    for (int64_t i = 0; i < out.size(); ++i) {
        double m = (u(rng) < rate) ? 0.0 : keep_scale;
        (*mask)[static_cast<size_t>(i)] = m;
        od[i] *= m;
    }
    Node* ap = a.get();
    return make_node("dropout", std::move(out), {a}, [ap, mask](Node& self) {
        Tensor& ag = ap->ensure_grad();
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += self.grad[i] * (*mask)[static_cast<size_t>(i)];
    });
}

// --- shape ---

Var reshape(const Var& a, std::vector<int> shape) {
    Tensor out(std::move(shape), a->value.to_vector());
    Node* ap = a.get();
    return make_node("reshape", std::move(out), {a}, [ap](Node& self) {
        accumulate(*ap, self.grad.data(), self.grad.size());
    });
}

Var slice(const Var& a, int start, int len) {
    if (a->value.rank() != 1) throw NumericsError("slice expects rank-1 input");
    if (start < 0 || len < 0 || start + len > a->value.dim(0))
        throw NumericsError("slice out of range");
    std::vector<double> d(a->value.data() + start, a->value.data() + start + len);
    Node* ap = a.get();
    return make_node("slice", Tensor::vec(std::move(d)), {a}, [ap, start](Node& self) {
        Tensor& ag = ap->ensure_grad();
        for (int64_t i = 0; i < self.grad.size(); ++i) ag[start + i] += self.grad[i];
    });
}

Var concat(const std::vector<Var>& parts) {
    std::vector<double> d;
    std::vector<int> offsets;
    for (const auto& p : parts) {
        if (p->value.rank() != 1) throw NumericsError("concat expects rank-1 parts");
        offsets.push_back(static_cast<int>(d.size()));
        d.insert(d.end(), p->value.data(), p->value.data() + p->value.size());
    }
    return make_node_list("concat", Tensor::vec(std::move(d)), parts,
                          [parts, offsets](Node& self) {
                              for (size_t k = 0; k < parts.size(); ++k) {
                                  Node& p = *parts[k];
                                  Tensor& pg = p.ensure_grad();
                                  int off = offsets[k];
                                  for (int64_t i = 0; i < p.value.size(); ++i)
                                      pg[i] += self.grad[off + i];
                              }
                          });
}

Var stack_scalars(const std::vector<Var>& scalars) {
    std::vector<double> d;
    d.reserve(scalars.size());
    for (const auto& s : scalars) {
        if (s->value.size() != 1) throw NumericsError("stack_scalars expects scalars");
        d.push_back(s->value[0]);
    }
    return make_node_list("stack_scalars", Tensor::vec(std::move(d)), scalars,
                          [scalars](Node& self) {
                              for (size_t k = 0; k < scalars.size(); ++k) {
                                  Tensor& pg = scalars[k]->ensure_grad();
                                  pg[0] += self.grad[static_cast<int64_t>(k)];
                              }
                          });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw NumericsError("stack_rows needs at least one row");
    int cols = static_cast<int>(rows[0]->value.size());
    std::vector<double> d;
    d.reserve(rows.size() * static_cast<size_t>(cols));
    for (const auto& r : rows) {
        if (r->value.rank() != 1 || r->value.dim(0) != cols)
            throw NumericsError("stack_rows: inconsistent row lengths");
        d.insert(d.end(), r->value.data(), r->value.data() + cols);
    }
    Tensor out({static_cast<int>(rows.size()), cols}, std::move(d));
    return make_node_list("stack_rows", std::move(out), rows, [rows, cols](Node& self) {
        for (size_t k = 0; k < rows.size(); ++k) {
            Tensor& pg = rows[k]->ensure_grad();
            const double* g = self.grad.data() + k * static_cast<size_t>(cols);
            for (int i = 0; i < cols; ++i) pg[i] += g[i];
        }
    });
}

Var hcat(const Var& a, const Var& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(0) != b->value.dim(0))
        throw NumericsError("hcat: expects rank-2 inputs with matching row counts");
    int rows = a->value.dim(0), ca = a->value.dim(1), cb = b->value.dim(1);
    Tensor out({rows, ca + cb});
    for (int r = 0; r < rows; ++r) {
        const double* ar = a->value.data() + static_cast<size_t>(r) * ca;
        const double* br = b->value.data() + static_cast<size_t>(r) * cb;
        double* orow = out.data() + static_cast<size_t>(r) * (ca + cb);
        std::copy(ar, ar + ca, orow);
        std::copy(br, br + cb, orow + ca);
    }
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("hcat", std::move(out), {a, b}, [ap, bp, rows, ca, cb](Node& self) {
        Tensor& ag = ap->ensure_grad();
        Tensor& bg = bp->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* g = self.grad.data() + static_cast<size_t>(r) * (ca + cb);
            double* agr = ag.data() + static_cast<size_t>(r) * ca;
            double* bgr = bg.data() + static_cast<size_t>(r) * cb;
            for (int c = 0; c < ca; ++c) agr[c] += g[c];
            for (int c = 0; c < cb; ++c) bgr[c] += g[ca + c];
        }
    });
}

Var index(const Var& a, int i) {
    if (a->value.rank() != 1) throw NumericsError("index expects rank-1 input");
    if (i < 0 || i >= a->value.dim(0)) throw NumericsError("index out of range");
    Node* ap = a.get();
    return make_node("index", Tensor::scalar(a->value[i]), {a}, [ap, i](Node& self) {
        Tensor& ag = ap->ensure_grad();
        ag[i] += self.grad[0];
    });
}

// --- reductions ---

Var sum(const Var& a) {
    double s = 0.0;
    const double* d = a->value.data();
    for (int64_t i = 0; i < a->value.size(); ++i) s += d[i];
    Node* ap = a.get();
    return make_node("sum", Tensor::scalar(s), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        double g = self.grad[0];
        for (int64_t i = 0; i < ag.size(); ++i) ag[i] += g;
    });
}

Var mean(const Var& a) {
    if (a->value.size() == 0) throw NumericsError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a->value.size()));
}

Var dot(const Var& a, const Var& b) {
    check_same_shape("dot", a, b);
    double s = 0.0;
    const double* ad = a->value.data();
    const double* bd = b->value.data();
    for (int64_t i = 0; i < a->value.size(); ++i) s += ad[i] * bd[i];
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node("dot", Tensor::scalar(s), {a, b}, [ap, bp](Node& self) {
        Tensor& ag = ap->ensure_grad();
        Tensor& bg = bp->ensure_grad();
        const double* av = ap->value.data();
        const double* bv = bp->value.data();
        double g = self.grad[0];
        for (int64_t i = 0; i < ag.size(); ++i) {
            ag[i] += g * bv[i];
            bg[i] += g * av[i];
        }
    });
}

Var row_sum(const Var& m) {
    if (m->value.rank() != 2) throw NumericsError("row_sum expects rank-2 input");
    int rows = m->value.dim(0), cols = m->value.dim(1);
    std::vector<double> d(static_cast<size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) d[static_cast<size_t>(r)] += m->value.at(r, c);
    Node* mp = m.get();
    return make_node("row_sum", Tensor::vec(std::move(d)), {m}, [mp, rows, cols](Node& self) {
        Tensor& mg = mp->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            double g = self.grad[r];
            for (int c = 0; c < cols; ++c) mg.at(r, c) += g;
        }
    });
}

Var masked_l1(const Var& pred, const Tensor& target, const Tensor& mask) {
    if (!pred->value.same_shape(target) || !pred->value.same_shape(mask))
        throw NumericsError("masked_l1: shape mismatch");
    double s = 0.0;
    const double* p = pred->value.data();
    const double* t = target.data();
    const double* mk = mask.data();
    for (int64_t i = 0; i < pred->value.size(); ++i)
        if (mk[i] != 0.0) s += mk[i] * std::abs(p[i] - t[i]);
    Node* pp = pred.get();
    auto tgt = std::make_shared<Tensor>(target);
    auto msk = std::make_shared<Tensor>(mask);
    return make_node("masked_l1", Tensor::scalar(s), {pred}, [pp, tgt, msk](Node& self) {
        Tensor& pg = pp->ensure_grad();
        const double* pv = pp->value.data();
        const double* tv = tgt->data();
        const double* mv = msk->data();
        double g = self.grad[0];
        for (int64_t i = 0; i < pg.size(); ++i) {
            if (mv[i] == 0.0) continue;
            double diff = pv[i] - tv[i];
            pg[i] += g * mv[i] * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
        }
    });
}

// --- linear algebra ---

Var matvec(const Var& w, const Var& x) {
    if (w->value.rank() != 2 || x->value.rank() != 1 || w->value.dim(1) != x->value.dim(0))
        throw NumericsError("matvec: shape mismatch");
    int m = w->value.dim(0), n = w->value.dim(1);
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    const double* wd = w->value.data();
    const double* xd = x->value.data();
    for (int r = 0; r < m; ++r) {
        const double* row = wd + static_cast<size_t>(r) * n;
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += row[c] * xd[c];
        out[static_cast<size_t>(r)] = s;
    }
    Node* wp = w.get();
    Node* xp = x.get();
    return make_node("matvec", Tensor::vec(std::move(out)), {w, x}, [wp, xp, m, n](Node& self) {
        Tensor& wg = wp->ensure_grad();
        Tensor& xg = xp->ensure_grad();
        const double* wv = wp->value.data();
        const double* xv = xp->value.data();
        for (int r = 0; r < m; ++r) {
            double g = self.grad[r];
            if (g == 0.0) continue;
            double* wgr = wg.data() + static_cast<size_t>(r) * n;
            const double* wvr = wv + static_cast<size_t>(r) * n;
            for (int c = 0; c < n; ++c) {
                wgr[c] += g * xv[c];
                xg[c] += g * wvr[c];
            }
        }
    });
}

Var linear_batch(const Var& x, const Var& w, const Var& b) {
    if (x->value.rank() != 2 || w->value.rank() != 2 || b->value.rank() != 1)
        throw NumericsError("linear_batch: rank mismatch");
    int batch = x->value.dim(0), in = x->value.dim(1);
    int out_dim = w->value.dim(0);
    if (w->value.dim(1) != in || b->value.dim(0) != out_dim)
        throw NumericsError("linear_batch: shape mismatch");
    Tensor out({batch, out_dim});
    const double* xd = x->value.data();
    const double* wd = w->value.data();
    const double* bd = b->value.data();
    for (int r = 0; r < batch; ++r) {
        const double* xr = xd + static_cast<size_t>(r) * in;
        double* orow = out.data() + static_cast<size_t>(r) * out_dim;
        for (int o = 0; o < out_dim; ++o) {
            const double* wrow = wd + static_cast<size_t>(o) * in;
            double s = bd[o];
            for (int c = 0; c < in; ++c) s += wrow[c] * xr[c];
            orow[o] = s;
        }
    }
    Node* xp = x.get();
    Node* wp = w.get();
    Node* bp = b.get();
    return make_node("linear_batch", std::move(out), {x, w, b},
                     [xp, wp, bp, batch, in, out_dim](Node& self) {
                         Tensor& xg = xp->ensure_grad();
                         Tensor& wg = wp->ensure_grad();
                         Tensor& bg = bp->ensure_grad();
                         const double* xv = xp->value.data();
                         const double* wv = wp->value.data();
                         for (int r = 0; r < batch; ++r) {
                             const double* g = self.grad.data() + static_cast<size_t>(r) * out_dim;
                             double* xgr = xg.data() + static_cast<size_t>(r) * in;
                             const double* xr = xv + static_cast<size_t>(r) * in;
                             for (int o = 0; o < out_dim; ++o) {
                                 double go = g[o];
                                 if (go == 0.0) continue;
                                 bg[o] += go;
                                 double* wgr = wg.data() + static_cast<size_t>(o) * in;
                                 const double* wr = wv + static_cast<size_t>(o) * in;
                                 for (int c = 0; c < in; ++c) {
                                     wgr[c] += go * xr[c];
                                     xgr[c] += go * wr[c];
                                 }
                             }
                         }
                     });
}

Var add_scalar_bc(const Var& v, const Var& s) {
    if (v->value.rank() != 1 || s->value.size() != 1)
        throw NumericsError("add_scalar_bc: expects vec + scalar");
    Tensor out = v->value;
    double sv = s->value[0];
    for (int64_t i = 0; i < out.size(); ++i) out[i] += sv;
    Node* vp = v.get();
    Node* sp = s.get();
    return make_node("add_scalar_bc", std::move(out), {v, s}, [vp, sp](Node& self) {
        Tensor& vg = vp->ensure_grad();
        Tensor& sg = sp->ensure_grad();
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            vg[i] += self.grad[i];
            sg[0] += self.grad[i];
        }
    });
}

Var weighted_sum(const Var& coeffs, const std::vector<Var>& vecs) {
    if (coeffs->value.rank() != 1 ||
        coeffs->value.dim(0) != static_cast<int>(vecs.size()))
        throw NumericsError("weighted_sum: coeff/vec count mismatch");
    if (vecs.empty()) throw NumericsError("weighted_sum: empty vec list");
    int n = static_cast<int>(vecs[0]->value.size());
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (size_t k = 0; k < vecs.size(); ++k) {
        double c = coeffs->value[static_cast<int64_t>(k)];
        const double* vd = vecs[k]->value.data();
        for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] += c * vd[i];
    }
    std::vector<Var> parents = vecs;
    parents.push_back(coeffs);
    Node* cp = coeffs.get();
    std::vector<Var> held = vecs;
    return make_node_list("weighted_sum", Tensor::vec(std::move(out)), parents,
                          [cp, held, n](Node& self) {
                              Tensor& cg = cp->ensure_grad();
                              for (size_t k = 0; k < held.size(); ++k) {
                                  Node& v = *held[k];
                                  Tensor& vg = v.ensure_grad();
                                  double c = cp->value[static_cast<int64_t>(k)];
                                  double dc = 0.0;
                                  const double* vv = v.value.data();
                                  for (int i = 0; i < n; ++i) {
                                      vg[i] += c * self.grad[i];
                                      dc += vv[i] * self.grad[i];
                                  }
                                  cg[static_cast<int64_t>(k)] += dc;
                              }
                          });
}

// --- softmax family ---

Var softmax(const Var& a) {
    if (a->value.rank() != 1) throw NumericsError("softmax expects rank-1 input");
    Tensor out = a->value;
    double mx = out[0];
    for (int64_t i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
    double z = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(out[i] - mx);
        z += out[i];
    }
    for (int64_t i = 0; i < out.size(); ++i) out[i] /= z;
    Node* ap = a.get();
    return make_node("softmax", std::move(out), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* y = self.value.data();
        double gy = 0.0;
        for (int64_t i = 0; i < self.grad.size(); ++i) gy += self.grad[i] * y[i];
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += y[i] * (self.grad[i] - gy);
    });
}

Var log_softmax(const Var& a) {
    if (a->value.rank() != 1) throw NumericsError("log_softmax expects rank-1 input");
    Tensor out = a->value;
    double mx = out[0];
    for (int64_t i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
    double z = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) z += std::exp(out[i] - mx);
    double lz = mx + std::log(z);
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= lz;
    Node* ap = a.get();
    return make_node("log_softmax", std::move(out), {a}, [ap](Node& self) {
        Tensor& ag = ap->ensure_grad();
        const double* y = self.value.data();
        double gsum = 0.0;
        for (int64_t i = 0; i < self.grad.size(); ++i) gsum += self.grad[i];
        for (int64_t i = 0; i < self.grad.size(); ++i)
            ag[i] += self.grad[i] - std::exp(y[i]) * gsum;
    });
}

Var log_softmax_rows(const Var& m) {
    if (m->value.rank() != 2) throw NumericsError("log_softmax_rows expects rank-2 input");
    int rows = m->value.dim(0), cols = m->value.dim(1);
    Tensor out = m->value;
    for (int r = 0; r < rows; ++r) {
        double* row = out.data() + static_cast<size_t>(r) * cols;
        double mx = row[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < cols; ++c) z += std::exp(row[c] - mx);
        double lz = mx + std::log(z);
        for (int c = 0; c < cols; ++c) row[c] -= lz;
    }
    Node* mp = m.get();
    return make_node("log_softmax_rows", std::move(out), {m}, [mp, rows, cols](Node& self) {
        Tensor& mg = mp->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* y = self.value.data() + static_cast<size_t>(r) * cols;
            const double* g = self.grad.data() + static_cast<size_t>(r) * cols;
            double* dst = mg.data() + static_cast<size_t>(r) * cols;
            double gsum = 0.0;
            for (int c = 0; c < cols; ++c) gsum += g[c];
            for (int c = 0; c < cols; ++c) dst[c] += g[c] - std::exp(y[c]) * gsum;
        }
    });
}

Var gather_rows(const Var& m, const std::vector<int>& idx) {
    if (m->value.rank() != 2) throw NumericsError("gather_rows expects rank-2 input");
    int rows = m->value.dim(0), cols = m->value.dim(1);
    if (static_cast<int>(idx.size()) != rows)
        throw NumericsError("gather_rows: index count mismatch");
    std::vector<double> out(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        if (idx[static_cast<size_t>(r)] < 0 || idx[static_cast<size_t>(r)] >= cols)
            throw NumericsError("gather_rows: index out of range");
        out[static_cast<size_t>(r)] = m->value.at(r, idx[static_cast<size_t>(r)]);
    }
    Node* mp = m.get();
    auto ids = std::make_shared<std::vector<int>>(idx);
    return make_node("gather_rows", Tensor::vec(std::move(out)), {m}, [mp, ids](Node& self) {
        Tensor& mg = mp->ensure_grad();
        int cols = mp->value.dim(1);
        for (int64_t r = 0; r < self.grad.size(); ++r)
            mg.data()[r * cols + (*ids)[static_cast<size_t>(r)]] += self.grad[r];
    });
}

// --- backward sweep ---

void backward(const Var& root) {
    if (!root) throw NumericsError("backward on null node");
    if (root->value.size() != 1)
        throw NumericsError("backward requires a scalar root");
    if (!std::isfinite(root->value[0]))
        throw NumericsError("backward: root value is not finite");
    if (!root->needs_grad) return;  // constant graph: nothing to do

    // topological order via iterative post-order DFS
    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    std::unordered_set<Node*> visited;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next].get();
            ++next;
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad.fill(0.0);
    root->grad[0] = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->grad.empty()) continue;  // no gradient reached this node
        if (!n->grad.all_finite())
            throw NumericsError(std::string("NaN gradient at op '") + n->op + "'");
        if (n->backward_fn) n->backward_fn(*n);
        if (!n->requires_grad) n->grad = Tensor();  // free intermediate buffers
    }
}

void zero_grad(std::span<const Var> params) {
    for (const auto& p : params)
        if (!p->grad.empty()) p->grad.fill(0.0);
}

}  // namespace iplan::num
