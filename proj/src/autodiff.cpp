#include "pvae/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "pvae/special.hpp"

namespace pvae::ad {
namespace {

std::atomic<std::uint64_t> g_order{0};
thread_local int g_nograd_depth = 0;

NodePtr make_node(Tensor value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->order = g_order.fetch_add(1, std::memory_order_relaxed);
    bool req = false;
    for (const auto& p : parents)
        if (p && p->requires_grad) req = true;
    if (grad_enabled() && req) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// Padded 2-D dims and broadcast-aware indexing.
struct Dims { std::size_t r, c; };

Dims dims_of(const Tensor& t) { return {t.rows(), t.cols()}; }

std::size_t bidx(const Tensor& t, std::size_t i, std::size_t j) {
    const Dims d = dims_of(t);
    return (d.r == 1 ? 0 : i) * d.c + (d.c == 1 ? 0 : j);
}

Dims broadcast_dims(const Tensor& a, const Tensor& b) {
    const Dims da = dims_of(a), db = dims_of(b);
    const std::size_t R = std::max(da.r, db.r);
    const std::size_t C = std::max(da.c, db.c);
    if ((da.r != R && da.r != 1) || (db.r != R && db.r != 1) ||
        (da.c != C && da.c != 1) || (db.c != C && db.c != 1))
        throw std::invalid_argument("broadcast: incompatible shapes");
    return {R, C};
}

Tensor make_out(Dims d, bool keep_rank1) {
    if (keep_rank1 && d.r == 1) return Tensor({d.c});
    return Tensor({d.r, d.c});
}

// Sums grad over the dims that were broadcast for this parent.
void reduce_into(Tensor& pgrad, const Tensor& g, const Tensor& pval) {
    const Dims dp = dims_of(pval), dg = dims_of(g);
    for (std::size_t i = 0; i < dg.r; ++i)
        for (std::size_t j = 0; j < dg.c; ++j)
            pgrad[bidx(pval, i, j)] += g[i * dg.c + j];
    (void)dp;
}

template <class F, class DA, class DB>
Var binary_op(const Var& a, const Var& b, F f, DA da, DB db) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    const Dims d = broadcast_dims(av, bv);
    Tensor out = make_out(d, av.rank() <= 1 && bv.rank() <= 1);
    for (std::size_t i = 0; i < d.r; ++i)
        for (std::size_t j = 0; j < d.c; ++j)
            out[i * d.c + j] = f(av[bidx(av, i, j)], bv[bidx(bv, i, j)]);
    auto an = a.node(), bn = b.node();
    return Var(make_node(std::move(out), {an, bn}, [an, bn, da, db](Node& self) {
        const Tensor& av2 = an->value;
        const Tensor& bv2 = bn->value;
        const Dims d2 = {self.value.rows(), self.value.cols()};
        if (an->requires_grad) {
            Tensor& ag = an->ensure_grad();
            for (std::size_t i = 0; i < d2.r; ++i)
                for (std::size_t j = 0; j < d2.c; ++j) {
                    const std::size_t o = i * d2.c + j;
                    ag[bidx(av2, i, j)] +=
                        self.grad[o] * da(av2[bidx(av2, i, j)], bv2[bidx(bv2, i, j)],
                                          self.value[o]);
                }
        }
        if (bn->requires_grad) {
            Tensor& bg = bn->ensure_grad();
            for (std::size_t i = 0; i < d2.r; ++i)
                for (std::size_t j = 0; j < d2.c; ++j) {
                    const std::size_t o = i * d2.c + j;
                    bg[bidx(bv2, i, j)] +=
                        self.grad[o] * db(av2[bidx(av2, i, j)], bv2[bidx(bv2, i, j)],
                                          self.value[o]);
                }
        }
    }));
}

template <class F, class DF>
Var unary_op(const Var& x, F f, DF df) {
    const Tensor& xv = x.val();
    Tensor out = Tensor::zeros_like(xv);
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn, df](Node& self) {
        Tensor& xg = xn->ensure_grad();
        for (std::size_t i = 0; i < xg.size(); ++i)
            xg[i] += self.grad[i] * df(xn->value[i], self.value[i]);
    }));
}

double clamp_unit(double x) {
    const double lim = 1.0 - 1e-15;
    return std::min(std::max(x, -lim), lim);
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// tanh is capped at 1 - 1e-15 (the artanh clamp's counterpart) so exp-map
// images stay strictly inside the ball even when the argument saturates.
double tanhc_sat(double x) {
    if (std::abs(x) < 1e-4) return pvae::tanhc(x);
    return clamp_unit(std::tanh(x)) / x;
}

double dtanhc(double x, double y) {
    if (std::abs(x) < 1e-4) return -2.0 * x / 3.0 + 8.0 * x * x * x / 15.0;
    return (1.0 - x * x * y * y - y) / x;  // tanh = x y, sech^2 = 1 - tanh^2
}

double dartanhc(double x, double y) {
    if (std::abs(x) < 1e-4) return 2.0 * x / 3.0 + 4.0 * x * x * x / 5.0;
    const double t = clamp_unit(x);
    return (1.0 / (1.0 - t * t) - y) / t;
}

double dlog_sinhc(double x, double) {
    if (std::abs(x) < 1e-4) return x / 3.0 - x * x * x / 45.0;
    const double cth = x > 350.0 ? 1.0 : 1.0 / std::tanh(x);
    return cth - 1.0 / x;
}

}  // namespace

Tensor& Node::ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor::zeros_like(value);
    if (!grad_ready) {
        grad.fill(0.0);
        grad_ready = true;
    }
    return grad;
}

void Node::zero_grad() { grad_ready = false; }

Var Var::leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->order = g_order.fetch_add(1, std::memory_order_relaxed);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var Var::constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->order = g_order.fetch_add(1, std::memory_order_relaxed);
    return Var(std::move(n));
}

NoGradGuard::NoGradGuard() { ++g_nograd_depth; }
NoGradGuard::~NoGradGuard() { --g_nograd_depth; }
bool grad_enabled() { return g_nograd_depth == 0; }

void backward(const Var& out) {
    if (out.val().size() != 1)
        throw std::invalid_argument("backward: output must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{out.node().get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (const auto& p : n->parents)
            if (p && p->requires_grad) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](Node* a, Node* b) { return a->order > b->order; });
    out.node()->ensure_grad().fill(1.0);
    out.node()->grad_ready = true;
    for (Node* n : order)
        if (n->backprop && n->requires_grad) n->backprop(*n);
}

Var add(const Var& a, const Var& b) {
    return binary_op(a, b, [](double x, double y) { return x + y; },
                     [](double, double, double) { return 1.0; },
                     [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary_op(a, b, [](double x, double y) { return x - y; },
                     [](double, double, double) { return 1.0; },
                     [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary_op(a, b, [](double x, double y) { return x * y; },
                     [](double, double y, double) { return y; },
                     [](double x, double, double) { return x; });
}

Var div(const Var& a, const Var& b) {
    return binary_op(a, b, [](double x, double y) { return x / y; },
                     [](double, double y, double) { return 1.0 / y; },
                     [](double, double y, double v) { return -v / y; });
}

Var neg(const Var& x) {
    return unary_op(x, [](double v) { return -v; },
                    [](double, double) { return -1.0; });
}

Var scale(const Var& x, double s) {
    return unary_op(x, [s](double v) { return s * v; },
                    [s](double, double) { return s; });
}

Var add_const(const Var& x, double s) {
    return unary_op(x, [s](double v) { return v + s; },
                    [](double, double) { return 1.0; });
}

Var pow_const(const Var& x, double p) {
    return unary_op(x, [p](double v) { return std::pow(v, p); },
                    [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Var square(const Var& x) {
    return unary_op(x, [](double v) { return v * v; },
                    [](double v, double) { return 2.0 * v; });
}

Var sqrt_(const Var& x) {
    return unary_op(x, [](double v) { return std::sqrt(v); },
                    [](double, double y) { return 0.5 / y; });
}

Var exp_(const Var& x) {
    return unary_op(x, [](double v) { return std::exp(v); },
                    [](double, double y) { return y; });
}

Var log_(const Var& x) {
    return unary_op(x, [](double v) { return std::log(v); },
                    [](double v, double) { return 1.0 / v; });
}

Var tanh_(const Var& x) {
    return unary_op(x, [](double v) { return std::tanh(v); },
                    [](double, double y) { return 1.0 - y * y; });
}

Var artanh(const Var& x) {
    return unary_op(x, [](double v) { return std::atanh(clamp_unit(v)); },
                    [](double v, double) {
                        const double t = clamp_unit(v);
                        return 1.0 / (1.0 - t * t);
                    });
}

Var sinh_(const Var& x) {
    return unary_op(x, [](double v) { return std::sinh(v); },
                    [](double v, double) { return std::cosh(v); });
}

Var cosh_(const Var& x) {
    return unary_op(x, [](double v) { return std::cosh(v); },
                    [](double v, double) { return std::sinh(v); });
}

Var asinh_(const Var& x) {
    return unary_op(x, [](double v) { return std::asinh(v); },
                    [](double v, double) { return 1.0 / std::sqrt(1.0 + v * v); });
}

Var erf_(const Var& x) {
    return unary_op(x, [](double v) { return std::erf(v); },
                    [](double v, double) {
                        return 2.0 / std::sqrt(kPi) * std::exp(-v * v);
                    });
}

Var relu(const Var& x) {
    return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                    [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var softplus(const Var& x) {
    return unary_op(x,
                    [](double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); },
                    [](double v, double) { return sigmoid(v); });
}

Var tanhc(const Var& x) {
    return unary_op(x, [](double v) { return tanhc_sat(v); }, dtanhc);
}

Var artanhc(const Var& x) {
    return unary_op(x, [](double v) { return pvae::artanhc(clamp_unit(v)); }, dartanhc);
}

Var log_sinhc(const Var& x) {
    return unary_op(x, [](double v) { return pvae::log_sinhc(v); }, dlog_sinhc);
}

namespace {

// out[m,n] += A[m,k] B[k,n]
void gemm_nn(Tensor& out, const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = a[i * k + l];
            if (ail == 0.0) continue;
            const double* brow = b.data() + l * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += ail * brow[j];
        }
}

// out[m,k] += G[m,n] B[k,n]^T
void gemm_nt(Tensor& out, const Tensor& g, const Tensor& b) {
    const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double* grow = g.data() + i * n;
            const double* brow = b.data() + l * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            out[i * k + l] += s;
        }
}

// out[k,n] += A[m,k]^T G[m,n]
void gemm_tn(Tensor& out, const Tensor& a, const Tensor& g) {
    const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = a[i * k + l];
            if (ail == 0.0) continue;
            const double* grow = g.data() + i * n;
            double* orow = out.data() + l * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += ail * grow[j];
        }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (av.cols() != bv.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree");
    Tensor out({av.rows(), bv.cols()});
    gemm_nn(out, av, bv);
    auto an = a.node(), bn = b.node();
    return Var(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad) gemm_nt(an->ensure_grad(), self.grad, bn->value);
        if (bn->requires_grad) gemm_tn(bn->ensure_grad(), an->value, self.grad);
    }));
}

Var sum(const Var& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.val().size(); ++i) s += x.val()[i];
    auto xn = x.node();
    return Var(make_node(Tensor::scalar(s), {xn}, [xn](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
    }));
}

Var mean(const Var& x) {
    return scale(sum(x), 1.0 / static_cast<double>(x.val().size()));
}

Var row_sum(const Var& x) {
    const Tensor& xv = x.val();
    const std::size_t m = xv.rows(), n = xv.cols();
    Tensor out({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j];
        out[i] = s;
    }
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn](Node& self) {
        Tensor& g = xn->ensure_grad();
        const std::size_t n2 = xn->value.cols();
        for (std::size_t i = 0; i < xn->value.rows(); ++i)
            for (std::size_t j = 0; j < n2; ++j) g[i * n2 + j] += self.grad[i];
    }));
}

Var row_norm(const Var& x) {
    const Tensor& xv = x.val();
    const std::size_t m = xv.rows(), n = xv.cols();
    Tensor out({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j] * xv[i * n + j];
        out[i] = std::sqrt(s);
    }
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn](Node& self) {
        Tensor& g = xn->ensure_grad();
        const std::size_t n2 = xn->value.cols();
        for (std::size_t i = 0; i < xn->value.rows(); ++i) {
            const double inv = 1.0 / std::max(self.value[i], 1e-150);
            for (std::size_t j = 0; j < n2; ++j)
                g[i * n2 + j] += self.grad[i] * xn->value[i * n2 + j] * inv;
        }
    }));
}

Var row_dot(const Var& a, const Var& b) { return row_sum(mul(a, b)); }

Var concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t m = xs.front().val().rows();
    std::size_t total = 0;
    for (const auto& x : xs) {
        if (x.val().rows() != m)
            throw std::invalid_argument("concat_cols: row counts disagree");
        total += x.val().cols();
    }
    Tensor out({m, total});
    std::size_t off = 0;
    for (const auto& x : xs) {
        const std::size_t n = x.val().cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out[i * total + off + j] = x.val()[i * n + j];
        off += n;
    }
    std::vector<NodePtr> parents;
    for (const auto& x : xs) parents.push_back(x.node());
    return Var(make_node(std::move(out), parents, [parents, total](Node& self) {
        std::size_t off2 = 0;
        for (const auto& p : parents) {
            const std::size_t n = p->value.cols();
            if (p->requires_grad) {
                Tensor& g = p->ensure_grad();
                for (std::size_t i = 0; i < p->value.rows(); ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        g[i * n + j] += self.grad[i * total + off2 + j];
            }
            off2 += n;
        }
    }));
}

Var slice_cols(const Var& x, std::size_t c0, std::size_t c1) {
    const Tensor& xv = x.val();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (c1 > n || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Tensor out({m, c1 - c0});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = c0; j < c1; ++j)
            out[i * (c1 - c0) + (j - c0)] = xv[i * n + j];
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn, c0, c1](Node& self) {
        Tensor& g = xn->ensure_grad();
        const std::size_t n2 = xn->value.cols(), w = c1 - c0;
        for (std::size_t i = 0; i < xn->value.rows(); ++i)
            for (std::size_t j = 0; j < w; ++j)
                g[i * n2 + c0 + j] += self.grad[i * w + j];
    }));
}

Var slice_rows(const Var& x, std::size_t r0, std::size_t r1) {
    const Tensor& xv = x.val();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (r1 > m || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    Tensor out({r1 - r0, n});
    for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = 0; j < n; ++j) out[(i - r0) * n + j] = xv[i * n + j];
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn, r0, r1](Node& self) {
        Tensor& g = xn->ensure_grad();
        const std::size_t n2 = xn->value.cols();
        for (std::size_t i = r0; i < r1; ++i)
            for (std::size_t j = 0; j < n2; ++j)
                g[i * n2 + j] += self.grad[(i - r0) * n2 + j];
    }));
}

Var broadcast_to(const Var& x, std::size_t rows, std::size_t cols) {
    const Tensor& xv = x.val();
    const Dims dx = dims_of(xv);
    if ((dx.r != rows && dx.r != 1) || (dx.c != cols && dx.c != 1))
        throw std::invalid_argument("broadcast_to: incompatible target");
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out[i * cols + j] = xv[bidx(xv, i, j)];
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn](Node& self) {
        reduce_into(xn->ensure_grad(), self.grad, xn->value);
    }));
}

Var transpose(const Var& x) {
    const Tensor& xv = x.val();
    const std::size_t m = xv.rows(), n = xv.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
    auto xn = x.node();
    return Var(make_node(std::move(out), {xn}, [xn, m, n](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    }));
}

Var stop_gradient(const Var& x) { return Var::constant(x.val()); }

Var custom(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    std::vector<NodePtr> ps;
    ps.reserve(parents.size());
    for (const auto& p : parents) ps.push_back(p.node());
    return Var(make_node(std::move(value), std::move(ps), std::move(backprop)));
}

}  // namespace pvae::ad
