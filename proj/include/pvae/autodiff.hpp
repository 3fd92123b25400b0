#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "pvae/tensor.hpp"

namespace pvae::ad {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode graph: a value, its adjoint, and a closure
// pushing the adjoint into the parents. Creation order is a topological
// order of the DAG, so backward just sorts reachable nodes by it.
class Node {
public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::uint64_t order = 0;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;

    Tensor& ensure_grad();
    void zero_grad();
};

// Value-semantic handle to a graph node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    static Var leaf(Tensor value);      // trainable: requires_grad = true
    static Var constant(Tensor value);
    static Var scalar(double v) { return constant(Tensor::scalar(v)); }

    bool defined() const { return n_ != nullptr; }
    const Tensor& val() const { return n_->value; }
    Tensor& mutable_val() { return n_->value; }
    const Tensor& grad() const { return n_->grad; }
    bool has_grad() const { return n_->grad_ready; }
    void zero_grad() { n_->zero_grad(); }
    bool requires_grad() const { return n_->requires_grad; }
    double item() const { return n_->value[0]; }
    std::size_t rows() const { return n_->value.rows(); }
    std::size_t cols() const { return n_->value.cols(); }
    const NodePtr& node() const { return n_; }

private:
    NodePtr n_;
};

// While a guard is alive on the thread every new op node is a constant:
// values are computed, no parents or closures are recorded.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
};
bool grad_enabled();

void backward(const Var& out);

// ---- elementwise (numpy-style rank-2 broadcasting) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& x);
Var scale(const Var& x, double s);
Var add_const(const Var& x, double s);
Var pow_const(const Var& x, double p);
Var square(const Var& x);
Var sqrt_(const Var& x);
Var exp_(const Var& x);
Var log_(const Var& x);
Var tanh_(const Var& x);
Var artanh(const Var& x);   // input clamped to |x| <= 1 - 1e-15
Var sinh_(const Var& x);
Var cosh_(const Var& x);
Var asinh_(const Var& x);
Var erf_(const Var& x);
Var relu(const Var& x);
Var softplus(const Var& x);
Var tanhc(const Var& x);     // tanh(x)/x
Var artanhc(const Var& x);   // artanh(x)/x
Var log_sinhc(const Var& x); // log(sinh(x)/x)

// ---- linear algebra / structure ----
Var matmul(const Var& a, const Var& b);         // {m,k} x {k,n}
Var sum(const Var& x);                          // -> {1}
Var mean(const Var& x);                         // -> {1}
Var row_sum(const Var& x);                      // {m,n} -> {m,1}
Var row_norm(const Var& x);                     // {m,n} -> {m,1}
Var row_dot(const Var& a, const Var& b);        // row_sum(mul(a, b))
Var concat_cols(const std::vector<Var>& xs);
Var slice_cols(const Var& x, std::size_t c0, std::size_t c1);
Var slice_rows(const Var& x, std::size_t r0, std::size_t r1);
Var broadcast_to(const Var& x, std::size_t rows, std::size_t cols);
Var transpose(const Var& x);
Var stop_gradient(const Var& x);

// Node with caller-supplied local Jacobian action. `backprop` reads
// self.grad and accumulates into self.parents[i]->ensure_grad().
Var custom(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& x) { return neg(x); }

}  // namespace pvae::ad
