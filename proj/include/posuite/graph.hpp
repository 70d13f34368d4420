#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include "posuite/tensor.hpp"

namespace posuite::ad {

// One recorded op in the reverse-mode tape. Creation order is a valid
// topological order, so backward just walks reachable nodes by order desc.
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
    bool grad_alloc = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // scatter this->grad into parents
    std::uint64_t order = 0;

    Tensor& ensure_grad() {
        if (!grad_alloc) {
            grad = Tensor::zeros_like(value);
            grad_alloc = true;
        }
        return grad;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    const Tensor& value() const { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return node_ && node_->grad_alloc; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Graph construction
Var constant(Tensor v);
Var leaf(Tensor v);  // differentiable leaf (parameter)

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var minimum(Var a, Var b);
Var matmul(Var a, Var b);           // [m,k]x[k,n]
Var add_rowvec(Var x, Var b);       // [m,n] + [n] broadcast over rows
Var mul_rowvec(Var x, Var v);       // [m,n] * [n] broadcast over rows
Var bcast_scalar(Var s, int m);     // scalar -> [m,1]
Var scale(Var a, double s);
Var add_const(Var a, double c);
Var relu(Var a);
Var tanh_(Var a);
Var exp_(Var a);
Var softplus(Var a);                // log(1+e^x), overflow-safe
Var square(Var a);
Var clamp(Var a, double lo, double hi);  // gradient zero outside [lo,hi]
Var row_sum(Var a);                 // [m,n] -> [m,1]
Var sum(Var a);                     // -> scalar
Var mean(Var a);                    // -> scalar
Var concat_cols(Var a, Var b);      // [m,p]|[m,q] -> [m,p+q]
Var slice_cols(Var a, int start, int len);

// Runs reverse accumulation from a scalar loss. Leaves reachable from the
// loss get their grad filled; unreachable differentiable leaves keep a
// zero gradient on read (ensure_grad).
void backward(Var loss);

// Raw dgemm helpers shared with the graph-free forward path.
// c = a(mxk) * b(kxn), optionally transposing either input (dims given
// are the logical, post-transpose ones). beta=1 accumulates into c.
void mm(const double* a, const double* b, double* c, int m, int k, int n,
        bool trans_a = false, bool trans_b = false, double beta = 0.0);

}  // namespace posuite::ad
