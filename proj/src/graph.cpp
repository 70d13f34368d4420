#include "posuite/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <cblas.h>

namespace posuite::ad {

namespace {

std::atomic<std::uint64_t> g_order{0};

std::shared_ptr<Node> make_node(Tensor v, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->parents = std::move(parents);
    for (auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    n->order = g_order.fetch_add(1, std::memory_order_relaxed);
    return n;
}

struct OpenBlasInit {
    OpenBlasInit() { openblas_set_num_threads(1); }
} g_blas_init;

}  // namespace

void mm(const double* a, const double* b, double* c, int m, int k, int n,
        bool trans_a, bool trans_b, double beta) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a,
                trans_a ? m : k, b, trans_b ? k : n, beta, c, n);
}

Var constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->order = g_order.fetch_add(1, std::memory_order_relaxed);
    return Var(n);
}

Var leaf(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    n->order = g_order.fetch_add(1, std::memory_order_relaxed);
    return Var(n);
}

Var add(Var a, Var b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (long i = 0; i < out.numel(); ++i) out.data[i] += b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (int s = 0; s < 2; ++s) {
            auto& p = n.parents[s];
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (long i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
    }));
}

Var sub(Var a, Var b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (long i = 0; i < out.numel(); ++i) out.data[i] -= b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        if (n.parents[0]->requires_grad) {
            auto& g = n.parents[0]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& g = n.parents[1]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
        }
    }));
}

Var mul(Var a, Var b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (long i = 0; i < out.numel(); ++i) out.data[i] *= b.value().data[i];
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            auto& g = n.parents[0]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * bv.data[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& g = n.parents[1]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * av.data[i];
        }
    }));
}

Var minimum(Var a, Var b) {
    check_same_shape(a.value(), b.value(), "minimum");
    Tensor out = a.value();
    for (long i = 0; i < out.numel(); ++i) out.data[i] = std::min(out.data[i], b.value().data[i]);
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        // ties route to a
        if (n.parents[0]->requires_grad) {
            auto& g = n.parents[0]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i)
                if (av.data[i] <= bv.data[i]) g.data[i] += n.grad.data[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& g = n.parents[1]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i)
                if (bv.data[i] < av.data[i]) g.data[i] += n.grad.data[i];
        }
    }));
}

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[1] != bv.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    int m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    Tensor out({m, n});
    mm(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
    return Var(make_node(std::move(out), {a.node(), b.node()}, [m, k, n](Node& nd) {
        const auto& av2 = nd.parents[0]->value;
        const auto& bv2 = nd.parents[1]->value;
        if (nd.parents[0]->requires_grad) {
            auto& g = nd.parents[0]->ensure_grad();  // dA = dC * B^T  [m,k]
            mm(nd.grad.data.data(), bv2.data.data(), g.data.data(), m, n, k, false, true, 1.0);
        }
        if (nd.parents[1]->requires_grad) {
            auto& g = nd.parents[1]->ensure_grad();  // dB = A^T * dC  [k,n]
            mm(av2.data.data(), nd.grad.data.data(), g.data.data(), k, m, n, true, false, 1.0);
        }
    }));
}

Var add_rowvec(Var x, Var b) {
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (xv.shape.size() != 2 || bv.shape.size() != 1 || xv.shape[1] != bv.shape[0])
        throw std::invalid_argument("add_rowvec: shape mismatch " + xv.shape_str() + " + " + bv.shape_str());
    int m = xv.shape[0], n = xv.shape[1];
    Tensor out = xv;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out.data[static_cast<size_t>(r) * n + c] += bv.data[c];
    return Var(make_node(std::move(out), {x.node(), b.node()}, [m, n](Node& nd) {
        if (nd.parents[0]->requires_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (long i = 0; i < g.numel(); ++i) g.data[i] += nd.grad.data[i];
        }
        if (nd.parents[1]->requires_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) g.data[c] += nd.grad.data[static_cast<size_t>(r) * n + c];
        }
    }));
}

Var mul_rowvec(Var x, Var v) {
    const Tensor& xv = x.value();
    const Tensor& vv = v.value();
    if (xv.shape.size() != 2 || vv.shape.size() != 1 || xv.shape[1] != vv.shape[0])
        throw std::invalid_argument("mul_rowvec: shape mismatch " + xv.shape_str() + " * " + vv.shape_str());
    int m = xv.shape[0], n = xv.shape[1];
    Tensor out = xv;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out.data[static_cast<size_t>(r) * n + c] *= vv.data[c];
    return Var(make_node(std::move(out), {x.node(), v.node()}, [m, n](Node& nd) {
        const auto& xv2 = nd.parents[0]->value;
        const auto& vv2 = nd.parents[1]->value;
        if (nd.parents[0]->requires_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c)
                    g.data[static_cast<size_t>(r) * n + c] += nd.grad.data[static_cast<size_t>(r) * n + c] * vv2.data[c];
        }
        if (nd.parents[1]->requires_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c)
                    g.data[c] += nd.grad.data[static_cast<size_t>(r) * n + c] * xv2.data[static_cast<size_t>(r) * n + c];
        }
    }));
}

Var bcast_scalar(Var s, int m) {
    if (!s.value().is_scalar()) throw std::invalid_argument("bcast_scalar: expects scalar");
    Tensor out({m, 1});
    for (auto& v : out.data) v = s.value().data[0];
    return Var(make_node(std::move(out), {s.node()}, [](Node& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (double u : nd.grad.data) g.data[0] += u;
    }));
}

namespace {

Var unary(Var a, Tensor out, std::function<double(double, double, double)> dfn) {
    // dfn(in, out, upstream) -> contribution to input grad
    return Var(make_node(std::move(out), {a.node()}, [dfn = std::move(dfn)](Node& n) {
        auto& g = n.parents[0]->ensure_grad();
        const auto& in = n.parents[0]->value;
        for (long i = 0; i < g.numel(); ++i)
            g.data[i] += dfn(in.data[i], n.value.data[i], n.grad.data[i]);
    }));
}

}  // namespace

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (auto& v : out.data) v *= s;
    return unary(a, std::move(out), [s](double, double, double up) { return up * s; });
}

Var add_const(Var a, double c) {
    Tensor out = a.value();
    for (auto& v : out.data) v += c;
    return unary(a, std::move(out), [](double, double, double up) { return up; });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return unary(a, std::move(out), [](double in, double, double up) { return in > 0.0 ? up : 0.0; });
}

Var tanh_(Var a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = std::tanh(v);
    return unary(a, std::move(out), [](double, double o, double up) { return up * (1.0 - o * o); });
}

Var exp_(Var a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = std::exp(v);
    return unary(a, std::move(out), [](double, double o, double up) { return up * o; });
}

Var softplus(Var a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = v > 30.0 ? v : std::log1p(std::exp(v));
    return unary(a, std::move(out),
                 [](double in, double, double up) { return up / (1.0 + std::exp(-in)); });
}

Var square(Var a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = v * v;
    return unary(a, std::move(out), [](double in, double, double up) { return up * 2.0 * in; });
}

Var clamp(Var a, double lo, double hi) {
    Tensor out = a.value();
    for (auto& v : out.data) v = std::clamp(v, lo, hi);
    return unary(a, std::move(out), [lo, hi](double in, double, double up) {
        return (in >= lo && in <= hi) ? up : 0.0;
    });
}

Var row_sum(Var a) {
    const Tensor& av = a.value();
    if (av.shape.size() != 2) throw std::invalid_argument("row_sum: expects rank-2");
    int m = av.shape[0], n = av.shape[1];
    Tensor out({m, 1});
    for (int r = 0; r < m; ++r) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += av.data[static_cast<size_t>(r) * n + c];
        out.data[r] = s;
    }
    return Var(make_node(std::move(out), {a.node()}, [m, n](Node& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) g.data[static_cast<size_t>(r) * n + c] += nd.grad.data[r];
    }));
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data) s += v;
    return Var(make_node(Tensor::scalar(s), {a.node()}, [](Node& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (long i = 0; i < g.numel(); ++i) g.data[i] += nd.grad.data[0];
    }));
}

Var mean(Var a) {
    long n = a.value().numel();
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    double s = 0.0;
    for (double v : a.value().data) s += v;
    return Var(make_node(Tensor::scalar(s / n), {a.node()}, [n](Node& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        double u = nd.grad.data[0] / n;
        for (long i = 0; i < g.numel(); ++i) g.data[i] += u;
    }));
}

Var concat_cols(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[0] != bv.shape[0])
        throw std::invalid_argument("concat_cols: shape mismatch");
    int m = av.shape[0], p = av.shape[1], q = bv.shape[1];
    Tensor out({m, p + q});
    for (int r = 0; r < m; ++r) {
        std::copy_n(&av.data[static_cast<size_t>(r) * p], p, &out.data[static_cast<size_t>(r) * (p + q)]);
        std::copy_n(&bv.data[static_cast<size_t>(r) * q], q, &out.data[static_cast<size_t>(r) * (p + q) + p]);
    }
    return Var(make_node(std::move(out), {a.node(), b.node()}, [m, p, q](Node& nd) {
        if (nd.parents[0]->requires_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < p; ++c)
                    g.data[static_cast<size_t>(r) * p + c] += nd.grad.data[static_cast<size_t>(r) * (p + q) + c];
        }
        if (nd.parents[1]->requires_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < q; ++c)
                    g.data[static_cast<size_t>(r) * q + c] += nd.grad.data[static_cast<size_t>(r) * (p + q) + p + c];
        }
    }));
}

Var slice_cols(Var a, int start, int len) {
    const Tensor& av = a.value();
    if (av.shape.size() != 2 || start < 0 || len < 0 || start + len > av.shape[1])
        throw std::invalid_argument("slice_cols: bad range");
    int m = av.shape[0], n = av.shape[1];
    Tensor out({m, len});
    for (int r = 0; r < m; ++r)
        std::copy_n(&av.data[static_cast<size_t>(r) * n + start], len, &out.data[static_cast<size_t>(r) * len]);
    return Var(make_node(std::move(out), {a.node()}, [m, n, start, len](Node& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < len; ++c)
                g.data[static_cast<size_t>(r) * n + start + c] += nd.grad.data[static_cast<size_t>(r) * len + c];
    }));
}

void backward(Var loss) {
    if (!loss.value().is_scalar())
        throw std::invalid_argument("backward: loss must be a scalar");
    if (!loss.requires_grad()) return;

    // collect reachable grad-requiring nodes, then process in reverse creation order
    std::vector<Node*> nodes;
    std::vector<Node*> stack{loss.node().get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (n->grad_alloc) continue;  // visited marker doubles as grad storage
        n->ensure_grad();
        nodes.push_back(n);
        for (auto& p : n->parents)
            if (p->requires_grad && !p->grad_alloc) stack.push_back(p.get());
    }
    std::sort(nodes.begin(), nodes.end(), [](Node* a, Node* b) { return a->order > b->order; });

    loss.node()->grad.data[0] = 1.0;
    for (Node* n : nodes)
        if (n->backprop) n->backprop(*n);
}

}  // namespace posuite::ad
