#include "posuite/nn.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

namespace posuite {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*log(2*pi)

void apply_activation(Tensor& t, Activation a) {
    switch (a) {
        case Activation::Identity: break;
        case Activation::Relu:
            for (auto& v : t.data) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Tanh:
            for (auto& v : t.data) v = std::tanh(v);
            break;
    }
}

ad::Var apply_activation(ad::Var x, Activation a) {
    switch (a) {
        case Activation::Relu: return ad::relu(x);
        case Activation::Tanh: return ad::tanh_(x);
        default: return x;
    }
}

double stable_softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

Mlp Mlp::make(const std::vector<int>& sizes, Activation hidden, Activation output,
              std::mt19937_64& rng, double final_scale) {
    if (sizes.size() < 2) throw std::invalid_argument("mlp: need at least input and output size");
    Mlp net;
    net.hidden_act = hidden;
    net.output_act = output;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        int in = sizes[l], out = sizes[l + 1];
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Layer layer{Tensor({in, out}), Tensor({out})};
        for (auto& v : layer.w.data) v = dist(rng);
        for (auto& v : layer.b.data) v = dist(rng);
        if (l + 2 == sizes.size() && final_scale != 1.0) {
            for (auto& v : layer.w.data) v *= final_scale;
            for (auto& v : layer.b.data) v *= final_scale;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

long Mlp::param_count() const {
    long n = 0;
    for (const auto& l : layers) n += l.w.numel() + l.b.numel();
    return n;
}

Tensor Mlp::forward(const Tensor& x) const {
    if (x.shape.size() != 2 || x.shape[1] != input_dim())
        throw std::invalid_argument("mlp forward: input shape " + x.shape_str() + " incompatible with net input " +
                                    std::to_string(input_dim()));
    Tensor h = x;
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        int m = h.shape[0], k = h.shape[1], n = layer.w.shape[1];
        Tensor out({m, n});
        ad::mm(h.data.data(), layer.w.data.data(), out.data.data(), m, k, n);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) out.data[static_cast<size_t>(r) * n + c] += layer.b.data[c];
        apply_activation(out, l + 1 < layers.size() ? hidden_act : output_act);
        h = std::move(out);
    }
    return h;
}

std::vector<double> Mlp::forward_vec(const std::vector<double>& x) const {
    Tensor in({1, static_cast<int>(x.size())}, x);
    return forward(in).data;
}

std::vector<Tensor*> Mlp::params() {
    std::vector<Tensor*> p;
    for (auto& l : layers) {
        p.push_back(&l.w);
        p.push_back(&l.b);
    }
    return p;
}

std::vector<const Tensor*> Mlp::params() const {
    std::vector<const Tensor*> p;
    for (const auto& l : layers) {
        p.push_back(&l.w);
        p.push_back(&l.b);
    }
    return p;
}

bool Mlp::same_arch(const Mlp& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (size_t i = 0; i < layers.size(); ++i)
        if (layers[i].w.shape != o.layers[i].w.shape || layers[i].b.shape != o.layers[i].b.shape) return false;
    return true;
}

MlpVars lift(const Mlp& net) {
    MlpVars vars;
    vars.hidden_act = net.hidden_act;
    vars.output_act = net.output_act;
    for (const auto& l : net.layers)
        vars.layers.emplace_back(ad::leaf(l.w), ad::leaf(l.b));
    return vars;
}

ad::Var forward_graph(const MlpVars& net, ad::Var x) {
    ad::Var h = x;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        h = ad::add_rowvec(ad::matmul(h, net.layers[l].first), net.layers[l].second);
        h = apply_activation(h, l + 1 < net.layers.size() ? net.hidden_act : net.output_act);
    }
    return h;
}

std::vector<Tensor> MlpVars::grads() const {
    std::vector<Tensor> g;
    for (const auto& [w, b] : layers) {
        g.push_back(w.has_grad() ? w.grad() : Tensor::zeros_like(w.value()));
        g.push_back(b.has_grad() ? b.grad() : Tensor::zeros_like(b.value()));
    }
    return g;
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: param/grad count mismatch");
    if (m.empty()) {
        for (const auto* p : params) {
            m.push_back(Tensor::zeros_like(*p));
            v.push_back(Tensor::zeros_like(*p));
        }
    }
    for (const auto& g : grads)
        if (!g.all_finite()) throw std::runtime_error("adam: non-finite gradient, aborting run");
    ++t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        check_same_shape(p, grads[i], "adam");
        for (long j = 0; j < p.numel(); ++j) {
            double g = grads[i].data[j];
            m[i].data[j] = cfg.beta1 * m[i].data[j] + (1.0 - cfg.beta1) * g;
            v[i].data[j] = cfg.beta2 * v[i].data[j] + (1.0 - cfg.beta2) * g * g;
            double mhat = m[i].data[j] / bc1;
            double vhat = v[i].data[j] / bc2;
            p.data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void polyak_update(Mlp& target, const Mlp& online, double rho) {
    if (!target.same_arch(online)) throw std::invalid_argument("polyak: architecture mismatch");
    auto tp = target.params();
    auto op = online.params();
    for (size_t i = 0; i < tp.size(); ++i)
        for (long j = 0; j < tp[i]->numel(); ++j)
            tp[i]->data[j] = rho * tp[i]->data[j] + (1.0 - rho) * op[i]->data[j];
}

SquashedSample squashed_gaussian_sample(const SquashedGaussianHead& head, std::mt19937_64& rng) {
    if (head.mean.size() != head.log_std.size())
        throw std::invalid_argument("squashed gaussian: mean/log_std length mismatch");
    std::normal_distribution<double> normal(0.0, 1.0);
    size_t d = head.mean.size();
    std::vector<double> pre(d);
    for (size_t i = 0; i < d; ++i) {
        double ls = std::clamp(head.log_std[i], kLogStdMin, kLogStdMax);
        pre[i] = head.mean[i] + std::exp(ls) * normal(rng);
    }
    SquashedSample s;
    s.log_prob = squashed_gaussian_log_prob(head, pre);
    s.action.resize(d);
    for (size_t i = 0; i < d; ++i) s.action[i] = std::tanh(pre[i]);
    return s;
}

double squashed_gaussian_log_prob(const SquashedGaussianHead& head, const std::vector<double>& pre) {
    double lp = 0.0;
    for (size_t i = 0; i < pre.size(); ++i) {
        double ls = std::clamp(head.log_std[i], kLogStdMin, kLogStdMax);
        double z = (pre[i] - head.mean[i]) / std::exp(ls);
        lp += -0.5 * z * z - ls - kHalfLog2Pi;
        // log(1 - tanh^2(x)) = 2*(log 2 - x - softplus(-2x))
        lp -= 2.0 * (std::log(2.0) - pre[i] - stable_softplus(-2.0 * pre[i]));
    }
    return lp;
}

namespace {

constexpr std::uint32_t kTensorTag = 0x50535430;  // "PST0"

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated stream");
    return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    write_pod(os, kTensorTag);
    write_pod(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_pod(os, static_cast<std::int64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
    if (read_pod<std::uint32_t>(is) != kTensorTag) throw std::runtime_error("checkpoint: bad tensor tag");
    auto rank = read_pod<std::uint32_t>(is);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_pod<std::int64_t>(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    return t;
}

void write_mlp(std::ostream& os, const Mlp& net) {
    write_pod(os, static_cast<std::uint32_t>(1));  // format version
    write_pod(os, static_cast<std::uint8_t>(net.hidden_act));
    write_pod(os, static_cast<std::uint8_t>(net.output_act));
    write_pod(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        write_tensor(os, l.w);
        write_tensor(os, l.b);
    }
}

Mlp read_mlp(std::istream& is) {
    if (read_pod<std::uint32_t>(is) != 1) throw std::runtime_error("checkpoint: unsupported mlp version");
    Mlp net;
    net.hidden_act = static_cast<Activation>(read_pod<std::uint8_t>(is));
    net.output_act = static_cast<Activation>(read_pod<std::uint8_t>(is));
    auto n = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        Mlp::Layer l;
        l.w = read_tensor(is);
        l.b = read_tensor(is);
        net.layers.push_back(std::move(l));
    }
    return net;
}

void write_adam(std::ostream& os, const Adam& opt) {
    write_pod(os, static_cast<std::uint32_t>(1));
    write_pod(os, opt.cfg.lr);
    write_pod(os, opt.cfg.beta1);
    write_pod(os, opt.cfg.beta2);
    write_pod(os, opt.cfg.eps);
    write_pod(os, static_cast<std::int64_t>(opt.t));
    write_pod(os, static_cast<std::uint32_t>(opt.m.size()));
    for (const auto& t : opt.m) write_tensor(os, t);
    for (const auto& t : opt.v) write_tensor(os, t);
}

Adam read_adam(std::istream& is) {
    if (read_pod<std::uint32_t>(is) != 1) throw std::runtime_error("checkpoint: unsupported adam version");
    Adam opt;
    opt.cfg.lr = read_pod<double>(is);
    opt.cfg.beta1 = read_pod<double>(is);
    opt.cfg.beta2 = read_pod<double>(is);
    opt.cfg.eps = read_pod<double>(is);
    opt.t = static_cast<long>(read_pod<std::int64_t>(is));
    auto n = read_pod<std::uint32_t>(is);
    opt.m.resize(n);
    opt.v.resize(n);
    for (auto& t : opt.m) t = read_tensor(is);
    for (auto& t : opt.v) t = read_tensor(is);
    return opt;
}

}  // namespace posuite
