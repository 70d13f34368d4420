#pragma once

#include <iosfwd>
#include <random>

#include "posuite/graph.hpp"
#include "posuite/tensor.hpp"

namespace posuite {

enum class Activation { Identity, Relu, Tanh };

// Fully connected net. Weights stored [in,out] so forward is x*W + b.
struct Mlp {
    struct Layer {
        Tensor w;
        Tensor b;
    };
    std::vector<Layer> layers;
    Activation hidden_act = Activation::Relu;
    Activation output_act = Activation::Identity;

    // sizes = {in, h1, ..., out}; uniform fan-in init, last layer scaled
    // by final_scale.
    static Mlp make(const std::vector<int>& sizes, Activation hidden, Activation output,
                    std::mt19937_64& rng, double final_scale = 1.0);

    int input_dim() const { return layers.front().w.shape[0]; }
    int output_dim() const { return layers.back().w.shape[1]; }
    long param_count() const;

    Tensor forward(const Tensor& x) const;                       // [B,in] -> [B,out], no grad
    std::vector<double> forward_vec(const std::vector<double>& x) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    bool same_arch(const Mlp& o) const;
};

// Differentiable view of an Mlp: leaves in param order (w0,b0,w1,b1,...).
struct MlpVars {
    std::vector<std::pair<ad::Var, ad::Var>> layers;
    Activation hidden_act;
    Activation output_act;

    std::vector<Tensor> grads() const;  // zero for leaves unreachable from the loss
};

MlpVars lift(const Mlp& net);
ad::Var forward_graph(const MlpVars& net, ad::Var x);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over an ordered parameter list; moment buffers sized on first step.
struct Adam {
    AdamConfig cfg;
    long t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    explicit Adam(AdamConfig c = {}) : cfg(c) {}
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
};

// target <- rho*target + (1-rho)*online
void polyak_update(Mlp& target, const Mlp& online, double rho);

// tanh-squashed diagonal Gaussian; log_std clamped to [-20,2] on use.
struct SquashedGaussianHead {
    std::vector<double> mean;
    std::vector<double> log_std;
};

struct SquashedSample {
    std::vector<double> action;
    double log_prob;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

SquashedSample squashed_gaussian_sample(const SquashedGaussianHead& head, std::mt19937_64& rng);
// log pi(a) for the sample produced from pre-squash values `pre`
double squashed_gaussian_log_prob(const SquashedGaussianHead& head, const std::vector<double>& pre);

// Checkpoint IO (versioned binary, bit-exact round trip)
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);
void write_adam(std::ostream& os, const Adam& opt);
Adam read_adam(std::istream& is);

}  // namespace posuite
