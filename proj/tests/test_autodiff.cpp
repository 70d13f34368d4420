#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "posuite/graph.hpp"
#include "posuite/nn.hpp"
#include "support/gradcheck.hpp"

using namespace posuite;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : t.data) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("sum of leaves has unit gradients") {
    std::mt19937_64 rng(1);
    auto a = ad::leaf(random_tensor({3, 4}, rng));
    auto b = ad::leaf(random_tensor({3, 4}, rng));
    ad::backward(ad::sum(ad::add(a, b)));
    for (double g : a.grad().data) CHECK(g == 1.0);
    for (double g : b.grad().data) CHECK(g == 1.0);
}

TEST_CASE("leaves detached from the loss get zero gradient") {
    std::mt19937_64 rng(2);
    auto used = ad::leaf(random_tensor({2, 2}, rng));
    auto unused = ad::leaf(random_tensor({2, 2}, rng));
    ad::backward(ad::sum(ad::square(used)));
    CHECK(unused.has_grad() == false);
    // grads() convention: unreachable leaves read as zeros
    Mlp net;
    std::mt19937_64 r2(3);
    net = Mlp::make({2, 3, 1}, Activation::Relu, Activation::Identity, r2);
    auto vars = lift(net);
    // only touch the first layer
    ad::backward(ad::sum(vars.layers[0].first));
    auto grads = vars.grads();
    for (double g : grads[0].data) CHECK(g == 1.0);
    for (double g : grads[2].data) CHECK(g == 0.0);
    for (double g : grads[3].data) CHECK(g == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
    std::mt19937_64 rng(3);
    auto a = ad::leaf(random_tensor({2, 2}, rng));
    CHECK_THROWS_AS(ad::backward(ad::square(a)), std::invalid_argument);
}

TEST_CASE("mse gradients of a 2-layer mlp match central finite differences") {
    std::mt19937_64 rng(4);
    for (int inst = 0; inst < 5; ++inst) {
        Mlp net = Mlp::make({4, 8, 3}, Activation::Relu, Activation::Identity, rng);
        Tensor x = random_tensor({6, 4}, rng);
        Tensor y = random_tensor({6, 3}, rng);
        auto loss_of = [&]() {
            auto vars = lift(net);
            return ad::mean(ad::square(ad::sub(forward_graph(vars, ad::constant(x)), ad::constant(y))))
                .value()
                .data[0];
        };
        auto vars = lift(net);
        auto loss = ad::mean(ad::square(ad::sub(forward_graph(vars, ad::constant(x)), ad::constant(y))));
        ad::backward(loss);
        auto grads = vars.grads();
        auto res = testsupport::check_grads(net.params(), grads, loss_of, rng, 8);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("gradient checks for the agent network shapes") {
    std::mt19937_64 rng(5);
    struct Case {
        std::vector<int> sizes;
        Activation act;
    };
    for (const auto& c : {Case{{4, 256, 256, 1}, Activation::Relu}, Case{{3, 64, 64, 2}, Activation::Tanh}}) {
        for (int inst = 0; inst < 3; ++inst) {
            Mlp net = Mlp::make(c.sizes, c.act, Activation::Identity, rng);
            Tensor x = random_tensor({5, c.sizes.front()}, rng);
            auto loss_of = [&]() {
                auto vars = lift(net);
                return ad::mean(ad::square(forward_graph(vars, ad::constant(x)))).value().data[0];
            };
            auto vars = lift(net);
            auto loss = ad::mean(ad::square(forward_graph(vars, ad::constant(x))));
            ad::backward(loss);
            auto res = testsupport::check_grads(net.params(), vars.grads(), loss_of, rng, 4);
            CHECK(res.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("elementwise and reduction ops differentiate correctly") {
    std::mt19937_64 rng(6);
    Tensor a0 = random_tensor({3, 5}, rng);
    Tensor b0 = random_tensor({3, 5}, rng);
    Tensor v0 = random_tensor({5}, rng);

    auto build = [&](Tensor& at, Tensor& bt, Tensor& vt) {
        auto a = ad::leaf(at);
        auto b = ad::leaf(bt);
        auto v = ad::leaf(vt);
        auto z = ad::mul_rowvec(ad::minimum(ad::tanh_(a), ad::softplus(b)), ad::exp_(v));
        auto w = ad::add(ad::clamp(z, -0.4, 0.6), ad::square(ad::slice_cols(ad::concat_cols(a, b), 2, 5)));
        auto out = ad::add(ad::mean(ad::row_sum(w)), ad::sum(ad::bcast_scalar(ad::mean(v), 3)));
        return std::tuple{a, b, v, out};
    };
    auto [a, b, v, loss] = build(a0, b0, v0);
    ad::backward(loss);
    std::vector<Tensor> grads{a.grad(), b.grad(), v.grad()};
    auto loss_of = [&]() { return std::get<3>(build(a0, b0, v0)).value().data[0]; };
    auto res = testsupport::check_grads({&a0, &b0, &v0}, grads, loss_of, rng, 10);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("matmul forward matches a hand-rolled oracle") {
    std::mt19937_64 rng(7);
    Tensor a = random_tensor({7, 4}, rng);
    Tensor b = random_tensor({4, 6}, rng);
    auto c = ad::matmul(ad::constant(a), ad::constant(b));
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 6; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
            CHECK(std::abs(c.value().at(i, j) - acc) < 1e-12);
        }
}

TEST_CASE("shape mismatches raise dimension errors") {
    std::mt19937_64 rng(8);
    auto a = ad::constant(random_tensor({2, 3}, rng));
    auto b = ad::constant(random_tensor({2, 4}, rng));
    CHECK_THROWS_AS(ad::add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ad::matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ad::slice_cols(a, 2, 5), std::invalid_argument);
}
