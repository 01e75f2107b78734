#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ranknet/errors.hpp"
#include "ranknet/network.hpp"
#include "oracles.hpp"

using namespace ranknet;

namespace {

Network random_net(const std::vector<int>& dims, Activation act, std::uint64_t seed) {
    return init_network(dims, act, seed);
}

// Random net whose hidden pre-activations stay away from the relu kink for
// the given input, so central differences are trustworthy.
bool trace_clear_of_kinks(const Network& net, const ForwardTrace& trace) {
    if (net.hidden_activation != Activation::relu) return true;
    for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l) // output layer is linear
        for (double z : trace.pre[l])
            if (std::fabs(z) < 1e-2) return false;
    return true;
}

} // namespace

TEST_CASE("init_network is deterministic and zero-biased") {
    const Network a = init_network({4096, 512, 1}, Activation::relu, 42);
    const Network b = init_network({4096, 512, 1}, Activation::relu, 42);
    CHECK(a == b);
    const Network c = init_network({4096, 512, 1}, Activation::relu, 43);
    CHECK_FALSE(a == c);

    const Network small = init_network({3, 1}, Activation::relu, 7);
    REQUIRE(small.biases.size() == 1);
    CHECK(small.biases[0] == std::vector<double>{0.0});
}

TEST_CASE("init_network respects the uniform fan bound") {
    const Network net = init_network({2, 2, 1}, Activation::tanh, 7);
    const double bound0 = std::sqrt(6.0 / 4.0);
    const double bound1 = std::sqrt(6.0 / 3.0);
    for (double w : net.weights[0].data) CHECK(std::fabs(w) <= bound0);
    for (double w : net.weights[1].data) CHECK(std::fabs(w) <= bound1);
    // not all zero
    double mag = 0.0;
    for (double w : net.weights[0].data) mag += std::fabs(w);
    CHECK(mag > 0.0);
}

TEST_CASE("init_network rejects bad layer dims") {
    CHECK_THROWS_AS(init_network({5}, Activation::relu, 0), ConfigError);
    CHECK_THROWS_AS(init_network({5, 3}, Activation::relu, 0), ConfigError);   // output != 1
    CHECK_THROWS_AS(init_network({5, 0, 1}, Activation::relu, 0), ConfigError);
    CHECK_THROWS_AS(init_network({-2, 1}, Activation::relu, 0), ConfigError);
}

TEST_CASE("forward: zero network, identity layer, purity") {
    Network zero = init_network({3, 4, 1}, Activation::relu, 1);
    for (auto& w : zero.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    CHECK(forward(zero, std::vector<double>{1.0, -2.0, 3.0}) == 0.0);

    Network ident = init_network({1, 1}, Activation::relu, 1);
    ident.weights[0](0, 0) = 1.0;
    ident.biases[0][0] = 0.0;
    CHECK(forward(ident, std::vector<double>{2.5}) == 2.5);

    const Network net = random_net({6, 5, 1}, Activation::tanh, 99);
    const std::vector<double> x{0.1, -0.7, 2.0, 0.3, -1.1, 0.9};
    CHECK(forward(net, x) == forward(net, x));
}

TEST_CASE("forward matches a naive matrix-arithmetic oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Activation act = trial % 2 ? Activation::relu : Activation::tanh;
        const Network net = random_net({5, 4, 1}, act, 1000 + trial);
        std::vector<double> x(5);
        for (auto& v : x) v = dist(gen);
        CHECK(forward(net, x) == doctest::Approx(oracle::naive_forward(net, x)).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects dimension mismatch") {
    const Network net = random_net({4, 3, 1}, Activation::relu, 5);
    CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), InputError);
    ForwardTrace trace;
    CHECK_THROWS_AS(forward_traced(net, std::vector<double>{1.0, 2.0}, trace), InputError);
}

TEST_CASE("backward: zero upstream and linear layer") {
    const Network net = random_net({4, 3, 1}, Activation::relu, 11);
    ForwardTrace trace;
    forward_traced(net, std::vector<double>{0.5, -0.5, 1.0, 2.0}, trace);
    const GradientBuffer zero = backward(net, trace, 0.0);
    for (const auto& w : zero.weight_grads)
        for (double v : w.data) CHECK(v == 0.0);
    for (const auto& b : zero.bias_grads)
        for (double v : b) CHECK(v == 0.0);

    Network lin = init_network({2, 1}, Activation::relu, 3);
    lin.weights[0](0, 0) = 0.7;
    lin.weights[0](0, 1) = -0.2;
    ForwardTrace lt;
    forward_traced(lin, std::vector<double>{3.0, -4.0}, lt);
    const GradientBuffer g = backward(lin, lt, 1.0);
    CHECK(g.weight_grads[0](0, 0) == 3.0);
    CHECK(g.weight_grads[0](0, 1) == -4.0);
    CHECK(g.bias_grads[0][0] == 1.0);
}

TEST_CASE("backward gradients match central finite differences") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    const double step = 1e-5;
    int done = 0;
    int attempts = 0;
    while (done < 100 && attempts < 1000) {
        ++attempts;
        const Activation act = done % 2 ? Activation::relu : Activation::tanh;
        Network net = random_net({static_cast<int>(2 + done % 7), static_cast<int>(2 + done % 7), 1},
                                 act, 5000 + attempts);
        std::vector<double> x(static_cast<std::size_t>(net.input_dim()));
        for (auto& v : x) v = dist(gen);

        ForwardTrace trace;
        forward_traced(net, x, trace);
        if (!trace_clear_of_kinks(net, trace)) continue;

        const GradientBuffer analytic = backward(net, trace, 1.0);
        const std::vector<double> flat = oracle::flatten(analytic);
        const auto params = oracle::parameter_pointers(net);
        REQUIRE(params.size() == flat.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double fd = oracle::central_difference([&] { return forward(net, x); },
                                                         *params[k], step);
            CHECK(oracle::relative_error(flat[k], fd, 1e-4) < 1e-4);
        }
        ++done;
    }
    REQUIRE(done == 100);
}

TEST_CASE("backward rejects a mismatched trace") {
    const Network a = random_net({4, 3, 1}, Activation::relu, 1);
    const Network b = random_net({5, 3, 1}, Activation::relu, 1);
    ForwardTrace trace;
    forward_traced(a, std::vector<double>{1, 2, 3, 4}, trace);
    CHECK_THROWS_AS(backward(b, trace, 1.0), InternalError);
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
    Network net = random_net({3, 2, 1}, Activation::relu, 21);
    const Network before = net;
    AdamState state = make_adam_state(net);
    GradientBuffer g = make_gradient_buffer(net);
    adam_step(net, g, state);
    CHECK(net == before);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam first step on a scalar parameter") {
    Network net = init_network({1, 1}, Activation::relu, 0);
    net.weights[0](0, 0) = 0.0;
    AdamState state = make_adam_state(net, 0.001);
    GradientBuffer g = make_gradient_buffer(net);
    g.weight_grads[0](0, 0) = 1.0;
    adam_step(net, g, state);
    // bias-corrected first step moves by ~lr regardless of gradient scale
    CHECK(net.weights[0](0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
    CHECK(net.biases[0][0] == 0.0);
}

TEST_CASE("adam is path dependent (two steps != one doubled-lr step)") {
    Network a = init_network({2, 1}, Activation::relu, 9);
    Network b = a;
    GradientBuffer g = make_gradient_buffer(a);
    g.weight_grads[0](0, 0) = 0.3;
    g.weight_grads[0](0, 1) = -0.8;
    g.bias_grads[0][0] = 0.1;

    AdamState sa = make_adam_state(a, 0.001);
    adam_step(a, g, sa);
    adam_step(a, g, sa);

    AdamState sb = make_adam_state(b, 0.002);
    adam_step(b, g, sb);

    CHECK_FALSE(a == b);
    CHECK(sa.step_count == 2);
}

TEST_CASE("adam rejects non-finite gradients naming the layer") {
    Network net = random_net({2, 2, 1}, Activation::relu, 4);
    AdamState state = make_adam_state(net);
    GradientBuffer g = make_gradient_buffer(net);
    g.weight_grads[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(net, g, state);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
}

TEST_CASE("model persistence round-trips bit-exactly") {
    const Network net = random_net({7, 5, 1}, Activation::tanh, 1234);

    std::ostringstream first;
    write_network(net, first);
    std::istringstream in(first.str());
    const Network back = read_network(in, "<memory>");
    CHECK(back == net);

    std::ostringstream second;
    write_network(back, second);
    CHECK(second.str() == first.str());
}

TEST_CASE("model loader rejects junk") {
    std::istringstream bad("not-a-model 1\n");
    CHECK_THROWS_AS(read_network(bad, "<memory>"), ParseError);
    std::istringstream badver("ranknet-model 99\nactivation relu\ndims 2 2 1\nend\n");
    CHECK_THROWS_AS(read_network(badver, "<memory>"), ParseError);
    std::istringstream truncated("ranknet-model 1\nactivation relu\ndims 3 2 2 1\nweights 0\n0x1p+0\n");
    CHECK_THROWS_AS(read_network(truncated, "<memory>"), ParseError);
}
