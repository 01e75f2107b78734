#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ranknet {

enum class Activation { relu, tanh };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// Dense row-major matrix; just enough linear algebra for a scorer net.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

// Feedforward scorer h: R^d -> R. weights[l] has shape
// (layer_dims[l+1] x layer_dims[l]); the output layer is linear and scalar.
struct Network {
    std::vector<int> layer_dims;
    Activation hidden_activation = Activation::relu;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    int input_dim() const { return layer_dims.front(); }
    std::size_t num_layers() const { return weights.size(); }
    std::size_t parameter_count() const;

    bool operator==(const Network&) const = default;
};

// Per-layer pre/post activations captured by a traced forward pass;
// everything backward() needs to run the chain rule.
struct ForwardTrace {
    std::vector<int> dims; // congruence stamp
    std::vector<double> input;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

struct GradientBuffer {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;

    void zero();
    void scale(double s);
    void add(const GradientBuffer& other);
    bool finite() const;
};

GradientBuffer make_gradient_buffer(const Network& net);

struct AdamState {
    long step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    GradientBuffer first_moment;
    GradientBuffer second_moment;
};

AdamState make_adam_state(const Network& net, double learning_rate = 1e-3,
                          double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

// Zero biases, weights uniform on +-sqrt(6/(fan_in+fan_out)); fully
// determined by seed.
Network init_network(const std::vector<int>& layer_dims, Activation hidden_activation,
                     std::uint64_t seed);

double forward(const Network& net, std::span<const double> x);
double forward_traced(const Network& net, std::span<const double> x, ForwardTrace& trace);

// d(score)/d(params) scaled by upstream_grad, for the pass recorded in trace.
GradientBuffer backward(const Network& net, const ForwardTrace& trace, double upstream_grad);
void accumulate_backward(const Network& net, const ForwardTrace& trace, double upstream_grad,
                         GradientBuffer& out);

// Bias-corrected adaptive-moment update; mutates net and state in place.
void adam_step(Network& net, const GradientBuffer& grads, AdamState& state);

// Text model format, one file, version-tagged. Doubles are written as C99
// hex floats so save/load round-trips are bit-exact.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);
void write_network(const Network& net, std::ostream& out);
Network read_network(std::istream& in, const std::string& origin);

} // namespace ranknet
