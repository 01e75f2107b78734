#include "ranknet/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ranknet/errors.hpp"
#include "ranknet/rng.hpp"

namespace ranknet {

namespace {

double activate(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_deriv(Activation a, double z, double post) {
    if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
    return 1.0 - post * post; // tanh'(z) = 1 - tanh(z)^2
}

void check_layer_dims(const std::vector<int>& dims) {
    if (dims.size() < 2)
        throw ConfigError("layer_dims needs at least input and output entries");
    for (int d : dims)
        if (d <= 0) throw ConfigError("layer_dims entries must be positive");
    if (dims.back() != 1)
        throw ConfigError("output dimension must be 1, got " + std::to_string(dims.back()));
}

} // namespace

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += weights[l].data.size() + biases[l].size();
    return n;
}

void GradientBuffer::zero() {
    for (auto& w : weight_grads) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : bias_grads) std::fill(b.begin(), b.end(), 0.0);
}

void GradientBuffer::scale(double s) {
    for (auto& w : weight_grads)
        for (double& v : w.data) v *= s;
    for (auto& b : bias_grads)
        for (double& v : b) v *= s;
}

void GradientBuffer::add(const GradientBuffer& other) {
    for (std::size_t l = 0; l < weight_grads.size(); ++l) {
        for (std::size_t k = 0; k < weight_grads[l].data.size(); ++k)
            weight_grads[l].data[k] += other.weight_grads[l].data[k];
        for (std::size_t k = 0; k < bias_grads[l].size(); ++k)
            bias_grads[l][k] += other.bias_grads[l][k];
    }
}

bool GradientBuffer::finite() const {
    for (const auto& w : weight_grads)
        for (double v : w.data)
            if (!std::isfinite(v)) return false;
    for (const auto& b : bias_grads)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

GradientBuffer make_gradient_buffer(const Network& net) {
    GradientBuffer g;
    g.weight_grads.reserve(net.weights.size());
    g.bias_grads.reserve(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weight_grads.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.bias_grads.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

AdamState make_adam_state(const Network& net, double learning_rate, double beta1, double beta2,
                          double epsilon) {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw ConfigError("adam betas must lie in (0,1)");
    if (epsilon <= 0.0) throw ConfigError("adam epsilon must be positive");
    AdamState s;
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.first_moment = make_gradient_buffer(net);
    s.second_moment = make_gradient_buffer(net);
    return s;
}

Network init_network(const std::vector<int>& layer_dims, Activation hidden_activation,
                     std::uint64_t seed) {
    check_layer_dims(layer_dims);
    Network net;
    net.layer_dims = layer_dims;
    net.hidden_activation = hidden_activation;
    Rng rng(derive_seed(seed, 0x1417u));
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const auto fan_in = static_cast<std::size_t>(layer_dims[l]);
        const auto fan_out = static_cast<std::size_t>(layer_dims[l + 1]);
        const double half_width = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = rng.uniform(-half_width, half_width);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

namespace {

void check_input(const Network& net, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(net.input_dim()))
        throw InputError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("non-finite feature value in forward input");
}

} // namespace

double forward(const Network& net, std::span<const double> x) {
    check_input(net, x);
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    const std::size_t L = net.num_layers();
    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& w = net.weights[l];
        next.assign(w.rows, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            double z = net.biases[l][i];
            const double* row = w.data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) z += row[j] * cur[j];
            next[i] = (l + 1 < L) ? activate(net.hidden_activation, z) : z;
        }
        cur.swap(next);
    }
    return cur[0];
}

double forward_traced(const Network& net, std::span<const double> x, ForwardTrace& trace) {
    check_input(net, x);
    const std::size_t L = net.num_layers();
    trace.dims = net.layer_dims;
    trace.input.assign(x.begin(), x.end());
    trace.pre.resize(L);
    trace.post.resize(L);
    const std::vector<double>* cur = &trace.input;
    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& w = net.weights[l];
        trace.pre[l].assign(w.rows, 0.0);
        trace.post[l].assign(w.rows, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            double z = net.biases[l][i];
            const double* row = w.data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) z += row[j] * (*cur)[j];
            trace.pre[l][i] = z;
            trace.post[l][i] = (l + 1 < L) ? activate(net.hidden_activation, z) : z;
        }
        cur = &trace.post[l];
    }
    return trace.post[L - 1][0];
}

void accumulate_backward(const Network& net, const ForwardTrace& trace, double upstream_grad,
                         GradientBuffer& out) {
    const std::size_t L = net.num_layers();
    if (trace.dims != net.layer_dims || trace.pre.size() != L)
        throw InternalError("forward trace does not match network shape");
    if (out.weight_grads.size() != L)
        throw InternalError("gradient buffer does not match network shape");

    // delta[i] = d(score)/d(pre-activation of unit i in current layer)
    std::vector<double> delta{upstream_grad};
    std::vector<double> prev_delta;
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& w = net.weights[l];
        const std::vector<double>& below = (l == 0) ? trace.input : trace.post[l - 1];
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double d = delta[i];
            out.bias_grads[l][i] += d;
            double* grow = out.weight_grads[l].data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) grow[j] += d * below[j];
        }
        if (l == 0) break;
        prev_delta.assign(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double d = delta[i];
            const double* row = w.data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) prev_delta[j] += d * row[j];
        }
        for (std::size_t j = 0; j < w.cols; ++j)
            prev_delta[j] *=
                activate_deriv(net.hidden_activation, trace.pre[l - 1][j], trace.post[l - 1][j]);
        delta.swap(prev_delta);
    }
}

GradientBuffer backward(const Network& net, const ForwardTrace& trace, double upstream_grad) {
    GradientBuffer g = make_gradient_buffer(net);
    accumulate_backward(net, trace, upstream_grad, g);
    return g;
}

void adam_step(Network& net, const GradientBuffer& grads, AdamState& state) {
    if (grads.weight_grads.size() != net.weights.size())
        throw InternalError("gradient buffer does not match network shape");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (double v : grads.weight_grads[l].data)
            if (!std::isfinite(v))
                throw NumericError("non-finite weight gradient in layer " + std::to_string(l));
        for (double v : grads.bias_grads[l])
            if (!std::isfinite(v))
                throw NumericError("non-finite bias gradient in layer " + std::to_string(l));
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    auto update = [&](double& param, double g, double& m, double& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        param -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    };

    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l].data;
        const auto& gw = grads.weight_grads[l].data;
        auto& mw = state.first_moment.weight_grads[l].data;
        auto& vw = state.second_moment.weight_grads[l].data;
        for (std::size_t k = 0; k < w.size(); ++k) update(w[k], gw[k], mw[k], vw[k]);

        auto& b = net.biases[l];
        const auto& gb = grads.bias_grads[l];
        auto& mb = state.first_moment.bias_grads[l];
        auto& vb = state.second_moment.bias_grads[l];
        for (std::size_t k = 0; k < b.size(); ++k) update(b[k], gb[k], mb[k], vb[k]);
    }
}

// --- persistence ---------------------------------------------------------

namespace {

constexpr int kModelFormatVersion = 1;

std::string hex_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_double_token(const std::string& tok, const std::string& origin) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw ParseError(origin, 0, "bad numeric token '" + tok + "'");
    return v;
}

} // namespace

void write_network(const Network& net, std::ostream& out) {
    out << "ranknet-model " << kModelFormatVersion << "\n";
    out << "activation " << to_string(net.hidden_activation) << "\n";
    out << "dims " << net.layer_dims.size();
    for (int d : net.layer_dims) out << ' ' << d;
    out << "\n";
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Matrix& w = net.weights[l];
        out << "weights " << l << "\n";
        for (std::size_t i = 0; i < w.rows; ++i) {
            for (std::size_t j = 0; j < w.cols; ++j) {
                if (j) out << ' ';
                out << hex_double(w(i, j));
            }
            out << "\n";
        }
        out << "biases " << l << "\n";
        for (std::size_t k = 0; k < net.biases[l].size(); ++k) {
            if (k) out << ' ';
            out << hex_double(net.biases[l][k]);
        }
        out << "\n";
    }
    out << "end\n";
}

Network read_network(std::istream& in, const std::string& origin) {
    std::string magic;
    int version = -1;
    if (!(in >> magic >> version) || magic != "ranknet-model")
        throw ParseError(origin, 1, "not a ranknet model file");
    if (version != kModelFormatVersion)
        throw ParseError(origin, 1, "unsupported model format version " + std::to_string(version));

    std::string key;
    if (!(in >> key) || key != "activation") throw ParseError(origin, 2, "expected 'activation'");
    std::string act;
    in >> act;

    if (!(in >> key) || key != "dims") throw ParseError(origin, 3, "expected 'dims'");
    std::size_t ndims = 0;
    in >> ndims;
    std::vector<int> dims(ndims);
    for (auto& d : dims)
        if (!(in >> d)) throw ParseError(origin, 3, "truncated dims line");

    Network net;
    net.layer_dims = dims;
    net.hidden_activation = activation_from_string(act);
    check_layer_dims(dims);

    std::string tok;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        std::size_t idx = 0;
        if (!(in >> key >> idx) || key != "weights" || idx != l)
            throw ParseError(origin, 0, "expected 'weights " + std::to_string(l) + "'");
        Matrix w(static_cast<std::size_t>(dims[l + 1]), static_cast<std::size_t>(dims[l]));
        for (double& v : w.data) {
            if (!(in >> tok)) throw ParseError(origin, 0, "truncated weight block");
            v = parse_double_token(tok, origin);
        }
        net.weights.push_back(std::move(w));
        if (!(in >> key >> idx) || key != "biases" || idx != l)
            throw ParseError(origin, 0, "expected 'biases " + std::to_string(l) + "'");
        std::vector<double> b(static_cast<std::size_t>(dims[l + 1]));
        for (double& v : b) {
            if (!(in >> tok)) throw ParseError(origin, 0, "truncated bias block");
            v = parse_double_token(tok, origin);
        }
        net.biases.push_back(std::move(b));
    }
    if (!(in >> key) || key != "end") throw ParseError(origin, 0, "missing 'end' marker");
    return net;
}

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: LF line endings everywhere
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_network(net, out);
    if (!out) throw IoError("failed writing model to '" + path + "'");
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    return read_network(in, path);
}

} // namespace ranknet
