// Independent reference implementations used only to check the library.
// Everything here is deliberately written the straightforward textbook way,
// not by calling into the code under test.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ranknet/network.hpp"

namespace oracle {

// Plain two-loop matrix arithmetic forward pass.
inline double naive_forward(const ranknet::Network& net, std::span<const double> x) {
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        std::vector<double> z(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i) {
            double s = net.biases[l][i];
            for (std::size_t j = 0; j < w.cols; ++j) s += w(i, j) * a[j];
            z[i] = s;
        }
        if (l + 1 < net.weights.size()) {
            for (auto& v : z)
                v = net.hidden_activation == ranknet::Activation::relu ? std::max(v, 0.0)
                                                                       : std::tanh(v);
        }
        a = std::move(z);
    }
    return a[0];
}

// Mutable views over every parameter, weights first then biases, layer order.
inline std::vector<double*> parameter_pointers(ranknet::Network& net) {
    std::vector<double*> ptrs;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (auto& v : net.weights[l].data) ptrs.push_back(&v);
        for (auto& v : net.biases[l]) ptrs.push_back(&v);
    }
    return ptrs;
}

// Flattened copy of a GradientBuffer in the same order as parameter_pointers.
inline std::vector<double> flatten(const ranknet::GradientBuffer& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weight_grads.size(); ++l) {
        out.insert(out.end(), g.weight_grads[l].data.begin(), g.weight_grads[l].data.end());
        out.insert(out.end(), g.bias_grads[l].begin(), g.bias_grads[l].end());
    }
    return out;
}

inline double central_difference(const std::function<double()>& f, double& param, double step) {
    const double saved = param;
    param = saved + step;
    const double hi = f();
    param = saved - step;
    const double lo = f();
    param = saved;
    return (hi - lo) / (2.0 * step);
}

inline double relative_error(double a, double b, double floor) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Textbook two-pass Pearson correlation.
inline double two_pass_pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        ma += a[k];
        mb += b[k];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, da2 = 0.0, db2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        num += (a[k] - ma) * (b[k] - mb);
        da2 += (a[k] - ma) * (a[k] - ma);
        db2 += (b[k] - mb) * (b[k] - mb);
    }
    return num / (std::sqrt(da2) * std::sqrt(db2));
}

// tau-b straight from the definition: concordant minus discordant over the
// geometric mean of tie-corrected pair counts, tie counts taken per value
// group via sum t(t-1)/2.
inline double brute_force_tau_b(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    long long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double prod = (a[i] - a[j]) * (b[i] - b[j]);
            if (prod > 0.0) ++concordant;
            else if (prod < 0.0) ++discordant;
        }
    auto tie_pairs = [n](std::span<const double> v) {
        long long total = 0;
        std::vector<bool> seen(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (seen[i]) continue;
            long long count = 1;
            for (std::size_t j = i + 1; j < n; ++j)
                if (v[j] == v[i]) {
                    seen[j] = true;
                    ++count;
                }
            total += count * (count - 1) / 2;
        }
        return total;
    };
    const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    const long long t1 = tie_pairs(a);
    const long long t2 = tie_pairs(b);
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(n0 - t1) * static_cast<double>(n0 - t2));
}

} // namespace oracle
