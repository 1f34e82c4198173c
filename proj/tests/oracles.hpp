#pragma once
// Independent test oracles. Everything here recomputes results from first
// principles (double precision, straightforward loops) without touching the
// library's forward/backward code paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "ecgattr/network.hpp"

namespace oracles {

using ecgattr::LayerKind;
using ecgattr::LayerSpec;
using ecgattr::Network;

// Plain double-precision evaluation of the layer graph (inference-mode
// batchnorm), value-by-value with explicit shapes.
struct ValueF64 {
    std::vector<double> data;
    int c = 0;
    int l = 0;
};

inline std::vector<double> eval_f64(const Network& net, const std::vector<double>& x) {
    std::vector<ValueF64> vals(net.layers.size() + 1);
    vals[0] = {x, net.input_channels, net.input_length};
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& s = net.layers[i];
        const auto& p = net.params[i];
        const ValueF64& in = vals[i];
        ValueF64 out;
        if (s.kind == LayerKind::Conv1d) {
            out.c = s.out_channels;
            out.l = (in.l + 2 * s.pad - s.kernel) / s.stride + 1;
            out.data.assign(size_t(out.c) * out.l, 0.0);
            for (int co = 0; co < out.c; ++co)
                for (int t = 0; t < out.l; ++t) {
                    double acc = p.b.data[co];
                    for (int ci = 0; ci < in.c; ++ci)
                        for (int k = 0; k < s.kernel; ++k) {
                            const int src = t * s.stride + k - s.pad;
                            if (src >= 0 && src < in.l)
                                acc += double(p.w.data[(size_t(co) * in.c + ci) * s.kernel + k]) *
                                       in.data[size_t(ci) * in.l + src];
                        }
                    out.data[size_t(co) * out.l + t] = acc;
                }
        } else if (s.kind == LayerKind::BatchNorm1d) {
            out = in;
            for (int c = 0; c < in.c; ++c) {
                const double inv = 1.0 / std::sqrt(double(p.run_var.data[c]) + 1e-5);
                for (int t = 0; t < in.l; ++t) {
                    double& v = out.data[size_t(c) * in.l + t];
                    v = double(p.gamma.data[c]) * (v - double(p.run_mean.data[c])) * inv +
                        double(p.beta.data[c]);
                }
            }
        } else if (s.kind == LayerKind::Relu) {
            out = in;
            for (double& v : out.data) v = std::max(0.0, v);
        } else if (s.kind == LayerKind::AddResidual) {
            out = in;
            const ValueF64& src = vals[size_t(s.skip_from)];
            for (int c = 0; c < src.c; ++c)
                for (int t = 0; t * s.skip_stride < src.l && t < in.l; ++t)
                    out.data[size_t(c) * in.l + t] +=
                        src.data[size_t(c) * src.l + t * s.skip_stride];
        } else if (s.kind == LayerKind::GlobalAvgPool) {
            out.c = in.c;
            out.l = 1;
            out.data.assign(size_t(in.c), 0.0);
            for (int c = 0; c < in.c; ++c) {
                double acc = 0.0;
                for (int t = 0; t < in.l; ++t) acc += in.data[size_t(c) * in.l + t];
                out.data[c] = acc / double(in.l);
            }
        } else if (s.kind == LayerKind::Dense) {
            out.c = s.out_features;
            out.l = 1;
            out.data.assign(size_t(s.out_features), 0.0);
            for (int o = 0; o < s.out_features; ++o) {
                double acc = p.b.data[o];
                for (int f = 0; f < s.in_features; ++f)
                    acc += double(p.w.data[size_t(o) * s.in_features + f]) * in.data[f];
                out.data[o] = acc;
            }
        } else if (s.kind == LayerKind::Softmax) {
            return in.data;  // logits
        }
        vals[i + 1] = std::move(out);
    }
    return vals.back().data;
}

// Central finite differences of eval_f64, rows = outputs, cols = inputs.
inline std::vector<std::vector<double>> fd_jacobian(const Network& net,
                                                    const std::vector<double>& x, double eps) {
    std::vector<double> xd = x;
    const size_t n_out = eval_f64(net, x).size();
    std::vector<std::vector<double>> jac(n_out, std::vector<double>(x.size(), 0.0));
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = xd[i];
        xd[i] = orig + eps;
        const auto plus = eval_f64(net, xd);
        xd[i] = orig - eps;
        const auto minus = eval_f64(net, xd);
        xd[i] = orig;
        for (size_t o = 0; o < n_out; ++o) jac[o][i] = (plus[o] - minus[o]) / (2.0 * eps);
    }
    return jac;
}

// Top-n subset by brute force: among all n-subsets, the one with the largest
// value sum, ties resolved to the lexicographically smallest index set. Only
// usable for small lengths.
inline std::vector<int> brute_top_n(const std::vector<float>& values, int n) {
    const int len = int(values.size());
    std::vector<int> best;
    double best_sum = -1e300;
    std::vector<int> subset;
    // iterate subsets in lexicographic order so ties keep the first seen
    auto idx = std::vector<int>(size_t(n));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
    while (true) {
        double sum = 0.0;
        for (int i : idx) sum += double(values[size_t(i)]);
        if (sum > best_sum + 1e-12) {
            best_sum = sum;
            best = idx;
        }
        // next combination
        int i = n - 1;
        while (i >= 0 && idx[size_t(i)] == len - n + i) --i;
        if (i < 0) break;
        ++idx[size_t(i)];
        for (int j = i + 1; j < n; ++j) idx[size_t(j)] = idx[size_t(j - 1)] + 1;
    }
    return best;
}

inline double brute_iou(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
    return uni.empty() ? 0.0 : double(inter.size()) / double(uni.size());
}

// Exact Shapley values for a set function f over m players, by enumerating
// all coalitions.
template <typename F>
std::vector<double> brute_shapley(int m, F&& f) {
    auto fact = [](int n) {
        double r = 1.0;
        for (int i = 2; i <= n; ++i) r *= i;
        return r;
    };
    std::vector<double> phi(size_t(m), 0.0);
    const int total = 1 << m;
    for (int player = 0; player < m; ++player) {
        for (int mask = 0; mask < total; ++mask) {
            if (mask & (1 << player)) continue;
            int s = 0;
            for (int j = 0; j < m; ++j)
                if (mask & (1 << j)) ++s;
            const double weight = fact(s) * fact(m - s - 1) / fact(m);
            phi[size_t(player)] += weight * (f(mask | (1 << player)) - f(mask));
        }
    }
    return phi;
}

// E[IoU] for a uniformly random top-n set against a fixed n-subset of [0,len):
// |A ∩ B| is hypergeometric.
inline double random_localization_expectation(int len, int n) {
    auto log_choose = [](int a, int b) {
        return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0);
    };
    double e = 0.0;
    for (int k = std::max(0, 2 * n - len); k <= n; ++k) {
        const double logp =
            log_choose(n, k) + log_choose(len - n, n - k) - log_choose(len, n);
        e += std::exp(logp) * (double(k) / double(2 * n - k));
    }
    return e;
}

}  // namespace oracles
