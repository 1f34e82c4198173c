#include "ecgattr/engine.hpp"

#include <algorithm>
#include <cmath>

#include "ecgattr/kernels.hpp"

namespace ecgattr {

namespace {

using kern::Conv1dShape;

struct Shape3 {
    int n, c, l;
    size_t numel() const { return size_t(n) * c * l; }
};

Shape3 as3(const Tensor& t) {
    if (t.shape.size() == 3) return {t.shape[0], t.shape[1], t.shape[2]};
    if (t.shape.size() == 2) return {1, t.shape[0], t.shape[1]};
    throw ConfigError("expected rank-2 or rank-3 tensor, got " + t.shape_str());
}

Conv1dShape conv_shape(const LayerSpec& s, const Shape3& in) {
    Conv1dShape cs;
    cs.n = in.n;
    cs.ci = s.in_channels;
    cs.li = in.l;
    cs.co = s.out_channels;
    cs.lo = (in.l + 2 * s.pad - s.kernel) / s.stride + 1;
    cs.k = s.kernel;
    cs.stride = s.stride;
    cs.pad = s.pad;
    return cs;
}

// Shortcut adjustment for downsampling residual blocks: temporal subsample by
// skip_stride, then append skip_pad_channels zero channels.
Tensor adjust_skip(const Tensor& src, const LayerSpec& s) {
    const Shape3 in = as3(src);
    const int lo = (in.l + s.skip_stride - 1) / s.skip_stride;
    const int co = in.c + s.skip_pad_channels;
    Tensor out({in.n, co, lo});
    for (int n = 0; n < in.n; ++n)
        for (int c = 0; c < in.c; ++c) {
            const float* srow = src.data.data() + (size_t(n) * in.c + c) * in.l;
            float* drow = out.data.data() + (size_t(n) * co + c) * lo;
            for (int t = 0; t < lo; ++t) drow[t] = srow[t * s.skip_stride];
        }
    return out;
}

void adjust_skip_adjoint(const Tensor& g_adj, const LayerSpec& s, const Shape3& src_shape,
                         Tensor& g_src) {
    const Shape3 go = as3(g_adj);
    for (int n = 0; n < go.n; ++n)
        for (int c = 0; c < src_shape.c; ++c) {
            const float* grow = g_adj.data.data() + (size_t(n) * go.c + c) * go.l;
            float* drow = g_src.data.data() + (size_t(n) * src_shape.c + c) * src_shape.l;
            for (int t = 0; t < go.l; ++t) drow[t * s.skip_stride] += grow[t];
        }
}

constexpr float kBnEps = 1e-5f;
constexpr float kBnMomentum = 0.1f;

}  // namespace

Tensor forward(Network& net, const Tensor& x, Tape* tape, bool training) {
    validate_network(net);
    const auto& K = kern::active();

    const bool batched_input = x.shape.size() == 3;
    Tensor input = x;
    if (!batched_input) {
        const Shape3 s = as3(x);
        input.shape = {s.n, s.c, s.l};
    }
    {
        const Shape3 s = as3(input);
        if (s.c != net.input_channels || (net.input_length > 0 && s.l != net.input_length))
            throw ConfigError("layer 0 (input): expected [" + std::to_string(net.input_channels) +
                              "," + std::to_string(net.input_length) + "], got [" +
                              std::to_string(s.c) + "," + std::to_string(s.l) + "]");
    }

    const int n_layers = int(net.layers.size());
    // last consumer per value index, for eager freeing on unrecorded passes
    std::vector<int> last_use(n_layers + 1, -1);
    for (int i = 0; i < n_layers; ++i) {
        last_use[i] = i;
        if (net.layers[i].kind == LayerKind::AddResidual)
            last_use[net.layers[i].skip_from] = std::max(last_use[net.layers[i].skip_from], i);
    }

    std::vector<Tensor> values(size_t(n_layers) + 1);
    values[0] = std::move(input);
    if (tape) {
        tape->recorded = true;
        tape->training = training;
        tape->bn_mean.assign(size_t(n_layers), {});
        tape->bn_inv_std.assign(size_t(n_layers), {});
    }

    int logits_value = 0;
    for (int i = 0; i < n_layers; ++i) {
        const LayerSpec& s = net.layers[i];
        if (s.kind == LayerKind::Softmax) break;  // logits stop before the head softmax
        const Tensor& in = values[i];
        Tensor out;
        switch (s.kind) {
            case LayerKind::Conv1d: {
                const Shape3 is = as3(in);
                const Conv1dShape cs = conv_shape(s, is);
                out = Tensor({cs.n, cs.co, cs.lo});
                K.conv1d_fwd(in.data.data(), net.params[i].w.data.data(),
                             net.params[i].b.data.data(), out.data.data(), cs);
                break;
            }
            case LayerKind::BatchNorm1d: {
                const Shape3 is = as3(in);
                LayerParams& p = net.params[i];
                out = Tensor(in.shape);
                std::vector<float> mean(size_t(is.c)), inv_std(size_t(is.c));
                const size_t m = size_t(is.n) * is.l;
                for (int c = 0; c < is.c; ++c) {
                    double mu, var;
                    if (training) {
                        double sum = 0.0, sq = 0.0;
                        for (int n = 0; n < is.n; ++n) {
                            const float* row = in.data.data() + (size_t(n) * is.c + c) * is.l;
                            sum += K.sum_f64(row, size_t(is.l));
                            sq += K.dot_f64(row, row, size_t(is.l));
                        }
                        mu = sum / double(m);
                        var = std::max(0.0, sq / double(m) - mu * mu);
                        p.run_mean.data[c] =
                            (1.0f - kBnMomentum) * p.run_mean.data[c] + kBnMomentum * float(mu);
                        p.run_var.data[c] =
                            (1.0f - kBnMomentum) * p.run_var.data[c] + kBnMomentum * float(var);
                    } else {
                        mu = p.run_mean.data[c];
                        var = p.run_var.data[c];
                    }
                    mean[c] = float(mu);
                    inv_std[c] = float(1.0 / std::sqrt(var + kBnEps));
                    const float g = p.gamma.data[c] * inv_std[c];
                    const float h = p.beta.data[c] - float(mu) * g;
                    for (int n = 0; n < is.n; ++n) {
                        const float* row = in.data.data() + (size_t(n) * is.c + c) * is.l;
                        float* orow = out.data.data() + (size_t(n) * is.c + c) * is.l;
                        for (int t = 0; t < is.l; ++t) orow[t] = g * row[t] + h;
                    }
                }
                if (tape) {
                    tape->bn_mean[i] = std::move(mean);
                    tape->bn_inv_std[i] = std::move(inv_std);
                }
                break;
            }
            case LayerKind::Relu:
                out = Tensor(in.shape);
                K.relu_fwd(in.data.data(), out.data.data(), in.numel());
                break;
            case LayerKind::AddResidual: {
                const Tensor& skip_src = values[s.skip_from];
                if (skip_src.data.empty())
                    throw ConfigError("layer " + std::to_string(i) +
                                      " (add_residual): skip source value was freed");
                Tensor adj = adjust_skip(skip_src, s);
                if (!adj.same_shape(in))
                    throw ConfigError("layer " + std::to_string(i) +
                                      " (add_residual): adjusted skip " + adj.shape_str() +
                                      " vs main " + in.shape_str());
                out = Tensor(in.shape);
                K.add(in.data.data(), adj.data.data(), out.data.data(), in.numel());
                break;
            }
            case LayerKind::GlobalAvgPool: {
                const Shape3 is = as3(in);
                out = Tensor({is.n, is.c});
                K.gap_fwd(in.data.data(), out.data.data(), is.n, is.c, is.l);
                break;
            }
            case LayerKind::Dense: {
                const int n = in.shape[0];
                out = Tensor({n, s.out_features});
                K.dense_fwd(in.data.data(), net.params[i].w.data.data(),
                            net.params[i].b.data.data(), out.data.data(), n, s.in_features,
                            s.out_features);
                break;
            }
            case LayerKind::Softmax:
                break;
        }
        values[i + 1] = std::move(out);
        logits_value = i + 1;
        if (!tape) {
            for (int v = 0; v <= i; ++v)
                if (last_use[v] == i && v != logits_value) values[v] = Tensor();
        }
    }

    Tensor logits = values[logits_value];
    if (tape) {
        tape->values = std::move(values);
        tape->logits_value = logits_value;
    }
    if (!batched_input) {
        // drop the synthetic batch dim
        std::vector<int> sh(logits.shape.begin() + 1, logits.shape.end());
        if (sh.empty()) sh = {1};
        logits.shape = sh;
    }
    return logits;
}

Tensor forward(const Network& net, const Tensor& x, Tape* tape) {
    return forward(const_cast<Network&>(net), x, tape, false);
}

Tensor forward_with_reference(const Network& net, const Tensor& x, const Tensor& reference,
                              Tape& tape) {
    Tape ref_tape;
    forward(net, reference, &ref_tape);
    Tensor logits = forward(net, x, &tape);
    tape.ref_values = std::move(ref_tape.values);
    return logits;
}

namespace {

// z + eps * sign(z), sign(0) = +1
inline float stabilize(float z, float eps) { return z + (z >= 0.0f ? eps : -eps); }

}  // namespace

BackwardResult backward(const Network& net, const Tape& tape, const Tensor& d_logits,
                        BackwardRule rule, bool want_param_grads, double lrp_epsilon,
                        int capture_value, Tensor* captured) {
    if (!tape.recorded || tape.values.empty())
        throw UsageError("backward: no recorded tape; run forward with recording first");
    if (rule == BackwardRule::DeepliftRescale && tape.ref_values.empty())
        throw UsageError("backward: deeplift rule requires a tape with reference activations");
    const auto& K = kern::active();
    const float eps = float(lrp_epsilon);
    const bool lrp = rule == BackwardRule::LrpEpsilon;

    const Tensor& logits = tape.values[tape.logits_value];
    if (d_logits.numel() != logits.numel())
        throw UsageError("backward: d_logits has " + std::to_string(d_logits.numel()) +
                         " values, logits have " + std::to_string(logits.numel()));

    BackwardResult res;
    if (want_param_grads && !lrp && rule != BackwardRule::DeepliftRescale)
        res.d_params.resize(net.layers.size());

    std::vector<Tensor> grads(tape.values.size());
    grads[tape.logits_value] = Tensor(logits.shape, d_logits.data);

    auto grad_of = [&](int v) -> Tensor& {
        if (grads[v].data.empty()) grads[v] = Tensor(tape.values[v].shape);
        return grads[v];
    };

    if (capture_value == tape.logits_value && captured) *captured = grads[tape.logits_value];

    for (int i = tape.logits_value - 1; i >= 0; --i) {
        const LayerSpec& s = net.layers[i];
        const LayerParams& p = net.params[i];
        const Tensor& in = tape.values[i];
        const Tensor& out = tape.values[i + 1];
        Tensor& g_out = grads[i + 1];
        if (g_out.data.empty()) g_out = Tensor(out.shape);
        // all consumers of value i+1 have run by now, so its gradient is final
        if (capture_value == i + 1 && captured) *captured = g_out;
        Tensor& g_in = grad_of(i);

        switch (s.kind) {
            case LayerKind::Conv1d: {
                const Conv1dShape cs = conv_shape(s, as3(in));
                if (lrp) {
                    // epsilon rule: R_i = a_i * sum_j w_ij R_j / stab(z_j)
                    Tensor sj(out.shape);
                    for (size_t k = 0; k < out.numel(); ++k)
                        sj.data[k] = g_out.data[k] / stabilize(out.data[k], eps);
                    Tensor d(in.shape);
                    K.conv1d_bwd_data(sj.data.data(), p.w.data.data(), d.data.data(), cs);
                    for (size_t k = 0; k < in.numel(); ++k) g_in.data[k] += in.data[k] * d.data[k];
                } else {
                    K.conv1d_bwd_data(g_out.data.data(), p.w.data.data(), g_in.data.data(), cs);
                    if (!res.d_params.empty()) {
                        ParamGrads& pg = res.d_params[i];
                        if (pg.w.data.empty()) {
                            pg.w = Tensor(p.w.shape);
                            pg.b = Tensor(p.b.shape);
                        }
                        K.conv1d_bwd_filter(in.data.data(), g_out.data.data(), pg.w.data.data(),
                                            pg.b.data.data(), cs);
                    }
                }
                break;
            }
            case LayerKind::BatchNorm1d: {
                const Shape3 is = as3(in);
                if (tape.training) {
                    if (rule != BackwardRule::Standard)
                        throw UsageError("backward: batch-stat batchnorm supports only the "
                                         "standard rule");
                    const double m = double(is.n) * is.l;
                    ParamGrads* pg = nullptr;
                    if (!res.d_params.empty()) {
                        pg = &res.d_params[i];
                        if (pg->gamma.data.empty()) {
                            pg->gamma = Tensor(p.gamma.shape);
                            pg->beta = Tensor(p.beta.shape);
                        }
                    }
                    for (int c = 0; c < is.c; ++c) {
                        const float mu = tape.bn_mean[i][c];
                        const float inv = tape.bn_inv_std[i][c];
                        const float gamma = p.gamma.data[c];
                        double sum_dy = 0.0, sum_dy_xc = 0.0;
                        for (int n = 0; n < is.n; ++n) {
                            const size_t off = (size_t(n) * is.c + c) * is.l;
                            for (int t = 0; t < is.l; ++t) {
                                const double dy = g_out.data[off + t];
                                sum_dy += dy;
                                sum_dy_xc += dy * double(in.data[off + t] - mu);
                            }
                        }
                        if (pg) {
                            pg->gamma.data[c] += float(sum_dy_xc * inv);
                            pg->beta.data[c] += float(sum_dy);
                        }
                        const double t1 = sum_dy / m;
                        const double t2 = sum_dy_xc / m * double(inv) * double(inv);
                        for (int n = 0; n < is.n; ++n) {
                            const size_t off = (size_t(n) * is.c + c) * is.l;
                            for (int t = 0; t < is.l; ++t) {
                                const double dy = g_out.data[off + t];
                                const double xc = double(in.data[off + t] - mu);
                                g_in.data[off + t] +=
                                    float(double(gamma) * double(inv) * (dy - t1 - xc * t2));
                            }
                        }
                    }
                } else {
                    // frozen stats: per-channel affine y = g*x + h
                    for (int c = 0; c < is.c; ++c) {
                        const float inv = 1.0f / std::sqrt(p.run_var.data[c] + kBnEps);
                        const float g = p.gamma.data[c] * inv;
                        for (int n = 0; n < is.n; ++n) {
                            const size_t off = (size_t(n) * is.c + c) * is.l;
                            if (lrp) {
                                for (int t = 0; t < is.l; ++t)
                                    g_in.data[off + t] += in.data[off + t] * g *
                                                          g_out.data[off + t] /
                                                          stabilize(out.data[off + t], eps);
                            } else {
                                for (int t = 0; t < is.l; ++t)
                                    g_in.data[off + t] += g * g_out.data[off + t];
                            }
                        }
                    }
                    if (!res.d_params.empty()) {
                        ParamGrads& pg = res.d_params[i];
                        if (pg.gamma.data.empty()) {
                            pg.gamma = Tensor(p.gamma.shape);
                            pg.beta = Tensor(p.beta.shape);
                        }
                        for (int c = 0; c < is.c; ++c) {
                            const float inv = 1.0f / std::sqrt(p.run_var.data[c] + kBnEps);
                            const float mu = p.run_mean.data[c];
                            double dg = 0.0, db = 0.0;
                            for (int n = 0; n < is.n; ++n) {
                                const size_t off = (size_t(n) * is.c + c) * is.l;
                                for (int t = 0; t < is.l; ++t) {
                                    db += g_out.data[off + t];
                                    dg += g_out.data[off + t] *
                                          double((in.data[off + t] - mu) * inv);
                                }
                            }
                            pg.gamma.data[c] += float(dg);
                            pg.beta.data[c] += float(db);
                        }
                    }
                }
                break;
            }
            case LayerKind::Relu: {
                Tensor dx(in.shape);
                switch (rule) {
                    case BackwardRule::Standard:
                        K.relu_bwd(in.data.data(), g_out.data.data(), dx.data.data(), in.numel());
                        break;
                    case BackwardRule::GuidedRelu:
                        K.guided_relu_bwd(in.data.data(), g_out.data.data(), dx.data.data(),
                                          in.numel());
                        break;
                    case BackwardRule::DeepliftRescale: {
                        const Tensor& ref_in = tape.ref_values[i];
                        const Tensor& ref_out = tape.ref_values[i + 1];
                        for (size_t k = 0; k < in.numel(); ++k) {
                            const float din = in.data[k] - ref_in.data[k];
                            float mult;
                            if (std::fabs(din) > 1e-7f)
                                mult = (out.data[k] - ref_out.data[k]) / din;
                            else
                                mult = in.data[k] > 0.0f ? 1.0f : 0.0f;
                            dx.data[k] = g_out.data[k] * mult;
                        }
                        break;
                    }
                    case BackwardRule::LrpEpsilon:
                        dx.data = g_out.data;  // relevance passes through
                        break;
                }
                K.add(g_in.data.data(), dx.data.data(), g_in.data.data(), in.numel());
                break;
            }
            case LayerKind::AddResidual: {
                const Tensor& skip_src = tape.values[s.skip_from];
                Tensor& g_skip = grad_of(s.skip_from);
                if (lrp) {
                    // split relevance proportionally to each branch's contribution
                    Tensor adj = adjust_skip(skip_src, s);
                    Tensor r_main(in.shape), r_adj(in.shape);
                    for (size_t k = 0; k < in.numel(); ++k) {
                        const float share = g_out.data[k] / stabilize(out.data[k], eps);
                        r_main.data[k] = share * in.data[k];
                        r_adj.data[k] = share * adj.data[k];
                    }
                    K.add(g_in.data.data(), r_main.data.data(), g_in.data.data(), in.numel());
                    adjust_skip_adjoint(r_adj, s, as3(skip_src), g_skip);
                } else {
                    K.add(g_in.data.data(), g_out.data.data(), g_in.data.data(), in.numel());
                    adjust_skip_adjoint(g_out, s, as3(skip_src), g_skip);
                }
                break;
            }
            case LayerKind::GlobalAvgPool: {
                const Shape3 is = as3(in);
                if (lrp) {
                    // affine with w = 1/L under the epsilon rule
                    for (int n = 0; n < is.n; ++n)
                        for (int c = 0; c < is.c; ++c) {
                            const size_t oc = size_t(n) * is.c + c;
                            const float sj = g_out.data[oc] / stabilize(out.data[oc], eps);
                            const size_t off = oc * is.l;
                            const float invl = 1.0f / float(is.l);
                            for (int t = 0; t < is.l; ++t)
                                g_in.data[off + t] += in.data[off + t] * invl * sj;
                        }
                } else {
                    Tensor dx(in.shape);
                    K.gap_bwd(g_out.data.data(), dx.data.data(), is.n, is.c, is.l);
                    K.add(g_in.data.data(), dx.data.data(), g_in.data.data(), in.numel());
                }
                break;
            }
            case LayerKind::Dense: {
                const int n = in.shape[0];
                if (lrp) {
                    Tensor sj(out.shape);
                    for (size_t k = 0; k < out.numel(); ++k)
                        sj.data[k] = g_out.data[k] / stabilize(out.data[k], eps);
                    Tensor d(in.shape);
                    K.dense_bwd_data(sj.data.data(), p.w.data.data(), d.data.data(), n,
                                     s.in_features, s.out_features);
                    for (size_t k = 0; k < in.numel(); ++k) g_in.data[k] += in.data[k] * d.data[k];
                } else {
                    K.dense_bwd_data(g_out.data.data(), p.w.data.data(), g_in.data.data(), n,
                                     s.in_features, s.out_features);
                    if (!res.d_params.empty()) {
                        ParamGrads& pg = res.d_params[i];
                        if (pg.w.data.empty()) {
                            pg.w = Tensor(p.w.shape);
                            pg.b = Tensor(p.b.shape);
                        }
                        K.dense_bwd_filter(in.data.data(), g_out.data.data(), pg.w.data.data(),
                                           pg.b.data.data(), n, s.in_features, s.out_features);
                    }
                }
                break;
            }
            case LayerKind::Softmax:
                throw ConfigError("backward: softmax inside the graph is unsupported");
        }
        grads[i + 1] = Tensor();  // free as we go
    }

    res.d_x = std::move(grads[0]);
    return res;
}

std::vector<double> forward_f64(const Network& net, const std::vector<double>& x) {
    validate_network(net);
    const size_t want = size_t(net.input_channels) * net.input_length;
    if (x.size() != want)
        throw ConfigError("forward_f64: expected " + std::to_string(want) + " inputs, got " +
                          std::to_string(x.size()));

    std::vector<std::vector<double>> values(net.layers.size() + 1);
    std::vector<std::pair<int, int>> shapes(net.layers.size() + 1);
    values[0] = x;
    shapes[0] = {net.input_channels, net.input_length};

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& s = net.layers[i];
        const LayerParams& p = net.params[i];
        const auto& in = values[i];
        const auto [ci, li] = shapes[i];
        std::vector<double> out;
        std::pair<int, int> os = shapes[i];
        switch (s.kind) {
            case LayerKind::Conv1d: {
                const int lo = (li + 2 * s.pad - s.kernel) / s.stride + 1;
                out.assign(size_t(s.out_channels) * lo, 0.0);
                for (int co = 0; co < s.out_channels; ++co)
                    for (int t = 0; t < lo; ++t) {
                        double acc = p.b.data[co];
                        for (int c = 0; c < ci; ++c)
                            for (int k = 0; k < s.kernel; ++k) {
                                const int src = t * s.stride + k - s.pad;
                                if (src >= 0 && src < li)
                                    acc += double(p.w.data[(size_t(co) * ci + c) * s.kernel + k]) *
                                           in[size_t(c) * li + src];
                            }
                        out[size_t(co) * lo + t] = acc;
                    }
                os = {s.out_channels, lo};
                break;
            }
            case LayerKind::BatchNorm1d: {
                out.resize(in.size());
                for (int c = 0; c < ci; ++c) {
                    const double inv = 1.0 / std::sqrt(double(p.run_var.data[c]) + double(kBnEps));
                    const double g = double(p.gamma.data[c]) * inv;
                    const double h = double(p.beta.data[c]) - double(p.run_mean.data[c]) * g;
                    for (int t = 0; t < li; ++t)
                        out[size_t(c) * li + t] = g * in[size_t(c) * li + t] + h;
                }
                break;
            }
            case LayerKind::Relu:
                out.resize(in.size());
                for (size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
                break;
            case LayerKind::AddResidual: {
                const auto& src = values[s.skip_from];
                const auto [sc, sl] = shapes[s.skip_from];
                out = in;
                for (int c = 0; c < sc; ++c)
                    for (int t = 0; t * s.skip_stride < sl; ++t)
                        out[size_t(c) * li + t] += src[size_t(c) * sl + t * s.skip_stride];
                break;
            }
            case LayerKind::GlobalAvgPool: {
                out.resize(size_t(ci));
                for (int c = 0; c < ci; ++c) {
                    double acc = 0.0;
                    for (int t = 0; t < li; ++t) acc += in[size_t(c) * li + t];
                    out[c] = acc / double(li);
                }
                os = {ci, 1};
                break;
            }
            case LayerKind::Dense: {
                out.resize(size_t(s.out_features));
                for (int o = 0; o < s.out_features; ++o) {
                    double acc = p.b.data[o];
                    for (int f = 0; f < s.in_features; ++f)
                        acc += double(p.w.data[size_t(o) * s.in_features + f]) * in[f];
                    out[o] = acc;
                }
                os = {s.out_features, 1};
                break;
            }
            case LayerKind::Softmax:
                return in;  // logits stop before the head softmax
        }
        values[i + 1] = std::move(out);
        shapes[i + 1] = os;
    }
    return values.back();
}

double grad_check(const Network& net, const Tensor& x, double epsilon) {
    if (epsilon <= 0.0) throw InputError("grad_check: epsilon must be positive");
    Tape tape;
    const Tensor logits = forward(net, x, &tape);
    const size_t n_out = logits.numel();
    const size_t n_in = x.numel();

    std::vector<std::vector<float>> analytic(n_out);
    for (size_t o = 0; o < n_out; ++o) {
        Tensor seed(logits.shape);
        seed.data[o] = 1.0f;
        analytic[o] = backward(net, tape, seed).d_x.data;
    }

    std::vector<double> xd(x.data.begin(), x.data.end());
    double worst = 0.0;
    for (size_t i = 0; i < n_in; ++i) {
        const double orig = xd[i];
        xd[i] = orig + epsilon;
        const std::vector<double> plus = forward_f64(net, xd);
        xd[i] = orig - epsilon;
        const std::vector<double> minus = forward_f64(net, xd);
        xd[i] = orig;
        for (size_t o = 0; o < n_out; ++o) {
            const double numeric = (plus[o] - minus[o]) / (2.0 * epsilon);
            const double a = double(analytic[o][i]);
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

std::vector<float> softmax(const std::vector<float>& logits) {
    if (logits.empty()) throw InputError("softmax: empty input");
    const float mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> e(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(double(logits[i]) - double(mx));
        sum += e[i];
    }
    std::vector<float> p(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) p[i] = float(e[i] / sum);
    return p;
}

}  // namespace ecgattr
