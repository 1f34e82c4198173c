// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against; keep them simple and obviously correct.

#include "ecgattr/kernels.hpp"

#include <algorithm>

namespace ecgattr::kern {
namespace {

void conv1d_fwd_scalar(const float* x, const float* w, const float* b, float* y,
                       const Conv1dShape& s) {
    for (int n = 0; n < s.n; ++n) {
        const float* xn = x + size_t(n) * s.ci * s.li;
        float* yn = y + size_t(n) * s.co * s.lo;
        for (int co = 0; co < s.co; ++co) {
            float* yrow = yn + size_t(co) * s.lo;
            const float bias = b ? b[co] : 0.0f;
            for (int t = 0; t < s.lo; ++t) yrow[t] = bias;
            for (int ci = 0; ci < s.ci; ++ci) {
                const float* xrow = xn + size_t(ci) * s.li;
                const float* wrow = w + (size_t(co) * s.ci + ci) * s.k;
                for (int k = 0; k < s.k; ++k) {
                    const float wk = wrow[k];
                    const int off = k - s.pad;
                    for (int t = 0; t < s.lo; ++t) {
                        const int src = t * s.stride + off;
                        if (src >= 0 && src < s.li) yrow[t] += wk * xrow[src];
                    }
                }
            }
        }
    }
}

void conv1d_bwd_data_scalar(const float* dy, const float* w, float* dx, const Conv1dShape& s) {
    for (int n = 0; n < s.n; ++n) {
        const float* dyn = dy + size_t(n) * s.co * s.lo;
        float* dxn = dx + size_t(n) * s.ci * s.li;
        for (int co = 0; co < s.co; ++co) {
            const float* dyrow = dyn + size_t(co) * s.lo;
            for (int ci = 0; ci < s.ci; ++ci) {
                float* dxrow = dxn + size_t(ci) * s.li;
                const float* wrow = w + (size_t(co) * s.ci + ci) * s.k;
                for (int k = 0; k < s.k; ++k) {
                    const float wk = wrow[k];
                    const int off = k - s.pad;
                    for (int t = 0; t < s.lo; ++t) {
                        const int src = t * s.stride + off;
                        if (src >= 0 && src < s.li) dxrow[src] += wk * dyrow[t];
                    }
                }
            }
        }
    }
}

void conv1d_bwd_filter_scalar(const float* x, const float* dy, float* dw, float* db,
                              const Conv1dShape& s) {
    for (int n = 0; n < s.n; ++n) {
        const float* xn = x + size_t(n) * s.ci * s.li;
        const float* dyn = dy + size_t(n) * s.co * s.lo;
        for (int co = 0; co < s.co; ++co) {
            const float* dyrow = dyn + size_t(co) * s.lo;
            if (db) {
                float acc = 0.0f;
                for (int t = 0; t < s.lo; ++t) acc += dyrow[t];
                db[co] += acc;
            }
            for (int ci = 0; ci < s.ci; ++ci) {
                const float* xrow = xn + size_t(ci) * s.li;
                float* dwrow = dw + (size_t(co) * s.ci + ci) * s.k;
                for (int k = 0; k < s.k; ++k) {
                    const int off = k - s.pad;
                    float acc = 0.0f;
                    for (int t = 0; t < s.lo; ++t) {
                        const int src = t * s.stride + off;
                        if (src >= 0 && src < s.li) acc += dyrow[t] * xrow[src];
                    }
                    dwrow[k] += acc;
                }
            }
        }
    }
}

void dense_fwd_scalar(const float* x, const float* w, const float* b, float* y, int n, int in_f,
                      int out_f) {
    for (int i = 0; i < n; ++i) {
        const float* xi = x + size_t(i) * in_f;
        float* yi = y + size_t(i) * out_f;
        for (int o = 0; o < out_f; ++o) {
            const float* wo = w + size_t(o) * in_f;
            float acc = b ? b[o] : 0.0f;
            for (int f = 0; f < in_f; ++f) acc += wo[f] * xi[f];
            yi[o] = acc;
        }
    }
}

void dense_bwd_data_scalar(const float* dy, const float* w, float* dx, int n, int in_f,
                           int out_f) {
    for (int i = 0; i < n; ++i) {
        const float* dyi = dy + size_t(i) * out_f;
        float* dxi = dx + size_t(i) * in_f;
        for (int o = 0; o < out_f; ++o) {
            const float g = dyi[o];
            const float* wo = w + size_t(o) * in_f;
            for (int f = 0; f < in_f; ++f) dxi[f] += g * wo[f];
        }
    }
}

void dense_bwd_filter_scalar(const float* x, const float* dy, float* dw, float* db, int n,
                             int in_f, int out_f) {
    for (int i = 0; i < n; ++i) {
        const float* xi = x + size_t(i) * in_f;
        const float* dyi = dy + size_t(i) * out_f;
        for (int o = 0; o < out_f; ++o) {
            const float g = dyi[o];
            if (db) db[o] += g;
            float* dwo = dw + size_t(o) * in_f;
            for (int f = 0; f < in_f; ++f) dwo[f] += g * xi[f];
        }
    }
}

void relu_fwd_scalar(const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_scalar(const float* x_in, const float* dy, float* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] = x_in[i] > 0.0f ? dy[i] : 0.0f;
}

void guided_relu_bwd_scalar(const float* x_in, const float* dy, float* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] = (x_in[i] > 0.0f && dy[i] > 0.0f) ? dy[i] : 0.0f;
}

void add_scalar(const float* a, const float* b, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void mul_scalar(const float* a, const float* b, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void axpy_scalar(float alpha, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(float alpha, float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void gap_fwd_scalar(const float* x, float* y, int n, int c, int l) {
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float* row = x + (size_t(i) * c + ch) * l;
            double acc = 0.0;
            for (int t = 0; t < l; ++t) acc += row[t];
            y[size_t(i) * c + ch] = float(acc / double(l));
        }
    }
}

void gap_bwd_scalar(const float* dy, float* dx, int n, int c, int l) {
    const float inv = 1.0f / float(l);
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float g = dy[size_t(i) * c + ch] * inv;
            float* row = dx + (size_t(i) * c + ch) * l;
            for (int t = 0; t < l; ++t) row[t] = g;
        }
    }
}

double sum_f64_scalar(const float* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_f64_scalar(const float* a, const float* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

}  // namespace

const Kernels& scalar_table() {
    static const Kernels table = {
        "scalar",
        conv1d_fwd_scalar,
        conv1d_bwd_data_scalar,
        conv1d_bwd_filter_scalar,
        dense_fwd_scalar,
        dense_bwd_data_scalar,
        dense_bwd_filter_scalar,
        relu_fwd_scalar,
        relu_bwd_scalar,
        guided_relu_bwd_scalar,
        add_scalar,
        mul_scalar,
        axpy_scalar,
        scale_scalar,
        gap_fwd_scalar,
        gap_bwd_scalar,
        sum_f64_scalar,
        dot_f64_scalar,
    };
    return table;
}

}  // namespace ecgattr::kern
