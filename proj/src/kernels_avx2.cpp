// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma on x86-64 only; the
// dispatcher never selects this table unless CPUID reports support.
//
// Conv kernels vectorize over output positions with 4x8 accumulator tiles on
// the stride-1 same-padding fast path and fall back to the scalar reference
// for other geometries. Elementwise kernels are bit-identical to scalar;
// reduction kernels keep f64 accumulators (4-wide) so only the summation
// order differs.

#include "ecgattr/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define ECGATTR_HAVE_AVX2_BUILD 1
#else
#define ECGATTR_HAVE_AVX2_BUILD 0
#endif

#if ECGATTR_HAVE_AVX2_BUILD

#include <immintrin.h>

namespace ecgattr::kern {
namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

inline double hsum4d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    lo = _mm_add_pd(lo, _mm_unpackhi_pd(lo, lo));
    return _mm_cvtsd_f64(lo);
}

bool conv_fast_path(const Conv1dShape& s) {
    return s.stride == 1 && s.k >= 1 && s.pad == (s.k - 1) / 2 && s.lo == s.li;
}

void conv1d_fwd_avx2(const float* x, const float* w, const float* b, float* y,
                     const Conv1dShape& s) {
    if (!conv_fast_path(s)) {
        scalar_table().conv1d_fwd(x, w, b, y, s);
        return;
    }
    const int lo = s.lo;
    const int t_begin = s.pad;                 // first t with the window fully inside
    const int t_end = lo - s.pad;              // one past the last such t
    for (int n = 0; n < s.n; ++n) {
        const float* xn = x + size_t(n) * s.ci * s.li;
        float* yn = y + size_t(n) * s.co * s.lo;
        for (int co = 0; co < s.co; ++co) {
            float* yrow = yn + size_t(co) * lo;
            const float bias = b ? b[co] : 0.0f;
            for (int t = 0; t < lo; ++t) yrow[t] = bias;
            for (int ci = 0; ci < s.ci; ++ci) {
                const float* xrow = xn + size_t(ci) * s.li;
                const float* wrow = w + (size_t(co) * s.ci + ci) * s.k;
                // boundary columns, window clipped against the signal edges
                for (int t = 0; t < t_begin && t < lo; ++t) {
                    float acc = 0.0f;
                    for (int k = 0; k < s.k; ++k) {
                        const int src = t + k - s.pad;
                        if (src >= 0 && src < s.li) acc += wrow[k] * xrow[src];
                    }
                    yrow[t] += acc;
                }
                for (int t = t_end > t_begin ? t_end : t_begin; t < lo; ++t) {
                    float acc = 0.0f;
                    for (int k = 0; k < s.k; ++k) {
                        const int src = t + k - s.pad;
                        if (src >= 0 && src < s.li) acc += wrow[k] * xrow[src];
                    }
                    yrow[t] += acc;
                }
                // interior, 4x8 tiles
                int t = t_begin;
                for (; t + 32 <= t_end; t += 32) {
                    __m256 a0 = _mm256_loadu_ps(yrow + t);
                    __m256 a1 = _mm256_loadu_ps(yrow + t + 8);
                    __m256 a2 = _mm256_loadu_ps(yrow + t + 16);
                    __m256 a3 = _mm256_loadu_ps(yrow + t + 24);
                    const float* base = xrow + t - s.pad;
                    for (int k = 0; k < s.k; ++k) {
                        const __m256 wk = _mm256_set1_ps(wrow[k]);
                        a0 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base + k), a0);
                        a1 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base + k + 8), a1);
                        a2 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base + k + 16), a2);
                        a3 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base + k + 24), a3);
                    }
                    _mm256_storeu_ps(yrow + t, a0);
                    _mm256_storeu_ps(yrow + t + 8, a1);
                    _mm256_storeu_ps(yrow + t + 16, a2);
                    _mm256_storeu_ps(yrow + t + 24, a3);
                }
                for (; t + 8 <= t_end; t += 8) {
                    __m256 a0 = _mm256_loadu_ps(yrow + t);
                    const float* base = xrow + t - s.pad;
                    for (int k = 0; k < s.k; ++k)
                        a0 = _mm256_fmadd_ps(_mm256_set1_ps(wrow[k]), _mm256_loadu_ps(base + k),
                                             a0);
                    _mm256_storeu_ps(yrow + t, a0);
                }
                for (; t < t_end; ++t) {
                    float acc = 0.0f;
                    for (int k = 0; k < s.k; ++k) acc += wrow[k] * xrow[t + k - s.pad];
                    yrow[t] += acc;
                }
            }
        }
    }
}

void conv1d_bwd_data_avx2(const float* dy, const float* w, float* dx, const Conv1dShape& s) {
    if (!conv_fast_path(s)) {
        scalar_table().conv1d_bwd_data(dy, w, dx, s);
        return;
    }
    // dx[j] += sum_k w[k] * dy[j + pad - k]: same sliding pattern with the
    // kernel reversed.
    const int li = s.li;
    const int j_begin = s.pad;
    const int j_end = li - s.pad;
    for (int n = 0; n < s.n; ++n) {
        const float* dyn = dy + size_t(n) * s.co * s.lo;
        float* dxn = dx + size_t(n) * s.ci * s.li;
        for (int ci = 0; ci < s.ci; ++ci) {
            float* dxrow = dxn + size_t(ci) * li;
            for (int co = 0; co < s.co; ++co) {
                const float* dyrow = dyn + size_t(co) * s.lo;
                const float* wrow = w + (size_t(co) * s.ci + ci) * s.k;
                for (int j = 0; j < j_begin && j < li; ++j) {
                    float acc = 0.0f;
                    for (int k = 0; k < s.k; ++k) {
                        const int t = j + s.pad - k;
                        if (t >= 0 && t < s.lo) acc += wrow[k] * dyrow[t];
                    }
                    dxrow[j] += acc;
                }
                for (int j = j_end > j_begin ? j_end : j_begin; j < li; ++j) {
                    float acc = 0.0f;
                    for (int k = 0; k < s.k; ++k) {
                        const int t = j + s.pad - k;
                        if (t >= 0 && t < s.lo) acc += wrow[k] * dyrow[t];
                    }
                    dxrow[j] += acc;
                }
                int j = j_begin;
                for (; j + 32 <= j_end; j += 32) {
                    __m256 a0 = _mm256_loadu_ps(dxrow + j);
                    __m256 a1 = _mm256_loadu_ps(dxrow + j + 8);
                    __m256 a2 = _mm256_loadu_ps(dxrow + j + 16);
                    __m256 a3 = _mm256_loadu_ps(dxrow + j + 24);
                    const float* base = dyrow + j + s.pad;
                    for (int k = 0; k < s.k; ++k) {
                        const __m256 wk = _mm256_set1_ps(wrow[k]);
                        a0 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base - k), a0);
                        a1 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base - k + 8), a1);
                        a2 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base - k + 16), a2);
                        a3 = _mm256_fmadd_ps(wk, _mm256_loadu_ps(base - k + 24), a3);
                    }
                    _mm256_storeu_ps(dxrow + j, a0);
                    _mm256_storeu_ps(dxrow + j + 8, a1);
                    _mm256_storeu_ps(dxrow + j + 16, a2);
                    _mm256_storeu_ps(dxrow + j + 24, a3);
                }
                for (; j + 8 <= j_end; j += 8) {
                    __m256 a0 = _mm256_loadu_ps(dxrow + j);
                    const float* base = dyrow + j + s.pad;
                    for (int k = 0; k < s.k; ++k)
                        a0 = _mm256_fmadd_ps(_mm256_set1_ps(wrow[k]), _mm256_loadu_ps(base - k),
                                             a0);
                    _mm256_storeu_ps(dxrow + j, a0);
                }
                for (; j < j_end; ++j) {
                    float acc = 0.0f;
                    for (int k = 0; k < s.k; ++k) acc += wrow[k] * dyrow[j + s.pad - k];
                    dxrow[j] += acc;
                }
            }
        }
    }
}

void conv1d_bwd_filter_avx2(const float* x, const float* dy, float* dw, float* db,
                            const Conv1dShape& s) {
    if (!conv_fast_path(s)) {
        scalar_table().conv1d_bwd_filter(x, dy, dw, db, s);
        return;
    }
    const int t_begin = s.pad;
    const int t_end = s.lo - s.pad;
    for (int n = 0; n < s.n; ++n) {
        const float* xn = x + size_t(n) * s.ci * s.li;
        const float* dyn = dy + size_t(n) * s.co * s.lo;
        for (int co = 0; co < s.co; ++co) {
            const float* dyrow = dyn + size_t(co) * s.lo;
            if (db) {
                __m256 acc = _mm256_setzero_ps();
                int t = 0;
                for (; t + 8 <= s.lo; t += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(dyrow + t));
                float tail = 0.0f;
                for (; t < s.lo; ++t) tail += dyrow[t];
                db[co] += hsum8(acc) + tail;
            }
            for (int ci = 0; ci < s.ci; ++ci) {
                const float* xrow = xn + size_t(ci) * s.li;
                float* dwrow = dw + (size_t(co) * s.ci + ci) * s.k;
                for (int k = 0; k < s.k; ++k) {
                    const int off = k - s.pad;
                    float edge = 0.0f;
                    for (int t = 0; t < t_begin; ++t) {
                        const int src = t + off;
                        if (src >= 0 && src < s.li) edge += dyrow[t] * xrow[src];
                    }
                    for (int t = t_end > t_begin ? t_end : t_begin; t < s.lo; ++t) {
                        const int src = t + off;
                        if (src >= 0 && src < s.li) edge += dyrow[t] * xrow[src];
                    }
                    __m256 acc0 = _mm256_setzero_ps();
                    __m256 acc1 = _mm256_setzero_ps();
                    int t = t_begin;
                    for (; t + 16 <= t_end; t += 16) {
                        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(dyrow + t),
                                               _mm256_loadu_ps(xrow + t + off), acc0);
                        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(dyrow + t + 8),
                                               _mm256_loadu_ps(xrow + t + off + 8), acc1);
                    }
                    for (; t + 8 <= t_end; t += 8)
                        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(dyrow + t),
                                               _mm256_loadu_ps(xrow + t + off), acc0);
                    float tail = 0.0f;
                    for (; t < t_end; ++t) tail += dyrow[t] * xrow[t + off];
                    dwrow[k] += hsum8(_mm256_add_ps(acc0, acc1)) + tail + edge;
                }
            }
        }
    }
}

void dense_fwd_avx2(const float* x, const float* w, const float* b, float* y, int n, int in_f,
                    int out_f) {
    for (int i = 0; i < n; ++i) {
        const float* xi = x + size_t(i) * in_f;
        float* yi = y + size_t(i) * out_f;
        for (int o = 0; o < out_f; ++o) {
            const float* wo = w + size_t(o) * in_f;
            __m256 acc0 = _mm256_setzero_ps();
            __m256 acc1 = _mm256_setzero_ps();
            int f = 0;
            for (; f + 16 <= in_f; f += 16) {
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(wo + f), _mm256_loadu_ps(xi + f), acc0);
                acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(wo + f + 8), _mm256_loadu_ps(xi + f + 8),
                                       acc1);
            }
            for (; f + 8 <= in_f; f += 8)
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(wo + f), _mm256_loadu_ps(xi + f), acc0);
            float acc = hsum8(_mm256_add_ps(acc0, acc1)) + (b ? b[o] : 0.0f);
            for (; f < in_f; ++f) acc += wo[f] * xi[f];
            yi[o] = acc;
        }
    }
}

void dense_bwd_data_avx2(const float* dy, const float* w, float* dx, int n, int in_f, int out_f) {
    for (int i = 0; i < n; ++i) {
        const float* dyi = dy + size_t(i) * out_f;
        float* dxi = dx + size_t(i) * in_f;
        for (int o = 0; o < out_f; ++o) {
            const float g = dyi[o];
            const float* wo = w + size_t(o) * in_f;
            const __m256 gv = _mm256_set1_ps(g);
            int f = 0;
            for (; f + 8 <= in_f; f += 8)
                _mm256_storeu_ps(dxi + f, _mm256_fmadd_ps(gv, _mm256_loadu_ps(wo + f),
                                                          _mm256_loadu_ps(dxi + f)));
            for (; f < in_f; ++f) dxi[f] += g * wo[f];
        }
    }
}

void dense_bwd_filter_avx2(const float* x, const float* dy, float* dw, float* db, int n, int in_f,
                           int out_f) {
    for (int i = 0; i < n; ++i) {
        const float* xi = x + size_t(i) * in_f;
        const float* dyi = dy + size_t(i) * out_f;
        for (int o = 0; o < out_f; ++o) {
            const float g = dyi[o];
            if (db) db[o] += g;
            float* dwo = dw + size_t(o) * in_f;
            const __m256 gv = _mm256_set1_ps(g);
            int f = 0;
            for (; f + 8 <= in_f; f += 8)
                _mm256_storeu_ps(dwo + f, _mm256_fmadd_ps(gv, _mm256_loadu_ps(xi + f),
                                                          _mm256_loadu_ps(dwo + f)));
            for (; f < in_f; ++f) dwo[f] += g * xi[f];
        }
    }
}

void relu_fwd_avx2(const float* x, float* y, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(const float* x_in, const float* dy, float* dx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x_in + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x_in[i] > 0.0f ? dy[i] : 0.0f;
}

void guided_relu_bwd_avx2(const float* x_in, const float* dy, float* dx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(dy + i);
        const __m256 mask = _mm256_and_ps(_mm256_cmp_ps(_mm256_loadu_ps(x_in + i), zero, _CMP_GT_OQ),
                                          _mm256_cmp_ps(g, zero, _CMP_GT_OQ));
        _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, g));
    }
    for (; i < n; ++i) dx[i] = (x_in[i] > 0.0f && dy[i] > 0.0f) ? dy[i] : 0.0f;
}

void add_avx2(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void mul_avx2(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void axpy_avx2(float alpha, const float* x, float* y, size_t n) {
    // mul+add, not fmadd: keeps results bit-identical to the scalar kernel
    const __m256 av = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_mul_ps(av, _mm256_loadu_ps(x + i)),
                                              _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(float alpha, float* x, size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void gap_fwd_avx2(const float* x, float* y, int n, int c, int l) {
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float* row = x + (size_t(i) * c + ch) * l;
            __m256d acc0 = _mm256_setzero_pd();
            __m256d acc1 = _mm256_setzero_pd();
            int t = 0;
            for (; t + 8 <= l; t += 8) {
                const __m256 v = _mm256_loadu_ps(row + t);
                acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
                acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
            }
            double acc = hsum4d(_mm256_add_pd(acc0, acc1));
            for (; t < l; ++t) acc += row[t];
            y[size_t(i) * c + ch] = float(acc / double(l));
        }
    }
}

double sum_f64_avx2(const float* x, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
        acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
    }
    double acc = hsum4d(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double dot_f64_avx2(const float* a, const float* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 va = _mm256_loadu_ps(a + i);
        const __m256 vb = _mm256_loadu_ps(b + i);
        acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                               _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                               _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
    }
    double acc = hsum4d(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

}  // namespace

const Kernels* avx2_table() {
    static const Kernels table = {
        "avx2",
        conv1d_fwd_avx2,
        conv1d_bwd_data_avx2,
        conv1d_bwd_filter_avx2,
        dense_fwd_avx2,
        dense_bwd_data_avx2,
        dense_bwd_filter_avx2,
        relu_fwd_avx2,
        relu_bwd_avx2,
        guided_relu_bwd_avx2,
        add_avx2,
        mul_avx2,
        axpy_avx2,
        scale_avx2,
        gap_fwd_avx2,
        scalar_table().gap_bwd,
        sum_f64_avx2,
        dot_f64_avx2,
    };
    return &table;
}

}  // namespace ecgattr::kern

#else  // !ECGATTR_HAVE_AVX2_BUILD

namespace ecgattr::kern {
const Kernels* avx2_table() { return nullptr; }
}  // namespace ecgattr::kern

#endif
