#pragma once
// Data-parallel f32 kernels behind the gradient engine and perturbation loops.
//
// Every kernel has a scalar reference implementation and may have an AVX2
// variant; the active table is chosen once at startup from CPUID (overridable
// via set_backend or the ECGATTR_KERNELS env var). Scalar and SIMD variants
// are equivalence-tested against each other and against f64 references.
//
// Layout conventions: conv tensors are [n][c][l] row-major, dense matrices
// are [rows][cols] row-major. Reductions that feed statistics accumulate in
// f64; conv/dense MAC chains accumulate in f32 like the rest of the stack.

#include <cstddef>
#include <cstdint>

namespace ecgattr::kern {

struct Conv1dShape {
    int n;       // batch
    int ci;      // input channels
    int li;      // input length
    int co;      // output channels
    int lo;      // output length = (li + 2*pad - k) / stride + 1
    int k;       // kernel length
    int stride;
    int pad;
};

struct Kernels {
    const char* name;

    // y[n][co][lo] = b[co] + sum_{ci,k} w[co][ci][k] * x[n][ci][lo*stride + k - pad]
    void (*conv1d_fwd)(const float* x, const float* w, const float* b, float* y,
                       const Conv1dShape& s);
    // dx += W^T * dy (dx must be zeroed by the caller)
    void (*conv1d_bwd_data)(const float* dy, const float* w, float* dx, const Conv1dShape& s);
    // dw/db += grads (caller zeroes)
    void (*conv1d_bwd_filter)(const float* x, const float* dy, float* dw, float* db,
                              const Conv1dShape& s);

    // y[n][o] = b[o] + dot(w[o], x[n]);  w is [out_f][in_f]
    void (*dense_fwd)(const float* x, const float* w, const float* b, float* y, int n, int in_f,
                      int out_f);
    void (*dense_bwd_data)(const float* dy, const float* w, float* dx, int n, int in_f, int out_f);
    void (*dense_bwd_filter)(const float* x, const float* dy, float* dw, float* db, int n,
                             int in_f, int out_f);

    void (*relu_fwd)(const float* x, float* y, size_t n);
    // dx = dy * (x_in > 0)
    void (*relu_bwd)(const float* x_in, const float* dy, float* dx, size_t n);
    // dx = dy * (x_in > 0) * (dy > 0)
    void (*guided_relu_bwd)(const float* x_in, const float* dy, float* dx, size_t n);

    void (*add)(const float* a, const float* b, float* y, size_t n);
    void (*mul)(const float* a, const float* b, float* y, size_t n);
    void (*axpy)(float alpha, const float* x, float* y, size_t n);  // y += alpha * x
    void (*scale)(float alpha, float* x, size_t n);

    // y[n][c] = mean_l x[n][c][l]  (f64 accumulation)
    void (*gap_fwd)(const float* x, float* y, int n, int c, int l);
    // dx[n][c][l] = dy[n][c] / l
    void (*gap_bwd)(const float* dy, float* dx, int n, int c, int l);

    double (*sum_f64)(const float* x, size_t n);
    double (*dot_f64)(const float* a, const float* b, size_t n);
};

enum class Backend { Auto, Scalar, Avx2 };

bool cpu_has_avx2();

// Select the kernel table. Auto picks AVX2 when the CPU supports it unless
// ECGATTR_KERNELS=scalar is set. Not thread-safe; call before spawning workers.
void set_backend(Backend backend);
Backend active_backend();
const Kernels& active();

const Kernels& scalar_table();
const Kernels* avx2_table();  // null when not compiled in or unsupported

}  // namespace ecgattr::kern
