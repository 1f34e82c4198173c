// Kernel backend selection.

#include "ecgattr/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace ecgattr::kern {
namespace {

const Kernels* g_active = nullptr;
Backend g_backend = Backend::Auto;

const Kernels* resolve(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return &scalar_table();
        case Backend::Avx2: {
            const Kernels* t = cpu_has_avx2() ? avx2_table() : nullptr;
            if (!t) throw std::runtime_error("AVX2 kernels requested but unavailable");
            return t;
        }
        case Backend::Auto: {
            if (const char* env = std::getenv("ECGATTR_KERNELS")) {
                if (std::strcmp(env, "scalar") == 0) return &scalar_table();
                if (std::strcmp(env, "avx2") == 0) return resolve(Backend::Avx2);
            }
            if (cpu_has_avx2()) {
                if (const Kernels* t = avx2_table()) return t;
            }
            return &scalar_table();
        }
    }
    return &scalar_table();
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void set_backend(Backend backend) {
    g_active = resolve(backend);
    g_backend = backend;
}

Backend active_backend() { return g_backend; }

const Kernels& active() {
    if (!g_active) g_active = resolve(Backend::Auto);
    return *g_active;
}

}  // namespace ecgattr::kern
