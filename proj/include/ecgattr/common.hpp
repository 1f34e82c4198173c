#pragma once
// Shared plumbing: error categories, deterministic RNG, raw f32 blob I/O.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgattr {

// Error categories map 1:1 onto CLI exit codes.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64-based RNG. Deterministic across platforms, unlike the
// std:: distributions, which is what the reproducibility contract needs.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }
    float next_float() { return float(next_u64() >> 40) * 0x1.0p-24f; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    // Box-Muller, spare discarded to keep the stream position simple.
    float normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return float(std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2));
    }

    // [0, n), rejection-sampled so the stream stays unbiased
    int next_int(int n) {
        if (n <= 0) throw InputError("Rng::next_int: n must be positive");
        const uint64_t span = uint64_t(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return int(v % span);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(next_int(int(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream for (seed, stream id) pairs.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        Rng r(seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL));
        r.next_u64();
        return r.next_u64();
    }

  private:
    uint64_t state_;
};

// Little-endian float32 blobs back every binary file format in the project.
inline void write_f32_blob(const std::filesystem::path& path, const float* data, size_t count) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(float)));
    if (!out) throw IoError("short write: " + path.string());
}

inline void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& data) {
    write_f32_blob(path, data.data(), data.size());
}

inline std::vector<float> read_f32_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open: " + path.string());
    const auto bytes = size_t(in.tellg());
    if (bytes % sizeof(float) != 0)
        throw IoError("blob size not a multiple of 4 bytes: " + path.string());
    std::vector<float> data(bytes / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(bytes));
    if (!in) throw IoError("short read: " + path.string());
    return data;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("short write: " + path.string());
}

}  // namespace ecgattr
