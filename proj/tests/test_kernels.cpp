#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ecgattr/common.hpp"
#include "ecgattr/kernels.hpp"

using namespace ecgattr;
using kern::Conv1dShape;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (float& x : v) x = rng.uniform(-1.0f, 1.0f);
    return v;
}

// f64 references, written independently of both kernel tables
void conv_ref(const std::vector<float>& x, const std::vector<float>& w,
              const std::vector<float>& b, std::vector<double>& y, const Conv1dShape& s) {
    y.assign(size_t(s.n) * s.co * s.lo, 0.0);
    for (int n = 0; n < s.n; ++n)
        for (int co = 0; co < s.co; ++co)
            for (int t = 0; t < s.lo; ++t) {
                double acc = b[size_t(co)];
                for (int ci = 0; ci < s.ci; ++ci)
                    for (int k = 0; k < s.k; ++k) {
                        const int src = t * s.stride + k - s.pad;
                        if (src >= 0 && src < s.li)
                            acc += double(w[(size_t(co) * s.ci + ci) * s.k + k]) *
                                   double(x[(size_t(n) * s.ci + ci) * s.li + src]);
                    }
                y[(size_t(n) * s.co + co) * s.lo + t] = acc;
            }
}

void check_close(const std::vector<float>& got, const std::vector<double>& ref, double tol) {
    REQUIRE(got.size() == ref.size());
    for (size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max(1.0, std::fabs(ref[i]));
        CHECK(std::fabs(double(got[i]) - ref[i]) <= tol * scale);
    }
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(1.0, std::fabs(double(b[i])));
        CHECK(std::fabs(double(a[i]) - double(b[i])) <= tol * scale);
    }
}

std::vector<const kern::Kernels*> tables_under_test() {
    std::vector<const kern::Kernels*> tables = {&kern::scalar_table()};
    if (kern::cpu_has_avx2() && kern::avx2_table()) tables.push_back(kern::avx2_table());
    return tables;
}

}  // namespace

TEST_CASE("conv1d forward matches f64 reference on varied shapes") {
    Rng rng(11);
    const Conv1dShape shapes[] = {
        {2, 3, 64, 4, 64, 7, 1, 3},  {1, 1, 33, 2, 33, 7, 1, 3},   {3, 2, 40, 2, 20, 7, 2, 3},
        {1, 4, 129, 8, 129, 7, 1, 3}, {2, 1, 10, 3, 10, 1, 1, 0},  {1, 2, 50, 2, 25, 3, 2, 1},
    };
    for (const Conv1dShape& s : shapes) {
        const auto x = random_vec(size_t(s.n) * s.ci * s.li, rng);
        const auto w = random_vec(size_t(s.co) * s.ci * s.k, rng);
        const auto b = random_vec(size_t(s.co), rng);
        std::vector<double> ref;
        conv_ref(x, w, b, ref, s);
        for (const kern::Kernels* K : tables_under_test()) {
            std::vector<float> y(ref.size(), -999.0f);
            K->conv1d_fwd(x.data(), w.data(), b.data(), y.data(), s);
            check_close(y, ref, 2e-5);
        }
    }
}

TEST_CASE("conv1d backward kernels agree between scalar and active tables") {
    Rng rng(12);
    const Conv1dShape shapes[] = {
        {2, 3, 80, 4, 80, 7, 1, 3},
        {1, 2, 41, 3, 21, 7, 2, 3},
        {2, 4, 64, 4, 64, 5, 1, 2},
    };
    for (const Conv1dShape& s : shapes) {
        const auto x = random_vec(size_t(s.n) * s.ci * s.li, rng);
        const auto w = random_vec(size_t(s.co) * s.ci * s.k, rng);
        const auto dy = random_vec(size_t(s.n) * s.co * s.lo, rng);

        std::vector<float> dx_ref(x.size(), 0.0f), dw_ref(w.size(), 0.0f), db_ref(size_t(s.co));
        kern::scalar_table().conv1d_bwd_data(dy.data(), w.data(), dx_ref.data(), s);
        kern::scalar_table().conv1d_bwd_filter(x.data(), dy.data(), dw_ref.data(), db_ref.data(),
                                               s);
        for (const kern::Kernels* K : tables_under_test()) {
            std::vector<float> dx(x.size(), 0.0f), dw(w.size(), 0.0f), db(size_t(s.co), 0.0f);
            K->conv1d_bwd_data(dy.data(), w.data(), dx.data(), s);
            K->conv1d_bwd_filter(x.data(), dy.data(), dw.data(), db.data(), s);
            check_close(dx, dx_ref, 1e-4);
            check_close(dw, dw_ref, 1e-4);
            check_close(db, db_ref, 1e-4);
        }
    }
}

TEST_CASE("conv1d backward-data is the adjoint of forward (dot-product test)") {
    Rng rng(13);
    const Conv1dShape s = {1, 2, 48, 3, 48, 7, 1, 3};
    const auto x = random_vec(size_t(s.ci) * s.li, rng);
    const auto w = random_vec(size_t(s.co) * s.ci * s.k, rng);
    const std::vector<float> zero_b(size_t(s.co), 0.0f);
    const auto dy = random_vec(size_t(s.co) * s.lo, rng);
    for (const kern::Kernels* K : tables_under_test()) {
        std::vector<float> y(size_t(s.co) * s.lo);
        K->conv1d_fwd(x.data(), w.data(), zero_b.data(), y.data(), s);
        std::vector<float> dx(x.size(), 0.0f);
        K->conv1d_bwd_data(dy.data(), w.data(), dx.data(), s);
        // <y, dy> == <x, dx> for a linear map
        const double lhs = K->dot_f64(y.data(), dy.data(), y.size());
        const double rhs = K->dot_f64(x.data(), dx.data(), x.size());
        CHECK(std::fabs(lhs - rhs) <= 1e-4 * std::max(1.0, std::fabs(lhs)));
    }
}

TEST_CASE("dense kernels match references") {
    Rng rng(14);
    const int n = 5, in_f = 37, out_f = 4;
    const auto x = random_vec(size_t(n) * in_f, rng);
    const auto w = random_vec(size_t(out_f) * in_f, rng);
    const auto b = random_vec(size_t(out_f), rng);
    std::vector<double> ref(size_t(n) * out_f, 0.0);
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_f; ++o) {
            double acc = b[size_t(o)];
            for (int f = 0; f < in_f; ++f)
                acc += double(w[size_t(o) * in_f + f]) * double(x[size_t(i) * in_f + f]);
            ref[size_t(i) * out_f + o] = acc;
        }
    for (const kern::Kernels* K : tables_under_test()) {
        std::vector<float> y(ref.size());
        K->dense_fwd(x.data(), w.data(), b.data(), y.data(), n, in_f, out_f);
        check_close(y, ref, 2e-5);

        const auto dy = random_vec(size_t(n) * out_f, rng);
        std::vector<float> dx_s(x.size(), 0.0f), dw_s(w.size(), 0.0f), db_s(size_t(out_f), 0.0f);
        kern::scalar_table().dense_bwd_data(dy.data(), w.data(), dx_s.data(), n, in_f, out_f);
        kern::scalar_table().dense_bwd_filter(x.data(), dy.data(), dw_s.data(), db_s.data(), n,
                                              in_f, out_f);
        std::vector<float> dx(x.size(), 0.0f), dw(w.size(), 0.0f), db(size_t(out_f), 0.0f);
        K->dense_bwd_data(dy.data(), w.data(), dx.data(), n, in_f, out_f);
        K->dense_bwd_filter(x.data(), dy.data(), dw.data(), db.data(), n, in_f, out_f);
        check_close(dx, dx_s, 1e-4);
        check_close(dw, dw_s, 1e-4);
        check_close(db, db_s, 1e-4);
    }
}

TEST_CASE("elementwise kernels are bit-identical across tables") {
    Rng rng(15);
    const size_t n = 1003;  // odd size to hit the scalar tails
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    for (const kern::Kernels* K : tables_under_test()) {
        std::vector<float> r1(n), r2(n);
        K->relu_fwd(a.data(), r1.data(), n);
        kern::scalar_table().relu_fwd(a.data(), r2.data(), n);
        CHECK(r1 == r2);

        K->relu_bwd(a.data(), b.data(), r1.data(), n);
        kern::scalar_table().relu_bwd(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        K->guided_relu_bwd(a.data(), b.data(), r1.data(), n);
        kern::scalar_table().guided_relu_bwd(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        K->add(a.data(), b.data(), r1.data(), n);
        kern::scalar_table().add(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        K->mul(a.data(), b.data(), r1.data(), n);
        kern::scalar_table().mul(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        r1 = a;
        r2 = a;
        K->axpy(0.37f, b.data(), r1.data(), n);
        kern::scalar_table().axpy(0.37f, b.data(), r2.data(), n);
        CHECK(r1 == r2);

        r1 = a;
        r2 = a;
        K->scale(-1.25f, r1.data(), n);
        kern::scalar_table().scale(-1.25f, r2.data(), n);
        CHECK(r1 == r2);
    }
}

TEST_CASE("reductions keep f64 accuracy") {
    Rng rng(16);
    const size_t n = 4097;
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    double sum_ref = 0.0, dot_ref = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sum_ref += double(a[i]);
        dot_ref += double(a[i]) * double(b[i]);
    }
    for (const kern::Kernels* K : tables_under_test()) {
        CHECK(std::fabs(K->sum_f64(a.data(), n) - sum_ref) <= 1e-9 * std::max(1.0, std::fabs(sum_ref)));
        CHECK(std::fabs(K->dot_f64(a.data(), b.data(), n) - dot_ref) <=
              1e-9 * std::max(1.0, std::fabs(dot_ref)));
    }
}

TEST_CASE("gap kernels match the mean") {
    Rng rng(17);
    const int n = 3, c = 5, l = 111;
    const auto x = random_vec(size_t(n) * c * l, rng);
    std::vector<double> ref(size_t(n) * c, 0.0);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int t = 0; t < l; ++t) acc += double(x[(size_t(i) * c + ch) * l + t]);
            ref[size_t(i) * c + ch] = acc / l;
        }
    for (const kern::Kernels* K : tables_under_test()) {
        std::vector<float> y(ref.size());
        K->gap_fwd(x.data(), y.data(), n, c, l);
        check_close(y, ref, 1e-6);
    }
}

TEST_CASE("backend selection") {
    kern::set_backend(kern::Backend::Scalar);
    CHECK(std::string(kern::active().name) == "scalar");
    if (kern::cpu_has_avx2()) {
        kern::set_backend(kern::Backend::Avx2);
        CHECK(std::string(kern::active().name) == "avx2");
    }
    kern::set_backend(kern::Backend::Auto);
}
