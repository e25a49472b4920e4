// AVX2 kernel variants. This TU is compiled with -mavx2; it is only entered
// after a runtime cpuid check.

#include "prunelab/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define PRUNELAB_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define PRUNELAB_HAVE_AVX2_TU 0
#endif

#include <algorithm>
#include <cmath>

namespace prunelab::kern {

#if PRUNELAB_HAVE_AVX2_TU

namespace {

void v_add(double* y, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        __m256d xv = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, xv));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void v_axpy(double* y, double a, const double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        __m256d xv = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, xv, yv));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void v_scale(double* x, double a, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), av));
    for (; i < n; ++i) x[i] *= a;
}

void v_hadamard(double* y, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i),
                                              _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void v_relu(double* y, const double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_grad(double* gx, const double* x, const double* gy, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        __m256d g = _mm256_and_pd(_mm256_loadu_pd(gy + i), mask);
        _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), g));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) gx[i] += gy[i];
}

void v_clamp(double* x, double lo, double hi, std::size_t n) {
    const __m256d lov = _mm256_set1_pd(lo);
    const __m256d hiv = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        v = _mm256_min_pd(_mm256_max_pd(v, lov), hiv);
        _mm256_storeu_pd(x + i, v);
    }
    for (; i < n; ++i) x[i] = std::min(std::max(x[i], lo), hi);
}

void v_pgd_step(double* x, const double* g, double step, const double* ref,
                double eps, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d stepv = _mm256_set1_pd(step);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d pos = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_GT_OQ), stepv);
        __m256d neg = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_LT_OQ), stepv);
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_sub_pd(pos, neg));
        __m256d r = _mm256_loadu_pd(ref + i);
        v = _mm256_min_pd(_mm256_max_pd(v, _mm256_sub_pd(r, epsv)),
                          _mm256_add_pd(r, epsv));
        v = _mm256_min_pd(_mm256_max_pd(v, zero), one);
        _mm256_storeu_pd(x + i, v);
    }
    for (; i < n; ++i) {
        double v = x[i];
        if (g[i] > 0.0)
            v += step;
        else if (g[i] < 0.0)
            v -= step;
        v = std::min(std::max(v, ref[i] - eps), ref[i] + eps);
        x[i] = std::min(std::max(v, 0.0), 1.0);
    }
}

void v_gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            v_axpy(c + i * n, aip, b + p * n, n);
        }
    }
}

void v_gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            if (arow[i] == 0.0) continue;
            v_axpy(c + i * n, arow[i], brow, n);
        }
    }
}

void v_gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            c[i * n + j] += v_dot(arow, b + j * k, k);
        }
    }
}

}  // namespace

const Ops& avx2_ops_impl() {
    static const Ops ops = {v_add,  v_axpy,      v_dot,   v_scale,    v_hadamard,
                            v_relu, v_relu_grad, v_clamp, v_pgd_step, v_gemm_nn,
                            v_gemm_tn, v_gemm_nt};
    return ops;
}

#else

const Ops& avx2_ops_impl() { return scalar_ops(); }

#endif

}  // namespace prunelab::kern
