#include "prunelab/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace prunelab::kern {
namespace {

void s_add(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void s_axpy(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void s_scale(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void s_hadamard(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void s_relu(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_grad(double* gx, const double* x, const double* gy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) gx[i] += gy[i];
}

void s_clamp(double* x, double lo, double hi, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], lo), hi);
}

void s_pgd_step(double* x, const double* g, double step, const double* ref,
                double eps, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = x[i];
        if (g[i] > 0.0)
            v += step;
        else if (g[i] < 0.0)
            v -= step;
        v = std::min(std::max(v, ref[i] - eps), ref[i] + eps);
        x[i] = std::min(std::max(v, 0.0), 1.0);
    }
}

void s_gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void s_gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = arow[i];
            if (api == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void s_gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            c[i * n + j] += s_dot(arow, b + j * k, k);
        }
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {s_add,  s_axpy,     s_dot,   s_scale,    s_hadamard,
                            s_relu, s_relu_grad, s_clamp, s_pgd_step, s_gemm_nn,
                            s_gemm_tn, s_gemm_nt};
    return ops;
}

}  // namespace prunelab::kern
