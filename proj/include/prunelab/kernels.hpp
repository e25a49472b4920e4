#pragma once

#include <cstddef>
#include <string>

// Flat-array numeric kernels. Scalar reference implementations always exist;
// an AVX2 variant set is selected at runtime when the CPU supports it
// (override with PRUNELAB_SIMD=scalar|avx2|auto).
//
// All matrices are row-major doubles.

namespace prunelab::kern {

struct Ops {
    // y[i] += x[i]
    void (*add)(double* y, const double* x, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*scale)(double* x, double a, std::size_t n);
    // y[i] *= x[i]
    void (*hadamard)(double* y, const double* x, std::size_t n);
    // y[i] = max(x[i], 0)
    void (*relu)(double* y, const double* x, std::size_t n);
    // gx[i] += gy[i] * (x[i] > 0)
    void (*relu_grad)(double* gx, const double* x, const double* gy, std::size_t n);
    // x[i] = min(max(x[i], lo), hi)
    void (*clamp)(double* x, double lo, double hi, std::size_t n);
    // x[i] = clamp(x[i] + step*sign(g[i]), ref[i]-eps, ref[i]+eps) then clamp to [0,1]
    void (*pgd_step)(double* x, const double* g, double step, const double* ref,
                     double eps, std::size_t n);
    // C[m,n] += A[m,k] * B[k,n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c);
    // C[m,n] += A[k,m]^T * B[k,n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c);
    // C[m,n] += A[m,k] * B[n,k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c);
};

const Ops& scalar_ops();
// Selected variant for this process; stable after first call.
const Ops& ops();

bool avx2_available();
// "scalar" or "avx2"; what ops() dispatched to.
std::string active_variant();

}  // namespace prunelab::kern
