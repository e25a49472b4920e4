#include "prunelab/engine_detail.hpp"

#include <cmath>
#include <stdexcept>

#include "prunelab/kernels.hpp"

namespace prunelab::detail {

using kern::ops;

Tensor dense_forward(const Tensor& w, const Tensor& b, const Tensor& x) {
    const std::size_t batch = x.shape[0];
    const std::size_t in = w.shape[1];
    const std::size_t out = w.shape[0];
    Tensor y({batch, out});
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t o = 0; o < out; ++o) y.data[i * out + o] = b.data[o];
    ops().gemm_nt(batch, out, in, x.data.data(), w.data.data(), y.data.data());
    return y;
}

Tensor dense_backward_input(const Tensor& w, const Tensor& gy, std::size_t in_dim) {
    const std::size_t batch = gy.shape[0];
    const std::size_t out = w.shape[0];
    Tensor gx({batch, in_dim});
    ops().gemm_nn(batch, in_dim, out, gy.data.data(), w.data.data(), gx.data.data());
    return gx;
}

void dense_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor& gb) {
    const std::size_t batch = x.shape[0];
    const std::size_t in = x.shape[1];
    const std::size_t out = gy.shape[1];
    ops().gemm_tn(out, in, batch, gy.data.data(), x.data.data(), gw.data.data());
    for (std::size_t i = 0; i < batch; ++i)
        ops().add(gb.data.data(), gy.data.data() + i * out, out);
}

Tensor conv_forward(const Tensor& k, const Tensor& b, const Tensor& x, std::size_t stride) {
    const std::size_t batch = x.shape[0], ic = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t oc = k.shape[0], kk = k.shape[2];
    const std::size_t oh = (h - kk) / stride + 1, ow = (w - kk) / stride + 1;
    Tensor y({batch, oc, oh, ow});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            double* ybase = y.data.data() + ((n * oc + o) * oh) * ow;
            for (std::size_t i = 0; i < oh * ow; ++i) ybase[i] = b.data[o];
            for (std::size_t c = 0; c < ic; ++c) {
                const double* xch = x.data.data() + ((n * ic + c) * h) * w;
                const double* kch = k.data.data() + ((o * ic + c) * kk) * kk;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        double acc = 0.0;
                        const double* xrow = xch + (oy * stride) * w + ox * stride;
                        for (std::size_t p = 0; p < kk; ++p)
                            acc += kern::ops().dot(xrow + p * w, kch + p * kk, kk);
                        ybase[oy * ow + ox] += acc;
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv_backward_input(const Tensor& k, const Tensor& gy,
                           const std::vector<std::size_t>& in_shape, std::size_t stride) {
    const std::size_t batch = gy.shape[0], oc = gy.shape[1], oh = gy.shape[2],
                      ow = gy.shape[3];
    const std::size_t ic = in_shape[1], h = in_shape[2], w = in_shape[3];
    const std::size_t kk = k.shape[2];
    Tensor gx({batch, ic, h, w});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            const double* gych = gy.data.data() + ((n * oc + o) * oh) * ow;
            for (std::size_t c = 0; c < ic; ++c) {
                const double* kch = k.data.data() + ((o * ic + c) * kk) * kk;
                double* gxch = gx.data.data() + ((n * ic + c) * h) * w;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const double g = gych[oy * ow + ox];
                        if (g == 0.0) continue;
                        double* xrow = gxch + (oy * stride) * w + ox * stride;
                        for (std::size_t p = 0; p < kk; ++p)
                            kern::ops().axpy(xrow + p * w, g, kch + p * kk, kk);
                    }
                }
            }
        }
    }
    return gx;
}

void conv_backward_params(const Tensor& x, const Tensor& gy, std::size_t kernel,
                          std::size_t stride, Tensor& gk, Tensor& gb) {
    const std::size_t batch = gy.shape[0], oc = gy.shape[1], oh = gy.shape[2],
                      ow = gy.shape[3];
    const std::size_t ic = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t kk = kernel;
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            const double* gych = gy.data.data() + ((n * oc + o) * oh) * ow;
            for (std::size_t i = 0; i < oh * ow; ++i) gb.data[o] += gych[i];
            for (std::size_t c = 0; c < ic; ++c) {
                const double* xch = x.data.data() + ((n * ic + c) * h) * w;
                double* gkch = gk.data.data() + ((o * ic + c) * kk) * kk;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const double g = gych[oy * ow + ox];
                        if (g == 0.0) continue;
                        const double* xrow = xch + (oy * stride) * w + ox * stride;
                        for (std::size_t p = 0; p < kk; ++p)
                            kern::ops().axpy(gkch + p * kk, g, xrow + p * w, kk);
                    }
                }
            }
        }
    }
}

Tensor avgpool_forward(const Tensor& x, std::size_t window) {
    const std::size_t batch = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t oh = h / window, ow = w / window;
    const double inv = 1.0 / double(window * window);
    Tensor y({batch, c, oh, ow});
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* xch = x.data.data() + ((n * c + ch) * h) * w;
            double* ych = y.data.data() + ((n * c + ch) * oh) * ow;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < window; ++p)
                        for (std::size_t q = 0; q < window; ++q)
                            acc += xch[(oy * window + p) * w + ox * window + q];
                    ych[oy * ow + ox] = acc * inv;
                }
        }
    return y;
}

Tensor avgpool_backward(const Tensor& gy, const std::vector<std::size_t>& in_shape,
                        std::size_t window) {
    const std::size_t batch = gy.shape[0], c = gy.shape[1], oh = gy.shape[2],
                      ow = gy.shape[3];
    const std::size_t h = in_shape[2], w = in_shape[3];
    const double inv = 1.0 / double(window * window);
    Tensor gx({batch, c, h, w});
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* gych = gy.data.data() + ((n * c + ch) * oh) * ow;
            double* gxch = gx.data.data() + ((n * c + ch) * h) * w;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const double g = gych[oy * ow + ox] * inv;
                    for (std::size_t p = 0; p < window; ++p)
                        for (std::size_t q = 0; q < window; ++q)
                            gxch[(oy * window + p) * w + ox * window + q] += g;
                }
        }
    return gx;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y(x.shape);
    ops().relu(y.data.data(), x.data.data(), x.numel());
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.shape);
    ops().relu_grad(gx.data.data(), x.data.data(), gy.data.data(), x.numel());
    return gx;
}

Tensor masked(const Tensor& w, const Tensor& mask) {
    Tensor out = w;
    ops().hadamard(out.data.data(), mask.data.data(), out.numel());
    return out;
}

void split_pos_neg(const Tensor& w, Tensor& pos, Tensor& neg) {
    pos = Tensor(w.shape);
    neg = Tensor(w.shape);
    for (std::size_t i = 0; i < w.numel(); ++i) {
        if (w.data[i] >= 0.0)
            pos.data[i] = w.data[i];
        else
            neg.data[i] = w.data[i];
    }
}

void check_finite(const Tensor& t, const char* what) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + what);
}

}  // namespace prunelab::detail
