#include "biolite/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace biolite {

namespace {

template <typename T>
void check_depthwise_shapes(const Tensor4T<T>& x, const Tensor4T<T>& kernel) {
    const Shape& ks = kernel.shape();
    if (ks.c != 1 || ks.h != 3 || ks.w != 3) {
        throw ShapeError("depthwise3x3: kernel must be (c,1,3,3), got " + ks.str());
    }
    if (x.shape().c != ks.n) {
        throw ShapeError("depthwise3x3: input channels " + std::to_string(x.shape().c) +
                         " != kernel channels " + std::to_string(ks.n));
    }
}

template <typename T>
void check_pointwise_shapes(const Tensor4T<T>& x, const Tensor4T<T>& kernel) {
    const Shape& ks = kernel.shape();
    if (ks.h != 1 || ks.w != 1) {
        throw ShapeError("pointwise1x1: kernel must be (c_out,c_in,1,1), got " + ks.str());
    }
    if (x.shape().c != ks.c) {
        throw ShapeError("pointwise1x1: input channels " + std::to_string(x.shape().c) +
                         " != kernel input channels " + std::to_string(ks.c));
    }
}

template <typename T>
void check_bias(std::span<const T> bias, int expected, const char* op) {
    if (static_cast<int>(bias.size()) != expected) {
        throw ShapeError(std::string(op) + ": bias size " + std::to_string(bias.size()) +
                         " != " + std::to_string(expected));
    }
}

// Copies one H*W plane into an (H+2)*(W+2) zero-padded buffer so the 3x3
// stencil loops run branch-free. Only the one-pixel border is zeroed.
template <typename T>
void pad_plane(std::span<const T> src, int h, int w, std::vector<T>& pad) {
    const int pw = w + 2;
    std::fill(pad.begin(), pad.begin() + pw, T{});
    std::fill(pad.end() - pw, pad.end(), T{});
    for (int i = 0; i < h; ++i) {
        T* row = pad.data() + static_cast<std::size_t>(i + 1) * pw;
        row[0] = T{};
        row[w + 1] = T{};
        std::copy(src.begin() + static_cast<std::size_t>(i) * w,
                  src.begin() + static_cast<std::size_t>(i + 1) * w, row + 1);
    }
}

} // namespace

template <typename T>
Tensor4T<T> depthwise3x3_forward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                 std::span<const T> bias) {
    check_depthwise_shapes(x, kernel);
    check_bias(bias, kernel.shape().n, "depthwise3x3");
    const Shape& s = x.shape();
    Tensor4T<T> y(s, uninitialized);
    const int h = s.h, w = s.w;
    const int pw = w + 2;
    std::vector<T> pad(static_cast<std::size_t>(h + 2) * pw);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            pad_plane(x.plane(n, c), h, w, pad);
            const T* k = kernel.data() + kernel.offset(c, 0, 0, 0);
            const T b = bias[c];
            T* out = y.data() + y.offset(n, c, 0, 0);
            for (int i = 0; i < h; ++i) {
                const T* r0 = pad.data() + static_cast<std::size_t>(i) * pw;
                const T* r1 = r0 + pw;
                const T* r2 = r1 + pw;
                T* yo = out + static_cast<std::size_t>(i) * w;
                for (int j = 0; j < w; ++j) {
                    yo[j] = b + k[0] * r0[j] + k[1] * r0[j + 1] + k[2] * r0[j + 2] +
                            k[3] * r1[j] + k[4] * r1[j + 1] + k[5] * r1[j + 2] +
                            k[6] * r2[j] + k[7] * r2[j + 1] + k[8] * r2[j + 2];
                }
            }
        }
    }
    return y;
}

template <typename T>
ConvGrads<T> depthwise3x3_backward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                   const Tensor4T<T>& dy) {
    check_depthwise_shapes(x, kernel);
    if (!x.same_shape(dy)) {
        throw InternalError("depthwise3x3_backward: dy shape " + dy.shape().str() +
                            " != cached input shape " + x.shape().str());
    }
    const Shape& s = x.shape();
    ConvGrads<T> g;
    g.dx = Tensor4T<T>(s, uninitialized);
    g.dkernel = Tensor4T<T>(kernel.shape());
    g.dbias.assign(s.c, T{});

    const int h = s.h, w = s.w;
    const int pw = w + 2;
    std::vector<T> pad_x(static_cast<std::size_t>(h + 2) * pw);
    std::vector<T> pad_dy(static_cast<std::size_t>(h + 2) * pw);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            pad_plane(x.plane(n, c), h, w, pad_x);
            pad_plane(dy.plane(n, c), h, w, pad_dy);
            const T* k = kernel.data() + kernel.offset(c, 0, 0, 0);
            T* dk = g.dkernel.data() + g.dkernel.offset(c, 0, 0, 0);
            T* dxo = g.dx.data() + g.dx.offset(n, c, 0, 0);
            const T* dyo = dy.data() + dy.offset(n, c, 0, 0);

            // dx = dy correlated with the 180deg-flipped kernel (same padded stencil).
            for (int i = 0; i < h; ++i) {
                const T* r0 = pad_dy.data() + static_cast<std::size_t>(i) * pw;
                const T* r1 = r0 + pw;
                const T* r2 = r1 + pw;
                T* row = dxo + static_cast<std::size_t>(i) * w;
                for (int j = 0; j < w; ++j) {
                    row[j] = k[8] * r0[j] + k[7] * r0[j + 1] + k[6] * r0[j + 2] +
                             k[5] * r1[j] + k[4] * r1[j + 1] + k[3] * r1[j + 2] +
                             k[2] * r2[j] + k[1] * r2[j + 1] + k[0] * r2[j + 2];
                }
            }

            // dk[di,dj] = sum_{i,j} dy[i,j] * x_pad[i+di, j+dj]; db = sum dy.
            T a0{}, a1{}, a2{}, a3{}, a4{}, a5{}, a6{}, a7{}, a8{}, ab{};
            for (int i = 0; i < h; ++i) {
                const T* x0 = pad_x.data() + static_cast<std::size_t>(i) * pw;
                const T* x1 = x0 + pw;
                const T* x2 = x1 + pw;
                const T* dr = dyo + static_cast<std::size_t>(i) * w;
#pragma omp simd reduction(+ : a0, a1, a2, a3, a4, a5, a6, a7, a8, ab)
                for (int j = 0; j < w; ++j) {
                    const T d = dr[j];
                    a0 += d * x0[j];
                    a1 += d * x0[j + 1];
                    a2 += d * x0[j + 2];
                    a3 += d * x1[j];
                    a4 += d * x1[j + 1];
                    a5 += d * x1[j + 2];
                    a6 += d * x2[j];
                    a7 += d * x2[j + 1];
                    a8 += d * x2[j + 2];
                    ab += d;
                }
            }
            dk[0] += a0; dk[1] += a1; dk[2] += a2;
            dk[3] += a3; dk[4] += a4; dk[5] += a5;
            dk[6] += a6; dk[7] += a7; dk[8] += a8;
            g.dbias[c] += ab;
        }
    }
    return g;
}

template <typename T>
Tensor4T<T> pointwise1x1_forward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                 std::span<const T> bias) {
    check_pointwise_shapes(x, kernel);
    check_bias(bias, kernel.shape().n, "pointwise1x1");
    const Shape& s = x.shape();
    const int ci = s.c;
    const int co = kernel.shape().n;
    Tensor4T<T> y(Shape{s.n, co, s.h, s.w}, uninitialized);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    constexpr std::size_t kBlock = 4096; // keep the input block set L2-resident
    const T* kd = kernel.data();
    for (int n = 0; n < s.n; ++n) {
        for (std::size_t p0 = 0; p0 < plane; p0 += kBlock) {
            const std::size_t len = std::min(kBlock, plane - p0);
            for (int o = 0; o < co; ++o) {
                T* yo = y.data() + y.offset(n, o, 0, 0) + p0;
                const T b = bias[o];
                for (std::size_t t = 0; t < len; ++t) yo[t] = b;
                const T* krow = kd + static_cast<std::size_t>(o) * ci;
                for (int c = 0; c < ci; ++c) {
                    const T wgt = krow[c];
                    const T* xi = x.data() + x.offset(n, c, 0, 0) + p0;
                    for (std::size_t t = 0; t < len; ++t) yo[t] += wgt * xi[t];
                }
            }
        }
    }
    return y;
}

template <typename T>
ConvGrads<T> pointwise1x1_backward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                   const Tensor4T<T>& dy) {
    check_pointwise_shapes(x, kernel);
    const Shape& s = x.shape();
    const int ci = s.c;
    const int co = kernel.shape().n;
    if (dy.shape().n != s.n || dy.shape().c != co || dy.shape().h != s.h ||
        dy.shape().w != s.w) {
        throw InternalError("pointwise1x1_backward: dy shape " + dy.shape().str() +
                            " inconsistent with cached forward");
    }
    ConvGrads<T> g;
    g.dx = Tensor4T<T>(s, uninitialized);
    g.dkernel = Tensor4T<T>(kernel.shape());
    g.dbias.assign(co, T{});

    // Single blocked pass: x and dy stream from memory once; the block set
    // stays cache-resident across the channel loops.
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    constexpr std::size_t kBlock = 4096;
    const T* kd = kernel.data();
    for (int n = 0; n < s.n; ++n) {
        for (std::size_t p0 = 0; p0 < plane; p0 += kBlock) {
            const std::size_t len = std::min(kBlock, plane - p0);
            for (int c = 0; c < ci; ++c) {
                T* dxo = g.dx.data() + g.dx.offset(n, c, 0, 0) + p0;
                {
                    const T wgt = kd[c];
                    const T* dyo = dy.data() + dy.offset(n, 0, 0, 0) + p0;
                    for (std::size_t t = 0; t < len; ++t) dxo[t] = wgt * dyo[t];
                }
                for (int o = 1; o < co; ++o) {
                    const T wgt = kd[static_cast<std::size_t>(o) * ci + c];
                    const T* dyo = dy.data() + dy.offset(n, o, 0, 0) + p0;
                    for (std::size_t t = 0; t < len; ++t) dxo[t] += wgt * dyo[t];
                }
            }
            for (int o = 0; o < co; ++o) {
                const T* dyo = dy.data() + dy.offset(n, o, 0, 0) + p0;
                T accb{};
#pragma omp simd reduction(+ : accb)
                for (std::size_t t = 0; t < len; ++t) accb += dyo[t];
                g.dbias[o] += accb;
                T* dkrow = g.dkernel.data() + static_cast<std::size_t>(o) * ci;
                for (int c = 0; c < ci; ++c) {
                    const T* xi = x.data() + x.offset(n, c, 0, 0) + p0;
                    T acc{};
#pragma omp simd reduction(+ : acc)
                    for (std::size_t t = 0; t < len; ++t) acc += dyo[t] * xi[t];
                    dkrow[c] += acc;
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor4T<T> relu_forward(const Tensor4T<T>& x) {
    Tensor4T<T> y(x.shape(), uninitialized);
    auto xi = x.flat();
    auto yo = y.flat();
    for (std::size_t i = 0; i < xi.size(); ++i) yo[i] = xi[i] > T{} ? xi[i] : T{};
    return y;
}

template <typename T>
Tensor4T<T> relu_backward(const Tensor4T<T>& x, const Tensor4T<T>& dy) {
    if (!x.same_shape(dy)) {
        throw InternalError("relu_backward: dy shape " + dy.shape().str() +
                            " != cached input shape " + x.shape().str());
    }
    Tensor4T<T> dx(x.shape(), uninitialized);
    auto xi = x.flat();
    auto di = dy.flat();
    auto dxo = dx.flat();
    for (std::size_t i = 0; i < xi.size(); ++i) dxo[i] = xi[i] > T{} ? di[i] : T{};
    return dx;
}

template <typename T>
MaxPoolResult<T> maxpool2x2_forward(const Tensor4T<T>& x) {
    const Shape& s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw ShapeError("maxpool2x2: spatial dims must be even, got " + s.str());
    }
    MaxPoolResult<T> r;
    r.y = Tensor4T<T>(Shape{s.n, s.c, s.h / 2, s.w / 2}, uninitialized);
    r.argmax.resize(r.y.size());
    std::size_t oidx = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int i = 0; i < s.h; i += 2) {
                for (int j = 0; j < s.w; j += 2) {
                    std::size_t base = x.offset(n, c, i, j);
                    const std::size_t cand[4] = {base, base + 1, base + s.w, base + s.w + 1};
                    std::size_t best = cand[0];
                    T bv = x.flat()[cand[0]];
                    for (int t = 1; t < 4; ++t) {
                        T v = x.flat()[cand[t]];
                        if (v > bv) { // strict: first occurrence wins ties
                            bv = v;
                            best = cand[t];
                        }
                    }
                    r.y.flat()[oidx] = bv;
                    r.argmax[oidx] = static_cast<int64_t>(best);
                    ++oidx;
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor4T<T> maxpool2x2_backward(const std::vector<int64_t>& argmax, const Tensor4T<T>& dy,
                                const Shape& input_shape) {
    if (argmax.size() != dy.size()) {
        throw InternalError("maxpool2x2_backward: argmax size " +
                            std::to_string(argmax.size()) + " != dy elems " +
                            std::to_string(dy.size()));
    }
    Tensor4T<T> dx(input_shape);
    auto din = dy.flat();
    auto dout = dx.flat();
    for (std::size_t i = 0; i < din.size(); ++i) {
        dout[static_cast<std::size_t>(argmax[i])] += din[i];
    }
    return dx;
}

namespace {

// Per-axis sampling taps for the 2x upsample: dst -> (lo, hi, frac).
struct UpTap {
    int lo;
    int hi;
    double frac;
};

inline UpTap up2x_tap(int dst, int src_size) {
    const double sx = (dst + 0.5) / 2.0 - 0.5;
    double fl = std::floor(sx);
    int lo = static_cast<int>(fl);
    double frac = sx - fl;
    int hi = lo + 1;
    if (lo < 0) lo = 0;
    if (hi > src_size - 1) hi = src_size - 1;
    if (lo > src_size - 1) lo = src_size - 1;
    return {lo, hi, frac};
}

} // namespace

template <typename T>
Tensor4T<T> bilinear_up2x_forward(const Tensor4T<T>& x) {
    const Shape& s = x.shape();
    Tensor4T<T> y(Shape{s.n, s.c, s.h * 2, s.w * 2}, uninitialized);
    std::vector<UpTap> tx(static_cast<std::size_t>(s.w) * 2), ty(static_cast<std::size_t>(s.h) * 2);
    for (int j = 0; j < s.w * 2; ++j) tx[j] = up2x_tap(j, s.w);
    for (int i = 0; i < s.h * 2; ++i) ty[i] = up2x_tap(i, s.h);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            auto src = x.plane(n, c);
            auto dst = y.plane(n, c);
            for (int i = 0; i < s.h * 2; ++i) {
                const UpTap& t_i = ty[i];
                const T* r0 = src.data() + static_cast<std::size_t>(t_i.lo) * s.w;
                const T* r1 = src.data() + static_cast<std::size_t>(t_i.hi) * s.w;
                const T fy = static_cast<T>(t_i.frac);
                T* out = dst.data() + static_cast<std::size_t>(i) * s.w * 2;
                for (int j = 0; j < s.w * 2; ++j) {
                    const UpTap& t_j = tx[j];
                    const T fx = static_cast<T>(t_j.frac);
                    const T top = r0[t_j.lo] + fx * (r0[t_j.hi] - r0[t_j.lo]);
                    const T bot = r1[t_j.lo] + fx * (r1[t_j.hi] - r1[t_j.lo]);
                    out[j] = top + fy * (bot - top);
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor4T<T> bilinear_up2x_backward(const Tensor4T<T>& dy) {
    const Shape& s = dy.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw ShapeError("bilinear_up2x_backward: dy spatial dims must be even, got " +
                         s.str());
    }
    const int sh = s.h / 2, sw = s.w / 2;
    Tensor4T<T> dx(Shape{s.n, s.c, sh, sw});
    std::vector<UpTap> tx(static_cast<std::size_t>(s.w)), ty(static_cast<std::size_t>(s.h));
    for (int j = 0; j < s.w; ++j) tx[j] = up2x_tap(j, sw);
    for (int i = 0; i < s.h; ++i) ty[i] = up2x_tap(i, sh);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            auto src = dy.plane(n, c);
            auto dst = dx.plane(n, c);
            for (int i = 0; i < s.h; ++i) {
                const UpTap& t_i = ty[i];
                const T fy = static_cast<T>(t_i.frac);
                const T* row = src.data() + static_cast<std::size_t>(i) * s.w;
                T* d0 = dst.data() + static_cast<std::size_t>(t_i.lo) * sw;
                T* d1 = dst.data() + static_cast<std::size_t>(t_i.hi) * sw;
                for (int j = 0; j < s.w; ++j) {
                    const UpTap& t_j = tx[j];
                    const T fx = static_cast<T>(t_j.frac);
                    const T g = row[j];
                    d0[t_j.lo] += (T{1} - fy) * (T{1} - fx) * g;
                    d0[t_j.hi] += (T{1} - fy) * fx * g;
                    d1[t_j.lo] += fy * (T{1} - fx) * g;
                    d1[t_j.hi] += fy * fx * g;
                }
            }
        }
    }
    return dx;
}

template <typename T>
Tensor4T<T> softmax_channels(const Tensor4T<T>& x) {
    const Shape& s = x.shape();
    Tensor4T<T> y(s, uninitialized);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    std::vector<const T*> in(s.c);
    std::vector<T*> out(s.c);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            in[c] = x.data() + x.offset(n, c, 0, 0);
            out[c] = y.data() + y.offset(n, c, 0, 0);
        }
        for (std::size_t p = 0; p < plane; ++p) {
            T m = in[0][p];
            for (int c = 1; c < s.c; ++c) m = std::max(m, in[c][p]);
            T sum{};
            for (int c = 0; c < s.c; ++c) {
                const T e = std::exp(in[c][p] - m);
                out[c][p] = e;
                sum += e;
            }
            const T inv = T{1} / sum;
            for (int c = 0; c < s.c; ++c) out[c][p] *= inv;
        }
    }
    return y;
}

template <typename T>
Tensor4T<T> dwsep_forward(const Tensor4T<T>& x, const DwSepParamsT<T>& params,
                          Activation act, DwSepCache<T>* cache) {
    Tensor4T<T> dw = depthwise3x3_forward(x, params.dw_kernel, std::span<const T>(params.dw_bias));
    Tensor4T<T> pre = pointwise1x1_forward(dw, params.pw_kernel, std::span<const T>(params.pw_bias));
    if (cache) {
        Tensor4T<T> y = (act == Activation::relu) ? relu_forward(pre) : pre;
        cache->dw_out = std::move(dw);
        cache->pre_act = std::move(pre);
        return y;
    }
    if (act == Activation::relu) {
        for (T& v : pre.flat()) v = v > T{} ? v : T{};
    }
    return pre;
}

template <typename T>
DwSepGrads<T> dwsep_backward(const Tensor4T<T>& input, const DwSepCache<T>& cache,
                             const DwSepParamsT<T>& params, Activation act,
                             const Tensor4T<T>& dy) {
    if (input.empty() || cache.dw_out.empty() || cache.pre_act.empty()) {
        throw InternalError("dwsep_backward: forward cache missing");
    }
    Tensor4T<T> d_pre =
        (act == Activation::relu) ? relu_backward(cache.pre_act, dy) : dy;
    ConvGrads<T> pw = pointwise1x1_backward(cache.dw_out, params.pw_kernel, d_pre);
    ConvGrads<T> dw = depthwise3x3_backward(input, params.dw_kernel, pw.dx);
    DwSepGrads<T> g;
    g.dx = std::move(dw.dx);
    g.dparams.dw_kernel = std::move(dw.dkernel);
    g.dparams.dw_bias = std::move(dw.dbias);
    g.dparams.pw_kernel = std::move(pw.dkernel);
    g.dparams.pw_bias = std::move(pw.dbias);
    return g;
}

int64_t dwsep_param_count(int c_in, int c_out) {
    return static_cast<int64_t>(c_in) * 9 + c_in +
           static_cast<int64_t>(c_in) * c_out + c_out;
}

#define BIOLITE_INSTANTIATE(T)                                                              \
    template Tensor4T<T> depthwise3x3_forward<T>(const Tensor4T<T>&, const Tensor4T<T>&,    \
                                                 std::span<const T>);                       \
    template ConvGrads<T> depthwise3x3_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&,  \
                                                   const Tensor4T<T>&);                     \
    template Tensor4T<T> pointwise1x1_forward<T>(const Tensor4T<T>&, const Tensor4T<T>&,    \
                                                 std::span<const T>);                       \
    template ConvGrads<T> pointwise1x1_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&,  \
                                                   const Tensor4T<T>&);                     \
    template Tensor4T<T> relu_forward<T>(const Tensor4T<T>&);                               \
    template Tensor4T<T> relu_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&);          \
    template MaxPoolResult<T> maxpool2x2_forward<T>(const Tensor4T<T>&);                    \
    template Tensor4T<T> maxpool2x2_backward<T>(const std::vector<int64_t>&,                \
                                                const Tensor4T<T>&, const Shape&);          \
    template Tensor4T<T> bilinear_up2x_forward<T>(const Tensor4T<T>&);                      \
    template Tensor4T<T> bilinear_up2x_backward<T>(const Tensor4T<T>&);                     \
    template Tensor4T<T> softmax_channels<T>(const Tensor4T<T>&);                           \
    template Tensor4T<T> dwsep_forward<T>(const Tensor4T<T>&, const DwSepParamsT<T>&,       \
                                          Activation, DwSepCache<T>*);                      \
    template DwSepGrads<T> dwsep_backward<T>(const Tensor4T<T>&, const DwSepCache<T>&,      \
                                             const DwSepParamsT<T>&, Activation,            \
                                             const Tensor4T<T>&);

BIOLITE_INSTANTIATE(float)
BIOLITE_INSTANTIATE(double)

#undef BIOLITE_INSTANTIATE

} // namespace biolite
