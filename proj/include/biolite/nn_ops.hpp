#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biolite/tensor.hpp"

namespace biolite {

// Layer kernels for the depthwise-separable U-Net. Every forward has a matching
// backward; all are pure functions and bitwise-deterministic single-threaded.
// The same code instantiates for float (production) and double (finite-difference
// shadow mode used by the gradient checks).

// Parameters of one depthwise-separable block:
//   3x3 depthwise kernel (c_in, 1, 3, 3) + per-channel bias,
//   1x1 pointwise kernel (c_out, c_in, 1, 1) + per-output bias.
template <typename T>
struct DwSepParamsT {
    Tensor4T<T> dw_kernel;
    std::vector<T> dw_bias;
    Tensor4T<T> pw_kernel;
    std::vector<T> pw_bias;
};

using DwSepParams = DwSepParamsT<float>;

enum class Activation { identity, relu };

// --- depthwise 3x3, zero padding 1 (same-size output) ---

template <typename T>
Tensor4T<T> depthwise3x3_forward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                 std::span<const T> bias);

template <typename T>
struct ConvGrads {
    Tensor4T<T> dx;
    Tensor4T<T> dkernel;
    std::vector<T> dbias;
};

template <typename T>
ConvGrads<T> depthwise3x3_backward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                   const Tensor4T<T>& dy);

// --- pointwise 1x1 ---

template <typename T>
Tensor4T<T> pointwise1x1_forward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                 std::span<const T> bias);

template <typename T>
ConvGrads<T> pointwise1x1_backward(const Tensor4T<T>& x, const Tensor4T<T>& kernel,
                                   const Tensor4T<T>& dy);

// --- ReLU ---

template <typename T>
Tensor4T<T> relu_forward(const Tensor4T<T>& x);

template <typename T>
Tensor4T<T> relu_backward(const Tensor4T<T>& x, const Tensor4T<T>& dy);

// --- 2x2 max pool, stride 2 ---
// argmax stores the flat input offset of each window winner; ties resolve to
// the first occurrence in row-major window order so backward routing is
// deterministic.

template <typename T>
struct MaxPoolResult {
    Tensor4T<T> y;
    std::vector<int64_t> argmax;
};

template <typename T>
MaxPoolResult<T> maxpool2x2_forward(const Tensor4T<T>& x);

template <typename T>
Tensor4T<T> maxpool2x2_backward(const std::vector<int64_t>& argmax, const Tensor4T<T>& dy,
                                const Shape& input_shape);

// --- bilinear 2x upsample ---
// Half-pixel-center sampling: src = (dst + 0.5)/2 - 0.5, clamped to borders.
// Backward is the exact transpose of the forward linear map.

template <typename T>
Tensor4T<T> bilinear_up2x_forward(const Tensor4T<T>& x);

template <typename T>
Tensor4T<T> bilinear_up2x_backward(const Tensor4T<T>& dy);

// --- softmax over the channel axis (per pixel), max-subtracted ---

template <typename T>
Tensor4T<T> softmax_channels(const Tensor4T<T>& x);

// --- composed depthwise-separable block: depthwise -> pointwise -> activation ---

template <typename T>
struct DwSepCache {
    Tensor4T<T> dw_out;   // after depthwise stage
    Tensor4T<T> pre_act;  // after pointwise stage, before activation
};

template <typename T>
Tensor4T<T> dwsep_forward(const Tensor4T<T>& x, const DwSepParamsT<T>& params,
                          Activation act, DwSepCache<T>* cache = nullptr);

template <typename T>
struct DwSepGrads {
    Tensor4T<T> dx;
    DwSepParamsT<T> dparams;
};

// `input` is the tensor the forward pass consumed (the caller already keeps
// it; caching it again would double the activation memory).
template <typename T>
DwSepGrads<T> dwsep_backward(const Tensor4T<T>& input, const DwSepCache<T>& cache,
                             const DwSepParamsT<T>& params, Activation act,
                             const Tensor4T<T>& dy);

// Parameter count of one block including biases.
int64_t dwsep_param_count(int c_in, int c_out);

} // namespace biolite
