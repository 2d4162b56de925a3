#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "biolite/nn_ops.hpp"
#include "biolite/tensor.hpp"

namespace biolite {

// Channel widths of the two-level encoder/decoder. The defaults are calibrated
// so the network lands at ~0.01M parameters and ~0.44 GFLOPs for a 256x256
// input (see count_params/count_flops).
struct ArchConfig {
    int in_channels = 3;
    int num_classes = 3;
    std::array<int, 2> enc_channels = {16, 32};
    int bottleneck_channels = 64;
    std::array<int, 2> dec_channels = {40, 16};

    bool operator==(const ArchConfig&) const = default;

    void validate() const;

    // Decoder blocks consume [upsampled | encoder skip] concatenations.
    int dec1_in_channels() const { return bottleneck_channels + enc_channels[1]; }
    int dec2_in_channels() const { return dec_channels[0] + enc_channels[0]; }
};

// All learnable state of the network. Tensors enumerate in a fixed order
// (see entries()); serialization and the optimizer both rely on it.
template <typename T>
struct BioliteParamsT {
    ArchConfig config;
    uint64_t rng_seed = 0;

    DwSepParamsT<T> enc1, enc2, bottleneck, dec1, dec2;
    Tensor4T<T> head_kernel;   // (num_classes, dec_channels[1], 1, 1)
    std::vector<T> head_bias;  // num_classes
};

using ModelParams = BioliteParamsT<float>;

// Mutable view of one named parameter tensor (weights or bias vector).
template <typename T>
struct ParamEntry {
    std::string name;
    std::vector<int> dims; // rank 4 for kernels, rank 1 for biases
    T* data;
    std::size_t size;
};

// Fixed enumeration order:
//   enc1.dw.weight, enc1.dw.bias, enc1.pw.weight, enc1.pw.bias,
//   enc2.*, bottleneck.*, dec1.*, dec2.*, head.weight, head.bias
template <typename T>
std::vector<ParamEntry<T>> param_entries(BioliteParamsT<T>& params);

// Fan-in-scaled uniform init, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); biases zero.
// Deterministic for a given (config, seed).
ModelParams build_params(const ArchConfig& config, uint64_t seed);

// Zero-valued parameter structure of the same geometry (gradients, moments).
template <typename T>
BioliteParamsT<T> zero_params(const ArchConfig& config);

BioliteParamsT<double> to_double(const ModelParams& params);
ModelParams to_float(const BioliteParamsT<double>& params);

// Activations retained by forward() for the backward pass.
template <typename T>
struct ForwardCacheT {
    bool valid = false;
    DwSepCache<T> enc1, enc2, bottleneck, dec1, dec2;
    Tensor4T<T> input;              // model input (enc1's input)
    Tensor4T<T> enc1_out, enc2_out; // skip sources
    Tensor4T<T> pool1_out, pool2_out;
    std::vector<int64_t> pool1_argmax, pool2_argmax;
    Shape pool1_in, pool2_in;
    Tensor4T<T> cat1, cat2; // decoder concat inputs
    Tensor4T<T> dec2_out;
};

using ForwardCache = ForwardCacheT<float>;

// Full network: enc1 -> pool -> enc2 -> pool -> bottleneck -> up ->
// concat(enc2) -> dec1 -> up -> concat(enc1) -> dec2 -> 1x1 head.
// Returns raw logits; softmax is the caller's business (loss or inference).
// Input spatial dims must be divisible by 4.
template <typename T>
Tensor4T<T> model_forward(const BioliteParamsT<T>& params, const Tensor4T<T>& x,
                          ForwardCacheT<T>* cache = nullptr);

// Gradients mirror the parameter structure exactly.
template <typename T>
BioliteParamsT<T> model_backward(const BioliteParamsT<T>& params,
                                 const ForwardCacheT<T>& cache,
                                 const Tensor4T<T>& dlogits);

int64_t count_params(const ArchConfig& config);

// Analytic FLOP count for one forward pass; one multiply-add = 2 FLOPs.
// Per layer type:
//   depthwise 3x3:  2*9*C*H*W            + C*H*W bias adds
//   pointwise 1x1:  2*Cin*Cout*H*W       + Cout*H*W bias adds
//   ReLU:           C*H*W
//   maxpool 2x2:    3 comparisons per output element
//   bilinear up2x:  7 per output element (4 mul + 3 add)
//   concat:         0 (copies)
int64_t count_flops(const ArchConfig& config, int h, int w);

// Per-layer complexity/shape breakdown used by `describe` and its tests.
struct LayerRow {
    std::string name;
    std::string kind;
    Shape out_shape;   // for batch size 1
    int64_t params;
    int64_t flops;
};

std::vector<LayerRow> describe_layers(const ArchConfig& config, int h, int w);

} // namespace biolite
