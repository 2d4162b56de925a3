#include "biolite/model.hpp"

#include <cmath>

#include "biolite/rng.hpp"

namespace biolite {

void ArchConfig::validate() const {
    if (in_channels <= 0 || num_classes <= 0 || enc_channels[0] <= 0 ||
        enc_channels[1] <= 0 || bottleneck_channels <= 0 || dec_channels[0] <= 0 ||
        dec_channels[1] <= 0) {
        throw ShapeError("ArchConfig: all channel counts must be positive");
    }
}

namespace {

template <typename T>
DwSepParamsT<T> zero_block(int c_in, int c_out) {
    DwSepParamsT<T> p;
    p.dw_kernel = Tensor4T<T>(Shape{c_in, 1, 3, 3});
    p.dw_bias.assign(c_in, T{});
    p.pw_kernel = Tensor4T<T>(Shape{c_out, c_in, 1, 1});
    p.pw_bias.assign(c_out, T{});
    return p;
}

template <typename T>
void block_entries(const std::string& prefix, DwSepParamsT<T>& b,
                   std::vector<ParamEntry<T>>& out) {
    const Shape& dk = b.dw_kernel.shape();
    const Shape& pk = b.pw_kernel.shape();
    out.push_back({prefix + ".dw.weight", {dk.n, dk.c, dk.h, dk.w},
                   b.dw_kernel.data(), b.dw_kernel.size()});
    out.push_back({prefix + ".dw.bias", {static_cast<int>(b.dw_bias.size())},
                   b.dw_bias.data(), b.dw_bias.size()});
    out.push_back({prefix + ".pw.weight", {pk.n, pk.c, pk.h, pk.w},
                   b.pw_kernel.data(), b.pw_kernel.size()});
    out.push_back({prefix + ".pw.bias", {static_cast<int>(b.pw_bias.size())},
                   b.pw_bias.data(), b.pw_bias.size()});
}

// Kaiming-uniform bound: sqrt(6 / fan_in). Fan-in is 9 for a 3x3 depthwise
// kernel (one input channel per group) and c_in for 1x1 kernels.
template <typename T>
void init_uniform(T* data, std::size_t n, double fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
}

} // namespace

template <typename T>
std::vector<ParamEntry<T>> param_entries(BioliteParamsT<T>& params) {
    std::vector<ParamEntry<T>> out;
    out.reserve(22);
    block_entries("enc1", params.enc1, out);
    block_entries("enc2", params.enc2, out);
    block_entries("bottleneck", params.bottleneck, out);
    block_entries("dec1", params.dec1, out);
    block_entries("dec2", params.dec2, out);
    const Shape& hk = params.head_kernel.shape();
    out.push_back({"head.weight", {hk.n, hk.c, hk.h, hk.w}, params.head_kernel.data(),
                   params.head_kernel.size()});
    out.push_back({"head.bias", {static_cast<int>(params.head_bias.size())},
                   params.head_bias.data(), params.head_bias.size()});
    return out;
}

template <typename T>
BioliteParamsT<T> zero_params(const ArchConfig& config) {
    config.validate();
    BioliteParamsT<T> p;
    p.config = config;
    p.enc1 = zero_block<T>(config.in_channels, config.enc_channels[0]);
    p.enc2 = zero_block<T>(config.enc_channels[0], config.enc_channels[1]);
    p.bottleneck = zero_block<T>(config.enc_channels[1], config.bottleneck_channels);
    p.dec1 = zero_block<T>(config.dec1_in_channels(), config.dec_channels[0]);
    p.dec2 = zero_block<T>(config.dec2_in_channels(), config.dec_channels[1]);
    p.head_kernel = Tensor4T<T>(Shape{config.num_classes, config.dec_channels[1], 1, 1});
    p.head_bias.assign(config.num_classes, T{});
    return p;
}

ModelParams build_params(const ArchConfig& config, uint64_t seed) {
    ModelParams p = zero_params<float>(config);
    p.rng_seed = seed;
    Rng rng(derive_seed(seed, "model-init"));
    auto init_block = [&rng](DwSepParams& b) {
        init_uniform(b.dw_kernel.data(), b.dw_kernel.size(), 9.0, rng);
        init_uniform(b.pw_kernel.data(), b.pw_kernel.size(),
                     static_cast<double>(b.pw_kernel.shape().c), rng);
        // biases stay zero
    };
    init_block(p.enc1);
    init_block(p.enc2);
    init_block(p.bottleneck);
    init_block(p.dec1);
    init_block(p.dec2);
    init_uniform(p.head_kernel.data(), p.head_kernel.size(),
                 static_cast<double>(p.head_kernel.shape().c), rng);
    return p;
}

BioliteParamsT<double> to_double(const ModelParams& params) {
    BioliteParamsT<double> out = zero_params<double>(params.config);
    out.rng_seed = params.rng_seed;
    auto src = param_entries(const_cast<ModelParams&>(params));
    auto dst = param_entries(out);
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = 0; j < src[i].size; ++j) {
            dst[i].data[j] = static_cast<double>(src[i].data[j]);
        }
    }
    return out;
}

ModelParams to_float(const BioliteParamsT<double>& params) {
    ModelParams out = zero_params<float>(params.config);
    out.rng_seed = params.rng_seed;
    auto src = param_entries(const_cast<BioliteParamsT<double>&>(params));
    auto dst = param_entries(out);
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = 0; j < src[i].size; ++j) {
            dst[i].data[j] = static_cast<float>(src[i].data[j]);
        }
    }
    return out;
}

template <typename T>
Tensor4T<T> model_forward(const BioliteParamsT<T>& params, const Tensor4T<T>& x,
                          ForwardCacheT<T>* cache) {
    const Shape& s = x.shape();
    if (s.c != params.config.in_channels) {
        throw ShapeError("model_forward: input has " + std::to_string(s.c) +
                         " channels, expected " + std::to_string(params.config.in_channels));
    }
    if (s.h % 4 != 0 || s.w % 4 != 0) {
        throw ShapeError("model_forward: spatial dims must be divisible by 4, got " +
                         s.str());
    }

    DwSepCache<T> c_enc1, c_enc2, c_bott, c_dec1, c_dec2;
    DwSepCache<T>* p_enc1 = cache ? &c_enc1 : nullptr;
    DwSepCache<T>* p_enc2 = cache ? &c_enc2 : nullptr;
    DwSepCache<T>* p_bott = cache ? &c_bott : nullptr;
    DwSepCache<T>* p_dec1 = cache ? &c_dec1 : nullptr;
    DwSepCache<T>* p_dec2 = cache ? &c_dec2 : nullptr;

    Tensor4T<T> enc1_out = dwsep_forward(x, params.enc1, Activation::relu, p_enc1);
    MaxPoolResult<T> pool1 = maxpool2x2_forward(enc1_out);
    Tensor4T<T> enc2_out = dwsep_forward(pool1.y, params.enc2, Activation::relu, p_enc2);
    MaxPoolResult<T> pool2 = maxpool2x2_forward(enc2_out);
    Tensor4T<T> bott_out = dwsep_forward(pool2.y, params.bottleneck, Activation::relu, p_bott);

    Tensor4T<T> up1 = bilinear_up2x_forward(bott_out);
    Tensor4T<T> cat1 = concat_channels(up1, enc2_out);
    Tensor4T<T> dec1_out = dwsep_forward(cat1, params.dec1, Activation::relu, p_dec1);

    Tensor4T<T> up2 = bilinear_up2x_forward(dec1_out);
    Tensor4T<T> cat2 = concat_channels(up2, enc1_out);
    Tensor4T<T> dec2_out = dwsep_forward(cat2, params.dec2, Activation::relu, p_dec2);

    Tensor4T<T> logits = pointwise1x1_forward(dec2_out, params.head_kernel,
                                              std::span<const T>(params.head_bias));

    if (cache) {
        cache->valid = true;
        cache->enc1 = std::move(c_enc1);
        cache->enc2 = std::move(c_enc2);
        cache->bottleneck = std::move(c_bott);
        cache->dec1 = std::move(c_dec1);
        cache->dec2 = std::move(c_dec2);
        cache->input = x;
        cache->enc1_out = std::move(enc1_out);
        cache->enc2_out = std::move(enc2_out);
        cache->pool1_out = std::move(pool1.y);
        cache->pool2_out = std::move(pool2.y);
        cache->pool1_argmax = std::move(pool1.argmax);
        cache->pool2_argmax = std::move(pool2.argmax);
        cache->pool1_in = Shape{s.n, params.config.enc_channels[0], s.h, s.w};
        cache->pool2_in = Shape{s.n, params.config.enc_channels[1], s.h / 2, s.w / 2};
        cache->cat1 = std::move(cat1);
        cache->cat2 = std::move(cat2);
        cache->dec2_out = std::move(dec2_out);
    }
    return logits;
}

template <typename T>
BioliteParamsT<T> model_backward(const BioliteParamsT<T>& params,
                                 const ForwardCacheT<T>& cache,
                                 const Tensor4T<T>& dlogits) {
    if (!cache.valid) {
        throw InternalError("model_backward: forward cache missing (run forward with caching)");
    }
    const ArchConfig& cfg = params.config;
    BioliteParamsT<T> grads = zero_params<T>(cfg);

    // head (1x1 conv)
    ConvGrads<T> g_head = pointwise1x1_backward(cache.dec2_out, params.head_kernel, dlogits);
    grads.head_kernel = std::move(g_head.dkernel);
    grads.head_bias = std::move(g_head.dbias);

    // dec2 block, then split its input gradient into [up2 | enc1 skip]
    DwSepGrads<T> g_dec2 =
        dwsep_backward(cache.cat2, cache.dec2, params.dec2, Activation::relu, g_head.dx);
    grads.dec2 = std::move(g_dec2.dparams);
    Tensor4T<T> d_up2 = slice_channels(g_dec2.dx, 0, cfg.dec_channels[0]);
    Tensor4T<T> d_enc1_skip =
        slice_channels(g_dec2.dx, cfg.dec_channels[0], cfg.dec2_in_channels());

    Tensor4T<T> d_dec1_out = bilinear_up2x_backward(d_up2);

    DwSepGrads<T> g_dec1 =
        dwsep_backward(cache.cat1, cache.dec1, params.dec1, Activation::relu, d_dec1_out);
    grads.dec1 = std::move(g_dec1.dparams);
    Tensor4T<T> d_up1 = slice_channels(g_dec1.dx, 0, cfg.bottleneck_channels);
    Tensor4T<T> d_enc2_skip =
        slice_channels(g_dec1.dx, cfg.bottleneck_channels, cfg.dec1_in_channels());

    Tensor4T<T> d_bott_out = bilinear_up2x_backward(d_up1);

    DwSepGrads<T> g_bott = dwsep_backward(cache.pool2_out, cache.bottleneck,
                                           params.bottleneck, Activation::relu, d_bott_out);
    grads.bottleneck = std::move(g_bott.dparams);

    // enc2 output feeds both pool2 and the dec1 skip; gradients sum.
    Tensor4T<T> d_enc2_out = maxpool2x2_backward(cache.pool2_argmax, g_bott.dx, cache.pool2_in);
    add_inplace(d_enc2_out, d_enc2_skip);

    DwSepGrads<T> g_enc2 =
        dwsep_backward(cache.pool1_out, cache.enc2, params.enc2, Activation::relu, d_enc2_out);
    grads.enc2 = std::move(g_enc2.dparams);

    Tensor4T<T> d_enc1_out = maxpool2x2_backward(cache.pool1_argmax, g_enc2.dx, cache.pool1_in);
    add_inplace(d_enc1_out, d_enc1_skip);

    DwSepGrads<T> g_enc1 =
        dwsep_backward(cache.input, cache.enc1, params.enc1, Activation::relu, d_enc1_out);
    grads.enc1 = std::move(g_enc1.dparams);

    return grads;
}

int64_t count_params(const ArchConfig& config) {
    config.validate();
    int64_t total = 0;
    total += dwsep_param_count(config.in_channels, config.enc_channels[0]);
    total += dwsep_param_count(config.enc_channels[0], config.enc_channels[1]);
    total += dwsep_param_count(config.enc_channels[1], config.bottleneck_channels);
    total += dwsep_param_count(config.dec1_in_channels(), config.dec_channels[0]);
    total += dwsep_param_count(config.dec2_in_channels(), config.dec_channels[1]);
    total += static_cast<int64_t>(config.dec_channels[1]) * config.num_classes +
             config.num_classes;
    return total;
}

namespace {

int64_t dwsep_flops(int c_in, int c_out, int64_t hw) {
    const int64_t dw = 2 * 9 * c_in * hw + c_in * hw;      // MACs + bias
    const int64_t pw = 2 * static_cast<int64_t>(c_in) * c_out * hw + c_out * hw;
    const int64_t act = static_cast<int64_t>(c_out) * hw;  // ReLU
    return dw + pw + act;
}

} // namespace

std::vector<LayerRow> describe_layers(const ArchConfig& config, int h, int w) {
    config.validate();
    if (h % 4 != 0 || w % 4 != 0) {
        throw ShapeError("describe_layers: spatial dims must be divisible by 4");
    }
    const int64_t hw = static_cast<int64_t>(h) * w;
    const int64_t hw2 = hw / 4;   // after one pool
    const int64_t hw4 = hw / 16;  // after two pools
    const int c1 = config.enc_channels[0], c2 = config.enc_channels[1];
    const int c3 = config.bottleneck_channels;
    const int d1 = config.dec_channels[0], d2 = config.dec_channels[1];

    std::vector<LayerRow> rows;
    rows.push_back({"enc1", "dwsep+relu", Shape{1, c1, h, w},
                    dwsep_param_count(config.in_channels, c1),
                    dwsep_flops(config.in_channels, c1, hw)});
    rows.push_back({"pool1", "maxpool2x2", Shape{1, c1, h / 2, w / 2}, 0, 3 * c1 * hw2});
    rows.push_back({"enc2", "dwsep+relu", Shape{1, c2, h / 2, w / 2},
                    dwsep_param_count(c1, c2), dwsep_flops(c1, c2, hw2)});
    rows.push_back({"pool2", "maxpool2x2", Shape{1, c2, h / 4, w / 4}, 0, 3 * c2 * hw4});
    rows.push_back({"bottleneck", "dwsep+relu", Shape{1, c3, h / 4, w / 4},
                    dwsep_param_count(c2, c3), dwsep_flops(c2, c3, hw4)});
    rows.push_back({"up1", "bilinear_up2x", Shape{1, c3, h / 2, w / 2}, 0, 7 * c3 * hw2});
    rows.push_back({"concat1", "concat", Shape{1, config.dec1_in_channels(), h / 2, w / 2},
                    0, 0});
    rows.push_back({"dec1", "dwsep+relu", Shape{1, d1, h / 2, w / 2},
                    dwsep_param_count(config.dec1_in_channels(), d1),
                    dwsep_flops(config.dec1_in_channels(), d1, hw2)});
    rows.push_back({"up2", "bilinear_up2x", Shape{1, d1, h, w}, 0, 7 * d1 * hw});
    rows.push_back({"concat2", "concat", Shape{1, config.dec2_in_channels(), h, w}, 0, 0});
    rows.push_back({"dec2", "dwsep+relu", Shape{1, d2, h, w},
                    dwsep_param_count(config.dec2_in_channels(), d2),
                    dwsep_flops(config.dec2_in_channels(), d2, hw)});
    rows.push_back({"head", "conv1x1", Shape{1, config.num_classes, h, w},
                    static_cast<int64_t>(d2) * config.num_classes + config.num_classes,
                    2 * static_cast<int64_t>(d2) * config.num_classes * hw +
                        config.num_classes * hw});
    return rows;
}

int64_t count_flops(const ArchConfig& config, int h, int w) {
    int64_t total = 0;
    for (const auto& row : describe_layers(config, h, w)) total += row.flops;
    return total;
}

#define BIOLITE_INSTANTIATE_MODEL(T)                                                      \
    template std::vector<ParamEntry<T>> param_entries<T>(BioliteParamsT<T>&);             \
    template BioliteParamsT<T> zero_params<T>(const ArchConfig&);                         \
    template Tensor4T<T> model_forward<T>(const BioliteParamsT<T>&, const Tensor4T<T>&,   \
                                          ForwardCacheT<T>*);                             \
    template BioliteParamsT<T> model_backward<T>(const BioliteParamsT<T>&,                \
                                                 const ForwardCacheT<T>&,                 \
                                                 const Tensor4T<T>&);

BIOLITE_INSTANTIATE_MODEL(float)
BIOLITE_INSTANTIATE_MODEL(double)

#undef BIOLITE_INSTANTIATE_MODEL

} // namespace biolite
