#include "biolite/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "biolite/clahe.hpp"
#include "biolite/metrics.hpp"

namespace biolite {

void TrainConfig::validate() const {
    if (lr <= 0.0f) throw DataError("TrainConfig: lr must be positive");
    if (batch_size < 1) throw DataError("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 1) throw DataError("TrainConfig: max_epochs must be >= 1");
    if (plateau_factor <= 0.0f || plateau_factor >= 1.0f) {
        throw DataError("TrainConfig: plateau_factor must be in (0,1)");
    }
    if (input_size < 4 || input_size % 4 != 0) {
        throw DataError("TrainConfig: input_size must be a positive multiple of 4");
    }
}

template <typename T>
CeLoss<T> ce_loss(const Tensor4T<T>& logits, const MaskBatch& target) {
    const Shape& s = logits.shape();
    if (target.n != s.n || target.h != s.h || target.w != s.w) {
        throw ShapeError("ce_loss: target (" + std::to_string(target.n) + "," +
                         std::to_string(target.h) + "," + std::to_string(target.w) +
                         ") does not match logits " + s.str());
    }
    const int C = s.c;
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const double num_pixels = static_cast<double>(s.n) * plane;
    CeLoss<T> out;
    out.dlogits = Tensor4T<T>(s);
    double loss_acc = 0.0;

    std::vector<const T*> in(C);
    std::vector<T*> dout(C);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < C; ++c) {
            in[c] = logits.data() + logits.offset(n, c, 0, 0);
            dout[c] = out.dlogits.data() + out.dlogits.offset(n, c, 0, 0);
        }
        const uint8_t* tgt = target.v.data() + static_cast<std::size_t>(n) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            const int cls = tgt[p];
            if (cls < 0 || cls >= C) {
                throw DataError("ce_loss: target class " + std::to_string(cls) +
                                " out of range [0," + std::to_string(C) + ")");
            }
            T m = in[0][p];
            for (int c = 1; c < C; ++c) m = std::max(m, in[c][p]);
            T sum{};
            for (int c = 0; c < C; ++c) {
                const T e = std::exp(in[c][p] - m);
                dout[c][p] = e; // stash exp, normalized below
                sum += e;
            }
            const double logsumexp = static_cast<double>(m) + std::log(static_cast<double>(sum));
            loss_acc += logsumexp - static_cast<double>(in[cls][p]);
            const T inv = T{1} / sum;
            for (int c = 0; c < C; ++c) {
                T sm = dout[c][p] * inv;
                if (c == cls) sm -= T{1};
                dout[c][p] = sm / static_cast<T>(num_pixels);
            }
        }
    }
    out.loss = loss_acc / num_pixels;
    return out;
}

template CeLoss<float> ce_loss<float>(const Tensor4T<float>&, const MaskBatch&);
template CeLoss<double> ce_loss<double>(const Tensor4T<double>&, const MaskBatch&);

AdamState AdamState::init(const ArchConfig& config) {
    AdamState s;
    s.m = zero_params<float>(config);
    s.v = zero_params<float>(config);
    s.t = 0;
    return s;
}

void adam_step(ModelParams& params, ModelParams& grads, AdamState& state,
               const TrainConfig& config) {
    auto p_entries = param_entries(params);
    auto g_entries = param_entries(grads);
    auto m_entries = param_entries(state.m);
    auto v_entries = param_entries(state.v);
    if (p_entries.size() != g_entries.size()) {
        throw InternalError("adam_step: gradient structure does not match parameters");
    }
    state.t += 1;
    const float b1 = config.adam_beta1;
    const float b2 = config.adam_beta2;
    const float lr = config.lr;
    const float wd = config.weight_decay;
    const double bc1 = 1.0 - std::pow(static_cast<double>(b1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(b2), static_cast<double>(state.t));
    const float inv_bc1 = static_cast<float>(1.0 / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);

    for (std::size_t e = 0; e < p_entries.size(); ++e) {
        if (p_entries[e].size != g_entries[e].size) {
            throw InternalError("adam_step: size mismatch for " + p_entries[e].name);
        }
        float* p = p_entries[e].data;
        const float* g = g_entries[e].data;
        float* m = m_entries[e].data;
        float* v = v_entries[e].data;
        const std::size_t n = p_entries[e].size;
        for (std::size_t i = 0; i < n; ++i) {
            if (wd != 0.0f) p[i] -= lr * wd * p[i]; // decoupled decay
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const float m_hat = m[i] * inv_bc1;
            const float v_hat = v[i] * inv_bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        }
    }
}

float PlateauScheduler::step(double metric) {
    if (metric > best_ + min_delta_) {
        best_ = metric;
        bad_epochs_ = 0;
    } else {
        ++bad_epochs_;
        if (bad_epochs_ >= patience_) {
            lr_ = std::max(lr_ * factor_, lr_min_);
            bad_epochs_ = 0;
        }
    }
    return lr_;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write training log: " + path.string());
    os << "epoch,train_loss,val_loss,val_dice,val_miou,lr\n";
    os.precision(8);
    for (const auto& e : epochs) {
        os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_dice << ','
           << e.val_miou << ',' << e.lr << '\n';
    }
}

namespace {

// Argmax over channels at network resolution; ties go to the lowest class.
Mask argmax_mask(const Tensor4& logits, int n) {
    const Shape& s = logits.shape();
    Mask mask(s.h, s.w);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    std::vector<const float*> in(s.c);
    for (int c = 0; c < s.c; ++c) in[c] = logits.data() + logits.offset(n, c, 0, 0);
    for (std::size_t p = 0; p < plane; ++p) {
        int best = 0;
        float bv = in[0][p];
        for (int c = 1; c < s.c; ++c) {
            if (in[c][p] > bv) {
                bv = in[c][p];
                best = c;
            }
        }
        mask.v[p] = static_cast<uint8_t>(best);
    }
    return mask;
}

struct ValMetrics {
    double loss;
    double dice;
    double miou;
};

ValMetrics evaluate_split(const std::vector<LabeledFrame>& frames, const ModelParams& params,
                          const TrainConfig& config) {
    ConfusionMatrix cm;
    double loss_sum = 0.0;
    for (const auto& frame : frames) {
        Batch b = to_batch({&frame}, config.input_size, config.input_size);
        Tensor4 logits = model_forward(params, b.images);
        CeLoss<float> ce = ce_loss(logits, b.masks);
        loss_sum += ce.loss;
        Mask pred = argmax_mask(logits, 0);
        Mask truth(config.input_size, config.input_size);
        std::copy(b.masks.v.begin(), b.masks.v.end(), truth.v.begin());
        cm.accumulate(pred, truth);
    }
    EvalReport report = EvalReport::from_confusion(cm);
    return {loss_sum / static_cast<double>(frames.size()), report.mean_dice, report.miou};
}

} // namespace

TrainResult train(const std::vector<LabeledFrame>& train_set,
                  const std::vector<LabeledFrame>& val_set, ModelParams model,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    if (val_set.empty()) throw DataError("train: empty validation set");

    // CLAHE is part of the preprocessing contract; it is input-deterministic,
    // so apply it once up front rather than per epoch.
    std::vector<LabeledFrame> train_frames = train_set;
    std::vector<LabeledFrame> val_frames = val_set;
    if (config.apply_clahe) {
        for (auto& f : train_frames) f.image = clahe(f.image);
        for (auto& f : val_frames) f.image = clahe(f.image);
    }

    AdamState adam = AdamState::init(model.config);
    PlateauScheduler scheduler(config.lr, config.plateau_patience, config.plateau_factor,
                               config.plateau_min_delta, config.lr_min);
    AugmentConfig aug;
    aug.enabled = config.augment;

    TrainResult result;
    result.best_params = model;
    TrainConfig step_config = config;

    std::vector<std::size_t> order(train_frames.size());
    std::iota(order.begin(), order.end(), 0);
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "epoch-shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<LabeledFrame> augmented;
            std::vector<const LabeledFrame*> batch_frames;
            augmented.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const LabeledFrame& f = train_frames[order[k]];
                if (config.augment) {
                    Rng aug_rng(derive_seed(derive_seed(config.seed, "augment",
                                                        static_cast<uint64_t>(epoch)),
                                            f.id));
                    augmented.push_back(augment(f, aug, aug_rng));
                } else {
                    augmented.push_back(f);
                }
            }
            for (const auto& f : augmented) batch_frames.push_back(&f);

            Batch b = to_batch(batch_frames, config.input_size, config.input_size);
            ForwardCache cache;
            Tensor4 logits = model_forward(model, b.images, &cache);
            CeLoss<float> ce = ce_loss(logits, b.masks);
            ModelParams grads = model_backward(model, cache, ce.dlogits);
            adam_step(model, grads, adam, step_config);
            loss_sum += ce.loss;
            ++batches;
        }

        ValMetrics val = evaluate_split(val_frames, model, config);
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / std::max(1, batches);
        log.val_loss = val.loss;
        log.val_dice = val.dice;
        log.val_miou = val.miou;
        log.lr = step_config.lr;
        result.log.epochs.push_back(log);

        if (val.dice > result.log.best_val_dice || result.log.best_epoch < 0) {
            result.log.best_val_dice = val.dice;
            result.log.best_epoch = epoch;
            result.best_params = model;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }

        step_config.lr = scheduler.step(val.dice);

        if (on_epoch) on_epoch(log);

        if (epochs_since_best >= config.early_stop_patience) break;
    }
    return result;
}

} // namespace biolite
