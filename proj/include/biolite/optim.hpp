#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "biolite/data.hpp"
#include "biolite/model.hpp"
#include "biolite/tensor.hpp"

namespace biolite {

// Hyperparameters of the training loop; defaults follow the published setup
// (lr 1e-3, weight decay 1e-5, batch 4, 200 epochs) with plateau/early-stop
// constants chosen here.
struct TrainConfig {
    float lr = 1e-3f;
    float weight_decay = 1e-5f;
    int batch_size = 4;
    int max_epochs = 200;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    int plateau_patience = 10;
    float plateau_factor = 0.5f;
    float plateau_min_delta = 1e-4f;
    float lr_min = 1e-6f;
    int early_stop_patience = 30;
    uint64_t seed = 0;
    bool augment = true;
    bool apply_clahe = true;
    int input_size = 256;

    void validate() const;
};

// --- categorical cross-entropy ---

// Mean over all pixels and batch of -log softmax(logits)[true class], computed
// with a fused log-softmax. dlogits = (softmax - onehot) / (n*h*w).
template <typename T>
struct CeLoss {
    double loss;
    Tensor4T<T> dlogits;
};

template <typename T>
CeLoss<T> ce_loss(const Tensor4T<T>& logits, const MaskBatch& target);

// --- Adam with decoupled weight decay ---

struct AdamState {
    ModelParams m, v; // first/second moments, zero at t=0
    int64_t t = 0;

    static AdamState init(const ArchConfig& config);
};

// One update: theta -= lr*wd*theta (decoupled decay), then the bias-corrected
// Adam delta lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ModelParams& params, ModelParams& grads, AdamState& state,
               const TrainConfig& config);

// --- plateau LR scheduling (monitors validation Dice, maximized) ---

class PlateauScheduler {
public:
    PlateauScheduler(float lr, int patience, float factor, float min_delta, float lr_min)
        : lr_(lr), patience_(patience), factor_(factor), min_delta_(min_delta),
          lr_min_(lr_min) {}

    // Feed one epoch's monitored metric; returns the lr for the next epoch.
    float step(double metric);

    float lr() const { return lr_; }

private:
    float lr_;
    int patience_;
    float factor_;
    float min_delta_;
    float lr_min_;
    double best_ = -1.0;
    int bad_epochs_ = 0;
};

// --- training loop ---

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_dice = 0.0;
    double val_miou = 0.0;
    float lr = 0.0f;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    double best_val_dice = -1.0;
    int best_epoch = -1;

    void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
    ModelParams best_params;
    TrainLog log;
};

// Optional per-epoch observer (progress printing).
using EpochCallback = std::function<void(const EpochLog&)>;

// Epoch loop: seeded shuffle into mini-batches, forward/CE/backward/Adam,
// per-epoch validation (loss + Dice + mIoU), plateau scheduling, best-Dice
// checkpointing and early stopping. Returns the best checkpoint, not the last.
TrainResult train(const std::vector<LabeledFrame>& train_set,
                  const std::vector<LabeledFrame>& val_set, ModelParams model,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

} // namespace biolite
