#include "biolite/metrics.hpp"

#include <sstream>

#include "biolite/errors.hpp"

namespace biolite {

void ConfusionMatrix::accumulate(const Mask& pred, const Mask& truth) {
    if (pred.h != truth.h || pred.w != truth.w) {
        throw DataError("ConfusionMatrix::accumulate: mask shapes differ (" +
                        std::to_string(pred.h) + "x" + std::to_string(pred.w) + " vs " +
                        std::to_string(truth.h) + "x" + std::to_string(truth.w) + ")");
    }
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const uint8_t g = truth.v[i];
        const uint8_t p = pred.v[i];
        if (g >= kNumClasses || p >= kNumClasses) {
            throw DataError("ConfusionMatrix::accumulate: class value out of range (truth=" +
                            std::to_string(g) + ", pred=" + std::to_string(p) + ")");
        }
        ++counts[g][p];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    for (int g = 0; g < kNumClasses; ++g) {
        for (int p = 0; p < kNumClasses; ++p) counts[g][p] += other.counts[g][p];
    }
}

uint64_t ConfusionMatrix::total() const {
    uint64_t t = 0;
    for (int g = 0; g < kNumClasses; ++g) t += row_sum(g);
    return t;
}

uint64_t ConfusionMatrix::row_sum(int g) const {
    uint64_t t = 0;
    for (int p = 0; p < kNumClasses; ++p) t += counts[g][p];
    return t;
}

uint64_t ConfusionMatrix::col_sum(int p) const {
    uint64_t t = 0;
    for (int g = 0; g < kNumClasses; ++g) t += counts[g][p];
    return t;
}

EvalReport EvalReport::from_confusion(const ConfusionMatrix& cm) {
    EvalReport r;
    const uint64_t total = cm.total();
    if (total == 0) {
        throw DataError("EvalReport: empty confusion matrix");
    }
    uint64_t trace = 0;
    int n_present = 0;
    double iou_sum = 0.0, dice_sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
        const uint64_t tp = cm.counts[c][c];
        const uint64_t truth = cm.row_sum(c);
        const uint64_t pred = cm.col_sum(c);
        const uint64_t uni = truth + pred - tp; // TP + FP + FN
        r.truth_pixels[c] = truth;
        trace += tp;
        r.present[c] = (truth + pred) > 0;
        if (r.present[c]) {
            r.iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
            r.dice[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(truth + pred);
            iou_sum += r.iou[c];
            dice_sum += r.dice[c];
            ++n_present;
        }
    }
    r.miou = iou_sum / n_present;
    r.mean_dice = dice_sum / n_present;
    r.pixel_accuracy = static_cast<double>(trace) / static_cast<double>(total);
    return r;
}

std::string EvalReport::to_kv() const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "miou=" << miou << "\n";
    os << "mean_dice=" << mean_dice << "\n";
    os << "pixel_accuracy=" << pixel_accuracy << "\n";
    static const char* names[kNumClasses] = {"background", "bioink", "nozzle"};
    for (int c = 0; c < kNumClasses; ++c) {
        os << "iou_" << names[c] << "=" << (present[c] ? iou[c] : -1.0) << "\n";
        os << "dice_" << names[c] << "=" << (present[c] ? dice[c] : -1.0) << "\n";
        os << "present_" << names[c] << "=" << (present[c] ? 1 : 0) << "\n";
    }
    return os.str();
}

std::string EvalReport::csv_header() {
    return "model,miou,dice,pixel_acc,iou_background,iou_bioink,iou_nozzle,"
           "dice_background,dice_bioink,dice_nozzle";
}

std::string EvalReport::to_csv_row(const std::string& model_name) const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << model_name << "," << miou << "," << mean_dice << "," << pixel_accuracy;
    for (int c = 0; c < kNumClasses; ++c) os << "," << (present[c] ? iou[c] : -1.0);
    for (int c = 0; c < kNumClasses; ++c) os << "," << (present[c] ? dice[c] : -1.0);
    return os.str();
}

} // namespace biolite
