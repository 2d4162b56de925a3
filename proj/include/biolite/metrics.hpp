#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "biolite/image.hpp"

namespace biolite {

inline constexpr int kNumClasses = 3;

// counts[g][p] = pixels with ground truth g predicted p. Integer counters all
// the way; division happens only when deriving metrics.
struct ConfusionMatrix {
    std::array<std::array<uint64_t, kNumClasses>, kNumClasses> counts{};

    void accumulate(const Mask& pred, const Mask& truth);
    void merge(const ConfusionMatrix& other);

    uint64_t total() const;
    uint64_t row_sum(int g) const;  // ground-truth pixels of class g
    uint64_t col_sum(int p) const;  // predicted pixels of class p
};

struct EvalReport {
    std::array<double, kNumClasses> iou{};
    std::array<double, kNumClasses> dice{};
    // A class absent from both prediction and ground truth has undefined
    // (0/0) IoU/Dice and is excluded from the means.
    std::array<bool, kNumClasses> present{};
    double miou = 0.0;
    double mean_dice = 0.0;
    double pixel_accuracy = 0.0;
    std::array<uint64_t, kNumClasses> truth_pixels{};

    static EvalReport from_confusion(const ConfusionMatrix& cm);

    // Flat key-value lines ("miou=0.92...\n...").
    std::string to_kv() const;
    static std::string csv_header();
    std::string to_csv_row(const std::string& model_name) const;
};

} // namespace biolite
