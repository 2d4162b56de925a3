#pragma once

// Shared test utilities: independent oracles and the finite-difference
// gradient checker. Everything here is test-only and deliberately written as
// straight-line reference code, separate from the production kernels.

#include <cmath>
#include <functional>
#include <vector>

#include "biolite/data.hpp"
#include "biolite/model.hpp"
#include "biolite/nn_ops.hpp"
#include "biolite/rng.hpp"
#include "biolite/tensor.hpp"

namespace biolite::test {

inline Tensor4d random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor4d t(s);
    for (auto& v : t.flat()) v = rng.uniform(lo, hi);
    return t;
}

inline Tensor4 random_tensor_f32(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor4 t(s);
    for (auto& v : t.flat()) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Naive reference convolutions: explicit bounds-checked loops, no padding
// buffers, no blocking. These are the sliding-window oracles.
inline Tensor4d naive_depthwise3x3(const Tensor4d& x, const Tensor4d& k,
                                   const std::vector<double>& bias) {
    const Shape& s = x.shape();
    Tensor4d y(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int i = 0; i < s.h; ++i)
                for (int j = 0; j < s.w; ++j) {
                    double acc = bias[c];
                    for (int di = -1; di <= 1; ++di)
                        for (int dj = -1; dj <= 1; ++dj) {
                            const int ii = i + di, jj = j + dj;
                            if (ii < 0 || ii >= s.h || jj < 0 || jj >= s.w) continue;
                            acc += k.at(c, 0, di + 1, dj + 1) * x.at(n, c, ii, jj);
                        }
                    y.at(n, c, i, j) = acc;
                }
    return y;
}

inline Tensor4d naive_pointwise(const Tensor4d& x, const Tensor4d& k,
                                const std::vector<double>& bias) {
    const Shape& s = x.shape();
    const int co = k.shape().n;
    Tensor4d y(Shape{s.n, co, s.h, s.w});
    for (int n = 0; n < s.n; ++n)
        for (int o = 0; o < co; ++o)
            for (int i = 0; i < s.h; ++i)
                for (int j = 0; j < s.w; ++j) {
                    double acc = bias[o];
                    for (int c = 0; c < s.c; ++c) acc += k.at(o, c, 0, 0) * x.at(n, c, i, j);
                    y.at(n, o, i, j) = acc;
                }
    return y;
}

inline double dot(const Tensor4d& a, const Tensor4d& b) {
    double acc = 0.0;
    auto ap = a.flat();
    auto bp = b.flat();
    for (std::size_t i = 0; i < ap.size(); ++i) acc += ap[i] * bp[i];
    return acc;
}

// --- central finite-difference gradient checking (f64 shadow mode) ---

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom < 1e-10) return 0.0; // both effectively zero
    return std::abs(analytic - numeric) / denom;
}

// Checks d(loss)/d(data[idx]) for `samples` random indices of one flat buffer.
// `loss` must re-run the forward path reading the buffer in place.
inline GradCheckResult fd_check_buffer(std::span<double> data,
                                       const std::function<double()>& loss,
                                       std::span<const double> analytic, Rng& rng,
                                       int samples, double eps = 1e-3) {
    GradCheckResult r;
    const int n = static_cast<int>(data.size());
    std::vector<int> idx;
    if (n <= samples) {
        for (int i = 0; i < n; ++i) idx.push_back(i);
    } else {
        for (int i = 0; i < samples; ++i) idx.push_back(static_cast<int>(rng.next_below(n)));
    }
    for (int i : idx) {
        const double keep = data[i];
        data[i] = keep + eps;
        const double up = loss();
        data[i] = keep - eps;
        const double down = loss();
        data[i] = keep;
        const double numeric = (up - down) / (2.0 * eps);
        r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic[i], numeric));
        ++r.checked;
    }
    return r;
}

// --- exact rational arithmetic for the metric oracle ---

struct Rational {
    uint64_t num = 0;
    uint64_t den = 1;
    bool operator==(const Rational& o) const {
        return static_cast<unsigned __int128>(num) * o.den ==
               static_cast<unsigned __int128>(o.num) * den;
    }
};

// Per-class brute-force set computation straight from the masks.
struct BruteForceMetrics {
    std::array<Rational, 3> iou, dice;
    std::array<bool, 3> present{};
    Rational accuracy;
    // means as exact rationals over present classes
    Rational miou, mean_dice;
};

inline BruteForceMetrics brute_force_metrics(const std::vector<Mask>& preds,
                                             const std::vector<Mask>& truths) {
    uint64_t inter[3] = {}, pred_n[3] = {}, truth_n[3] = {};
    uint64_t correct = 0, total = 0;
    for (std::size_t f = 0; f < preds.size(); ++f) {
        for (std::size_t i = 0; i < preds[f].v.size(); ++i) {
            const int p = preds[f].v[i];
            const int g = truths[f].v[i];
            ++pred_n[p];
            ++truth_n[g];
            if (p == g) {
                ++inter[p];
                ++correct;
            }
            ++total;
        }
    }
    BruteForceMetrics m;
    m.accuracy = {correct, total};
    // sum of fractions with a common product denominator, exact in __int128
    unsigned __int128 miou_num = 0, miou_den = 1;
    unsigned __int128 dice_num = 0, dice_den = 1;
    int n_present = 0;
    for (int c = 0; c < 3; ++c) {
        m.present[c] = pred_n[c] + truth_n[c] > 0;
        if (!m.present[c]) continue;
        ++n_present;
        const uint64_t uni = pred_n[c] + truth_n[c] - inter[c];
        m.iou[c] = {inter[c], uni};
        m.dice[c] = {2 * inter[c], pred_n[c] + truth_n[c]};
        miou_num = miou_num * uni + miou_den * inter[c];
        miou_den *= uni;
        dice_num = dice_num * (pred_n[c] + truth_n[c]) + dice_den * 2 * inter[c];
        dice_den *= pred_n[c] + truth_n[c];
    }
    // fold the 1/n_present factor in; fits easily (counts <= 256 per mask here)
    m.miou = {static_cast<uint64_t>(miou_num), static_cast<uint64_t>(miou_den) * n_present};
    m.mean_dice = {static_cast<uint64_t>(dice_num), static_cast<uint64_t>(dice_den) * n_present};
    return m;
}

// Winding-number point-in-polygon oracle (independent of the production
// crossing-number implementation). Valid for simple polygons away from edges.
inline bool winding_inside(double px, double py, const std::vector<double>& xs,
                           const std::vector<double>& ys) {
    double angle = 0.0;
    const std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double ax = xs[i] - px, ay = ys[i] - py;
        const double bx = xs[j] - px, by = ys[j] - py;
        angle += std::atan2(ax * by - ay * bx, ax * bx + ay * by);
    }
    return std::abs(angle) > M_PI;
}

} // namespace biolite::test
