#pragma once

// Dense, straight-line reimplementation of the trainable evaluator's forward
// pass and loss, used as an independent oracle in tests.

#include <cmath>
#include <vector>

#include "pmcts/experts.hpp"

namespace pmcts::testing {

inline std::vector<double> dense_input(const PlaneStack& st) {
    std::vector<float> raw = st.to_dense();
    std::vector<double> x(raw.begin(), raw.end());
    for (int s = 0; s < 64; ++s) {
        x[planes::NoProgress * 64 + s] /= 100.0;
        for (int k = 0; k < 5; ++k) {
            x[(planes::MaterialDiff + k) * 64 + s] /= 8.0;
            x[(planes::MaterialCount + k) * 64 + s] /= 8.0;
        }
    }
    return x;
}

template <class T>
double reference_loss(const MlpShape& shape, const std::vector<T>& w, const TrainingSample& smp, const LossWeights& lw) {
    const int H = shape.hidden;
    const std::vector<double> x = dense_input(smp.planes);
    std::vector<double> h(H);
    for (int j = 0; j < H; ++j) {
        double a = w[shape.b1() + j];
        for (int i = 0; i < shape.input; ++i) a += x[i] * w[shape.w1() + std::size_t(i) * H + j];
        h[j] = std::tanh(a);
    }
    double zv[3];
    for (int k = 0; k < 3; ++k) {
        zv[k] = w[shape.bv() + k];
        for (int j = 0; j < H; ++j) zv[k] += w[shape.wv() + k * H + j] * h[j];
    }
    double den = std::exp(zv[0]) + std::exp(zv[1]) + std::exp(zv[2]);
    double loss = 0;
    for (int k = 0; k < 3; ++k) loss += -lw.wdl * smp.target_wdl[k] * std::log(std::exp(zv[k]) / den);

    std::vector<double> zp(smp.legal.size());
    double pden = 0;
    for (std::size_t m = 0; m < zp.size(); ++m) {
        zp[m] = w[shape.bp() + smp.legal[m]];
        for (int j = 0; j < H; ++j) zp[m] += w[shape.wp() + std::size_t(smp.legal[m]) * H + j] * h[j];
        pden += std::exp(zp[m]);
    }
    for (std::size_t m = 0; m < zp.size(); ++m)
        if (smp.target_policy[m] > 0) loss += -lw.policy * smp.target_policy[m] * std::log(std::exp(zp[m]) / pden);

    double zy = w[shape.by()];
    for (int j = 0; j < H; ++j) zy += w[shape.wy() + j] * h[j];
    const double plys = std::log(1.0 + std::exp(zy));
    loss += lw.plys * (smp.target_plys - plys) * (smp.target_plys - plys);

    double sq = 0;
    for (const auto& v : w) sq += double(v) * double(v);
    return loss + lw.l2 * sq;
}

}  // namespace pmcts::testing
