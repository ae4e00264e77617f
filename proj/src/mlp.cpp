#include <algorithm>
#include <cmath>
#include <random>

#include "pmcts/experts.hpp"

namespace pmcts {

namespace {

float input_scale(int plane) {
    if (plane == planes::NoProgress) return 1.0f / 100.0f;
    if (plane >= planes::MaterialDiff && plane < planes::OppositeBishops) return 1.0f / 8.0f;
    if (plane >= planes::MaterialCount) return 1.0f / 8.0f;
    return 1.0f;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// In-place log-softmax; returns nothing, `z` becomes log-probabilities.
void log_softmax(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (double& v : z) v -= lse;
}

struct Forward {
    std::vector<double> hidden;   // tanh activations
    std::vector<double> log_wdl;  // 3
    std::vector<double> log_pol;  // per legal move
    double plys_logit = 0;
    double plys = 0;
};

template <class T>
Forward forward(const MlpShape& s, std::span<const T> w, const SparseInput& x, std::span<const int> legal) {
    Forward f;
    const int H = s.hidden;
    f.hidden.assign(H, 0.0);
    for (int j = 0; j < H; ++j) f.hidden[j] = static_cast<double>(w[s.b1() + j]);
    for (const auto& [i, v] : x.entries) {
        const T* row = w.data() + s.w1() + std::size_t(i) * H;
        for (int j = 0; j < H; ++j) f.hidden[j] += static_cast<double>(v) * static_cast<double>(row[j]);
    }
    for (double& h : f.hidden) h = std::tanh(h);

    const auto dot = [&](std::size_t offset) {
        double acc = 0;
        for (int j = 0; j < H; ++j) acc += static_cast<double>(w[offset + j]) * f.hidden[j];
        return acc;
    };
    f.log_wdl.resize(3);
    for (int k = 0; k < 3; ++k) f.log_wdl[k] = static_cast<double>(w[s.bv() + k]) + dot(s.wv() + std::size_t(k) * H);
    log_softmax(f.log_wdl);

    f.log_pol.resize(legal.size());
    for (std::size_t m = 0; m < legal.size(); ++m)
        f.log_pol[m] = static_cast<double>(w[s.bp() + legal[m]]) + dot(s.wp() + std::size_t(legal[m]) * H);
    if (!f.log_pol.empty()) log_softmax(f.log_pol);

    f.plys_logit = static_cast<double>(w[s.by()]) + dot(s.wy());
    f.plys = softplus(f.plys_logit);
    return f;
}

}  // namespace

SparseInput network_input(const PlaneStack& st) {
    SparseInput x;
    x.entries.reserve(512);
    for (int pl = 0; pl < kNumPlanes; ++pl) {
        const int base = pl * kPlaneCells;
        if (is_scalar_plane(pl)) {
            if (st.scalars[pl] == 0.0f) continue;
            const float v = st.scalars[pl] * input_scale(pl);
            for (int sq = 0; sq < kPlaneCells; ++sq) x.entries.emplace_back(base + sq, v);
        } else {
            Bitboard m = st.masks[pl];
            while (m) x.entries.emplace_back(base + pop_lsb(m), 1.0f);
        }
    }
    return x;
}

TrainingSample make_sample(const Position& p, const Move& played, GameResult result, int plys_to_end) {
    TrainingSample s;
    s.planes = encode_planes(p);
    const int target = encode_policy(played, p);
    for (const auto& im : indexed_legal_moves(p)) {
        s.legal.push_back(im.index);
        s.target_policy.push_back(im.index == target ? 1.0f : 0.0f);
    }
    const bool white = p.side_to_move() == Color::White;
    switch (result) {
        case GameResult::WhiteWin: s.target_wdl = white ? std::array<float, 3>{1, 0, 0} : std::array<float, 3>{0, 0, 1}; break;
        case GameResult::BlackWin: s.target_wdl = white ? std::array<float, 3>{0, 0, 1} : std::array<float, 3>{1, 0, 0}; break;
        default: s.target_wdl = {0, 1, 0}; break;
    }
    s.target_plys = static_cast<float>(plys_to_end);
    s.phase = phase_of(p);
    return s;
}

template <class T>
LossTerms mlp_loss(const MlpShape& s, std::span<const T> w, const TrainingSample& sample, const LossWeights& lw,
                   double* grad, double grad_scale) {
    const SparseInput x = network_input(sample.planes);
    const Forward f = forward(s, w, x, sample.legal);
    const int H = s.hidden;

    LossTerms L;
    double t_sum = 0;
    for (int k = 0; k < 3; ++k) {
        L.wdl -= lw.wdl * sample.target_wdl[k] * f.log_wdl[k];
        t_sum += sample.target_wdl[k];
    }
    double pi_sum = 0;
    for (std::size_t m = 0; m < sample.legal.size(); ++m) {
        if (sample.target_policy[m] != 0.0f) L.policy -= lw.policy * sample.target_policy[m] * f.log_pol[m];
        pi_sum += sample.target_policy[m];
    }
    const double diff = sample.target_plys - f.plys;
    L.plys = lw.plys * diff * diff;
    if (lw.l2 != 0.0) {
        double sq = 0;
        for (const T& v : w) sq += static_cast<double>(v) * static_cast<double>(v);
        L.l2 = lw.l2 * sq;
    }

    if (!grad) return L;

    std::vector<double> dh(H, 0.0);
    // wdl head
    for (int k = 0; k < 3; ++k) {
        const double dz = grad_scale * lw.wdl * (std::exp(f.log_wdl[k]) * t_sum - sample.target_wdl[k]);
        if (dz == 0.0) continue;
        grad[s.bv() + k] += dz;
        const std::size_t row = s.wv() + std::size_t(k) * H;
        for (int j = 0; j < H; ++j) {
            grad[row + j] += dz * f.hidden[j];
            dh[j] += dz * static_cast<double>(w[row + j]);
        }
    }
    // policy head
    for (std::size_t m = 0; m < sample.legal.size(); ++m) {
        const double dz = grad_scale * lw.policy * (std::exp(f.log_pol[m]) * pi_sum - sample.target_policy[m]);
        if (dz == 0.0) continue;
        grad[s.bp() + sample.legal[m]] += dz;
        const std::size_t row = s.wp() + std::size_t(sample.legal[m]) * H;
        for (int j = 0; j < H; ++j) {
            grad[row + j] += dz * f.hidden[j];
            dh[j] += dz * static_cast<double>(w[row + j]);
        }
    }
    // plys head
    {
        const double dz = grad_scale * (-2.0 * lw.plys * diff) * sigmoid(f.plys_logit);
        grad[s.by()] += dz;
        for (int j = 0; j < H; ++j) {
            grad[s.wy() + j] += dz * f.hidden[j];
            dh[j] += dz * static_cast<double>(w[s.wy() + j]);
        }
    }
    // hidden layer
    for (int j = 0; j < H; ++j) dh[j] *= 1.0 - f.hidden[j] * f.hidden[j];
    for (int j = 0; j < H; ++j) grad[s.b1() + j] += dh[j];
    for (const auto& [i, v] : x.entries) {
        double* row = grad + s.w1() + std::size_t(i) * H;
        for (int j = 0; j < H; ++j) row[j] += static_cast<double>(v) * dh[j];
    }
    if (lw.l2 != 0.0) {
        const double c = grad_scale * 2.0 * lw.l2;
        for (std::size_t i = 0; i < w.size(); ++i) grad[i] += c * static_cast<double>(w[i]);
    }
    return L;
}

template LossTerms mlp_loss<float>(const MlpShape&, std::span<const float>, const TrainingSample&, const LossWeights&,
                                   double*, double);
template LossTerms mlp_loss<double>(const MlpShape&, std::span<const double>, const TrainingSample&,
                                    const LossWeights&, double*, double);

MlpEvaluator::MlpEvaluator(MlpShape shape, std::vector<float> params) : shape_(shape), params_(std::move(params)) {
    if (params_.size() != shape_.parameter_count())
        throw WeightsError(WeightsError::Kind::BadArchitecture,
                           "parameter count " + std::to_string(params_.size()) + " does not match architecture (" +
                               std::to_string(shape_.parameter_count()) + ")");
}

MlpEvaluator MlpEvaluator::zeros(MlpShape shape) { return MlpEvaluator(shape, std::vector<float>(shape.parameter_count())); }

MlpEvaluator MlpEvaluator::random(MlpShape shape, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::vector<float> p(shape.parameter_count(), 0.0f);
    const auto fill = [&](std::size_t from, std::size_t count, double fan_in) {
        std::normal_distribution<double> dist(0.0, scale / std::sqrt(fan_in));
        for (std::size_t i = 0; i < count; ++i) p[from + i] = static_cast<float>(dist(rng));
    };
    // The input is sparse: roughly a few hundred active cells per position.
    fill(shape.w1(), std::size_t(shape.input) * shape.hidden, 400.0);
    fill(shape.wv(), 3 * std::size_t(shape.hidden), shape.hidden);
    fill(shape.wp(), std::size_t(shape.policy) * shape.hidden, shape.hidden);
    fill(shape.wy(), shape.hidden, shape.hidden);
    return MlpEvaluator(shape, std::move(p));
}

Evaluation MlpEvaluator::evaluate_unchecked(const Position& p) const {
    Evaluation e;
    for (const auto& im : indexed_legal_moves(p)) {
        e.moves.push_back(im.move);
        e.indices.push_back(im.index);
    }
    const auto f = forward<float>(shape_, std::span<const float>(params_), network_input(encode_planes(p)), e.indices);
    for (int k = 0; k < 3; ++k) e.wdl[k] = std::exp(f.log_wdl[k]);
    e.value = e.wdl[0] - e.wdl[2];
    e.policy.reserve(f.log_pol.size());
    for (double lp : f.log_pol) e.policy.push_back(std::exp(lp));
    e.plys_to_end = f.plys;
    return e;
}

WeightsBlob MlpEvaluator::to_blob() const {
    return WeightsBlob{ModelKind::Mlp, static_cast<std::uint32_t>(shape_.hidden), params_};
}

MlpEvaluator MlpEvaluator::from_blob(const WeightsBlob& blob) {
    if (blob.kind != ModelKind::Mlp) throw WeightsError(WeightsError::Kind::BadArchitecture, "not an mlp parameter block");
    MlpShape shape;
    shape.hidden = static_cast<int>(blob.hidden);
    return MlpEvaluator(shape, blob.params);
}

}  // namespace pmcts
