#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmcts/encoder.hpp"
#include "pmcts/phase.hpp"
#include "pmcts/position.hpp"

namespace pmcts {

/// Output of an evaluator, always from the side to move's point of view.
struct Evaluation {
    double value = 0.0;  // wdl[0] - wdl[2]
    std::array<double, 3> wdl{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<Move> moves;     // legal moves in legal_moves order
    std::vector<int> indices;    // policy index of each move
    std::vector<double> policy;  // probability of each move
    double plys_to_end = 0.0;
};

class TerminalPositionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyBatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ModelKind : std::uint32_t { Handcrafted = 0, Mlp = 1 };

/// Serializable form of any evaluator.
struct WeightsBlob {
    ModelKind kind = ModelKind::Mlp;
    std::uint32_t hidden = 0;  // 0 for handcrafted
    std::vector<float> params;
};

class Evaluator {
public:
    virtual ~Evaluator() = default;

    /// Throws TerminalPositionError when the game is already decided.
    Evaluation evaluate(const Position& p) const;
    /// Elementwise identical to evaluate; throws EmptyBatchError on empty input.
    std::vector<Evaluation> evaluate_batch(std::span<const Position> ps) const;

    virtual std::string name() const = 0;
    virtual WeightsBlob to_blob() const = 0;

    /// Evaluation without the terminal check, for callers that already know.
    virtual Evaluation evaluate_unchecked(const Position& p) const = 0;
};

using EvaluatorPtr = std::shared_ptr<const Evaluator>;

// ---------------------------------------------------------------------------
// Handcrafted baseline

struct HandcraftedConfig {
    std::array<int, 5> material{100, 320, 330, 500, 900};  // P N B R Q in centipawns
    bool piece_square = true;
    int mobility_weight = 2;  // centipawns per attacked square for N, B, R, Q
    /// Endgame knowledge: passed pawns, king activity and mop-up of a bare king.
    bool king_pawn_terms = false;
    double value_scale = 400.0;       // value = tanh(score / value_scale)
    double policy_temperature = 100.0;  // softmax temperature over move scores (centipawns)

    friend bool operator==(const HandcraftedConfig&, const HandcraftedConfig&) = default;
};

class HandcraftedEvaluator : public Evaluator {
public:
    explicit HandcraftedEvaluator(HandcraftedConfig cfg = {}) : cfg_(cfg) {}

    const HandcraftedConfig& config() const { return cfg_; }
    /// Static score in centipawns from White's point of view.
    int score_white(const Board& b) const;

    std::string name() const override { return cfg_.king_pawn_terms ? "handcrafted+endgame" : "handcrafted"; }
    WeightsBlob to_blob() const override;
    static HandcraftedEvaluator from_blob(const WeightsBlob& blob);
    Evaluation evaluate_unchecked(const Position& p) const override;

private:
    HandcraftedConfig cfg_;
};

// ---------------------------------------------------------------------------
// Trainable evaluator: one hidden layer over the flattened planes with
// wdl, policy and plys-to-end heads.

struct MlpShape {
    int input = kInputSize;
    int hidden = 64;
    int policy = kPolicySize;

    std::size_t w1() const { return 0; }  // input-major: [input][hidden]
    std::size_t b1() const { return w1() + std::size_t(input) * hidden; }
    std::size_t wv() const { return b1() + hidden; }  // [3][hidden]
    std::size_t bv() const { return wv() + 3 * std::size_t(hidden); }
    std::size_t wp() const { return bv() + 3; }  // [policy][hidden]
    std::size_t bp() const { return wp() + std::size_t(policy) * hidden; }
    std::size_t wy() const { return bp() + policy; }  // [hidden]
    std::size_t by() const { return wy() + hidden; }
    std::size_t parameter_count() const { return by() + 1; }
};

/// Sparse normalized network input: (flat input index, value) for nonzero cells.
struct SparseInput {
    std::vector<std::pair<int, float>> entries;
};
SparseInput network_input(const PlaneStack& planes);

struct LossWeights {
    double wdl = 0.01;
    double policy = 0.988;
    double plys = 0.002;
    double l2 = 0.0001;
};

struct TrainingSample {
    PlaneStack planes;
    std::vector<int> legal;             // policy indices of the legal moves
    std::vector<float> target_policy;   // aligned with legal, sums to 1
    std::array<float, 3> target_wdl{};  // side to move: win, draw, loss
    float target_plys = 0.0f;
    GamePhase phase = GamePhase::Opening;
    float weight = 1.0f;
};

/// Builds a sample with a one-hot policy target for `played`.
TrainingSample make_sample(const Position& p, const Move& played, GameResult result, int plys_to_end);

struct LossTerms {
    double wdl = 0, policy = 0, plys = 0, l2 = 0;
    double total() const { return wdl + policy + plys + l2; }
};

/// Loss of one sample. When `grad` is non-null, adds `grad_scale` times the
/// gradient with respect to every parameter into it. Arithmetic is double
/// regardless of the parameter type.
template <class T>
LossTerms mlp_loss(const MlpShape& shape, std::span<const T> params, const TrainingSample& sample,
                   const LossWeights& weights, double* grad = nullptr, double grad_scale = 1.0);

class MlpEvaluator : public Evaluator {
public:
    MlpEvaluator(MlpShape shape, std::vector<float> params);
    static MlpEvaluator zeros(MlpShape shape = {});
    static MlpEvaluator random(MlpShape shape, std::uint64_t seed, double scale = 1.0);

    const MlpShape& shape() const { return shape_; }
    const std::vector<float>& parameters() const { return params_; }
    std::vector<float>& mutable_parameters() { return params_; }

    std::string name() const override { return "mlp" + std::to_string(shape_.hidden); }
    WeightsBlob to_blob() const override;
    static MlpEvaluator from_blob(const WeightsBlob& blob);
    Evaluation evaluate_unchecked(const Position& p) const override;

private:
    MlpShape shape_;
    std::vector<float> params_;
};

// ---------------------------------------------------------------------------
// Weight files and expert bundles

class WeightsError : public std::runtime_error {
public:
    enum class Kind { Io, BadMagic, VersionMismatch, ChecksumMismatch, Truncated, BadArchitecture, MissingExpert };
    WeightsError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint32_t kWeightsVersion = 1;

void save_weights(const std::filesystem::path& file, const WeightsBlob& blob);
WeightsBlob load_weights(const std::filesystem::path& file);
EvaluatorPtr evaluator_from_blob(const WeightsBlob& blob);
void save_model(const std::filesystem::path& file, const Evaluator& e);
EvaluatorPtr load_model(const std::filesystem::path& file);

struct ExpertBundle {
    std::array<EvaluatorPtr, kNumPhases> experts;
    nlohmann::json metadata = nlohmann::json::object();

    const Evaluator& expert(GamePhase phase) const { return *experts[index(phase)]; }
    static ExpertBundle uniform(EvaluatorPtr e) { return ExpertBundle{{e, e, e}, nlohmann::json::object()}; }
};

/// Writes opening.weights, middlegame.weights, endgame.weights and bundle.json.
void save_bundle(const std::filesystem::path& dir, const ExpertBundle& bundle);
ExpertBundle load_bundle(const std::filesystem::path& dir);

/// A model directory holds either a bundle (bundle.json) or a single model.weights.
struct ModelDirectory {
    bool is_bundle = false;
    ExpertBundle bundle;  // for a single model all three entries are the same evaluator
};
ModelDirectory load_model_directory(const std::filesystem::path& dir);

}  // namespace pmcts
