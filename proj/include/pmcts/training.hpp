#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmcts/experts.hpp"
#include "pmcts/pgn.hpp"
#include "pmcts/phase.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

// ---------------------------------------------------------------------------
// Datasets

/// Games shorter than this many plies (five full moves) are dropped.
inline constexpr int kMinGamePlies = 10;

/// A sample reference with its training weight. Datasets own the samples and
/// hand out lists of references so that subsets never copy plane data.
struct SampleRef {
    const TrainingSample* sample = nullptr;
    float weight = 1.0f;
};
using SampleList = std::vector<SampleRef>;

/// Samples of one split. Every sample belongs to exactly one phase, so the
/// three phase lists partition all().
struct PhaseDatasets {
    std::vector<TrainingSample> samples;
    std::array<std::vector<std::size_t>, kNumPhases> phase_index;

    std::size_t size() const { return samples.size(); }
    std::size_t size(GamePhase p) const { return phase_index[index(p)].size(); }
    SampleList all() const;
    SampleList phase(GamePhase p) const;
    void add(TrainingSample s);
};

struct DatasetSplit {
    std::set<std::string> val_months;   // "YYYY-MM"
    std::set<std::string> test_months;
};

struct DatasetBundle {
    PhaseDatasets train, val, test;
    nlohmann::json manifest;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Segments every game and emits the position before each move, labelled
/// with the game's monotone phase, into the split chosen by its month.
DatasetBundle build_datasets(const std::vector<GameRecord>& games, const DatasetSplit& split);
/// Reads PGN files; throws DatasetError when a source cannot be opened.
DatasetBundle build_datasets(const std::vector<std::filesystem::path>& pgn_files, const DatasetSplit& split);

/// Binary sample chunks: magic "PMCTSSM\0", u32 version, u64 count, then
/// per sample the 52 plane masks, 52 scalars, u16 legal count, legal indices
/// (i32), policy targets (f32), wdl (3 x f32), plys (f32), phase (u8), weight (f32).
void write_samples(const std::filesystem::path& file, std::span<const TrainingSample> samples);
std::vector<TrainingSample> read_samples(const std::filesystem::path& file);

/// Layout: <dir>/manifest.json and <dir>/<split>/<phase>.samples.
void save_datasets(const std::filesystem::path& dir, const DatasetBundle& data);
DatasetBundle load_datasets(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Weighting and loss

struct PhaseWeights {
    double main = 1.0;
    double other = 1.0;
};

/// w_main = a * w_other with a mean weight of 1 under equal phase proportions.
/// Throws std::invalid_argument for a < 1.
PhaseWeights phase_weights(double a);
/// Sets weights on a sample list for the expert of `expert_phase`.
void assign_weights(SampleList& samples, GamePhase expert_phase, double a);

/// (1/B) * sum of w_n * L_n. Throws EmptyBatchError on an empty batch.
double weighted_loss(std::span<const double> losses, std::span<const double> weights);

/// Per-sample losses without the l2 term.
std::vector<double> sample_losses(const MlpEvaluator& model, const SampleList& samples, const LossWeights& lw);
/// Weighted mean loss of a model over a list, l2 excluded.
double mean_loss(const MlpEvaluator& model, const SampleList& samples, const LossWeights& lw);

// ---------------------------------------------------------------------------
// Optimizer

struct OneCycle {
    double lr_min = 1e-5;
    double lr_max = 0.14;
    double momentum_min = 0.8;
    double momentum_max = 0.95;
    double peak = 0.5;  // fraction of the run at which the learning rate peaks

    /// Linear ramps: lr rises to lr_max while momentum falls to momentum_min,
    /// then both return.
    double lr(int iteration, int total) const;
    double momentum(int iteration, int total) const;
};

/// Nesterov accelerated gradient: v = mu v + g; p -= lr (g + mu v).
void nag_step(std::span<double> params, std::span<double> velocity, std::span<const double> grad, double lr, double mu);

// ---------------------------------------------------------------------------
// Training runs

enum class TrainMethod { Regular, Separated, Staged, StagedSequential, Weighted };
const char* to_string(TrainMethod m);
TrainMethod train_method_from_string(const std::string& s);

struct TrainRunConfig {
    TrainMethod method = TrainMethod::Regular;
    double a = 4.0;  // weighted learning factor
    int hidden = 64;
    int batch_size = 64;
    int iterations = 2000;           // per run
    int fine_tune_iterations = 1000;  // per stage for the staged methods
    int eval_every = 500;
    double spike_factor = 1.5;
    OneCycle schedule;
    LossWeights loss;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
    /// Test hook called after every optimizer step with (iteration, parameters).
    std::function<void(int, std::vector<double>&)> after_step;

    void validate() const;
};

struct Checkpoint {
    std::vector<double> params;
    std::vector<double> velocity;
    int iteration = 0;
    double val_loss = 0;
};

struct EvalRecord {
    int iteration = 0;  // optimizer steps completed
    double val_loss = 0;
    double best_val_loss = 0;  // after this evaluation
    bool checkpoint = false;
    bool spike = false;
};

struct RunLog {
    std::string name;
    std::vector<double> batch_loss;  // one entry per iteration, l2 included
    std::vector<EvalRecord> evals;
    std::vector<int> checkpoint_iterations;
    int spikes = 0;
    double best_val_loss = 0;
    std::uint64_t start_hash = 0;  // parameters at the first step
    std::uint64_t best_hash = 0;   // parameters of the returned model
    nlohmann::json to_json() const;
};

std::uint64_t parameter_hash(std::span<const float> params);

/// Spike rule: a validation loss of at least factor x best reverts the
/// trainer to the best checkpoint. Returns true when it did.
bool spike_recovery(std::vector<double>& params, std::vector<double>& velocity, const Checkpoint& best,
                    double new_val_loss, double factor);

/// One supervised run from `init`. The returned model is the best checkpoint.
MlpEvaluator train_run(const MlpEvaluator& init, const SampleList& train, const SampleList& val,
                       const TrainRunConfig& cfg, int iterations, RunLog* log = nullptr, const std::string& name = "");

struct TrainOutput {
    ExpertBundle bundle;  // regular training yields three copies of one model
    std::vector<RunLog> runs;
    nlohmann::json report() const;
};

/// Runs the configured regime. Throws DatasetError when a required phase
/// dataset is empty.
TrainOutput train(const DatasetBundle& data, const TrainRunConfig& cfg);

// ---------------------------------------------------------------------------
// Self-play reinforcement learning

enum class SelfPlayMode { Mcts, M2ctsSeparated, M2ctsStaged };
const char* to_string(SelfPlayMode m);
SelfPlayMode selfplay_mode_from_string(const std::string& s);

struct SelfPlayConfig {
    SelfPlayMode mode = SelfPlayMode::Mcts;
    int updates = 10;
    int games_per_update = 8;
    int max_plies = 120;  // longer games are adjudicated by material
    int replay_capacity = 20000;
    SearchConfig search;  // noise and temperature sampling are forced on
    TrainRunConfig train;  // iterations per update, schedule, batch size
    std::uint64_t seed = 0;

    SelfPlayConfig();
};

struct SelfPlayGame {
    GameRecord record;
    std::vector<TrainingSample> samples;
    bool adjudicated = false;
};

/// Plays one self-play game and builds visit-count training samples.
SelfPlayGame selfplay_game(const ExpertBundle& bundle, SearchType type, const SelfPlayConfig& cfg, std::uint64_t seed);

/// Material balance in pawns from White's side (P1 N3 B3 R5 Q9).
int material_balance(const Board& b);

struct SelfPlayOutput {
    std::vector<ExpertBundle> versions;  // versions[0] is the starting bundle
    std::size_t replay_size = 0;
    nlohmann::json report;
};

/// Alternates generation and training for cfg.updates cycles. When
/// `initial` is null a random network is used.
SelfPlayOutput selfplay_rl(const ExpertBundle* initial, const SelfPlayConfig& cfg,
                           const std::function<void(int, const ExpertBundle&)>& on_update = {});

}  // namespace pmcts
