#include "pmcts/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace pmcts {

// ---------------------------------------------------------------------------
// Datasets

SampleList PhaseDatasets::all() const {
    SampleList out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({&s, 1.0f});
    return out;
}

SampleList PhaseDatasets::phase(GamePhase p) const {
    SampleList out;
    out.reserve(phase_index[index(p)].size());
    for (std::size_t i : phase_index[index(p)]) out.push_back({&samples[i], 1.0f});
    return out;
}

void PhaseDatasets::add(TrainingSample s) {
    phase_index[index(s.phase)].push_back(samples.size());
    samples.push_back(std::move(s));
}

namespace {

const char* kSplitNames[3] = {"train", "val", "test"};

nlohmann::json split_counts(const PhaseDatasets& d) {
    nlohmann::json j;
    for (int i = 0; i < kNumPhases; ++i) j[to_string(static_cast<GamePhase>(i))] = d.size(static_cast<GamePhase>(i));
    j["no-phases"] = d.size();
    return j;
}

void finish_manifest(DatasetBundle& out) {
    const PhaseDatasets* splits[3] = {&out.train, &out.val, &out.test};
    nlohmann::json empty = nlohmann::json::array();
    for (int s = 0; s < 3; ++s) {
        out.manifest["splits"][kSplitNames[s]] = split_counts(*splits[s]);
        for (int i = 0; i < kNumPhases; ++i)
            if (splits[s]->size(static_cast<GamePhase>(i)) == 0)
                empty.push_back(std::string(kSplitNames[s]) + "/" + to_string(static_cast<GamePhase>(i)));
    }
    out.manifest["empty"] = empty;
}

}  // namespace

DatasetBundle build_datasets(const std::vector<GameRecord>& games, const DatasetSplit& split) {
    DatasetBundle out;
    int used = 0, short_games = 0, unknown = 0;
    std::map<std::string, nlohmann::json> months;
    for (const GameRecord& g : games) {
        if (g.plies() < kMinGamePlies) {
            ++short_games;
            continue;
        }
        if (g.result == GameResult::Unknown) {
            ++unknown;
            continue;
        }
        const std::string month = g.month().value_or("unknown");
        PhaseDatasets* target = &out.train;
        const char* split_name = "train";
        if (split.val_months.count(month)) {
            target = &out.val;
            split_name = "val";
        } else if (split.test_months.count(month)) {
            target = &out.test;
            split_name = "test";
        }
        const GameSegmentation seg = segment_game(g);
        const std::vector<Position> line = g.replay();
        for (int i = 0; i < g.plies(); ++i) {
            TrainingSample s = make_sample(line[i], g.moves[i], g.result, g.plies() - i);
            s.phase = seg.labels[i];
            target->add(std::move(s));
        }
        ++used;
        auto& m = months[month];
        m["split"] = split_name;
        m["games"] = m.value("games", 0) + 1;
        m["positions"] = m.value("positions", 0) + g.plies();
    }
    out.manifest["schema"] = "pmcts-datasets/1";
    out.manifest["games_total"] = games.size();
    out.manifest["games_used"] = used;
    out.manifest["games_too_short"] = short_games;
    out.manifest["games_without_result"] = unknown;
    out.manifest["months"] = months;
    out.manifest["val_months"] = split.val_months;
    out.manifest["test_months"] = split.test_months;
    finish_manifest(out);
    return out;
}

DatasetBundle build_datasets(const std::vector<std::filesystem::path>& pgn_files, const DatasetSplit& split) {
    std::vector<GameRecord> games;
    nlohmann::json sources = nlohmann::json::array();
    std::size_t skipped = 0;
    for (const auto& file : pgn_files) {
        std::ifstream in(file);
        if (!in) throw DatasetError("cannot open PGN source " + file.string());
        PgnReader reader(in);
        std::size_t before = games.size();
        while (auto g = reader.next()) games.push_back(std::move(*g));
        skipped += reader.skipped().size();
        sources.push_back({{"path", file.string()}, {"games", games.size() - before}, {"skipped", reader.skipped().size()}});
    }
    DatasetBundle out = build_datasets(games, split);
    out.manifest["sources"] = sources;
    out.manifest["games_unparseable"] = skipped;
    return out;
}

// ---------------------------------------------------------------------------
// Sample chunks

namespace {

constexpr char kSampleMagic[8] = {'P', 'M', 'C', 'T', 'S', 'S', 'M', '\0'};
constexpr std::uint32_t kSampleVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void get(std::istream& in, T& v, const std::filesystem::path& file) {
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DatasetError(file.string() + ": truncated sample chunk");
}

}  // namespace

void write_samples(const std::filesystem::path& file, std::span<const TrainingSample> samples) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot write " + file.string());
    out.write(kSampleMagic, sizeof(kSampleMagic));
    put(out, kSampleVersion);
    put(out, static_cast<std::uint64_t>(samples.size()));
    for (const TrainingSample& s : samples) {
        for (Bitboard m : s.planes.masks) put(out, m);
        for (float v : s.planes.scalars) put(out, v);
        put(out, static_cast<std::uint16_t>(s.legal.size()));
        for (int i : s.legal) put(out, static_cast<std::int32_t>(i));
        for (float v : s.target_policy) put(out, v);
        for (float v : s.target_wdl) put(out, v);
        put(out, s.target_plys);
        put(out, static_cast<std::uint8_t>(index(s.phase)));
        put(out, s.weight);
    }
    if (!out) throw DatasetError("write failed for " + file.string());
}

std::vector<TrainingSample> read_samples(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + file.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kSampleMagic, sizeof(magic)) != 0)
        throw DatasetError(file.string() + ": not a sample chunk");
    std::uint32_t version = 0;
    std::uint64_t count = 0;
    get(in, version, file);
    if (version != kSampleVersion) throw DatasetError(file.string() + ": unsupported sample chunk version");
    get(in, count, file);
    std::vector<TrainingSample> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t k = 0; k < count; ++k) {
        TrainingSample s;
        for (Bitboard& m : s.planes.masks) get(in, m, file);
        for (float& v : s.planes.scalars) get(in, v, file);
        std::uint16_t n = 0;
        get(in, n, file);
        s.legal.resize(n);
        s.target_policy.resize(n);
        for (int& i : s.legal) {
            std::int32_t v = 0;
            get(in, v, file);
            if (v < 0 || v >= kPolicySize) throw DatasetError(file.string() + ": policy index out of range");
            i = v;
        }
        for (float& v : s.target_policy) get(in, v, file);
        for (float& v : s.target_wdl) get(in, v, file);
        get(in, s.target_plys, file);
        std::uint8_t phase = 0;
        get(in, phase, file);
        if (phase >= kNumPhases) throw DatasetError(file.string() + ": bad phase label");
        s.phase = static_cast<GamePhase>(phase);
        get(in, s.weight, file);
        out.push_back(std::move(s));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DatasetError(file.string() + ": trailing bytes");
    return out;
}

void save_datasets(const std::filesystem::path& dir, const DatasetBundle& data) {
    const PhaseDatasets* splits[3] = {&data.train, &data.val, &data.test};
    for (int s = 0; s < 3; ++s) {
        const auto sub = dir / kSplitNames[s];
        std::filesystem::create_directories(sub);
        for (int p = 0; p < kNumPhases; ++p) {
            std::vector<TrainingSample> chunk;
            for (std::size_t i : splits[s]->phase_index[p]) chunk.push_back(splits[s]->samples[i]);
            write_samples(sub / (std::string(to_string(static_cast<GamePhase>(p))) + ".samples"), chunk);
        }
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DatasetError("cannot write " + (dir / "manifest.json").string());
    out << data.manifest.dump(2) << '\n';
}

DatasetBundle load_datasets(const std::filesystem::path& dir) {
    DatasetBundle data;
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DatasetError("cannot open " + (dir / "manifest.json").string());
    try {
        in >> data.manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("malformed manifest: " + std::string(e.what()));
    }
    PhaseDatasets* splits[3] = {&data.train, &data.val, &data.test};
    for (int s = 0; s < 3; ++s) {
        for (int p = 0; p < kNumPhases; ++p) {
            const auto file = dir / kSplitNames[s] / (std::string(to_string(static_cast<GamePhase>(p))) + ".samples");
            for (auto& sample : read_samples(file)) {
                if (index(sample.phase) != p) throw DatasetError(file.string() + ": sample filed under the wrong phase");
                splits[s]->add(std::move(sample));
            }
        }
    }
    return data;
}

// ---------------------------------------------------------------------------
// Weighting and loss

PhaseWeights phase_weights(double a) {
    if (!(a >= 1.0)) throw std::invalid_argument("weighting factor a must be >= 1");
    PhaseWeights w;
    w.other = 3.0 / (a + 2.0);
    w.main = a * w.other;
    return w;
}

void assign_weights(SampleList& samples, GamePhase expert_phase, double a) {
    const PhaseWeights w = phase_weights(a);
    for (auto& ref : samples) ref.weight = static_cast<float>(ref.sample->phase == expert_phase ? w.main : w.other);
}

double weighted_loss(std::span<const double> losses, std::span<const double> weights) {
    if (losses.empty()) throw EmptyBatchError("weighted_loss called with an empty batch");
    if (losses.size() != weights.size()) throw std::invalid_argument("weighted_loss: size mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) sum += weights[i] * losses[i];
    return sum / static_cast<double>(losses.size());
}

std::vector<double> sample_losses(const MlpEvaluator& model, const SampleList& samples, const LossWeights& lw) {
    LossWeights no_l2 = lw;
    no_l2.l2 = 0;
    std::vector<double> out;
    out.reserve(samples.size());
    const std::span<const float> params(model.parameters());
    for (const auto& ref : samples) out.push_back(mlp_loss(model.shape(), params, *ref.sample, no_l2).total());
    return out;
}

double mean_loss(const MlpEvaluator& model, const SampleList& samples, const LossWeights& lw) {
    const std::vector<double> losses = sample_losses(model, samples, lw);
    std::vector<double> weights;
    weights.reserve(samples.size());
    for (const auto& ref : samples) weights.push_back(ref.weight);
    return weighted_loss(losses, weights);
}

// ---------------------------------------------------------------------------
// Optimizer

namespace {

double cycle_fraction(int iteration, int total, double peak) {
    if (total <= 1) return 0.0;
    const double x = static_cast<double>(iteration) / (total - 1);
    return x <= peak ? x / peak : (1.0 - x) / (1.0 - peak);
}

}  // namespace

double OneCycle::lr(int iteration, int total) const {
    return lr_min + (lr_max - lr_min) * cycle_fraction(iteration, total, peak);
}

double OneCycle::momentum(int iteration, int total) const {
    return momentum_max - (momentum_max - momentum_min) * cycle_fraction(iteration, total, peak);
}

void nag_step(std::span<double> params, std::span<double> velocity, std::span<const double> grad, double lr, double mu) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = mu * velocity[i] + grad[i];
        params[i] -= lr * (grad[i] + mu * velocity[i]);
    }
}

// ---------------------------------------------------------------------------
// Training runs

const char* to_string(TrainMethod m) {
    switch (m) {
        case TrainMethod::Regular: return "regular";
        case TrainMethod::Separated: return "separated";
        case TrainMethod::Staged: return "staged";
        case TrainMethod::StagedSequential: return "staged-sequential";
        case TrainMethod::Weighted: return "weighted";
    }
    return "?";
}

TrainMethod train_method_from_string(const std::string& s) {
    for (auto m : {TrainMethod::Regular, TrainMethod::Separated, TrainMethod::Staged, TrainMethod::StagedSequential,
                   TrainMethod::Weighted})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown training method '" + s + "'");
}

void TrainRunConfig::validate() const {
    if (!(spike_factor > 1.0)) throw std::invalid_argument("spike factor must be > 1");
    if (eval_every < 1) throw std::invalid_argument("eval cadence must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (iterations < 0 || fine_tune_iterations < 0) throw std::invalid_argument("iteration counts must be >= 0");
    if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
    if (method == TrainMethod::Weighted && !(a >= 1.0)) throw std::invalid_argument("weighting factor a must be >= 1");
    if (!(schedule.peak > 0.0 && schedule.peak < 1.0)) throw std::invalid_argument("schedule peak must lie in (0, 1)");
}

nlohmann::json RunLog::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["iterations"] = batch_loss.size();
    j["best_val_loss"] = best_val_loss;
    j["spikes"] = spikes;
    j["checkpoints"] = checkpoint_iterations;
    j["start_hash"] = start_hash;
    j["best_hash"] = best_hash;
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& e : this->evals)
        evals.push_back({{"iteration", e.iteration}, {"val_loss", e.val_loss}, {"best", e.best_val_loss},
                         {"checkpoint", e.checkpoint}, {"spike", e.spike}});
    j["evals"] = evals;
    if (!batch_loss.empty()) j["final_batch_loss"] = batch_loss.back();
    return j;
}

std::uint64_t parameter_hash(std::span<const float> params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = reinterpret_cast<const unsigned char*>(params.data());
    for (std::size_t i = 0; i < params.size_bytes(); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool spike_recovery(std::vector<double>& params, std::vector<double>& velocity, const Checkpoint& best,
                    double new_val_loss, double factor) {
    if (std::isfinite(new_val_loss) && new_val_loss < factor * best.val_loss) return false;
    params = best.params;
    velocity = best.velocity;
    return true;
}

namespace {

std::vector<float> to_float(const std::vector<double>& p) { return {p.begin(), p.end()}; }

double validation_loss(const MlpShape& shape, const std::vector<double>& params, const SampleList& val,
                       const LossWeights& lw) {
    LossWeights no_l2 = lw;
    no_l2.l2 = 0;
    double sum = 0;
    for (const auto& ref : val)
        sum += ref.weight * mlp_loss(shape, std::span<const double>(params), *ref.sample, no_l2).total();
    return sum / static_cast<double>(val.size());
}

}  // namespace

MlpEvaluator train_run(const MlpEvaluator& init, const SampleList& train, const SampleList& val,
                       const TrainRunConfig& cfg, int iterations, RunLog* log, const std::string& name) {
    cfg.validate();
    if (train.empty()) throw DatasetError("training run '" + name + "' has no samples");
    const SampleList& val_set = val.empty() ? train : val;
    const MlpShape shape = init.shape();
    const std::size_t P = shape.parameter_count();

    std::vector<double> params(init.parameters().begin(), init.parameters().end());
    std::vector<double> velocity(P, 0.0);
    std::vector<double> grad(P, 0.0);
    LossWeights lw = cfg.loss;
    lw.l2 = 0;

    RunLog local;
    RunLog& L = log ? *log : local;
    L = RunLog{};
    L.name = name;
    L.start_hash = parameter_hash(init.parameters());

    Checkpoint best{params, velocity, 0, validation_loss(shape, params, val_set, cfg.loss)};
    L.evals.push_back({0, best.val_loss, best.val_loss, true, false});
    L.checkpoint_iterations.push_back(0);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    const int B = static_cast<int>(std::min<std::size_t>(cfg.batch_size, train.size()));
    L.batch_loss.reserve(iterations);
    for (int it = 0; it < iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0;
        for (int b = 0; b < B; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const SampleRef& ref = train[order[cursor++]];
            const double scale = static_cast<double>(ref.weight) / B;
            loss += scale * mlp_loss(shape, std::span<const double>(params), *ref.sample, lw, grad.data(), scale).total();
        }
        if (cfg.loss.l2 != 0.0) {
            double sq = 0;
            for (std::size_t i = 0; i < P; ++i) {
                sq += params[i] * params[i];
                grad[i] += 2.0 * cfg.loss.l2 * params[i];
            }
            loss += cfg.loss.l2 * sq;
        }
        nag_step(params, velocity, grad, cfg.schedule.lr(it, iterations), cfg.schedule.momentum(it, iterations));
        L.batch_loss.push_back(loss);
        if (cfg.after_step) cfg.after_step(it, params);

        if ((it + 1) % cfg.eval_every == 0 || it + 1 == iterations) {
            const double v = validation_loss(shape, params, val_set, cfg.loss);
            EvalRecord rec{it + 1, v, best.val_loss, false, false};
            if (v < best.val_loss) {
                best = Checkpoint{params, velocity, it + 1, v};
                rec.checkpoint = true;
                rec.best_val_loss = v;
                L.checkpoint_iterations.push_back(it + 1);
            } else if (spike_recovery(params, velocity, best, v, cfg.spike_factor)) {
                rec.spike = true;
                ++L.spikes;
            }
            L.evals.push_back(rec);
        }
    }
    L.best_val_loss = best.val_loss;
    MlpEvaluator out(shape, to_float(best.params));
    L.best_hash = parameter_hash(out.parameters());
    return out;
}

nlohmann::json TrainOutput::report() const {
    nlohmann::json j;
    j["schema"] = "pmcts-train/1";
    j["metadata"] = bundle.metadata;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : runs) j["runs"].push_back(r.to_json());
    return j;
}

TrainOutput train(const DatasetBundle& data, const TrainRunConfig& cfg) {
    cfg.validate();
    MlpShape shape;
    shape.hidden = cfg.hidden;
    const MlpEvaluator init = MlpEvaluator::random(shape, cfg.seed, cfg.init_scale);

    const auto require = [&](const SampleList& list, const std::string& what) {
        if (list.empty()) throw DatasetError("training set '" + what + "' is empty");
    };
    const auto phase_name = [](int p) { return std::string(to_string(static_cast<GamePhase>(p))); };

    TrainOutput out;
    const auto run = [&](const MlpEvaluator& from, const SampleList& tr, const SampleList& va, int iterations,
                         const std::string& name) {
        out.runs.emplace_back();
        return std::make_shared<MlpEvaluator>(train_run(from, tr, va, cfg, iterations, &out.runs.back(), name));
    };

    switch (cfg.method) {
        case TrainMethod::Regular: {
            const SampleList all = data.train.all();
            require(all, "no-phases");
            out.bundle = ExpertBundle::uniform(run(init, all, data.val.all(), cfg.iterations, "regular"));
            break;
        }
        case TrainMethod::Separated: {
            for (int p = 0; p < kNumPhases; ++p) require(data.train.phase(static_cast<GamePhase>(p)), phase_name(p));
            for (int p = 0; p < kNumPhases; ++p) {
                const auto ph = static_cast<GamePhase>(p);
                out.bundle.experts[p] = run(init, data.train.phase(ph), data.val.phase(ph), cfg.iterations, phase_name(p));
            }
            break;
        }
        case TrainMethod::Weighted: {
            const SampleList all = data.train.all();
            require(all, "no-phases");
            for (int p = 0; p < kNumPhases; ++p) {
                const auto ph = static_cast<GamePhase>(p);
                SampleList tr = all;
                SampleList va = data.val.all();
                assign_weights(tr, ph, cfg.a);
                assign_weights(va, ph, cfg.a);
                out.bundle.experts[p] = run(init, tr, va, cfg.iterations, phase_name(p));
            }
            break;
        }
        case TrainMethod::Staged:
        case TrainMethod::StagedSequential: {
            const SampleList all = data.train.all();
            require(all, "no-phases");
            for (int p = 0; p < kNumPhases; ++p) require(data.train.phase(static_cast<GamePhase>(p)), phase_name(p));
            auto general = run(init, all, data.val.all(), cfg.iterations, "general");
            auto from = general;
            for (int p = 0; p < kNumPhases; ++p) {
                const auto ph = static_cast<GamePhase>(p);
                auto expert = run(*from, data.train.phase(ph), data.val.phase(ph), cfg.fine_tune_iterations, phase_name(p));
                out.bundle.experts[p] = expert;
                if (cfg.method == TrainMethod::StagedSequential) from = expert;
            }
            break;
        }
    }
    out.bundle.metadata = {{"method", to_string(cfg.method)}, {"hidden", cfg.hidden}, {"seed", cfg.seed}};
    if (cfg.method == TrainMethod::Weighted) out.bundle.metadata["a"] = cfg.a;
    return out;
}

// ---------------------------------------------------------------------------
// Self-play

const char* to_string(SelfPlayMode m) {
    switch (m) {
        case SelfPlayMode::Mcts: return "mcts";
        case SelfPlayMode::M2ctsSeparated: return "m2cts-separated";
        case SelfPlayMode::M2ctsStaged: return "m2cts-staged";
    }
    return "?";
}

SelfPlayMode selfplay_mode_from_string(const std::string& s) {
    for (auto m : {SelfPlayMode::Mcts, SelfPlayMode::M2ctsSeparated, SelfPlayMode::M2ctsStaged})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown self-play mode '" + s + "'");
}

SelfPlayConfig::SelfPlayConfig() {
    search.nodes = 32;
    search.batch_size = 8;
    train.hidden = 32;
    train.iterations = 100;
    train.fine_tune_iterations = 50;
    train.eval_every = 50;
    train.batch_size = 64;
    train.schedule.lr_max = 0.05;
}

int material_balance(const Board& b) {
    static constexpr int kValue[5] = {1, 3, 3, 5, 9};
    int score = 0;
    for (int t = 0; t < 5; ++t) {
        const auto type = static_cast<PieceType>(t);
        score += kValue[t] * (popcount(b.pieces(Color::White, type)) - popcount(b.pieces(Color::Black, type)));
    }
    return score;
}

SelfPlayGame selfplay_game(const ExpertBundle& bundle, SearchType type, const SelfPlayConfig& cfg, std::uint64_t seed) {
    SearchConfig sc = cfg.search;
    sc.noise = true;
    sc.sample_moves = true;
    sc.seed = seed;
    Search search = type == SearchType::M2cts ? Search(bundle, sc) : Search(bundle.experts[0], sc);

    SelfPlayGame game;
    Position p;
    game.record.initial = p;
    std::vector<Position> line;
    std::vector<SearchResult> results;
    while (outcome(p) == Outcome::Ongoing && static_cast<int>(line.size()) < cfg.max_plies) {
        SearchResult r = search.run(p);
        line.push_back(p);
        game.record.moves.push_back(r.best_move);
        p = p.play(r.best_move);
        results.push_back(std::move(r));
    }
    const Outcome o = outcome(p);
    if (o != Outcome::Ongoing) {
        game.record.result = result_from_outcome(o);
    } else {
        game.adjudicated = true;
        const int m = material_balance(p.board());
        game.record.result = m > 0 ? GameResult::WhiteWin : m < 0 ? GameResult::BlackWin : GameResult::Draw;
    }
    game.record.tags["Result"] = to_string(game.record.result);

    std::vector<GamePhase> raw;
    for (const Position& q : line) raw.push_back(phase_of(q));
    raw.push_back(phase_of(p));
    const GameSegmentation seg = segment_labels(raw);

    const int plies = static_cast<int>(line.size());
    for (int i = 0; i < plies; ++i) {
        TrainingSample s = make_sample(line[i], game.record.moves[i], game.record.result, plies - i);
        const std::vector<double> dist = results[i].visit_distribution();
        s.legal.clear();
        s.target_policy.clear();
        for (std::size_t k = 0; k < results[i].moves.size(); ++k) {
            s.legal.push_back(encode_policy(results[i].moves[k], line[i]));
            s.target_policy.push_back(static_cast<float>(dist[k]));
        }
        s.phase = seg.labels[i];
        game.samples.push_back(std::move(s));
    }
    return game;
}

namespace {

std::shared_ptr<const MlpEvaluator> as_mlp(const EvaluatorPtr& e) {
    auto m = std::dynamic_pointer_cast<const MlpEvaluator>(e);
    if (!m) throw std::invalid_argument("self-play training needs network experts, got " + e->name());
    return m;
}

}  // namespace

SelfPlayOutput selfplay_rl(const ExpertBundle* initial, const SelfPlayConfig& cfg,
                           const std::function<void(int, const ExpertBundle&)>& on_update) {
    cfg.train.validate();
    cfg.search.validate();
    ExpertBundle current;
    if (initial) {
        current = *initial;
    } else {
        MlpShape shape;
        shape.hidden = cfg.train.hidden;
        current = ExpertBundle::uniform(
            std::make_shared<MlpEvaluator>(MlpEvaluator::random(shape, cfg.seed, cfg.train.init_scale)));
    }
    for (const auto& e : current.experts) as_mlp(e);
    current.metadata = {{"mode", to_string(cfg.mode)}, {"update", 0}};
    auto general = as_mlp(current.experts[0]);

    const SearchType type = cfg.mode == SelfPlayMode::Mcts ? SearchType::Mcts : SearchType::M2cts;
    SelfPlayOutput out;
    out.versions.push_back(current);
    out.report["schema"] = "pmcts-selfplay/1";
    out.report["mode"] = to_string(cfg.mode);
    out.report["updates"] = nlohmann::json::array();

    std::deque<TrainingSample> replay;
    for (int u = 0; u < cfg.updates; ++u) {
        int wins = 0, draws = 0, losses = 0, adjudicated = 0, plies = 0;
        for (int g = 0; g < cfg.games_per_update; ++g) {
            SelfPlayGame game = selfplay_game(current, type, cfg, mix_seed(cfg.seed, std::uint64_t(u) * 100003 + g));
            wins += game.record.result == GameResult::WhiteWin;
            draws += game.record.result == GameResult::Draw;
            losses += game.record.result == GameResult::BlackWin;
            adjudicated += game.adjudicated;
            plies += game.record.plies();
            for (auto& s : game.samples) replay.push_back(std::move(s));
            while (static_cast<int>(replay.size()) > cfg.replay_capacity) replay.pop_front();
        }

        SampleList all;
        std::array<SampleList, kNumPhases> by_phase;
        for (const auto& s : replay) {
            all.push_back({&s, 1.0f});
            by_phase[index(s.phase)].push_back({&s, 1.0f});
        }
        TrainRunConfig tc = cfg.train;
        tc.seed = mix_seed(cfg.seed, 7919 + u);
        ExpertBundle next;
        nlohmann::json runs = nlohmann::json::array();
        const auto step = [&](const MlpEvaluator& from, const SampleList& list, int iterations, const std::string& name) {
            RunLog log;
            auto m = std::make_shared<MlpEvaluator>(train_run(from, list, list, tc, iterations, &log, name));
            runs.push_back(log.to_json());
            return m;
        };
        switch (cfg.mode) {
            case SelfPlayMode::Mcts:
                next = ExpertBundle::uniform(step(*as_mlp(current.experts[0]), all, tc.iterations, "model"));
                break;
            case SelfPlayMode::M2ctsSeparated:
                for (int p = 0; p < kNumPhases; ++p) {
                    const std::string name = to_string(static_cast<GamePhase>(p));
                    next.experts[p] = by_phase[p].empty() ? current.experts[p]
                                                          : step(*as_mlp(current.experts[p]), by_phase[p], tc.iterations, name);
                }
                break;
            case SelfPlayMode::M2ctsStaged:
                general = step(*general, all, tc.iterations, "general");
                for (int p = 0; p < kNumPhases; ++p) {
                    const std::string name = to_string(static_cast<GamePhase>(p));
                    next.experts[p] = by_phase[p].empty() ? general : step(*general, by_phase[p], tc.fine_tune_iterations, name);
                }
                break;
        }
        next.metadata = {{"mode", to_string(cfg.mode)}, {"update", u + 1}};
        current = next;
        out.versions.push_back(current);
        out.report["updates"].push_back({{"update", u + 1},
                                         {"games", cfg.games_per_update},
                                         {"white_wins", wins},
                                         {"draws", draws},
                                         {"black_wins", losses},
                                         {"adjudicated", adjudicated},
                                         {"plies", plies},
                                         {"replay_size", replay.size()},
                                         {"runs", runs}});
        if (on_update) on_update(u + 1, current);
    }
    out.replay_size = replay.size();
    return out;
}

}  // namespace pmcts
