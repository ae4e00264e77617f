#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmcts/experts.hpp"
#include "pmcts/pgn.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

// ---------------------------------------------------------------------------
// Elo

/// Expected score of a player rated r_a against one rated r_b.
double expected_score(double r_a, double r_b);

struct EloEstimate {
    enum class Bound { Exact, AtLeast, AtMost };
    double elo = 0;
    double ci95 = 0;  // half-width of the 95% interval
    Bound bound = Bound::Exact;

    double lower() const { return elo - ci95; }
    double upper() const { return elo + ci95; }
};

/// Elo difference for score fraction s over n games with `draws` draws. The
/// interval uses the trinomial per-game variance propagated through the Elo
/// curve. A perfect or zero score yields a one-sided bound.
EloEstimate elo_from_score(double s, int n, int draws);

// ---------------------------------------------------------------------------
// Engines

class Engine {
public:
    struct Choice {
        Move move;
        int score = 0;  // from the mover's point of view, value_to_score units
        int nodes = 0;
    };

    virtual ~Engine() = default;
    virtual std::string name() const = 0;
    virtual void new_game(std::uint64_t seed) = 0;
    virtual Choice choose(const Position& p) = 0;
};

struct EngineConfig {
    enum class Kind { Search, Random };
    std::string name = "engine";
    Kind kind = Kind::Search;
    SearchType type = SearchType::Mcts;  // Mcts uses bundle.experts[0]
    ExpertBundle bundle;
    SearchConfig search;
};

std::unique_ptr<Engine> make_engine(const EngineConfig& engine);

// ---------------------------------------------------------------------------
// Adjudication

struct ResignRule {
    bool enabled = true;
    int move_count = 5;
    int score = 600;
};

struct DrawRule {
    bool enabled = true;
    int move_number = 30;  // only moves after this full-move number count
    int move_count = 4;
    int score = 20;
};

struct Adjudication {
    GameResult result = GameResult::Draw;
    std::string reason;
};

/// Tracks the per-side score streaks of one game.
class Adjudicator {
public:
    Adjudicator(ResignRule resign, DrawRule draw) : resign_(resign), draw_(draw) {}

    /// Records the score reported by `mover` for a move played at full-move
    /// number `move_number`.
    std::optional<Adjudication> record(Color mover, int move_number, int score);

private:
    ResignRule resign_;
    DrawRule draw_;
    std::array<int, 2> losing_{};
    std::array<int, 2> quiet_{};
};

// ---------------------------------------------------------------------------
// Matches

/// One position per line: FEN or EPD (first four fields), '#' comments allowed.
std::vector<Position> read_openings(const std::filesystem::path& file);
Position parse_epd_line(const std::string& line);

struct MatchConfig {
    EngineConfig a, b;
    std::vector<Position> openings;
    int pairs = 50;  // games = 2 * pairs; each sampled opening is played with both colours
    ResignRule resign;
    DrawRule draw;
    int max_plies = 400;  // games reaching the cap are drawn
    int concurrency = 1;
    std::uint64_t seed = 0;
    std::string event = "pmcts match";
};

struct AbortedPair {
    int pair = 0;
    std::string error;
};

struct MatchResult {
    int wins = 0, draws = 0, losses = 0;  // from engine A's point of view
    std::vector<GameRecord> games;         // ordered by pair, then colour
    std::vector<AbortedPair> aborted;
    std::string name_a, name_b;

    int games_played() const { return wins + draws + losses; }
    double score() const;
    EloEstimate elo() const;
    nlohmann::json summary() const;
};

/// Samples cfg.pairs openings without replacement and plays each twice with
/// colours swapped. Pairs may run on several threads; results are merged by
/// pair index so the outcome does not depend on scheduling.
MatchResult play_match(const MatchConfig& cfg);

/// Engine A runs M2CTS with the bundle's expert for the enabled phases and
/// `baseline` elsewhere; engine B runs classical MCTS with `baseline`.
/// Search settings come from cfg.a.search.
MatchResult ablation_match(const ExpertBundle& bundle, EvaluatorPtr baseline, std::array<bool, kNumPhases> enabled,
                           MatchConfig cfg);

void write_match_pgn(std::ostream& out, const MatchResult& result);

}  // namespace pmcts
