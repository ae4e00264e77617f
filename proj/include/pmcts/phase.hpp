#pragma once

#include <array>
#include <optional>
#include <vector>

#include "pmcts/pgn.hpp"
#include "pmcts/position.hpp"

namespace pmcts {

enum class GamePhase : int { Opening = 0, Middlegame = 1, Endgame = 2 };
inline constexpr int kNumPhases = 3;

const char* to_string(GamePhase phase);
inline int index(GamePhase phase) { return static_cast<int>(phase); }

struct PhaseReport {
    GamePhase phase = GamePhase::Opening;
    int major_minor_count = 0;
    bool backrank_sparse = false;
    int mixedness = 0;
};

/// Queens, rooks, bishops and knights of both colors.
int major_minor_count(const Board& b);
/// White has fewer than four pieces on rank 1, or black fewer than four on rank 8.
bool backrank_sparse(const Board& b);
/// Score of one 2x2 window with the given piece counts; `y` is the window's
/// lower rank, 1-indexed.
int mixedness_window_score(int white, int black, int y);
/// Sum of window scores over the 7x7 grid of 2x2 windows starting at a1.
int mixedness(const Board& b);

PhaseReport classify(const Board& b);
inline PhaseReport classify(const Position& p) { return classify(p.board()); }
inline GamePhase phase_of(const Position& p) { return classify(p.board()).phase; }

inline constexpr int kEndgameMaxPieces = 6;
inline constexpr int kMiddlegameMaxPieces = 10;
inline constexpr int kMixednessThreshold = 150;

struct GameSegmentation {
    /// Label of every position on the game line, including the final one
    /// (plies()+1 entries). Non-decreasing.
    std::vector<GamePhase> labels;
    std::optional<int> middlegame_start;  // first ply labelled Middlegame or later
    std::optional<int> endgame_start;
};

/// Labels are the running maximum of the raw classification.
GameSegmentation segment_labels(const std::vector<GamePhase>& raw);
GameSegmentation segment_game(const GameRecord& g);

/// Per-move-number phase distribution over a corpus, using segmented labels
/// of the positions before each move. Move number is the full-move counter
/// (1 for the first white and black move).
struct PhaseStatsRow {
    int move = 0;
    std::array<long, kNumPhases> counts{};
    long total() const { return counts[0] + counts[1] + counts[2]; }
};

struct PhaseStats {
    std::vector<PhaseStatsRow> rows;
    long games = 0;
    /// Mean and standard deviation of the move number at which the
    /// middlegame and the endgame begin, over games that reach them.
    double middlegame_start_mean = 0, middlegame_start_std = 0;
    double endgame_start_mean = 0, endgame_start_std = 0;
    long middlegame_games = 0, endgame_games = 0;
};

PhaseStats phase_stats(const std::vector<GameRecord>& games);

}  // namespace pmcts
