#pragma once

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pmcts/position.hpp"

namespace pmcts {

enum class GameResult { WhiteWin, Draw, BlackWin, Unknown };

const char* to_string(GameResult r);
GameResult result_from_string(std::string_view text);
GameResult result_from_outcome(Outcome o);

struct GameRecord {
    Position initial;
    std::vector<Move> moves;
    GameResult result = GameResult::Unknown;
    std::map<std::string, std::string> tags;
    /// Optional per-ply comments written into exported PGN.
    std::vector<std::string> comments;

    int plies() const { return static_cast<int>(moves.size()); }
    /// Positions before each move plus the final position (plies()+1 entries).
    std::vector<Position> replay() const;
    std::optional<int> elo(std::string_view tag) const;
    /// "YYYY-MM" from the Date tag, if present.
    std::optional<std::string> month() const;
};

class SanError : public std::runtime_error {
public:
    enum class Kind { Malformed, NoMatch, Ambiguous };
    SanError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Standard algebraic notation with minimal disambiguation and check marks.
std::string to_san(const Position& p, const Move& m);
/// Lenient SAN reader: check/mate marks and annotation suffixes are optional.
Move parse_san(const Position& p, std::string_view san);

struct PgnSkip {
    int game_index = 0;  // zero-based index of the game within the stream
    std::string reason;
};

/// Streaming reader. Games with unresolvable moves are reported through
/// `skipped()` and parsing continues with the next game.
class PgnReader {
public:
    explicit PgnReader(std::istream& in) : in_(in) {}

    std::optional<GameRecord> next();
    const std::vector<PgnSkip>& skipped() const { return skipped_; }

private:
    std::optional<std::string> read_game_text();

    std::istream& in_;
    std::string pending_line_;
    bool has_pending_ = false;
    int game_index_ = 0;
    std::vector<PgnSkip> skipped_;
};

struct PgnParseResult {
    std::vector<GameRecord> games;
    std::vector<PgnSkip> skipped;
};

PgnParseResult parse_pgn(std::istream& in);
PgnParseResult parse_pgn_string(std::string_view text);

void write_pgn(std::ostream& out, const GameRecord& game);

}  // namespace pmcts
