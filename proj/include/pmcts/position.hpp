#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pmcts/types.hpp"

namespace pmcts {

inline constexpr std::string_view kStartFen = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";
inline constexpr int kHistoryLength = 8;

enum class FenErrorKind {
    FieldCount,
    RankOverflow,
    RankCount,
    BadPieceChar,
    KingCount,
    BadSideToMove,
    BadCastling,
    BadEnPassant,
    BadCounter,
};

const char* to_string(FenErrorKind kind);

class FenError : public std::runtime_error {
public:
    FenError(FenErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
    FenErrorKind kind() const { return kind_; }

private:
    FenErrorKind kind_;
};

class IllegalMoveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Outcome { Ongoing, WhiteWin, BlackWin, Draw };

const char* to_string(Outcome o);

namespace attacks {
Bitboard knight(Square s);
Bitboard king(Square s);
/// Squares attacked by a pawn of color `c` standing on `s`.
Bitboard pawn(Color c, Square s);
Bitboard bishop(Square s, Bitboard occupancy);
Bitboard rook(Square s, Bitboard occupancy);
inline Bitboard queen(Square s, Bitboard occupancy) { return bishop(s, occupancy) | rook(s, occupancy); }
}  // namespace attacks

/// Fixed-capacity move buffer used by the generator.
struct MoveList {
    std::array<Move, 256> moves{};
    int size = 0;

    void push(const Move& m) { moves[size++] = m; }
    const Move* begin() const { return moves.data(); }
    const Move* end() const { return moves.data() + size; }
};

/// Raw board state without game history: placement, side to move, castling
/// rights, en-passant target and the two FEN counters.
struct Board {
    std::array<Bitboard, 6> by_type{};
    std::array<Bitboard, 2> by_color{};
    std::array<Piece, 64> squares{};
    Color side_to_move = Color::White;
    std::uint8_t castling = 0;
    std::optional<Square> en_passant;
    int halfmove_clock = 0;
    int fullmove_number = 1;
    std::uint64_t hash = 0;

    Bitboard occupied() const { return by_color[0] | by_color[1]; }
    Bitboard pieces(Color c) const { return by_color[index(c)]; }
    Bitboard pieces(Color c, PieceType t) const { return by_color[index(c)] & by_type[index(t)]; }
    Bitboard pieces(PieceType t) const { return by_type[index(t)]; }
    Piece at(Square s) const { return squares[s]; }
    Square king_square(Color c) const { return lsb(pieces(c, PieceType::King)); }

    void put(Square s, Piece p);
    void remove(Square s);

    bool attacked(Square s, Color by) const;
    Bitboard attackers(Square s, Color by, Bitboard occupancy) const;
    bool in_check() const { return attacked(king_square(side_to_move), ~side_to_move); }
    Bitboard checkers() const;

    /// Pseudo-legal moves (may leave own king in check).
    void generate_pseudo(MoveList& out) const;
    /// Strictly legal moves, unsorted.
    void generate_legal(MoveList& out) const;
    /// Plays a pseudo-legal move without any validation.
    void make(const Move& m);

    std::uint64_t compute_hash() const;
};

/// Full game state: a Board plus the last eight moves and the repetition
/// bookkeeping along the game line. Immutable from the outside; every
/// transition returns a new value.
class Position {
public:
    Position();  // standard start position

    static Position from_board(const Board& board);

    const Board& board() const { return board_; }
    Color side_to_move() const { return board_.side_to_move; }
    Piece at(Square s) const { return board_.at(s); }
    std::uint8_t castling() const { return board_.castling; }
    std::optional<Square> en_passant() const { return board_.en_passant; }
    int halfmove_clock() const { return board_.halfmove_clock; }
    int fullmove_number() const { return board_.fullmove_number; }
    std::uint64_t hash() const { return board_.hash; }
    bool in_check() const { return board_.in_check(); }

    /// Most recent move first; at most eight entries.
    std::span<const Move> history() const { return {history_.data(), static_cast<std::size_t>(history_size_)}; }
    /// How often the current placement has occurred on the game line (>= 1).
    int repetition_count() const { return repetitions_; }
    /// Plies played since this position was constructed from FEN.
    int game_ply() const { return game_ply_; }

    /// Plays a move that is already known to be legal (e.g. taken from
    /// legal_moves). Use apply_move for untrusted input.
    Position play(const Move& m) const;

    friend Position color_flip(const Position& p);

private:
    explicit Position(const Board& board);

    struct HashLine {
        std::uint64_t hash;
        std::shared_ptr<const HashLine> prev;
    };

    Board board_;
    std::array<Move, kHistoryLength> history_{};
    int history_size_ = 0;
    int repetitions_ = 1;
    int game_ply_ = 0;
    std::shared_ptr<const HashLine> line_;
};

Position parse_fen(std::string_view text);
std::string to_fen(const Position& p);
std::string to_fen(const Board& b);

/// Legal moves sorted by (origin, target, promotion).
std::vector<Move> legal_moves(const Position& p);
/// Checked move application; throws IllegalMoveError.
Position apply_move(const Position& p, const Move& m);
/// Resolve a UCI move string against the position; throws IllegalMoveError.
Move resolve_uci(const Position& p, std::string_view text);

std::uint64_t perft(const Position& p, int depth);

bool insufficient_material(const Board& b);
Outcome outcome(const Position& p);

/// Swap colors and mirror ranks; history is mirrored too.
Position color_flip(const Position& p);

}  // namespace pmcts
