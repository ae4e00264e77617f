#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pmcts {

using Bitboard = std::uint64_t;
using Square = std::int8_t;  // a1 = 0 ... h8 = 63

enum class Color : std::uint8_t { White = 0, Black = 1 };

constexpr Color operator~(Color c) { return c == Color::White ? Color::Black : Color::White; }
constexpr int index(Color c) { return static_cast<int>(c); }

// Order matches the encoder's piece-plane order.
enum class PieceType : std::uint8_t { Pawn = 0, Knight, Bishop, Rook, Queen, King, None };

constexpr int index(PieceType t) { return static_cast<int>(t); }

struct Piece {
    Color color = Color::White;
    PieceType type = PieceType::None;

    constexpr bool empty() const { return type == PieceType::None; }
    friend constexpr bool operator==(const Piece&, const Piece&) = default;
};

constexpr Square make_square(int file, int rank) { return static_cast<Square>(rank * 8 + file); }
constexpr int file_of(Square s) { return s & 7; }
constexpr int rank_of(Square s) { return s >> 3; }
constexpr Square mirror(Square s) { return static_cast<Square>(s ^ 56); }
constexpr Bitboard bit(Square s) { return Bitboard{1} << s; }

inline int popcount(Bitboard b) { return std::popcount(b); }
inline Square lsb(Bitboard b) { return static_cast<Square>(std::countr_zero(b)); }
inline Square msb(Bitboard b) { return static_cast<Square>(63 - std::countl_zero(b)); }
inline Square pop_lsb(Bitboard& b) {
    Square s = lsb(b);
    b &= b - 1;
    return s;
}

// Mirror a bitboard vertically (rank 1 <-> rank 8).
inline Bitboard flip_vertical(Bitboard b) { return __builtin_bswap64(b); }

constexpr Bitboard kRank1 = 0x00000000000000FFULL;
constexpr Bitboard kRank8 = 0xFF00000000000000ULL;
constexpr Bitboard kFileA = 0x0101010101010101ULL;
constexpr Bitboard kFileH = 0x8080808080808080ULL;
constexpr Bitboard kDarkSquares = 0xAA55AA55AA55AA55ULL;

std::string square_name(Square s);
std::optional<Square> parse_square(std::string_view text);

char piece_char(Piece p);
std::optional<Piece> piece_from_char(char c);

namespace castling {
constexpr std::uint8_t WhiteKing = 1;
constexpr std::uint8_t WhiteQueen = 2;
constexpr std::uint8_t BlackKing = 4;
constexpr std::uint8_t BlackQueen = 8;
}  // namespace castling

/// A chess move. Equality and ordering look only at origin, target and
/// promotion; the flags are derived from the position the move is played in.
struct Move {
    enum Flag : std::uint8_t { Quiet = 0, Capture = 1, Castle = 2, EnPassant = 4, DoublePush = 8 };

    Square from = 0;
    Square to = 0;
    PieceType promotion = PieceType::None;
    std::uint8_t flags = Quiet;

    constexpr bool is_capture() const { return flags & Capture; }
    constexpr bool is_castle() const { return flags & Castle; }
    constexpr bool is_en_passant() const { return flags & EnPassant; }
    constexpr bool is_promotion() const { return promotion != PieceType::None; }

    friend constexpr bool operator==(const Move& a, const Move& b) {
        return a.from == b.from && a.to == b.to && a.promotion == b.promotion;
    }
    friend constexpr auto operator<=>(const Move& a, const Move& b) {
        if (auto c = a.from <=> b.from; c != 0) return c;
        if (auto c = a.to <=> b.to; c != 0) return c;
        return a.promotion <=> b.promotion;
    }

    /// Long algebraic (UCI) text, e.g. "e2e4", "e7e8q".
    std::string uci() const;
};

/// Parse UCI move text. Flags are left empty; resolve against a position
/// to obtain them.
std::optional<Move> parse_uci_move(std::string_view text);

/// Derives an independent seed from a base seed and a salt (splitmix64 finalizer).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace pmcts
