#pragma once

#include <array>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmcts/position.hpp"

namespace pmcts {

inline constexpr int kNumPlanes = 52;
inline constexpr int kPlaneCells = 64;
inline constexpr int kInputSize = kNumPlanes * kPlaneCells;
inline constexpr int kPolicySize = 64 * 64 + 64 * 3 * 2;
inline constexpr int kUnderPromotionBase = 64 * 64;

/// First plane index of every feature group, in stack order.
namespace planes {
inline constexpr int P1Pieces = 0;
inline constexpr int P2Pieces = 6;
inline constexpr int Repetitions = 12;
inline constexpr int EnPassant = 14;
inline constexpr int P1Castling = 15;
inline constexpr int P2Castling = 17;
inline constexpr int NoProgress = 19;
inline constexpr int LastMoves = 20;
inline constexpr int Is960 = 36;
inline constexpr int P1Grouped = 37;
inline constexpr int P2Grouped = 38;
inline constexpr int Checkerboard = 39;
inline constexpr int MaterialDiff = 40;
inline constexpr int OppositeBishops = 45;
inline constexpr int Checkers = 46;
inline constexpr int MaterialCount = 47;
}  // namespace planes

/// True for planes that hold a single value broadcast over the board.
bool is_scalar_plane(int plane);
/// True for planes holding integers rather than {0,1}.
bool is_int_plane(int plane);
const char* plane_name(int plane);

/// Compact plane stack: square planes are bit masks, scalar planes one value.
/// Squares are relative to the side to move (ranks mirrored for black).
struct PlaneStack {
    std::array<Bitboard, kNumPlanes> masks{};
    std::array<float, kNumPlanes> scalars{};

    float at(int plane, Square s) const {
        return is_scalar_plane(plane) ? scalars[plane] : static_cast<float>((masks[plane] >> s) & 1ULL);
    }
    /// plane-major, then a1..h8 within each plane.
    std::vector<float> to_dense() const;
    void write_dense(float* out) const;

    friend bool operator==(const PlaneStack&, const PlaneStack&) = default;
};

PlaneStack encode_planes(const Position& p);

/// Text dump: one block per plane, a header line then 8 rows from the
/// relative eighth rank down to the first, files a..h left to right.
void dump_planes(std::ostream& out, const PlaneStack& stack);
std::string dump_planes(const PlaneStack& stack);

class PolicyDecodeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

int encode_policy(const Move& m, const Position& p);
Move decode_policy(int index, const Position& p);

struct IndexedMove {
    Move move;
    int index;
};
/// Legal moves in legal_moves order paired with their policy indices.
std::vector<IndexedMove> indexed_legal_moves(const Position& p);

}  // namespace pmcts
