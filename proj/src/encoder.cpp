#include "pmcts/encoder.hpp"

#include <sstream>

namespace pmcts {

namespace {

constexpr std::array<const char*, kNumPlanes> kPlaneNames = {
    "p1_pawn", "p1_knight", "p1_bishop", "p1_rook", "p1_queen", "p1_king",
    "p2_pawn", "p2_knight", "p2_bishop", "p2_rook", "p2_queen", "p2_king",
    "repetition_2", "repetition_3", "en_passant",
    "p1_castle_king", "p1_castle_queen", "p2_castle_king", "p2_castle_queen",
    "no_progress",
    "last1_from", "last1_to", "last2_from", "last2_to", "last3_from", "last3_to", "last4_from", "last4_to",
    "last5_from", "last5_to", "last6_from", "last6_to", "last7_from", "last7_to", "last8_from", "last8_to",
    "is960", "p1_pieces", "p2_pieces", "checkerboard",
    "diff_pawn", "diff_knight", "diff_bishop", "diff_rook", "diff_queen",
    "opposite_bishops", "checkers",
    "count_pawn", "count_knight", "count_bishop", "count_rook", "count_queen",
};

// Light squares, a1 being dark.
constexpr Bitboard kCheckerboard = ~kDarkSquares;

Bitboard relative(Bitboard b, Color us) { return us == Color::White ? b : flip_vertical(b); }
Square relative(Square s, Color us) { return us == Color::White ? s : mirror(s); }

bool opposite_color_bishops(const Board& b) {
    const Bitboard wb = b.pieces(Color::White, PieceType::Bishop);
    const Bitboard bb = b.pieces(Color::Black, PieceType::Bishop);
    if (popcount(wb) != 1 || popcount(bb) != 1) return false;
    return ((wb & kDarkSquares) != 0) != ((bb & kDarkSquares) != 0);
}

bool ep_capturable(const Board& b) {
    if (!b.en_passant) return false;
    const Color us = b.side_to_move;
    const Bitboard pawns = b.pieces(us, PieceType::Pawn);
    const Square ep = *b.en_passant;
    const int f = file_of(ep);
    const int r = rank_of(ep) + (us == Color::White ? -1 : 1);
    for (int df : {-1, 1}) {
        const int ff = f + df;
        if (ff >= 0 && ff < 8 && (pawns & bit(make_square(ff, r)))) return true;
    }
    return false;
}

int under_promotion_index(const Move& rel) {
    const int dir = file_of(rel.to) - file_of(rel.from) + 1;
    const int piece = rel.promotion == PieceType::Knight ? 0 : rel.promotion == PieceType::Bishop ? 1 : 2;
    return kUnderPromotionBase + (file_of(rel.from) * 3 + dir) * 3 + piece;
}

}  // namespace

bool is_scalar_plane(int plane) {
    return (plane >= planes::Repetitions && plane < planes::EnPassant) ||
           (plane >= planes::P1Castling && plane <= planes::NoProgress) || plane == planes::Is960 ||
           (plane >= planes::MaterialDiff && plane <= planes::OppositeBishops) || plane >= planes::MaterialCount;
}

bool is_int_plane(int plane) {
    return plane == planes::NoProgress || (plane >= planes::MaterialDiff && plane < planes::OppositeBishops) ||
           plane >= planes::MaterialCount;
}

const char* plane_name(int plane) { return kPlaneNames.at(static_cast<std::size_t>(plane)); }

std::vector<float> PlaneStack::to_dense() const {
    std::vector<float> out(kInputSize);
    write_dense(out.data());
    return out;
}

void PlaneStack::write_dense(float* out) const {
    for (int pl = 0; pl < kNumPlanes; ++pl) {
        float* row = out + pl * kPlaneCells;
        if (is_scalar_plane(pl)) {
            for (int s = 0; s < kPlaneCells; ++s) row[s] = scalars[pl];
        } else {
            for (int s = 0; s < kPlaneCells; ++s) row[s] = static_cast<float>((masks[pl] >> s) & 1ULL);
        }
    }
}

PlaneStack encode_planes(const Position& p) {
    const Board& b = p.board();
    const Color us = b.side_to_move;
    const Color them = ~us;
    PlaneStack st;

    for (int t = 0; t < 6; ++t) {
        const auto type = static_cast<PieceType>(t);
        st.masks[planes::P1Pieces + t] = relative(b.pieces(us, type), us);
        st.masks[planes::P2Pieces + t] = relative(b.pieces(them, type), us);
    }
    st.scalars[planes::Repetitions] = p.repetition_count() >= 2 ? 1.0f : 0.0f;
    st.scalars[planes::Repetitions + 1] = p.repetition_count() >= 3 ? 1.0f : 0.0f;
    if (ep_capturable(b)) st.masks[planes::EnPassant] = bit(relative(*b.en_passant, us));

    const auto rights = [&](Color c, bool king_side) {
        const std::uint8_t flag = c == Color::White ? (king_side ? castling::WhiteKing : castling::WhiteQueen)
                                                    : (king_side ? castling::BlackKing : castling::BlackQueen);
        return (b.castling & flag) ? 1.0f : 0.0f;
    };
    st.scalars[planes::P1Castling] = rights(us, true);
    st.scalars[planes::P1Castling + 1] = rights(us, false);
    st.scalars[planes::P2Castling] = rights(them, true);
    st.scalars[planes::P2Castling + 1] = rights(them, false);
    st.scalars[planes::NoProgress] = static_cast<float>(b.halfmove_clock);

    const auto hist = p.history();
    for (std::size_t i = 0; i < hist.size(); ++i) {
        st.masks[planes::LastMoves + 2 * i] = bit(relative(hist[i].from, us));
        st.masks[planes::LastMoves + 2 * i + 1] = bit(relative(hist[i].to, us));
    }

    st.scalars[planes::Is960] = 0.0f;
    st.masks[planes::P1Grouped] = relative(b.pieces(us), us);
    st.masks[planes::P2Grouped] = relative(b.pieces(them), us);
    st.masks[planes::Checkerboard] = kCheckerboard;
    for (int t = 0; t < 5; ++t) {
        const auto type = static_cast<PieceType>(t);
        const int mine = popcount(b.pieces(us, type));
        const int theirs = popcount(b.pieces(them, type));
        st.scalars[planes::MaterialDiff + t] = static_cast<float>(mine - theirs);
        st.scalars[planes::MaterialCount + t] = static_cast<float>(mine);
    }
    st.scalars[planes::OppositeBishops] = opposite_color_bishops(b) ? 1.0f : 0.0f;
    st.masks[planes::Checkers] = relative(b.checkers(), us);
    return st;
}

void dump_planes(std::ostream& out, const PlaneStack& stack) {
    for (int pl = 0; pl < kNumPlanes; ++pl) {
        out << "plane " << pl << ' ' << plane_name(pl) << '\n';
        for (int r = 7; r >= 0; --r) {
            for (int f = 0; f < 8; ++f) {
                if (f) out << ' ';
                out << static_cast<int>(stack.at(pl, make_square(f, r)));
            }
            out << '\n';
        }
        out << '\n';
    }
}

std::string dump_planes(const PlaneStack& stack) {
    std::ostringstream ss;
    dump_planes(ss, stack);
    return ss.str();
}

int encode_policy(const Move& m, const Position& p) {
    const Color us = p.side_to_move();
    Move rel = m;
    rel.from = relative(m.from, us);
    rel.to = relative(m.to, us);
    if (m.is_promotion() && m.promotion != PieceType::Queen) return under_promotion_index(rel);
    return rel.from * 64 + rel.to;
}

Move decode_policy(int index, const Position& p) {
    if (index < 0 || index >= kPolicySize) throw PolicyDecodeError("policy index out of range: " + std::to_string(index));
    for (const Move& m : legal_moves(p))
        if (encode_policy(m, p) == index) return m;
    throw PolicyDecodeError("no legal move with policy index " + std::to_string(index));
}

std::vector<IndexedMove> indexed_legal_moves(const Position& p) {
    std::vector<IndexedMove> out;
    for (const Move& m : legal_moves(p)) out.push_back({m, encode_policy(m, p)});
    return out;
}

}  // namespace pmcts
