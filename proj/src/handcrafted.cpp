#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "pmcts/experts.hpp"

namespace pmcts {

namespace {

// Piece-square tables written from White's side, a8 first.
constexpr std::array<std::array<int, 64>, 6> kPst = {{
    {  // pawn
          0,   0,   0,   0,   0,   0,   0,   0,
         50,  50,  50,  50,  50,  50,  50,  50,
         10,  10,  20,  30,  30,  20,  10,  10,
          5,   5,  10,  25,  25,  10,   5,   5,
          0,   0,   0,  20,  20,   0,   0,   0,
          5,  -5, -10,   0,   0, -10,  -5,   5,
          5,  10,  10, -20, -20,  10,  10,   5,
          0,   0,   0,   0,   0,   0,   0,   0,
    },
    {  // knight
        -50, -40, -30, -30, -30, -30, -40, -50,
        -40, -20,   0,   0,   0,   0, -20, -40,
        -30,   0,  10,  15,  15,  10,   0, -30,
        -30,   5,  15,  20,  20,  15,   5, -30,
        -30,   0,  15,  20,  20,  15,   0, -30,
        -30,   5,  10,  15,  15,  10,   5, -30,
        -40, -20,   0,   5,   5,   0, -20, -40,
        -50, -40, -30, -30, -30, -30, -40, -50,
    },
    {  // bishop
        -20, -10, -10, -10, -10, -10, -10, -20,
        -10,   0,   0,   0,   0,   0,   0, -10,
        -10,   0,   5,  10,  10,   5,   0, -10,
        -10,   5,   5,  10,  10,   5,   5, -10,
        -10,   0,  10,  10,  10,  10,   0, -10,
        -10,  10,  10,  10,  10,  10,  10, -10,
        -10,   5,   0,   0,   0,   0,   5, -10,
        -20, -10, -10, -10, -10, -10, -10, -20,
    },
    {  // rook
          0,   0,   0,   0,   0,   0,   0,   0,
          5,  10,  10,  10,  10,  10,  10,   5,
         -5,   0,   0,   0,   0,   0,   0,  -5,
         -5,   0,   0,   0,   0,   0,   0,  -5,
         -5,   0,   0,   0,   0,   0,   0,  -5,
         -5,   0,   0,   0,   0,   0,   0,  -5,
         -5,   0,   0,   0,   0,   0,   0,  -5,
          0,   0,   0,   5,   5,   0,   0,   0,
    },
    {  // queen
        -20, -10, -10,  -5,  -5, -10, -10, -20,
        -10,   0,   0,   0,   0,   0,   0, -10,
        -10,   0,   5,   5,   5,   5,   0, -10,
         -5,   0,   5,   5,   5,   5,   0,  -5,
          0,   0,   5,   5,   5,   5,   0,  -5,
        -10,   5,   5,   5,   5,   5,   0, -10,
        -10,   0,   5,   0,   0,   0,   0, -10,
        -20, -10, -10,  -5,  -5, -10, -10, -20,
    },
    {  // king
        -30, -40, -40, -50, -50, -40, -40, -30,
        -30, -40, -40, -50, -50, -40, -40, -30,
        -30, -40, -40, -50, -50, -40, -40, -30,
        -30, -40, -40, -50, -50, -40, -40, -30,
        -20, -30, -30, -40, -40, -30, -30, -20,
        -10, -20, -20, -20, -20, -20, -20, -10,
         20,  20,   0,   0,   0,   0,  20,  20,
         20,  30,  10,   0,   0,  10,  30,  20,
    },
}};

constexpr std::array<int, 64> kKingEndgame = {
    -50, -40, -30, -20, -20, -30, -40, -50,
    -30, -20, -10,   0,   0, -10, -20, -30,
    -30, -10,  20,  30,  30,  20, -10, -30,
    -30, -10,  30,  40,  40,  30, -10, -30,
    -30, -10,  30,  40,  40,  30, -10, -30,
    -30, -10,  20,  30,  30,  20, -10, -30,
    -30, -30,   0,   0,   0,   0, -30, -30,
    -50, -30, -30, -30, -30, -30, -30, -50,
};

constexpr std::array<int, 8> kPassedBonus = {0, 5, 10, 20, 35, 60, 100, 0};

int table_index(Color c, Square s) {
    const int rank = c == Color::White ? 7 - rank_of(s) : rank_of(s);
    return rank * 8 + file_of(s);
}

int pst(PieceType t, Color c, Square s) { return kPst[index(t)][table_index(c, s)]; }

int distance(Square a, Square b) { return std::max(std::abs(file_of(a) - file_of(b)), std::abs(rank_of(a) - rank_of(b))); }

int center_distance(Square s) {
    const int f = file_of(s), r = rank_of(s);
    return std::max(3 - f, f - 4) + std::max(3 - r, r - 4);
}

Bitboard file_span(int file) { return kFileA << file; }

bool is_passed(const Board& b, Color c, Square s) {
    const Bitboard enemy = b.pieces(~c, PieceType::Pawn);
    const int f = file_of(s), r = rank_of(s);
    Bitboard files = file_span(f);
    if (f > 0) files |= file_span(f - 1);
    if (f < 7) files |= file_span(f + 1);
    Bitboard ahead = 0;
    for (int rr = 0; rr < 8; ++rr)
        if (c == Color::White ? rr > r : rr < r) ahead |= kRank1 << (8 * rr);
    return (enemy & files & ahead) == 0;
}

int non_pawn_material(const Board& b, Color c, const HandcraftedConfig& cfg) {
    int m = 0;
    for (int t = 1; t < 5; ++t) m += cfg.material[t] * popcount(b.pieces(c, static_cast<PieceType>(t)));
    return m;
}

int side_terms(const Board& b, Color c, const HandcraftedConfig& cfg, int eg_num, int eg_den) {
    int score = 0;
    const Bitboard own = b.pieces(c);
    const Bitboard occ = b.occupied();
    for (int t = 0; t < 6; ++t) {
        const auto type = static_cast<PieceType>(t);
        Bitboard pieces = b.pieces(c, type);
        while (pieces) {
            const Square s = pop_lsb(pieces);
            if (t < 5) score += cfg.material[t];
            if (cfg.piece_square) {
                if (type == PieceType::King && cfg.king_pawn_terms) {
                    const int mid = pst(type, c, s);
                    const int end = kKingEndgame[table_index(c, s)];
                    score += mid + (end - mid) * eg_num / eg_den;
                } else {
                    score += pst(type, c, s);
                }
            }
            if (cfg.mobility_weight) {
                Bitboard att = 0;
                switch (type) {
                    case PieceType::Knight: att = attacks::knight(s); break;
                    case PieceType::Bishop: att = attacks::bishop(s, occ); break;
                    case PieceType::Rook: att = attacks::rook(s, occ); break;
                    case PieceType::Queen: att = attacks::queen(s, occ); break;
                    default: break;
                }
                score += cfg.mobility_weight * popcount(att & ~own);
            }
        }
    }
    if (cfg.king_pawn_terms) {
        const Square own_king = b.king_square(c);
        const Square their_king = b.king_square(~c);
        Bitboard pawns = b.pieces(c, PieceType::Pawn);
        while (pawns) {
            const Square s = pop_lsb(pawns);
            if (!is_passed(b, c, s)) continue;
            const int rel_rank = c == Color::White ? rank_of(s) : 7 - rank_of(s);
            const Square promo = make_square(file_of(s), c == Color::White ? 7 : 0);
            int bonus = kPassedBonus[rel_rank];
            bonus += (distance(their_king, promo) - distance(own_king, promo)) * 5 * rel_rank / 2;
            score += bonus + bonus * eg_num / eg_den;
        }
    }
    return score;
}

/// Rule of the square: a passed pawn the defending king cannot catch, when
/// the defender has only king and pawns.
int unstoppable_passer(const Board& b, Color c, const HandcraftedConfig& cfg) {
    if (non_pawn_material(b, ~c, cfg) != 0) return 0;
    const Square their_king = b.king_square(~c);
    const Bitboard occ = b.occupied();
    int best = 0;
    Bitboard pawns = b.pieces(c, PieceType::Pawn);
    while (pawns) {
        const Square s = pop_lsb(pawns);
        if (!is_passed(b, c, s)) continue;
        const int rel_rank = c == Color::White ? rank_of(s) : 7 - rank_of(s);
        const Square promo = make_square(file_of(s), c == Color::White ? 7 : 0);
        // The path must be clear, including of the own king.
        bool clear = true;
        for (int r = rank_of(s) + (c == Color::White ? 1 : -1); r >= 0 && r < 8; r += c == Color::White ? 1 : -1)
            if (occ & (Bitboard{1} << make_square(file_of(s), r))) clear = false;
        if (!clear) continue;
        const int pawn_moves = std::min(5, 7 - rel_rank);
        const int king_moves = distance(their_king, promo) - (b.side_to_move == ~c ? 1 : 0);
        if (pawn_moves < king_moves) best = std::max(best, cfg.material[index(PieceType::Queen)] - 200 - 20 * pawn_moves);
    }
    return best;
}

}  // namespace

int HandcraftedEvaluator::score_white(const Board& b) const {
    const int npm = non_pawn_material(b, Color::White, cfg_) + non_pawn_material(b, Color::Black, cfg_);
    const int eg_den = 2400;
    const int eg_num = std::clamp(4000 - npm, 0, eg_den);
    int score = side_terms(b, Color::White, cfg_, eg_num, eg_den) - side_terms(b, Color::Black, cfg_, eg_num, eg_den);
    if (cfg_.king_pawn_terms) {
        // Drive a weaker king to the edge and bring the stronger king closer.
        const int material = score;
        if (std::abs(material) >= 250 && eg_num > 0) {
            const Color strong = material > 0 ? Color::White : Color::Black;
            const Square sk = b.king_square(strong);
            const Square wk = b.king_square(~strong);
            const int mop = 10 * center_distance(wk) + 4 * (14 - (std::abs(file_of(sk) - file_of(wk)) +
                                                                  std::abs(rank_of(sk) - rank_of(wk))));
            const int scaled = mop * eg_num / eg_den;
            score += strong == Color::White ? scaled : -scaled;
        }
        score += unstoppable_passer(b, Color::White, cfg_) - unstoppable_passer(b, Color::Black, cfg_);
        // Without pawns, an edge of less than a rook rarely wins.
        const Color strong = score >= 0 ? Color::White : Color::Black;
        const int edge = non_pawn_material(b, strong, cfg_) - non_pawn_material(b, ~strong, cfg_);
        if (b.pieces(strong, PieceType::Pawn) == 0 && edge < cfg_.material[index(PieceType::Rook)]) score /= 8;
    }
    return score;
}

Evaluation HandcraftedEvaluator::evaluate_unchecked(const Position& p) const {
    const Board& b = p.board();
    const Color us = b.side_to_move;
    const int white = score_white(b);
    const int stm = us == Color::White ? white : -white;

    Evaluation e;
    const double v = std::tanh(stm / cfg_.value_scale);
    const double d = (1.0 - std::abs(v)) / 2.0;
    e.wdl = {(1.0 - d + v) / 2.0, d, (1.0 - d - v) / 2.0};
    e.value = e.wdl[0] - e.wdl[2];

    for (const auto& im : indexed_legal_moves(p)) {
        e.moves.push_back(im.move);
        e.indices.push_back(im.index);
    }
    std::vector<double> scores;
    scores.reserve(e.moves.size());
    for (const Move& m : e.moves) {
        const Piece mover = b.at(m.from);
        double s = 0;
        if (m.is_capture()) {
            const PieceType victim = m.is_en_passant() ? PieceType::Pawn : b.at(m.to).type;
            s += cfg_.material[index(victim)] - (mover.type == PieceType::King ? 0 : cfg_.material[index(mover.type)] / 10);
        }
        if (m.is_promotion()) s += cfg_.material[index(m.promotion)] - cfg_.material[0];
        if (cfg_.piece_square) s += pst(mover.type, us, m.to) - pst(mover.type, us, m.from);
        if (m.is_castle()) s += 30;
        scores.push_back(s / cfg_.policy_temperature);
    }
    const double mx = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
    double sum = 0;
    for (double& s : scores) sum += (s = std::exp(s - mx));
    for (double s : scores) e.policy.push_back(s / sum);

    const int npm = non_pawn_material(b, Color::White, cfg_) + non_pawn_material(b, Color::Black, cfg_);
    e.plys_to_end = 20.0 + npm / 80.0 + 2.0 * popcount(b.pieces(PieceType::Pawn));
    return e;
}

WeightsBlob HandcraftedEvaluator::to_blob() const {
    WeightsBlob blob;
    blob.kind = ModelKind::Handcrafted;
    for (int m : cfg_.material) blob.params.push_back(static_cast<float>(m));
    blob.params.push_back(cfg_.piece_square ? 1.0f : 0.0f);
    blob.params.push_back(static_cast<float>(cfg_.mobility_weight));
    blob.params.push_back(cfg_.king_pawn_terms ? 1.0f : 0.0f);
    blob.params.push_back(static_cast<float>(cfg_.value_scale));
    blob.params.push_back(static_cast<float>(cfg_.policy_temperature));
    return blob;
}

HandcraftedEvaluator HandcraftedEvaluator::from_blob(const WeightsBlob& blob) {
    if (blob.kind != ModelKind::Handcrafted || blob.params.size() != 10)
        throw WeightsError(WeightsError::Kind::BadArchitecture, "not a handcrafted parameter block");
    HandcraftedConfig cfg;
    for (int i = 0; i < 5; ++i) cfg.material[i] = static_cast<int>(blob.params[i]);
    cfg.piece_square = blob.params[5] != 0.0f;
    cfg.mobility_weight = static_cast<int>(blob.params[6]);
    cfg.king_pawn_terms = blob.params[7] != 0.0f;
    cfg.value_scale = blob.params[8];
    cfg.policy_temperature = blob.params[9];
    return HandcraftedEvaluator(cfg);
}

}  // namespace pmcts
