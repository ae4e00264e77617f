#include "pmcts/phase.hpp"

#include <cmath>
#include <cstdlib>

namespace pmcts {

const char* to_string(GamePhase phase) {
    switch (phase) {
        case GamePhase::Opening: return "opening";
        case GamePhase::Middlegame: return "middlegame";
        case GamePhase::Endgame: return "endgame";
    }
    return "?";
}

int major_minor_count(const Board& b) {
    return popcount(b.pieces(PieceType::Knight) | b.pieces(PieceType::Bishop) | b.pieces(PieceType::Rook) |
                    b.pieces(PieceType::Queen));
}

bool backrank_sparse(const Board& b) {
    return popcount(b.pieces(Color::White) & kRank1) < 4 || popcount(b.pieces(Color::Black) & kRank8) < 4;
}

// Window table of the Lichess divider (scalachess Divider.scala).
int mixedness_window_score(int white, int black, int y) {
    switch (white * 10 + black) {
        case 0: return 0;
        case 10: return 1 + (8 - y);
        case 20: return y > 2 ? 2 + (y - 2) : 0;
        case 30: return y > 1 ? 3 + (y - 1) : 0;
        case 40: return y > 1 ? 3 + (y - 1) : 0;  // four on the home row score nothing
        case 1: return 1 + y;
        case 11: return 5 + std::abs(3 - y);
        case 21: return 4 + y;
        case 31: return 5 + y;
        case 2: return y < 6 ? 2 + (6 - y) : 0;
        case 12: return 4 + (6 - y);
        case 22: return 7;
        case 3: return y < 7 ? 3 + (7 - y) : 0;
        case 13: return 5 + (6 - y);
        case 4: return y < 7 ? 3 + (7 - y) : 0;
        default: return 0;
    }
}

int mixedness(const Board& b) {
    const Bitboard white = b.pieces(Color::White);
    const Bitboard black = b.pieces(Color::Black);
    int total = 0;
    for (int r = 0; r < 7; ++r) {
        for (int f = 0; f < 7; ++f) {
            const Square s = make_square(f, r);
            const Bitboard window = bit(s) | bit(s + 1) | bit(s + 8) | bit(s + 9);
            total += mixedness_window_score(popcount(white & window), popcount(black & window), r + 1);
        }
    }
    return total;
}

PhaseReport classify(const Board& b) {
    PhaseReport r;
    r.major_minor_count = major_minor_count(b);
    r.backrank_sparse = backrank_sparse(b);
    r.mixedness = mixedness(b);
    if (r.major_minor_count <= kEndgameMaxPieces)
        r.phase = GamePhase::Endgame;
    else if (r.major_minor_count <= kMiddlegameMaxPieces || r.backrank_sparse || r.mixedness > kMixednessThreshold)
        r.phase = GamePhase::Middlegame;
    else
        r.phase = GamePhase::Opening;
    return r;
}

GameSegmentation segment_labels(const std::vector<GamePhase>& raw) {
    GameSegmentation seg;
    GamePhase current = GamePhase::Opening;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] > current) current = raw[i];
        seg.labels.push_back(current);
        const int ply = static_cast<int>(i);
        if (current >= GamePhase::Middlegame && !seg.middlegame_start) seg.middlegame_start = ply;
        if (current == GamePhase::Endgame && !seg.endgame_start) seg.endgame_start = ply;
    }
    return seg;
}

GameSegmentation segment_game(const GameRecord& g) {
    std::vector<GamePhase> raw;
    for (const Position& p : g.replay()) raw.push_back(phase_of(p));
    return segment_labels(raw);
}

PhaseStats phase_stats(const std::vector<GameRecord>& games) {
    PhaseStats st;
    double mg_sum = 0, mg_sq = 0, eg_sum = 0, eg_sq = 0;
    for (const GameRecord& g : games) {
        ++st.games;
        const GameSegmentation seg = segment_game(g);
        const int first_move = g.initial.fullmove_number();
        const bool black_first = g.initial.side_to_move() == Color::Black;
        const auto move_number = [&](int ply) { return first_move + (ply + (black_first ? 1 : 0)) / 2; };
        for (int ply = 0; ply < g.plies(); ++ply) {
            const int move = move_number(ply);
            while (static_cast<int>(st.rows.size()) < move) st.rows.push_back({static_cast<int>(st.rows.size()) + 1, {}});
            ++st.rows[move - 1].counts[index(seg.labels[ply])];
        }
        if (seg.middlegame_start && *seg.middlegame_start < g.plies()) {
            const double m = move_number(*seg.middlegame_start);
            mg_sum += m;
            mg_sq += m * m;
            ++st.middlegame_games;
        }
        if (seg.endgame_start && *seg.endgame_start < g.plies()) {
            const double m = move_number(*seg.endgame_start);
            eg_sum += m;
            eg_sq += m * m;
            ++st.endgame_games;
        }
    }
    const auto finish = [](double sum, double sq, long n, double& mean, double& sd) {
        if (n == 0) return;
        mean = sum / n;
        sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    };
    finish(mg_sum, mg_sq, st.middlegame_games, st.middlegame_start_mean, st.middlegame_start_std);
    finish(eg_sum, eg_sq, st.endgame_games, st.endgame_start_mean, st.endgame_start_std);
    return st;
}

}  // namespace pmcts
