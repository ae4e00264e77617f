#include <sstream>

#include "doctest.h"
#include "pmcts/phase.hpp"
#include "test_util.hpp"

using namespace pmcts;

TEST_CASE("major/minor count") {
    CHECK(major_minor_count(Position().board()) == 14);
    CHECK(major_minor_count(parse_fen("8/8/8/4k3/8/8/4P3/4K3 w - - 0 1").board()) == 0);
    CHECK(major_minor_count(parse_fen("r3k3/8/8/8/8/8/8/R3K1N1 w - - 0 1").board()) == 3);
}

TEST_CASE("backrank sparse") {
    CHECK_FALSE(backrank_sparse(Position().board()));
    CHECK(backrank_sparse(parse_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/R3K2R w KQkq - 0 1").board()));
    CHECK_FALSE(backrank_sparse(parse_fen("r2qk2r/pppppppp/8/8/8/8/PPPPPPPP/R2QK2R w KQkq - 0 1").board()));
    CHECK(backrank_sparse(parse_fen("r2qk2r/pppppppp/8/8/8/8/PPPPPPPP/R3K2R w KQkq - 0 1").board()));
    CHECK(backrank_sparse(parse_fen("r3k2r/pppppppp/8/8/8/8/PPPPPPPP/R2QK2R w KQkq - 0 1").board()));
}

TEST_CASE("mixedness window table, one check per row") {
    CHECK(mixedness_window_score(0, 0, 4) == 0);
    CHECK(mixedness_window_score(1, 0, 3) == 6);
    CHECK(mixedness_window_score(2, 0, 2) == 0);
    CHECK(mixedness_window_score(2, 0, 5) == 5);
    CHECK(mixedness_window_score(3, 0, 1) == 0);
    CHECK(mixedness_window_score(3, 0, 4) == 6);
    CHECK(mixedness_window_score(4, 0, 1) == 0);
    CHECK(mixedness_window_score(4, 0, 7) == 9);
    CHECK(mixedness_window_score(0, 1, 6) == 7);
    CHECK(mixedness_window_score(1, 1, 1) == 7);
    CHECK(mixedness_window_score(1, 1, 3) == 5);
    CHECK(mixedness_window_score(1, 1, 7) == 9);
    CHECK(mixedness_window_score(2, 1, 2) == 6);
    CHECK(mixedness_window_score(3, 1, 5) == 10);
    CHECK(mixedness_window_score(0, 2, 6) == 0);
    CHECK(mixedness_window_score(0, 2, 3) == 5);
    CHECK(mixedness_window_score(1, 2, 4) == 6);
    CHECK(mixedness_window_score(2, 2, 1) == 7);
    CHECK(mixedness_window_score(2, 2, 7) == 7);
    CHECK(mixedness_window_score(0, 3, 7) == 0);
    CHECK(mixedness_window_score(0, 3, 2) == 8);
    CHECK(mixedness_window_score(1, 3, 6) == 5);
    CHECK(mixedness_window_score(0, 4, 7) == 0);
    CHECK(mixedness_window_score(0, 4, 4) == 6);
}

TEST_CASE("mixedness golden values") {
    std::istringstream in(testing::read_file(testing::data_path("mixedness_golden.txt")));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto bar = line.find('|');
        const Position p = parse_fen(line.substr(0, bar));
        CHECK_MESSAGE(mixedness(p.board()) == std::stoi(line.substr(bar + 1)), line);
        ++n;
    }
    CHECK(n == 5);
}

namespace {
bool has_mixed_window(const Board& b) {
    for (int r = 0; r < 7; ++r)
        for (int f = 0; f < 7; ++f) {
            const Square s = make_square(f, r);
            const Bitboard w = bit(s) | bit(s + 1) | bit(s + 8) | bit(s + 9);
            if ((b.pieces(Color::White) & w) && (b.pieces(Color::Black) & w)) return true;
        }
    return false;
}
}  // namespace

TEST_CASE("mixedness color-flip symmetry holds for windows with a single color") {
    int symmetric_cases = 0, asymmetric_cases = 0;
    for (const Position& p : testing::random_positions(99, 2000, 160)) {
        const int a = mixedness(p.board());
        const int b = mixedness(color_flip(p).board());
        if (!has_mixed_window(p.board())) {
            CHECK(a == b);
            ++symmetric_cases;
        } else if (a != b) {
            ++asymmetric_cases;
        }
    }
    CHECK(symmetric_cases > 0);
    // The mixed-window rows of the table are not flip-symmetric.
    CHECK(asymmetric_cases > 0);
    CHECK(mixedness_window_score(2, 1, 3) != mixedness_window_score(1, 2, 8 - 3));
}

TEST_CASE("classify") {
    const PhaseReport start = classify(Position());
    CHECK(start.phase == GamePhase::Opening);
    CHECK(start.major_minor_count == 14);
    CHECK(start.mixedness == 0);

    // six pieces with sparse back ranks and high mixedness: still endgame
    CHECK(phase_of(parse_fen("r1b1k3/8/8/3nN3/3B4/8/8/4K2R w - - 0 1")) == GamePhase::Endgame);
    // ten pieces, full back ranks
    CHECK(phase_of(parse_fen("rn1qk1nr/pppppppp/8/8/8/8/PPPPPPPP/RN1QK1NR w KQkq - 0 1")) == GamePhase::Middlegame);
    // eleven pieces, full back ranks, quiet: opening
    CHECK(phase_of(parse_fen("rn1qkbnr/pppppppp/8/8/8/8/PPPPPPPP/RN1QK1NR w KQkq - 0 1")) == GamePhase::Opening);
    // 12 pieces but white back rank sparse
    CHECK(phase_of(parse_fen("rnbqkbnr/pppppppp/8/8/8/2NQBN2/PPPPPPPP/R3K2R w KQkq - 0 1")) == GamePhase::Middlegame);
}

TEST_CASE("segment labels are the running maximum") {
    using P = GamePhase;
    const auto seg = segment_labels({P::Opening, P::Opening, P::Middlegame, P::Opening, P::Middlegame, P::Endgame,
                                     P::Middlegame});
    CHECK(seg.labels == std::vector<P>{P::Opening, P::Opening, P::Middlegame, P::Middlegame, P::Middlegame,
                                        P::Endgame, P::Endgame});
    CHECK(seg.middlegame_start == 2);
    CHECK(seg.endgame_start == 5);

    const auto quiet = segment_labels(std::vector<P>(9, P::Opening));
    CHECK_FALSE(quiet.middlegame_start.has_value());
    CHECK_FALSE(quiet.endgame_start.has_value());

    const auto direct = segment_labels({P::Opening, P::Endgame});
    CHECK(direct.middlegame_start == 1);
    CHECK(direct.endgame_start == 1);
}

TEST_CASE("segmentation over the sample corpus") {
    std::istringstream in(testing::read_file(testing::data_path("games_1000.pgn")));
    auto corpus = parse_pgn(in);
    REQUIRE(corpus.games.size() >= 100);
    for (std::size_t i = 0; i < 100; ++i) {
        const auto seg = segment_game(corpus.games[i]);
        CHECK(seg.labels.size() == static_cast<std::size_t>(corpus.games[i].plies() + 1));
        CHECK(std::is_sorted(seg.labels.begin(), seg.labels.end()));
        if (seg.middlegame_start && seg.endgame_start) CHECK(*seg.middlegame_start <= *seg.endgame_start);
    }
    const PhaseStats st = phase_stats(corpus.games);
    CHECK(st.games == static_cast<long>(corpus.games.size()));
    long total = 0;
    for (const auto& row : st.rows) total += row.total();
    long plies = 0;
    for (const auto& g : corpus.games) plies += g.plies();
    CHECK(total == plies);
}
