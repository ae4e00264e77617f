#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "pmcts/search.hpp"
#include "test_util.hpp"

using namespace pmcts;

namespace {

SearchConfig nodes_config(int nodes, int batch = 8, std::uint64_t seed = 1) {
    SearchConfig cfg;
    cfg.nodes = nodes;
    cfg.batch_size = batch;
    cfg.seed = seed;
    return cfg;
}

EvaluatorPtr handcrafted() { return std::make_shared<HandcraftedEvaluator>(); }

}  // namespace

TEST_CASE("gate votes") {
    using P = GamePhase;
    const std::vector<P> a{P::Opening, P::Middlegame, P::Middlegame, P::Endgame};
    GateDecision d = gate_phases(a);
    CHECK(d.chosen == P::Middlegame);
    CHECK(d.votes == std::array<int, 3>{1, 2, 1});
    CHECK(gate_phases(std::vector<P>{P::Endgame}).chosen == P::Endgame);
    CHECK(gate_phases(std::vector<P>{P::Opening, P::Opening, P::Endgame, P::Endgame}).chosen == P::Endgame);
    CHECK(gate_phases(std::vector<P>{P::Opening, P::Middlegame}).chosen == P::Middlegame);
    CHECK(gate_phases(std::vector<P>{P::Opening}).chosen == P::Opening);
}

TEST_CASE("value to score") {
    CHECK(value_to_score(0.0) == 0);
    CHECK(value_to_score(0.6) == 600);
    CHECK(value_to_score(-0.02) == -20);
    CHECK(value_to_score(-0.6) == -600);
    CHECK(value_to_score(1.0) == 1000);
}

TEST_CASE("config validation") {
    SearchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.movetime_ms = 100;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.nodes.reset();
    CHECK_NOTHROW(cfg.validate());
    cfg.movetime_ms.reset();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("puct formula by hand") {
    // parent N = 4, equal priors 0.5; visited child Q=+0.5 with N=3, unvisited child with FPU q=0.
    const double visited = puct_score(0.5, 0.5, 4, 3, 2.5);
    const double unvisited = puct_score(0.0, 0.5, 4, 0, 2.5);
    CHECK(visited == doctest::Approx(0.5 + 2.5 * 0.5 * 2.0 / 4.0));
    CHECK(unvisited == doctest::Approx(2.5 * 0.5 * 2.0));
    CHECK(unvisited > visited);
}

TEST_CASE("root visit bookkeeping") {
    Search s(handcrafted(), nodes_config(1));
    SearchResult r = s.run(Position());
    CHECK(r.nodes == 1);
    CHECK(std::accumulate(r.visits.begin(), r.visits.end(), 0) == 0);
    // budget one: argmax prior
    const auto best_prior = std::max_element(r.priors.begin(), r.priors.end()) - r.priors.begin();
    CHECK(r.best_move == r.moves[best_prior]);

    Search two(handcrafted(), nodes_config(2, 1));
    SearchResult r2 = two.run(Position());
    CHECK(r2.nodes == 2);
    const auto* tree = two.tree();
    const auto edges = tree->edges_of(0);
    int visited = 0;
    for (const auto& e : edges)
        if (e.n == 1) {
            ++visited;
            CHECK(e.q() == doctest::Approx(-tree->node(e.child).q()));
        }
    CHECK(visited == 1);
}

TEST_CASE("visit conservation and virtual loss revert") {
    for (int batch : {1, 8, 16, 32, 64}) {
        for (int budget : {1, 7, 100, 333}) {
            Search s(handcrafted(), nodes_config(budget, batch));
            SearchResult r = s.run(parse_fen("r1bqkb1r/pppp1ppp/2n2n2/4p2Q/2B1P3/8/PPPP1PPP/RNB1K1NR w KQkq - 4 4"));
            CHECK(r.nodes == budget);
            CHECK(s.tree()->node(0).n == budget);
            CHECK(s.tree()->total_virtual_loss() == 0);
            for (int i = 0; i < s.tree()->size(); ++i) {
                const auto& n = s.tree()->node(i);
                if (!n.expanded) continue;
                int child_sum = 0;
                for (const auto& e : s.tree()->edges_of(i)) {
                    child_sum += e.n;
                    CHECK(e.q() >= -1.0);
                    CHECK(e.q() <= 1.0);
                }
                CHECK(n.n == 1 + child_sum);
            }
        }
    }
}

TEST_CASE("priors sum to one before and after noise") {
    SearchConfig cfg = nodes_config(50);
    cfg.noise = true;
    Search s(handcrafted(), cfg);
    s.run(Position());
    double sum = 0;
    for (const auto& e : s.tree()->edges_of(0)) sum += e.prior;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("virtual loss diversifies a batch") {
    SearchTree tree{Position()};
    HandcraftedEvaluator h;
    tree.expand(0, h.evaluate(Position()));
    SearchTree::Selection root_sel;
    root_sel.leaf = 0;
    tree.backup(root_sel, 0.0, 1.0);
    std::set<int> leaves;
    std::vector<SearchTree::Selection> sels;
    for (int i = 0; i < 8; ++i) {
        auto sel = tree.select(2.5, 1.0);
        CHECK_FALSE(sel.collision);
        leaves.insert(sel.leaf);
        sels.push_back(sel);
    }
    CHECK(leaves.size() == 8);
    CHECK(tree.total_virtual_loss() == 8);
    for (auto& sel : sels) tree.revert(sel, 1.0);
    CHECK(tree.total_virtual_loss() == 0);
}

TEST_CASE("finds mate in one") {
    const char* fens[] = {
        "6k1/5ppp/8/8/8/8/8/R5K1 w - - 0 1",
        "r1bqkb1r/pppp1ppp/2n2n2/4p2Q/2B1P3/8/PPPP1PPP/RNB1K1NR w KQkq - 4 4",
        "6k1/5ppp/8/8/8/8/5PPP/3R2K1 w - - 0 1",
    };
    const std::string mates[] = {"a1a8", "h5f7", "d1d8"};
    for (int i = 0; i < 3; ++i) {
        Search s(handcrafted(), nodes_config(100));
        CHECK(s.run(parse_fen(fens[i])).best_move.uci() == mates[i]);
    }
}

TEST_CASE("single-move and terminal handling") {
    Search s(handcrafted(), nodes_config(30));
    CHECK_THROWS_AS(s.run(parse_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1")), TerminalPositionError);
    SearchResult r = s.run(parse_fen("7k/8/6K1/8/8/8/8/R7 b - - 0 1"));
    CHECK(r.best_move.uci() == "h8g8");
}

TEST_CASE("determinism") {
    SearchConfig cfg = nodes_config(300, 16, 42);
    cfg.noise = true;
    cfg.sample_moves = true;
    Search a(handcrafted(), cfg), b(handcrafted(), cfg);
    const Position p = parse_fen("r2q1rk1/pp2bppp/2n1pn2/3p4/3P4/2NBPN2/PP3PPP/R2Q1RK1 w - - 0 10");
    SearchResult ra = a.run(p), rb = b.run(p);
    CHECK(ra.best_move == rb.best_move);
    CHECK(ra.visits == rb.visits);
    CHECK(ra.pv == rb.pv);
}

TEST_CASE("m2cts with identical experts reproduces mcts") {
    auto h = handcrafted();
    for (const Position& p : testing::random_positions(77, 10, 120)) {
        for (int batch : {1, 8, 64}) {
            Search mcts(h, nodes_config(200, batch, 5));
            Search m2(ExpertBundle::uniform(h), nodes_config(200, batch, 5));
            SearchResult a = mcts.run(p), b = m2.run(p);
            CHECK(a.best_move == b.best_move);
            CHECK(a.visits == b.visits);
            CHECK(a.q == b.q);
            CHECK(a.root_value == b.root_value);
        }
    }
}

TEST_CASE("batch size one gates with the exact leaf phase") {
    // Experts that tag their outputs so the chosen phase is observable.
    struct Tagged : HandcraftedEvaluator {
        GamePhase tag;
        mutable std::vector<std::pair<GamePhase, GamePhase>>* log;
        Tagged(GamePhase t, std::vector<std::pair<GamePhase, GamePhase>>* l) : tag(t), log(l) {}
        Evaluation evaluate_unchecked(const Position& p) const override {
            log->emplace_back(tag, phase_of(p));
            return HandcraftedEvaluator::evaluate_unchecked(p);
        }
    };
    std::vector<std::pair<GamePhase, GamePhase>> log;
    ExpertBundle bundle;
    for (int i = 0; i < 3; ++i) bundle.experts[i] = std::make_shared<Tagged>(static_cast<GamePhase>(i), &log);
    Search s(bundle, nodes_config(300, 1));
    s.run(parse_fen("r3k3/8/8/3nN3/8/8/8/R3K3 w - - 0 1"));
    s.run(parse_fen("r1bqk2r/pppp1ppp/2n2n2/2b1p3/2B1P3/2N2N2/PPPP1PPP/R1BQK2R w KQkq - 4 5"));
    REQUIRE(log.size() > 100);
    for (const auto& [used, actual] : log) CHECK(used == actual);
}

TEST_CASE("movetime budget and stop flag") {
    SearchConfig cfg;
    cfg.nodes.reset();
    cfg.movetime_ms = 50;
    Search s(handcrafted(), cfg);
    SearchResult r = s.run(Position());
    CHECK(r.nodes > 1);
    CHECK(r.elapsed_ms < 1000);

    std::atomic<bool> stop{true};
    SearchResult stopped = s.run(Position(), &stop);
    CHECK(stopped.nodes == 1);
}

TEST_CASE("tree reuse keeps the matching subtree") {
    SearchConfig cfg = nodes_config(200);
    cfg.reuse_tree = true;
    Search s(handcrafted(), cfg);
    Position p;
    SearchResult r = s.run(p);
    Position next = p.play(r.best_move);
    const auto reply = r.pv.size() > 1 ? r.pv[1] : legal_moves(next)[0];
    Position after = next.play(reply);
    SearchResult r2 = s.run(after);
    CHECK(r2.nodes >= 200);
    CHECK(s.tree()->total_virtual_loss() == 0);
}
