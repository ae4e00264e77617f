#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "experts_oracle.hpp"
#include "pmcts/experts.hpp"
#include "test_util.hpp"

using namespace pmcts;

namespace {

void check_invariants(const Evaluation& e, const Position& p) {
    const double wsum = e.wdl[0] + e.wdl[1] + e.wdl[2];
    CHECK(std::abs(wsum - 1.0) < 1e-9);
    for (double v : e.wdl) CHECK(v >= 0.0);
    CHECK(std::abs(e.value - (e.wdl[0] - e.wdl[2])) < 1e-12);
    CHECK(e.value >= -1.0);
    CHECK(e.value <= 1.0);
    const auto legal = legal_moves(p);
    REQUIRE(e.moves.size() == legal.size());
    CHECK(e.moves == legal);
    const double psum = std::accumulate(e.policy.begin(), e.policy.end(), 0.0);
    CHECK(std::abs(psum - 1.0) < 1e-9);
    for (double v : e.policy) CHECK(v >= 0.0);
    CHECK(e.plys_to_end >= 0.0);
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pmcts_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

TrainingSample random_sample(std::mt19937_64& rng) {
    Position p = testing::random_position(rng, 80);
    while (outcome(p) != Outcome::Ongoing) p = testing::random_position(rng, 80);
    const auto moves = legal_moves(p);
    TrainingSample s = make_sample(p, moves[rng() % moves.size()], GameResult::Draw, static_cast<int>(rng() % 60));
    // soft targets exercise the general cross-entropy path
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double total = 0;
    for (auto& v : s.target_policy) total += (v = static_cast<float>(u(rng)));
    for (auto& v : s.target_policy) v = static_cast<float>(v / total);
    const double a = u(rng), b = u(rng), c = u(rng);
    s.target_wdl = {float(a / (a + b + c)), float(b / (a + b + c)), 0.0f};
    s.target_wdl[2] = 1.0f - s.target_wdl[0] - s.target_wdl[1];
    return s;
}

}  // namespace

TEST_CASE("handcrafted evaluator basics") {
    HandcraftedEvaluator h;
    Evaluation e = h.evaluate(Position());
    CHECK(e.value == 0.0);
    check_invariants(e, Position());
    CHECK_THROWS_AS(h.evaluate(parse_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1")), TerminalPositionError);
    CHECK_THROWS_AS(h.evaluate_batch({}), EmptyBatchError);

    Position up_queen = parse_fen("4k3/8/8/8/8/8/8/3QK3 w - - 0 1");
    CHECK(h.evaluate(up_queen).value > 0.9);
    Position down_queen = parse_fen("3qk3/8/8/8/8/8/8/4K3 w - - 0 1");
    CHECK(h.evaluate(down_queen).value < -0.9);
}

TEST_CASE("handcrafted evaluator antisymmetry and invariants") {
    HandcraftedEvaluator plain;
    HandcraftedConfig cfg;
    cfg.king_pawn_terms = true;
    HandcraftedEvaluator endgame(cfg);
    for (const Position& p : testing::random_positions(31, 300, 160)) {
        for (const HandcraftedEvaluator* h : {&plain, &endgame}) {
            CHECK(h->score_white(p.board()) == -h->score_white(color_flip(p).board()));
            const Evaluation e = h->evaluate(p);
            check_invariants(e, p);
            // Values are relative to the side to move, and color_flip hands the move over.
            CHECK(e.value == doctest::Approx(h->evaluate(color_flip(p)).value).epsilon(1e-12));
        }
    }
}

TEST_CASE("endgame terms reward passed pawns and king activity") {
    HandcraftedConfig cfg;
    cfg.king_pawn_terms = true;
    HandcraftedEvaluator h(cfg);
    const int far = h.score_white(parse_fen("8/8/8/8/8/8/1P6/4k1K1 w - - 0 1").board());
    const int advanced = h.score_white(parse_fen("8/1P6/8/8/8/8/8/4k1K1 w - - 0 1").board());
    CHECK(advanced > far);
    // Lone king pushed to the corner is better for the side with the rook.
    const int corner = h.score_white(parse_fen("k7/8/1K6/8/8/8/8/7R w - - 0 1").board());
    const int center = h.score_white(parse_fen("8/8/8/3k4/8/8/8/K6R w - - 0 1").board());
    CHECK(corner > center);
}

TEST_CASE("zero-parameter mlp is uniform") {
    MlpShape shape;
    shape.hidden = 8;
    MlpEvaluator z = MlpEvaluator::zeros(shape);
    Evaluation e = z.evaluate(Position());
    for (double v : e.wdl) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(e.value == 0.0);
    for (double v : e.policy) CHECK(v == doctest::Approx(1.0 / 20).epsilon(1e-15));
    CHECK(e.plys_to_end == doctest::Approx(std::log(2.0)));
}

TEST_CASE("mlp parameter count is analytic") {
    MlpShape shape;
    const std::size_t H = 64;
    CHECK(shape.parameter_count() == 3328 * H + H + 3 * H + 3 + 4480 * H + 4480 + H + 1);
    CHECK_THROWS_AS(MlpEvaluator(shape, std::vector<float>(10)), WeightsError);
}

TEST_CASE("mlp invariants and batch equivalence") {
    MlpShape shape;
    shape.hidden = 16;
    MlpEvaluator m = MlpEvaluator::random(shape, 17, 2.0);
    auto positions = testing::random_positions(41, 64, 120);
    auto batch = m.evaluate_batch(positions);
    REQUIRE(batch.size() == 64);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Evaluation single = m.evaluate(positions[i]);
        check_invariants(single, positions[i]);
        CHECK(std::abs(single.value - batch[i].value) <= 1e-9);
        for (std::size_t k = 0; k < single.policy.size(); ++k) CHECK(std::abs(single.policy[k] - batch[i].policy[k]) <= 1e-9);
    }
    auto one = m.evaluate_batch(std::span<const Position>(positions.data(), 1));
    CHECK(one[0].value == m.evaluate(positions[0]).value);
}

TEST_CASE("loss closed forms") {
    MlpShape shape;
    shape.hidden = 8;
    auto zeros = std::vector<float>(shape.parameter_count(), 0.0f);
    Position start;
    TrainingSample s = make_sample(start, *parse_uci_move("e2e4"), GameResult::WhiteWin, 40);
    LossWeights policy_only{0.0, 1.0, 0.0, 0.0};
    auto terms = mlp_loss<float>(shape, zeros, s, policy_only);
    CHECK(terms.total() == doctest::Approx(std::log(20.0)).epsilon(1e-12));

    // One-hot targets that the network predicts exactly (single legal move, saturated wdl).
    Position forced = parse_fen("7k/8/6K1/8/8/8/8/R7 b - - 0 1");
    REQUIRE(legal_moves(forced).size() == 1);
    TrainingSample f = make_sample(forced, legal_moves(forced)[0], GameResult::Draw, 0);
    std::vector<double> w(shape.parameter_count(), 0.0);
    w[shape.bv() + 1] = 800.0;    // draw logit dominates: log q_draw == 0 in double
    w[shape.by()] = -800.0;       // softplus(-800) == 0
    auto exact = mlp_loss<double>(shape, w, f, LossWeights{0.01, 0.988, 0.002, 0.0});
    CHECK(exact.total() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("loss matches the dense reference implementation") {
    MlpShape shape;
    shape.hidden = 12;
    std::mt19937_64 rng(9);
    MlpEvaluator m = MlpEvaluator::random(shape, 3, 2.0);
    const LossWeights lw;
    for (int i = 0; i < 10; ++i) {
        TrainingSample s = random_sample(rng);
        const double fast = mlp_loss<float>(shape, m.parameters(), s, lw).total();
        const double ref = testing::reference_loss(shape, m.parameters(), s, lw);
        CHECK(std::abs(fast - ref) <= 1e-9);
    }
}

TEST_CASE("gradient matches central finite differences") {
    MlpShape shape;
    shape.hidden = 12;
    std::mt19937_64 rng(123);
    MlpEvaluator m = MlpEvaluator::random(shape, 5, 2.0);
    std::vector<double> w(m.parameters().begin(), m.parameters().end());
    const LossWeights lw;
    const double h = 1e-5;
    double worst = 0;
    for (int n = 0; n < 5; ++n) {
        TrainingSample s = random_sample(rng);
        std::vector<double> g(w.size(), 0.0);
        mlp_loss<double>(shape, w, s, lw, g.data());
        for (int c = 0; c < 40; ++c) {
            // half of the coordinates from entries with a data-term gradient
            std::size_t i;
            if (c % 2 == 0) {
                do i = rng() % w.size(); while (std::abs(g[i] - 2 * lw.l2 * w[i]) < 1e-12 && rng() % 50);
            } else {
                i = rng() % w.size();
            }
            const double saved = w[i];
            w[i] = saved + h;
            const double up = mlp_loss<double>(shape, w, s, lw).total();
            w[i] = saved - h;
            const double down = mlp_loss<double>(shape, w, s, lw).total();
            w[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-7});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("l2 term is linear in its factor") {
    MlpShape shape;
    shape.hidden = 8;
    MlpEvaluator m = MlpEvaluator::random(shape, 1);
    TrainingSample s = make_sample(Position(), *parse_uci_move("d2d4"), GameResult::Draw, 50);
    LossWeights a{0, 0, 0, 1e-4}, b{0, 0, 0, 2e-4};
    std::vector<double> ga(shape.parameter_count()), gb(shape.parameter_count());
    const auto la = mlp_loss<float>(shape, m.parameters(), s, a, ga.data());
    const auto lb = mlp_loss<float>(shape, m.parameters(), s, b, gb.data());
    CHECK(lb.l2 == doctest::Approx(2 * la.l2).epsilon(1e-15));
    for (std::size_t i = 0; i < ga.size(); i += 997) CHECK(gb[i] == doctest::Approx(2 * ga[i]).epsilon(1e-15));

    std::vector<double> gz(shape.parameter_count());
    mlp_loss<float>(shape, std::vector<float>(shape.parameter_count(), 0.0f), s, a, gz.data());
    // zero weights: the l2 part of the gradient vanishes; only biases see data gradients
    CHECK(gz[shape.w1()] == 0.0);
}

TEST_CASE("weights and bundles round trip") {
    auto dir = temp_dir("bundle");
    MlpShape shape;
    shape.hidden = 4;
    ExpertBundle b;
    b.experts[0] = std::make_shared<MlpEvaluator>(MlpEvaluator::random(shape, 1));
    b.experts[1] = std::make_shared<MlpEvaluator>(MlpEvaluator::random(shape, 2));
    HandcraftedConfig cfg;
    cfg.king_pawn_terms = true;
    cfg.mobility_weight = 3;
    b.experts[2] = std::make_shared<HandcraftedEvaluator>(cfg);
    b.metadata = {{"method", "T1"}, {"note", "round trip"}};
    save_bundle(dir, b);
    ExpertBundle loaded = load_bundle(dir);
    CHECK(loaded.metadata == b.metadata);
    for (int i = 0; i < 2; ++i) {
        const auto& orig = dynamic_cast<const MlpEvaluator&>(*b.experts[i]).parameters();
        const auto& back = dynamic_cast<const MlpEvaluator&>(*loaded.experts[i]).parameters();
        REQUIRE(orig.size() == back.size());
        CHECK(std::memcmp(orig.data(), back.data(), orig.size() * sizeof(float)) == 0);
    }
    CHECK(dynamic_cast<const HandcraftedEvaluator&>(*loaded.experts[2]).config() == cfg);

    ModelDirectory md = load_model_directory(dir);
    CHECK(md.is_bundle);

    // corrupt one byte of the parameter block
    {
        std::fstream f(dir / "middlegame.weights", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char c = 0x55;
        f.write(&c, 1);
    }
    try {
        load_bundle(dir);
        FAIL("expected checksum error");
    } catch (const WeightsError& e) {
        CHECK(e.kind() == WeightsError::Kind::ChecksumMismatch);
    }
    // version mismatch
    save_bundle(dir, b);
    {
        std::fstream f(dir / "opening.weights", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        std::uint32_t v = 99;
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    try {
        load_weights(dir / "opening.weights");
        FAIL("expected version error");
    } catch (const WeightsError& e) {
        CHECK(e.kind() == WeightsError::Kind::VersionMismatch);
    }
    // missing expert names the phase
    save_bundle(dir, b);
    std::filesystem::remove(dir / "endgame.weights");
    try {
        load_bundle(dir);
        FAIL("expected missing expert");
    } catch (const WeightsError& e) {
        CHECK(e.kind() == WeightsError::Kind::MissingExpert);
        CHECK(std::string(e.what()).find("endgame") != std::string::npos);
    }

    auto single = temp_dir("single");
    save_model(single / "model.weights", HandcraftedEvaluator());
    ModelDirectory smd = load_model_directory(single);
    CHECK_FALSE(smd.is_bundle);
    CHECK(smd.bundle.experts[0] == smd.bundle.experts[2]);
}
