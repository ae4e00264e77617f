#include "pmcts/arena.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace pmcts {

double expected_score(double r_a, double r_b) { return 1.0 / (1.0 + std::pow(10.0, (r_b - r_a) / 400.0)); }

namespace {

double elo_of(double s) { return 0.0 - 400.0 * std::log10(1.0 / s - 1.0); }  // 0.5 gives +0, not -0

}  // namespace

EloEstimate elo_from_score(double s, int n, int draws) {
    if (n < 1) throw std::invalid_argument("elo_from_score needs at least one game");
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("score fraction must lie in [0, 1]");
    if (draws < 0 || draws > n) throw std::invalid_argument("draw count out of range");

    EloEstimate e;
    double point = s;
    if (s <= 0.0 || s >= 1.0) {
        // No finite estimate exists; report the bound reached with half a game the other way.
        const double half = 0.5 / n;
        point = s <= 0.0 ? half : 1.0 - half;
        e.bound = s <= 0.0 ? EloEstimate::Bound::AtMost : EloEstimate::Bound::AtLeast;
    }
    e.elo = elo_of(point);
    const double wins = s * n - 0.5 * draws;
    const double losses = n - wins - draws;
    const double var = (wins * (1.0 - s) * (1.0 - s) + draws * (0.5 - s) * (0.5 - s) + losses * s * s) / n;
    const double se = std::sqrt(std::max(var, 0.0) / n);
    e.ci95 = 1.96 * se * 400.0 / (std::log(10.0) * point * (1.0 - point));
    return e;
}

// ---------------------------------------------------------------------------
// Engines

namespace {

class SearchEngine : public Engine {
public:
    explicit SearchEngine(EngineConfig engine) : cfg_(std::move(engine)) { cfg_.search.validate(); }

    std::string name() const override { return cfg_.name; }

    void new_game(std::uint64_t seed) override {
        SearchConfig cfg = cfg_.search;
        cfg.seed = seed;
        if (cfg_.type == SearchType::M2cts) search_.emplace(cfg_.bundle, cfg);
        else search_.emplace(cfg_.bundle.experts[0], cfg);
    }

    Choice choose(const Position& p) override {
        if (!search_) new_game(cfg_.search.seed);
        const SearchResult r = search_->run(p);
        return {r.best_move, value_to_score(r.root_value), r.nodes};
    }

private:
    EngineConfig cfg_;
    std::optional<Search> search_;
};

class RandomEngine : public Engine {
public:
    explicit RandomEngine(std::string name) : name_(std::move(name)) {}
    std::string name() const override { return name_; }
    void new_game(std::uint64_t seed) override { rng_.seed(seed); }
    Choice choose(const Position& p) override {
        const auto moves = legal_moves(p);
        std::uniform_int_distribution<std::size_t> pick(0, moves.size() - 1);
        return {moves[pick(rng_)], 0, 0};
    }

private:
    std::string name_;
    std::mt19937_64 rng_;
};

}  // namespace

std::unique_ptr<Engine> make_engine(const EngineConfig& engine) {
    if (engine.kind == EngineConfig::Kind::Random) return std::make_unique<RandomEngine>(engine.name);
    for (const auto& e : engine.bundle.experts)
        if (!e) throw std::invalid_argument("engine '" + engine.name + "' has no evaluator");
    return std::make_unique<SearchEngine>(engine);
}

// ---------------------------------------------------------------------------
// Adjudication

std::optional<Adjudication> Adjudicator::record(Color mover, int move_number, int score) {
    const int side = static_cast<int>(mover);
    if (resign_.enabled) {
        losing_[side] = score <= -resign_.score ? losing_[side] + 1 : 0;
        if (losing_[side] >= resign_.move_count)
            return Adjudication{mover == Color::White ? GameResult::BlackWin : GameResult::WhiteWin, "resign"};
    }
    if (draw_.enabled) {
        quiet_[side] = move_number > draw_.move_number && std::abs(score) <= draw_.score ? quiet_[side] + 1 : 0;
        if (quiet_[0] >= draw_.move_count && quiet_[1] >= draw_.move_count) return Adjudication{GameResult::Draw, "draw"};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Opening suites

Position parse_epd_line(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> fields;
    std::string f;
    while (fields.size() < 6 && in >> f) fields.push_back(f);
    if (fields.size() < 4) throw FenError(FenErrorKind::FieldCount, "EPD line needs four fields: " + line);
    const auto numeric = [](const std::string& s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
    };
    std::string fen = fields[0] + " " + fields[1] + " " + fields[2] + " " + fields[3];
    if (fields.size() == 6 && numeric(fields[4]) && numeric(fields[5])) fen += " " + fields[4] + " " + fields[5];
    else fen += " 0 1";
    return parse_fen(fen);
}

std::vector<Position> read_openings(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open opening suite " + file.string());
    std::vector<Position> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        try {
            out.push_back(parse_epd_line(line.substr(start)));
        } catch (const std::exception& e) {
            throw std::runtime_error(file.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matches

double MatchResult::score() const {
    const int n = games_played();
    return n == 0 ? 0.5 : (wins + 0.5 * draws) / n;
}

EloEstimate MatchResult::elo() const { return elo_from_score(score(), std::max(games_played(), 1), draws); }

nlohmann::json MatchResult::summary() const {
    nlohmann::json j;
    j["schema"] = "pmcts-match/1";
    j["engine_a"] = name_a;
    j["engine_b"] = name_b;
    j["games"] = games_played();
    j["wins"] = wins;
    j["draws"] = draws;
    j["losses"] = losses;
    j["score"] = score();
    if (games_played() > 0) {
        const EloEstimate e = elo();
        j["elo"] = e.elo;
        j["elo_ci95"] = e.ci95;
        j["elo_bound"] = e.bound == EloEstimate::Bound::Exact ? "exact" : e.bound == EloEstimate::Bound::AtLeast ? ">=" : "<=";
    }
    std::map<std::string, int> terminations;
    for (const auto& g : games) {
        auto it = g.tags.find("Termination");
        ++terminations[it == g.tags.end() ? "unknown" : it->second];
    }
    j["terminations"] = terminations;
    j["aborted"] = nlohmann::json::array();
    for (const auto& a : aborted) j["aborted"].push_back({{"pair", a.pair}, {"error", a.error}});
    return j;
}

namespace {

std::string format_score(int score) {
    std::ostringstream s;
    s << (score >= 0 ? "+" : "") << score;
    return s.str();
}

std::string board_termination(const Position& p) {
    if (legal_moves(p).empty()) return p.in_check() ? "checkmate" : "stalemate";
    if (insufficient_material(p.board())) return "insufficient material";
    if (p.repetition_count() >= 3) return "threefold repetition";
    return "fifty-move rule";
}

GameRecord play_game(const MatchConfig& cfg, const Position& opening, Engine& white, Engine& black, int pair, int game) {
    GameRecord rec;
    rec.initial = opening;
    rec.tags["Event"] = cfg.event;
    rec.tags["Site"] = "local";
    rec.tags["Round"] = std::to_string(pair + 1) + "." + std::to_string(game + 1);
    rec.tags["White"] = white.name();
    rec.tags["Black"] = black.name();

    Adjudicator adj(cfg.resign, cfg.draw);
    Position p = opening;
    std::string termination;
    GameResult result = GameResult::Unknown;
    while (true) {
        const Outcome o = outcome(p);
        if (o != Outcome::Ongoing) {
            result = result_from_outcome(o);
            termination = board_termination(p);
            break;
        }
        if (rec.plies() >= cfg.max_plies) {
            result = GameResult::Draw;
            termination = "max plies";
            break;
        }
        Engine& mover = p.side_to_move() == Color::White ? white : black;
        const Engine::Choice c = mover.choose(p);
        const auto legal = legal_moves(p);
        if (std::find(legal.begin(), legal.end(), c.move) == legal.end())
            throw std::runtime_error(mover.name() + " played an illegal move " + c.move.uci() + " in " + to_fen(p));
        const Color side = p.side_to_move();
        const int move_number = p.fullmove_number();
        rec.moves.push_back(c.move);
        rec.comments.push_back(format_score(c.score) + "/" + std::to_string(c.nodes));
        p = p.play(c.move);
        // Board outcomes take precedence over score-based adjudication.
        if (outcome(p) != Outcome::Ongoing) continue;
        if (auto a = adj.record(side, move_number, c.score)) {
            result = a->result;
            termination = "adjudication: " + a->reason;
            break;
        }
    }
    rec.result = result;
    rec.tags["Result"] = to_string(result);
    rec.tags["Termination"] = termination;
    rec.tags["PlyCount"] = std::to_string(rec.plies());
    return rec;
}

struct PairOutcome {
    std::vector<GameRecord> games;
    std::optional<std::string> error;
};

}  // namespace

MatchResult play_match(const MatchConfig& cfg) {
    if (cfg.openings.empty()) throw std::invalid_argument("opening suite is empty");
    if (cfg.pairs < 1) throw std::invalid_argument("a match needs at least one pair of games");
    if (cfg.concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");

    // Uniform sampling without replacement; cycles through the suite again
    // when more pairs than openings are requested.
    std::vector<std::size_t> order(cfg.openings.size());
    std::vector<std::size_t> chosen;
    std::mt19937_64 rng(cfg.seed);
    while (static_cast<int>(chosen.size()) < cfg.pairs) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) {
            if (static_cast<int>(chosen.size()) == cfg.pairs) break;
            chosen.push_back(i);
        }
    }

    std::vector<PairOutcome> outcomes(cfg.pairs);
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (int pair = next++; pair < cfg.pairs; pair = next++) {
            PairOutcome& out = outcomes[pair];
            try {
                auto a = make_engine(cfg.a);
                auto b = make_engine(cfg.b);
                const Position& opening = cfg.openings[chosen[pair]];
                // An engine's seed depends only on the pair and its colour, so
                // two identical engines replay the same game with colours swapped.
                const std::uint64_t white_seed = mix_seed(cfg.seed, 2 * std::uint64_t(pair));
                const std::uint64_t black_seed = mix_seed(cfg.seed, 2 * std::uint64_t(pair) + 1);
                a->new_game(white_seed);
                b->new_game(black_seed);
                out.games.push_back(play_game(cfg, opening, *a, *b, pair, 0));
                b->new_game(white_seed);
                a->new_game(black_seed);
                out.games.push_back(play_game(cfg, opening, *b, *a, pair, 1));
            } catch (const std::exception& e) {
                out.games.clear();
                out.error = e.what();
            }
        }
    };
    const int threads = std::min(cfg.concurrency, cfg.pairs);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    MatchResult res;
    res.name_a = cfg.a.name;
    res.name_b = cfg.b.name;
    for (int pair = 0; pair < cfg.pairs; ++pair) {
        auto& out = outcomes[pair];
        if (out.error) {
            res.aborted.push_back({pair, *out.error});
            continue;
        }
        for (std::size_t g = 0; g < out.games.size(); ++g) {
            const bool a_white = g == 0;
            const GameResult r = out.games[g].result;
            if (r == GameResult::Draw) ++res.draws;
            else if ((r == GameResult::WhiteWin) == a_white) ++res.wins;
            else ++res.losses;
            res.games.push_back(std::move(out.games[g]));
        }
    }
    return res;
}

MatchResult ablation_match(const ExpertBundle& bundle, EvaluatorPtr baseline, std::array<bool, kNumPhases> enabled,
                           MatchConfig cfg) {
    ExpertBundle mixed;
    std::string label;
    for (int p = 0; p < kNumPhases; ++p) {
        mixed.experts[p] = enabled[p] ? bundle.experts[p] : baseline;
        if (enabled[p]) label += std::string(label.empty() ? "" : "+") + to_string(static_cast<GamePhase>(p));
    }
    const SearchConfig search = cfg.a.search;
    cfg.a = EngineConfig{"m2cts[" + (label.empty() ? std::string("none") : label) + "]", EngineConfig::Kind::Search,
                       SearchType::M2cts, mixed, search};
    cfg.b = EngineConfig{"mcts[baseline]", EngineConfig::Kind::Search, SearchType::Mcts, ExpertBundle::uniform(baseline), search};
    return play_match(cfg);
}

void write_match_pgn(std::ostream& out, const MatchResult& result) {
    for (const auto& g : result.games) {
        write_pgn(out, g);
        out << '\n';
    }
}

}  // namespace pmcts
