// pmcts: UCI engine (default) and toolkit subcommands.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 engine failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmcts/arena.hpp"
#include "pmcts/phase.hpp"
#include "pmcts/training.hpp"
#include "pmcts/uci.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pmcts;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitEngine = 4;

/// Input problems the user can fix: unreadable files, bad formats.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Options every subcommand accepts.
struct Common {
    std::uint64_t seed = 0;
    std::string report;  // JSON report file; stdout when empty
    std::string config;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--report", c.report, "Write the JSON report to this file instead of stdout");
    sub->add_option("--config", c.config, "TOML-style key = value file; command-line flags take precedence")
        ->check(CLI::ExistingFile);
}

// Config keys are long option names without dashes. CLI11 only reads config
// files for the top-level app, so subcommand files are applied here, after
// parsing, to options the command line left unset.
void apply_config(CLI::App* sub, const std::string& file) {
    if (file.empty()) return;
    for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(file)) {
        if (!item.parents.empty() || item.name == "config")
            throw CLI::ValidationError("--config", file + ": unsupported key '" + item.fullname() + "'");
        CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
        if (opt == nullptr)
            throw CLI::ValidationError("--config", file + ": no option --" + item.name + " for " + sub->get_name());
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        opt->run_callback();
    }
}

void emit_report(const Common& c, const json& report, bool to_stdout = true) {
    if (!c.report.empty()) {
        std::ofstream out(c.report);
        if (!out) throw DataError("cannot write report " + c.report);
        out << report.dump(2) << '\n';
    } else if (to_stdout) {
        std::cout << report.dump(2) << '\n';
    }
}

std::vector<GameRecord> read_games(const std::vector<std::string>& files) {
    std::vector<GameRecord> games;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw DataError("cannot open " + f);
        PgnParseResult r = parse_pgn(in);
        for (const auto& s : r.skipped) std::cerr << f << ": skipped game " << s.game_index + 1 << ": " << s.reason << '\n';
        for (auto& g : r.games) games.push_back(std::move(g));
    }
    return games;
}

// Engine descriptions: bundle:DIR (M2CTS), model:PATH (MCTS with one model,
// PATH a .weights file or a directory holding model.weights), handcrafted,
// handcrafted+kp (king and pawn endgame terms) and random.
EngineConfig parse_engine(const std::string& text, const SearchConfig& search) {
    EngineConfig engine;
    engine.name = text;
    engine.search = search;
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (kind == "bundle") {
        engine.type = SearchType::M2cts;
        engine.bundle = load_bundle(arg);
    } else if (kind == "model") {
        EvaluatorPtr e;
        if (fs::is_directory(arg)) {
            ModelDirectory md = load_model_directory(arg);
            if (md.is_bundle) throw DataError(arg + " holds an expert bundle; use bundle:" + arg);
            e = md.bundle.experts[0];
        } else {
            e = load_model(arg);
        }
        engine.bundle = ExpertBundle::uniform(e);
    } else if (text == "handcrafted") {
        engine.bundle = ExpertBundle::uniform(std::make_shared<HandcraftedEvaluator>());
    } else if (text == "handcrafted+kp") {
        engine.bundle =
            ExpertBundle::uniform(std::make_shared<HandcraftedEvaluator>(HandcraftedConfig{.king_pawn_terms = true}));
    } else if (text == "random") {
        engine.kind = EngineConfig::Kind::Random;
    } else {
        throw CLI::ValidationError("engine", "unknown engine '" + text +
                                                 "' (bundle:DIR, model:PATH, handcrafted, handcrafted+kp, random)");
    }
    return engine;
}

EvaluatorPtr parse_evaluator(const std::string& text) {
    const EngineConfig s = parse_engine(text, SearchConfig{});
    if (s.kind == EngineConfig::Kind::Random || s.type == SearchType::M2cts)
        throw CLI::ValidationError("baseline", "baseline must be a single evaluator");
    return s.bundle.experts[0];
}

void save_output_model(const fs::path& dir, const ExpertBundle& bundle, bool single) {
    fs::create_directories(dir);
    if (single) save_model(dir / "model.weights", *bundle.experts[0]);
    else save_bundle(dir, bundle);
}

/// Shared match knobs for match and ablation.
struct MatchArgs {
    std::string openings;
    int rounds = 50;
    int nodes = 400;
    int batch_size = 8;
    int max_plies = 400;
    int concurrency = 1;
    bool no_adjudication = false;
    std::string pgn_out;

    void add(CLI::App* sub) {
        sub->add_option("--openings", openings, "EPD or FEN file, one position per line")->required();
        sub->add_option("--rounds", rounds, "Opening pairs; each is played with both colours")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--nodes", nodes, "Nodes per move")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--batch-size", batch_size, "Leaves per evaluation batch")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--max-plies", max_plies, "Games reaching this length are drawn")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--concurrency", concurrency, "Pairs played in parallel")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_flag("--no-adjudication", no_adjudication, "Disable resign and draw adjudication");
        sub->add_option("--pgn-out", pgn_out, "Write the games to this PGN file");
    }

    SearchConfig search() const {
        SearchConfig s;
        s.nodes = nodes;
        s.batch_size = batch_size;
        return s;
    }

    MatchConfig config(std::uint64_t seed) const {
        MatchConfig cfg;
        try {
            cfg.openings = read_openings(openings);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
        if (static_cast<int>(cfg.openings.size()) < rounds)
            throw DataError(openings + " has " + std::to_string(cfg.openings.size()) + " positions, need " +
                            std::to_string(rounds));
        cfg.pairs = rounds;
        cfg.max_plies = max_plies;
        cfg.concurrency = concurrency;
        cfg.resign.enabled = cfg.draw.enabled = !no_adjudication;
        cfg.seed = seed;
        return cfg;
    }
};

int finish_match(const Common& c, const MatchArgs& m, const MatchResult& r) {
    if (!m.pgn_out.empty()) {
        std::ofstream out(m.pgn_out);
        if (!out) throw DataError("cannot write " + m.pgn_out);
        write_match_pgn(out, r);
    }
    const EloEstimate e = r.elo();
    std::cerr << r.name_a << " vs " << r.name_b << ": +" << r.wins << " =" << r.draws << " -" << r.losses
              << "  score " << r.score() << "  elo " << e.elo << " +/- " << e.ci95 << '\n';
    emit_report(c, r.summary());
    for (const auto& a : r.aborted) std::cerr << "pair " << a.pair + 1 << " aborted: " << a.error << '\n';
    return r.aborted.empty() ? kExitOk : kExitEngine;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pmcts: phase-aware MCTS chess engine and toolkit. Without a subcommand it speaks UCI on stdio."};
    app.require_subcommand(0, 1);

    CLI::App* uci = app.add_subcommand("uci", "Run the UCI engine on stdin/stdout (the default)");

    // perft
    Common perft_c;
    std::string perft_fen = "startpos";
    int perft_depth = 1;
    bool perft_divide = false;
    CLI::App* perft_cmd = app.add_subcommand("perft", "Count leaf nodes of the legal move tree");
    add_common(perft_cmd, perft_c);
    perft_cmd->add_option("--fen", perft_fen, "FEN or startpos")->capture_default_str();
    perft_cmd->add_option("--depth", perft_depth, "Depth in plies")->check(CLI::Range(0, 10))->capture_default_str();
    perft_cmd->add_flag("--divide", perft_divide, "Print the count below each root move");

    // phase-stats
    Common ps_c;
    std::vector<std::string> ps_pgn;
    std::string ps_out;
    CLI::App* ps_cmd = app.add_subcommand("phase-stats", "Per-move-number phase counts of a PGN corpus as CSV");
    add_common(ps_cmd, ps_c);
    ps_cmd->add_option("--pgn", ps_pgn, "PGN files")->required();
    ps_cmd->add_option("--out", ps_out, "CSV file; stdout when omitted");

    // build-data
    Common bd_c;
    std::vector<std::string> bd_pgn, bd_val, bd_test;
    std::string bd_out;
    CLI::App* bd_cmd = app.add_subcommand("build-data", "Build phase-labelled training datasets from PGN");
    add_common(bd_cmd, bd_c);
    bd_cmd->add_option("--pgn", bd_pgn, "PGN files")->required();
    bd_cmd->add_option("--out", bd_out, "Output directory")->required();
    bd_cmd->add_option("--val-month", bd_val, "YYYY-MM months held out for validation");
    bd_cmd->add_option("--test-month", bd_test, "YYYY-MM months held out for testing");

    // train
    Common tr_c;
    std::string tr_data, tr_out, tr_method = "regular";
    TrainRunConfig tr_cfg;
    CLI::App* tr_cmd = app.add_subcommand("train", "Train a model or an expert bundle");
    add_common(tr_cmd, tr_c);
    tr_cmd->add_option("--data", tr_data, "Dataset directory from build-data")->required();
    tr_cmd->add_option("--out", tr_out, "Output model directory")->required();
    tr_cmd->add_option("--method", tr_method, "Training regime")
        ->check(CLI::IsMember({"regular", "separated", "staged", "staged-sequential", "weighted"}))
        ->capture_default_str();
    tr_cmd->add_option("--a", tr_cfg.a, "Weighted learning factor (>= 1)")->capture_default_str();
    tr_cmd->add_option("--hidden", tr_cfg.hidden, "Hidden units")->check(CLI::PositiveNumber)->capture_default_str();
    tr_cmd->add_option("--batch-size", tr_cfg.batch_size, "Minibatch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tr_cmd->add_option("--iterations", tr_cfg.iterations, "Optimizer steps per run")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tr_cmd->add_option("--fine-tune-iterations", tr_cfg.fine_tune_iterations, "Steps per fine-tuning stage")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tr_cmd->add_option("--eval-every", tr_cfg.eval_every, "Validation interval in steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tr_cmd->add_option("--lr-max", tr_cfg.schedule.lr_max, "Peak learning rate")->capture_default_str();
    tr_cmd->add_option("--spike-factor", tr_cfg.spike_factor, "Reload the best checkpoint above this loss ratio")
        ->capture_default_str();

    // selfplay
    Common sp_c;
    SelfPlayConfig sp_cfg;
    std::string sp_mode = "mcts", sp_init, sp_out;
    int sp_nodes = *sp_cfg.search.nodes;
    CLI::App* sp_cmd = app.add_subcommand("selfplay", "Reinforcement learning by self-play");
    add_common(sp_cmd, sp_c);
    sp_cmd->add_option("--updates", sp_cfg.updates, "Generation and training cycles")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sp_cmd->add_option("--games", sp_cfg.games_per_update, "Games per cycle")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sp_cmd->add_option("--mode", sp_mode, "Search and training mode")
        ->check(CLI::IsMember({"mcts", "m2cts-separated", "m2cts-staged"}))
        ->capture_default_str();
    sp_cmd->add_option("--nodes", sp_nodes, "Nodes per move")->check(CLI::PositiveNumber)->capture_default_str();
    sp_cmd->add_option("--max-plies", sp_cfg.max_plies, "Adjudicate by material after this many plies")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sp_cmd->add_option("--iterations", sp_cfg.train.iterations, "Optimizer steps per cycle")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sp_cmd->add_option("--hidden", sp_cfg.train.hidden, "Hidden units of a fresh network")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sp_cmd->add_option("--init", sp_init, "Starting model directory; a random network when omitted");
    sp_cmd->add_option("--out", sp_out, "Directory receiving v0 .. vN");

    // match
    Common m_c;
    MatchArgs m_args;
    std::string engine_a, engine_b;
    CLI::App* m_cmd = app.add_subcommand("match", "Play colour-swapped game pairs between two engines");
    add_common(m_cmd, m_c);
    m_cmd->add_option("--engineA", engine_a, "bundle:DIR, model:PATH, handcrafted, handcrafted+kp or random")
        ->required();
    m_cmd->add_option("--engineB", engine_b, "Same forms as --engineA")->required();
    m_args.add(m_cmd);

    // ablation
    Common ab_c;
    MatchArgs ab_args;
    std::string ab_bundle, ab_baseline;
    std::vector<std::string> ab_phases;
    CLI::App* ab_cmd = app.add_subcommand("ablation", "M2CTS with selected experts against MCTS with a baseline");
    add_common(ab_cmd, ab_c);
    ab_cmd->add_option("--bundle", ab_bundle, "Expert bundle directory")->required();
    ab_cmd->add_option("--baseline", ab_baseline, "model:PATH, handcrafted or handcrafted+kp")->required();
    ab_cmd->add_option("--phases", ab_phases, "Phases whose expert is enabled")
        ->check(CLI::IsMember({"opening", "middlegame", "endgame"}))
        ->delimiter(',');
    ab_args.add(ab_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        for (auto& [sub, common] : std::initializer_list<std::pair<CLI::App*, Common*>>{
                 {perft_cmd, &perft_c}, {ps_cmd, &ps_c}, {bd_cmd, &bd_c}, {tr_cmd, &tr_c}, {sp_cmd, &sp_c},
                 {m_cmd, &m_c}, {ab_cmd, &ab_c}})
            if (sub->parsed()) apply_config(sub, common->config);

        if (app.get_subcommands().empty() || uci->parsed()) return uci_loop(std::cin, std::cout, std::cerr);

        if (perft_cmd->parsed()) {
            const Position p = perft_fen == "startpos" ? Position() : parse_fen(perft_fen);
            std::uint64_t total = 0;
            json divide = json::object();
            if (perft_divide && perft_depth > 0) {
                for (const Move& m : legal_moves(p)) {
                    const std::uint64_t n = perft(p.play(m), perft_depth - 1);
                    std::cerr << m.uci() << ": " << n << '\n';
                    divide[m.uci()] = n;
                    total += n;
                }
            } else {
                total = perft(p, perft_depth);
            }
            std::cout << total << '\n';
            emit_report(perft_c,
                        {{"schema", "pmcts-perft/1"}, {"fen", to_fen(p)}, {"depth", perft_depth}, {"nodes", total},
                         {"divide", divide}},
                        false);
            return kExitOk;
        }

        if (ps_cmd->parsed()) {
            const PhaseStats st = phase_stats(read_games(ps_pgn));
            std::ostringstream csv;
            csv << "move,opening,middlegame,endgame\n";
            for (const auto& r : st.rows) csv << r.move << ',' << r.counts[0] << ',' << r.counts[1] << ',' << r.counts[2] << '\n';
            if (ps_out.empty()) {
                std::cout << csv.str();
            } else {
                std::ofstream out(ps_out);
                if (!out) throw DataError("cannot write " + ps_out);
                out << csv.str();
            }
            std::cerr << st.games << " games; middlegame starts at move " << st.middlegame_start_mean << " +/- "
                      << st.middlegame_start_std << ", endgame at " << st.endgame_start_mean << " +/- "
                      << st.endgame_start_std << '\n';
            emit_report(ps_c,
                        {{"schema", "pmcts-phase-stats/1"},
                         {"games", st.games},
                         {"moves", st.rows.size()},
                         {"middlegame_start", {{"games", st.middlegame_games}, {"mean", st.middlegame_start_mean}, {"std", st.middlegame_start_std}}},
                         {"endgame_start", {{"games", st.endgame_games}, {"mean", st.endgame_start_mean}, {"std", st.endgame_start_std}}}},
                        false);
            return kExitOk;
        }

        if (bd_cmd->parsed()) {
            DatasetSplit split;
            split.val_months.insert(bd_val.begin(), bd_val.end());
            split.test_months.insert(bd_test.begin(), bd_test.end());
            std::vector<fs::path> files(bd_pgn.begin(), bd_pgn.end());
            const DatasetBundle data = build_datasets(files, split);
            save_datasets(bd_out, data);
            std::cerr << "train " << data.train.size() << ", val " << data.val.size() << ", test "
                      << data.test.size() << " samples written to " << bd_out << '\n';
            emit_report(bd_c, data.manifest);
            return kExitOk;
        }

        if (tr_cmd->parsed()) {
            tr_cfg.method = train_method_from_string(tr_method);
            tr_cfg.seed = tr_c.seed;
            try {
                tr_cfg.validate();
            } catch (const std::invalid_argument& e) {
                throw CLI::ValidationError("train", e.what());
            }
            const DatasetBundle data = load_datasets(tr_data);
            const TrainOutput out = train(data, tr_cfg);
            save_output_model(tr_out, out.bundle, tr_cfg.method == TrainMethod::Regular);
            json report = out.report();
            report["out"] = tr_out;
            report["config"] = {{"method", tr_method},
                                {"a", tr_cfg.a},
                                {"hidden", tr_cfg.hidden},
                                {"batch_size", tr_cfg.batch_size},
                                {"iterations", tr_cfg.iterations},
                                {"fine_tune_iterations", tr_cfg.fine_tune_iterations},
                                {"eval_every", tr_cfg.eval_every},
                                {"lr_max", tr_cfg.schedule.lr_max},
                                {"spike_factor", tr_cfg.spike_factor},
                                {"seed", tr_cfg.seed}};
            std::ofstream(fs::path(tr_out) / "train_report.json") << report.dump(2) << '\n';
            for (const auto& r : out.runs)
                std::cerr << r.name << ": best validation loss " << r.best_val_loss << ", " << r.spikes
                          << " spike(s)\n";
            emit_report(tr_c, report);
            return kExitOk;
        }

        if (sp_cmd->parsed()) {
            sp_cfg.mode = selfplay_mode_from_string(sp_mode);
            sp_cfg.search.nodes = sp_nodes;
            sp_cfg.seed = sp_c.seed;
            std::optional<ExpertBundle> init;
            if (!sp_init.empty()) init = load_model_directory(sp_init).bundle;
            const bool single = sp_cfg.mode == SelfPlayMode::Mcts;
            const auto on_update = [&](int k, const ExpertBundle& b) {
                std::cerr << "update " << k << " done\n";
                if (!sp_out.empty()) save_output_model(fs::path(sp_out) / ("v" + std::to_string(k)), b, single);
            };
            const SelfPlayOutput out = selfplay_rl(init ? &*init : nullptr, sp_cfg, on_update);
            if (!sp_out.empty()) save_output_model(fs::path(sp_out) / "v0", out.versions.front(), single);
            emit_report(sp_c, out.report);
            return kExitOk;
        }

        if (m_cmd->parsed()) {
            MatchConfig cfg = m_args.config(m_c.seed);
            cfg.a = parse_engine(engine_a, m_args.search());
            cfg.b = parse_engine(engine_b, m_args.search());
            return finish_match(m_c, m_args, play_match(cfg));
        }

        if (ab_cmd->parsed()) {
            MatchConfig cfg = ab_args.config(ab_c.seed);
            cfg.a.search = ab_args.search();
            std::array<bool, kNumPhases> enabled{};
            for (const auto& p : ab_phases) enabled[p == "opening" ? 0 : p == "middlegame" ? 1 : 2] = true;
            const ExpertBundle bundle = load_bundle(ab_bundle);
            return finish_match(ab_c, ab_args, ablation_match(bundle, parse_evaluator(ab_baseline), enabled, cfg));
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const FenError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const WeightsError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const DatasetError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "engine failure: " << e.what() << '\n';
        return kExitEngine;
    }
    return kExitOk;
}
