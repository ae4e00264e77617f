#include "pmcts/uci.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace pmcts {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

int to_int(const std::string& s, int fallback) {
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        return fallback;
    }
}

}  // namespace

UciEngine::UciEngine(std::ostream& out, std::ostream& log) : out_(out), log_(log) {}

UciEngine::~UciEngine() { stop_search(); }

void UciEngine::send(const std::string& line) {
    std::lock_guard<std::mutex> lock(out_mutex_);
    out_ << line << '\n' << std::flush;
}

void UciEngine::wait() {
    if (worker_.joinable()) worker_.join();
}

void UciEngine::stop_search() {
    stop_ = true;
    wait();
    stop_ = false;
}

bool UciEngine::handle(const std::string& raw) {
    std::istringstream in(raw);
    std::string cmd;
    if (!(in >> cmd)) return true;
    std::string rest;
    std::getline(in, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);

    if (cmd == "uci") {
        send("id name pmcts");
        send("id author pmcts developers");
        send("option name Batch_Size type spin default 8 min 1 max 1024");
        send("option name Nodes type spin default 800 min 1 max 100000000");
        send("option name Simulations type spin default 0 min 0 max 100000000");
        send("option name Fixed_Movetime type spin default 0 min 0 max 86400000");
        send("option name Model_Directory type string default <empty>");
        send("option name Search_Type type combo default Auto var Auto var MCTS var M2CTS");
        send("option name First_Device_ID type spin default 0 min 0 max 64");
        send("option name Threads type spin default 1 min 1 max 256");
        send("uciok");
    } else if (cmd == "isready") {
        ensure_model();
        send("readyok");
    } else if (cmd == "setoption") {
        // setoption name <id> [value <x>]; names may contain spaces.
        const auto name_at = rest.find("name ");
        if (name_at == std::string::npos) {
            log_ << "setoption without a name: " << raw << '\n';
            return true;
        }
        std::string name = rest.substr(name_at + 5), value;
        const auto value_at = name.find(" value ");
        if (value_at != std::string::npos) {
            value = name.substr(value_at + 7);
            name = name.substr(0, value_at);
        }
        set_option(name, value);
    } else if (cmd == "ucinewgame") {
        stop_search();
        if (search_) search_->clear();
        pos_ = Position();
    } else if (cmd == "position") {
        stop_search();
        set_position(rest);
    } else if (cmd == "go") {
        stop_search();
        go(rest);
    } else if (cmd == "stop") {
        stop_search();
    } else if (cmd == "quit") {
        stop_search();
        return false;
    } else {
        log_ << "unknown command: " << raw << '\n';
    }
    return true;
}

void UciEngine::set_option(const std::string& name, const std::string& value) {
    const std::string key = lower(name);
    if (key == "batch_size") opts_.batch_size = std::max(1, to_int(value, opts_.batch_size));
    else if (key == "nodes") opts_.nodes = std::max(1, to_int(value, opts_.nodes));
    else if (key == "simulations") opts_.simulations = std::max(0, to_int(value, opts_.simulations));
    else if (key == "fixed_movetime") opts_.fixed_movetime = std::max(0, to_int(value, opts_.fixed_movetime));
    else if (key == "model_directory") {
        opts_.model_directory = value == "<empty>" ? "" : value;
        model_dirty_ = true;
    } else if (key == "search_type") {
        const std::string v = lower(value);
        if (v != "auto" && v != "mcts" && v != "m2cts") {
            log_ << "unknown Search_Type '" << value << "'\n";
            return;
        }
        opts_.search_type = v == "auto" ? "Auto" : v == "mcts" ? "MCTS" : "M2CTS";
        model_dirty_ = true;
    } else if (key == "first_device_id") opts_.first_device_id = to_int(value, 0);
    else if (key == "threads") opts_.threads = std::max(1, to_int(value, 1));
    else {
        log_ << "unknown option: " << name << '\n';
        return;
    }
    // Options change the search configuration; the next go rebuilds it.
    search_.reset();
}

void UciEngine::set_position(const std::string& args) {
    std::istringstream in(args);
    std::string word;
    in >> word;
    Position p;
    try {
        if (word == "fen") {
            std::string fen, field;
            while (in >> field && field != "moves") fen += (fen.empty() ? "" : " ") + field;
            p = parse_fen(fen);
            word = field;
        } else if (word == "startpos") {
            in >> word;
        } else {
            log_ << "position needs startpos or fen\n";
            return;
        }
        if (word == "moves") {
            std::string mv;
            while (in >> mv) p = p.play(resolve_uci(p, mv));
        }
    } catch (const std::exception& e) {
        send(std::string("info string error ") + e.what());
        return;
    }
    pos_ = p;
}

void UciEngine::ensure_model() {
    if (!model_dirty_ && bundle_) return;
    model_dirty_ = false;
    search_.reset();
    bundle_is_expert_set_ = false;
    if (opts_.model_directory.empty()) {
        bundle_ = ExpertBundle::uniform(std::make_shared<HandcraftedEvaluator>());
        return;
    }
    try {
        ModelDirectory md = load_model_directory(opts_.model_directory);
        bundle_ = md.bundle;
        bundle_is_expert_set_ = md.is_bundle;
        loaded_dir_ = opts_.model_directory;
        send("info string loaded " + std::string(md.is_bundle ? "expert bundle" : "single model") + " from " +
             opts_.model_directory);
    } catch (const std::exception& e) {
        send(std::string("info string error loading model: ") + e.what() + "; using the handcrafted evaluator");
        bundle_ = ExpertBundle::uniform(std::make_shared<HandcraftedEvaluator>());
    }
}

void UciEngine::go(const std::string& args) {
    ensure_model();
    SearchConfig cfg;
    cfg.batch_size = opts_.batch_size;
    const int default_nodes = opts_.simulations > 0 ? opts_.simulations : opts_.nodes;
    if (opts_.fixed_movetime > 0) {
        cfg.nodes.reset();
        cfg.movetime_ms = opts_.fixed_movetime;
    } else {
        cfg.nodes = default_nodes;
    }
    std::istringstream in(args);
    std::string word;
    while (in >> word) {
        if (word == "nodes") {
            int n = default_nodes;
            in >> n;
            cfg.nodes = std::max(1, n);
            cfg.movetime_ms.reset();
        } else if (word == "movetime") {
            int t = 0;
            in >> t;
            cfg.nodes.reset();
            cfg.movetime_ms = std::max(1, t);
        } else if (word == "infinite") {
            cfg.nodes = INT_MAX / 2;
            cfg.movetime_ms.reset();
        }
    }

    SearchType type = bundle_is_expert_set_ ? SearchType::M2cts : SearchType::Mcts;
    if (opts_.search_type == "MCTS") type = SearchType::Mcts;
    if (opts_.search_type == "M2CTS") type = SearchType::M2cts;
    if (!search_ || search_->type() != type) {
        search_ = type == SearchType::M2cts ? std::make_unique<Search>(*bundle_, cfg)
                                            : std::make_unique<Search>(bundle_->experts[0], cfg);
    } else {
        search_->set_config(cfg);
    }

    const Position root = pos_;
    worker_ = std::thread([this, root, type] {
        if (outcome(root) != Outcome::Ongoing) {
            send("info string position is already decided");
            send("bestmove 0000");
            return;
        }
        try {
            const SearchResult r = search_->run(root, &stop_);
            std::string pv;
            for (const Move& m : r.pv) pv += " " + m.uci();
            send("info nodes " + std::to_string(r.nodes) + " time " + std::to_string(std::lround(r.elapsed_ms)) +
                 " score cp " + std::to_string(value_to_score(r.root_value)) + " pv" + pv);
            std::ostringstream gate;
            gate << "info string gate search " << to_string(type) << " batches " << r.batches << " votes opening "
                 << r.votes[0] << " middlegame " << r.votes[1] << " endgame " << r.votes[2] << " chosen opening "
                 << r.batches_by_phase[0] << " middlegame " << r.batches_by_phase[1] << " endgame "
                 << r.batches_by_phase[2];
            send(gate.str());
            send("bestmove " + r.best_move.uci());
        } catch (const std::exception& e) {
            send(std::string("info string search failed: ") + e.what());
            send("bestmove 0000");
        }
    });
}

int uci_loop(std::istream& in, std::ostream& out, std::ostream& log) {
    UciEngine engine(out, log);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!engine.handle(line)) return 0;
    }
    engine.wait();
    return 0;
}

}  // namespace pmcts
