#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <regex>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "pmcts/uci.hpp"

using namespace pmcts;
namespace fs = std::filesystem;

namespace {

// Feeds commands one by one and lets every search finish, like a GUI
// waiting for bestmove.
std::string run_session(const std::string& commands) {
    std::istringstream in(commands);
    std::ostringstream out, log;
    UciEngine engine(out, log);
    for (std::string line; std::getline(in, line);) {
        if (!engine.handle(line)) break;
        engine.wait();
    }
    return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("pmcts_uci_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("uci loop") {
    std::istringstream in("uci\nisready\nposition startpos\ngo infinite\nquit\n");
    std::ostringstream out, log;
    CHECK(uci_loop(in, out, log) == 0);
    CHECK(out.str().find("uciok") != std::string::npos);
    CHECK(out.str().find("bestmove ") != std::string::npos);  // quit stops the search first
}

TEST_CASE("uci handshake") {
    const auto lines = lines_of(run_session("uci\nisready\nquit\n"));
    REQUIRE(lines.size() >= 4);
    CHECK(lines[0].rfind("id name ", 0) == 0);
    CHECK(lines[1].rfind("id author ", 0) == 0);
    for (const char* opt : {"Batch_Size", "Nodes", "Simulations", "Fixed_Movetime", "Model_Directory", "Search_Type",
                            "First_Device_ID", "Threads"})
        CHECK(std::count_if(lines.begin(), lines.end(), [&](const std::string& l) {
                  return l.rfind(std::string("option name ") + opt + " type", 0) == 0;
              }) == 1);
    CHECK(lines[lines.size() - 2] == "uciok");
    CHECK(lines.back() == "readyok");
}

TEST_CASE("position and options") {
    std::ostringstream out, log;
    UciEngine e(out, log);
    e.handle("position startpos moves e2e4 e7e5 g1f3");
    CHECK(to_fen(e.position()) == "rnbqkbnr/pppp1ppp/8/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R b KQkq - 1 2");
    e.handle("position fen 8/8/8/8/8/k7/8/K7 w - - 12 40 moves a1b1");
    CHECK(to_fen(e.position()) == "8/8/8/8/8/k7/8/1K6 b - - 13 40");
    e.handle("position startpos moves e2e5");
    CHECK(out.str().find("info string error") != std::string::npos);
    CHECK(to_fen(e.position()) == "8/8/8/8/8/k7/8/1K6 b - - 13 40");  // unchanged after a bad command

    e.handle("setoption name Batch_Size value 64");
    e.handle("setoption name Nodes value 123");
    e.handle("setoption name Search_Type value m2cts");
    e.handle("setoption name Model_Directory value");
    CHECK(e.options().batch_size == 64);
    CHECK(e.options().nodes == 123);
    CHECK(e.options().search_type == "M2CTS");
    CHECK(e.options().model_directory.empty());
    e.handle("setoption name No_Such_Option value 1");
    e.handle("frobnicate");
    CHECK(log.str().find("unknown option: No_Such_Option") != std::string::npos);
    CHECK(log.str().find("unknown command: frobnicate") != std::string::npos);
}

TEST_CASE("go returns a legal bestmove") {
    const std::string out = run_session("position startpos moves e2e4\ngo nodes 64\nquit\n");
    std::smatch m;
    REQUIRE(std::regex_search(out, m, std::regex("bestmove (\\S+)")));
    const Position p = Position().play(resolve_uci(Position(), "e2e4"));
    CHECK_NOTHROW(resolve_uci(p, m[1].str()));
    CHECK(out.find("info nodes 64 ") != std::string::npos);

    CHECK(run_session("position fen 7k/6Q1/6K1/8/8/8/8/8 b - - 0 1\ngo nodes 10\nquit\n").find("bestmove 0000") !=
          std::string::npos);
}

TEST_CASE("m2cts engages for a bundle directory and logs gate votes") {
    const fs::path bundle_dir = temp_dir("bundle"), model_dir = temp_dir("model");
    const auto hc = std::make_shared<HandcraftedEvaluator>();
    save_bundle(bundle_dir, ExpertBundle::uniform(hc));
    save_model(model_dir / "model.weights", *hc);

    const std::string bundle_out = run_session("setoption name Model_Directory value " + bundle_dir.string() +
                                               "\nsetoption name Batch_Size value 64\nisready\n"
                                               "position startpos\ngo nodes 640\nquit\n");
    std::smatch m;
    REQUIRE(std::regex_search(bundle_out, m,
                              std::regex("info string gate search m2cts batches (\\d+) votes opening (\\d+) "
                                         "middlegame (\\d+) endgame (\\d+)")));
    const int batches = std::stoi(m[1]);
    CHECK(batches >= 10);
    // Every leaf of every batch casts one vote.
    CHECK(std::stoi(m[2]) + std::stoi(m[3]) + std::stoi(m[4]) >= 640 - 64);
    CHECK(std::stoi(m[2]) > 0);
    CHECK(bundle_out.find("loaded expert bundle") != std::string::npos);

    const std::string model_out = run_session("setoption name Model_Directory value " + model_dir.string() +
                                              "\nposition startpos\ngo nodes 64\nquit\n");
    CHECK(model_out.find("loaded single model") != std::string::npos);
    CHECK(model_out.find("gate search mcts") != std::string::npos);

    const std::string broken = run_session("setoption name Model_Directory value /nonexistent/dir\ngo nodes 8\nquit\n");
    CHECK(broken.find("info string error loading model") != std::string::npos);
    CHECK(broken.find("bestmove ") != std::string::npos);
    fs::remove_all(bundle_dir);
    fs::remove_all(model_dir);
}

TEST_CASE("stop answers within 100 ms") {
    std::ostringstream out, log;
    UciEngine e(out, log);
    e.handle("position startpos");
    for (const char* go : {"go infinite", "go movetime 60000", "go nodes 100000000"}) {
        out.str("");
        e.handle(go);
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        const auto t0 = std::chrono::steady_clock::now();
        e.handle("stop");
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        CHECK_MESSAGE(ms < 100.0, go << " stopped after " << ms << " ms");
        CHECK(out.str().find("bestmove ") != std::string::npos);
    }
}

TEST_CASE("fixed movetime option") {
    std::ostringstream out, log;
    UciEngine e(out, log);
    e.handle("setoption name Fixed_Movetime value 150");
    e.handle("position startpos");
    const auto t0 = std::chrono::steady_clock::now();
    e.handle("go");
    e.wait();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    CHECK(ms >= 140.0);
    CHECK(ms < 1000.0);
    CHECK(out.str().find("bestmove ") != std::string::npos);
}
