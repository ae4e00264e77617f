#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pmcts/position.hpp"

namespace pmcts::testing {

inline std::string data_path(const std::string& name) { return std::string(PMCTS_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Random legal playout from the start position; stops early on terminal
/// positions. Captures are weighted up so sparse positions show up.
inline Position random_position(std::mt19937_64& rng, int max_plies, bool stop_before_terminal = true) {
    Position p;
    std::uniform_int_distribution<int> len(0, max_plies);
    const int plies = len(rng);
    for (int i = 0; i < plies; ++i) {
        auto moves = legal_moves(p);
        if (moves.empty()) break;
        std::vector<double> w;
        for (const auto& m : moves) w.push_back(m.is_capture() || m.is_promotion() ? 4.0 : 1.0);
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        Position next = p.play(moves[pick(rng)]);
        if (stop_before_terminal && outcome(next) != Outcome::Ongoing) break;
        p = next;
    }
    return p;
}

inline std::vector<Position> random_positions(std::uint64_t seed, int count, int max_plies) {
    std::mt19937_64 rng(seed);
    std::vector<Position> out;
    while (static_cast<int>(out.size()) < count) {
        Position p = random_position(rng, max_plies);
        if (outcome(p) == Outcome::Ongoing) out.push_back(p);
    }
    return out;
}

}  // namespace pmcts::testing
