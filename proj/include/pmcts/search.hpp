#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pmcts/experts.hpp"
#include "pmcts/phase.hpp"
#include "pmcts/position.hpp"

namespace pmcts {

struct SearchConfig {
    std::optional<int> nodes = 800;  // exactly one of nodes / movetime_ms
    std::optional<int> movetime_ms;
    int batch_size = 8;
    double c_puct = 2.5;
    double virtual_loss = 1.0;
    bool noise = false;  // root Dirichlet noise, self-play only
    double dirichlet_alpha = 0.3;
    double dirichlet_epsilon = 0.25;
    bool sample_moves = false;  // temperature sampling during the first plies
    double temperature = 0.8;
    int temperature_moves = 15;
    bool reuse_tree = false;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
};

enum class SearchType { Mcts, M2cts };
const char* to_string(SearchType t);

struct GateDecision {
    std::vector<GamePhase> phases;
    GamePhase chosen = GamePhase::Opening;
    std::array<int, kNumPhases> votes{};
};

/// Majority vote over the phases of the buffered leaves; ties go to the later phase.
GateDecision gate_phases(std::span<const GamePhase> phases);
GateDecision gate_batch(std::span<const Position> leaves);

/// Score scale used for adjudication: round(v * 1000).
int value_to_score(double v);

double puct_score(double q, double prior, double parent_visits, double child_visits, double c_puct);

/// Search tree stored in flat arrays. Edge statistics are from the point of
/// view of the side that plays the edge's move.
class SearchTree {
public:
    struct Edge {
        Move move;
        int policy_index = 0;
        double prior = 0;
        int child = -1;
        int n = 0;
        double w = 0;
        int virtual_loss = 0;
        double q() const { return w / std::max(n, 1); }
    };
    struct Node {
        Position pos;
        int parent = -1;
        int parent_edge = -1;
        int edge_begin = 0;
        int edge_count = 0;
        int n = 0;       // completed visits through this node
        double w = 0;    // value sum from this node's side to move
        bool expanded = false;
        bool pending = false;  // selected in the current batch, awaiting evaluation
        bool terminal = false;
        double terminal_value = 0;
        double eval = 0;  // evaluator value at expansion, used as first-play urgency
        GamePhase phase = GamePhase::Opening;
        double q() const { return w / std::max(n, 1); }
    };
    struct Selection {
        std::vector<int> edges;  // path from the root
        int leaf = -1;
        bool collision = false;  // reached a leaf already waiting for evaluation
    };

    explicit SearchTree(const Position& root);

    const Node& node(int i) const { return nodes_[i]; }
    const Edge& edge(int i) const { return edges_[i]; }
    std::span<const Edge> edges_of(int node) const {
        return {edges_.data() + nodes_[node].edge_begin, static_cast<std::size_t>(nodes_[node].edge_count)};
    }
    int size() const { return static_cast<int>(nodes_.size()); }

    /// Descends by PUCT applying virtual loss; creates the leaf node when the
    /// chosen edge has no child yet.
    Selection select(double c_puct, double virtual_loss);
    /// Removes the virtual loss of a selection that will not be backed up.
    void revert(const Selection& sel, double virtual_loss);
    /// Installs edges with the evaluator's priors.
    void expand(int node, const Evaluation& e);
    /// Backs `value` (from the leaf's side to move) up the path and removes virtual loss.
    void backup(const Selection& sel, double value, double virtual_loss);
    void add_dirichlet_noise(std::mt19937_64& rng, double alpha, double epsilon);

    int total_virtual_loss() const;
    /// Copy of the subtree rooted at `node` (statistics preserved).
    SearchTree subtree(int node) const;
    /// Replaces the stored root position (same placement, possibly a different game line).
    void set_root_position(const Position& p) { nodes_[0].pos = p; }
    /// Descendant at depth <= 2 whose position equals `p`, if any.
    std::optional<int> find_descendant(const Position& p) const;

private:
    SearchTree() = default;
    int add_node(const Position& pos, int parent, int parent_edge);

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
};

struct SearchResult {
    Move best_move;
    std::vector<Move> moves;  // root moves in legal order
    std::vector<int> visits;
    std::vector<double> q;
    std::vector<double> priors;
    std::vector<Move> pv;
    double root_value = 0;  // mean value from the root's side to move
    int nodes = 0;          // completed simulations, root expansion included
    int batches = 0;
    std::array<long, kNumPhases> votes{};          // summed over all batches
    std::array<int, kNumPhases> batches_by_phase{};  // expert chosen per batch
    double elapsed_ms = 0;

    /// Visit counts normalized to a distribution over `moves`.
    std::vector<double> visit_distribution() const;
};

class Search {
public:
    /// Classical MCTS with a single evaluator.
    Search(EvaluatorPtr model, SearchConfig cfg);
    /// M2CTS: each mini-batch is evaluated by the expert of its majority phase.
    Search(ExpertBundle bundle, SearchConfig cfg);

    SearchType type() const { return type_; }
    const SearchConfig& config() const { return cfg_; }
    void set_config(const SearchConfig& cfg);

    /// Throws TerminalPositionError for finished games. `stop` is polled
    /// between mini-batches.
    SearchResult run(const Position& root, const std::atomic<bool>* stop = nullptr);
    /// Drop any retained tree.
    void clear();
    const SearchTree* tree() const { return tree_ ? &*tree_ : nullptr; }

private:
    const Evaluator& pick_expert(std::span<const Position> leaves, SearchResult& res) const;

    SearchType type_;
    ExpertBundle bundle_;
    SearchConfig cfg_;
    std::mt19937_64 rng_;
    std::optional<SearchTree> tree_;
};

}  // namespace pmcts
