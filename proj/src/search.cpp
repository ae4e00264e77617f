#include "pmcts/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace pmcts {

void SearchConfig::validate() const {
    if (nodes.has_value() == movetime_ms.has_value())
        throw std::invalid_argument("exactly one of the node and move-time budgets must be set");
    if (nodes && *nodes < 1) throw std::invalid_argument("node budget must be positive");
    if (movetime_ms && *movetime_ms < 1) throw std::invalid_argument("move time must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    if (c_puct <= 0) throw std::invalid_argument("c_puct must be positive");
}

const char* to_string(SearchType t) { return t == SearchType::Mcts ? "mcts" : "m2cts"; }

GateDecision gate_phases(std::span<const GamePhase> phases) {
    GateDecision d;
    d.phases.assign(phases.begin(), phases.end());
    for (GamePhase p : phases) ++d.votes[index(p)];
    d.chosen = GamePhase::Endgame;
    for (int i = kNumPhases - 1; i >= 0; --i)
        if (d.votes[i] > d.votes[index(d.chosen)]) d.chosen = static_cast<GamePhase>(i);
    return d;
}

GateDecision gate_batch(std::span<const Position> leaves) {
    std::vector<GamePhase> phases;
    phases.reserve(leaves.size());
    for (const Position& p : leaves) phases.push_back(phase_of(p));
    return gate_phases(phases);
}

int value_to_score(double v) { return static_cast<int>(std::lround(v * 1000.0)); }

double puct_score(double q, double prior, double parent_visits, double child_visits, double c_puct) {
    return q + c_puct * prior * std::sqrt(parent_visits) / (1.0 + child_visits);
}

// ---------------------------------------------------------------------------

SearchTree::SearchTree(const Position& root) { add_node(root, -1, -1); }

int SearchTree::add_node(const Position& pos, int parent, int parent_edge) {
    Node n;
    n.pos = pos;
    n.parent = parent;
    n.parent_edge = parent_edge;
    n.phase = phase_of(pos);
    const Outcome o = outcome(pos);
    if (o != Outcome::Ongoing) {
        n.terminal = true;
        // A decisive result always means the side to move has been mated.
        n.terminal_value = o == Outcome::Draw ? 0.0 : -1.0;
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

SearchTree::Selection SearchTree::select(double c_puct, double virtual_loss) {
    Selection sel;
    int cur = 0;
    while (true) {
        Node& node = nodes_[cur];
        if (node.terminal) break;
        if (!node.expanded) {
            if (node.pending) sel.collision = true;
            break;
        }
        int in_flight = 0;
        for (int e = node.edge_begin; e < node.edge_begin + node.edge_count; ++e) in_flight += edges_[e].virtual_loss;
        const double parent_visits = node.n + in_flight;
        const double fpu = node.eval;
        int best = -1;
        double best_score = -1e300;
        for (int e = node.edge_begin; e < node.edge_begin + node.edge_count; ++e) {
            const Edge& ed = edges_[e];
            const double visits = ed.n + ed.virtual_loss;
            const double q = visits > 0 ? (ed.w - virtual_loss * ed.virtual_loss) / visits : fpu;
            const double score = puct_score(q, ed.prior, parent_visits, visits, c_puct);
            if (score > best_score) {
                best_score = score;
                best = e;
            }
        }
        edges_[best].virtual_loss += 1;
        sel.edges.push_back(best);
        if (edges_[best].child < 0) {
            const Position next = nodes_[cur].pos.play(edges_[best].move);
            const int child = add_node(next, cur, best);
            edges_[best].child = child;
            cur = child;
            break;
        }
        cur = edges_[best].child;
    }
    sel.leaf = cur;
    if (!sel.collision && !nodes_[cur].terminal && !nodes_[cur].expanded) nodes_[cur].pending = true;
    return sel;
}

void SearchTree::revert(const Selection& sel, double) {
    for (int e : sel.edges) edges_[e].virtual_loss -= 1;
}

void SearchTree::expand(int node, const Evaluation& e) {
    Node& n = nodes_[node];
    n.eval = e.value;
    n.edge_begin = static_cast<int>(edges_.size());
    n.edge_count = static_cast<int>(e.moves.size());
    for (std::size_t i = 0; i < e.moves.size(); ++i) {
        Edge ed;
        ed.move = e.moves[i];
        ed.policy_index = e.indices[i];
        ed.prior = e.policy[i];
        edges_.push_back(ed);
    }
    n.expanded = true;
    n.pending = false;
}

void SearchTree::backup(const Selection& sel, double value, double) {
    int cur = sel.leaf;
    double v = value;
    nodes_[cur].n += 1;
    nodes_[cur].w += v;
    for (auto it = sel.edges.rbegin(); it != sel.edges.rend(); ++it) {
        Edge& ed = edges_[*it];
        v = -v;
        ed.virtual_loss -= 1;
        ed.n += 1;
        ed.w += v;
        cur = nodes_[cur].parent;
        nodes_[cur].n += 1;
        nodes_[cur].w += v;
    }
}

void SearchTree::add_dirichlet_noise(std::mt19937_64& rng, double alpha, double epsilon) {
    Node& root = nodes_[0];
    if (root.edge_count == 0) return;
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> noise(root.edge_count);
    double sum = 0;
    for (double& x : noise) sum += (x = gamma(rng));
    if (sum <= 0) return;
    for (int i = 0; i < root.edge_count; ++i) {
        Edge& ed = edges_[root.edge_begin + i];
        ed.prior = (1.0 - epsilon) * ed.prior + epsilon * noise[i] / sum;
    }
}

int SearchTree::total_virtual_loss() const {
    int total = 0;
    for (const Edge& e : edges_) total += e.virtual_loss;
    return total;
}

SearchTree SearchTree::subtree(int root) const {
    SearchTree out;
    std::vector<int> edge_owner;
    std::vector<std::pair<int, int>> queue{{root, -1}};  // (old node, new parent edge)
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const auto [old, parent_edge] = queue[qi];
        const Node& src = nodes_[old];
        const int id = static_cast<int>(out.nodes_.size());
        out.nodes_.push_back(src);
        out.nodes_[id].parent = parent_edge < 0 ? -1 : edge_owner[parent_edge];
        out.nodes_[id].parent_edge = parent_edge;
        if (parent_edge >= 0) out.edges_[parent_edge].child = id;
        if (!src.expanded) continue;
        out.nodes_[id].edge_begin = static_cast<int>(out.edges_.size());
        for (int e = src.edge_begin; e < src.edge_begin + src.edge_count; ++e) {
            Edge ed = edges_[e];
            ed.virtual_loss = 0;
            const int old_child = ed.child;
            ed.child = -1;
            out.edges_.push_back(ed);
            edge_owner.push_back(id);
            if (old_child >= 0) queue.emplace_back(old_child, static_cast<int>(out.edges_.size()) - 1);
        }
    }
    return out;
}

std::optional<int> SearchTree::find_descendant(const Position& p) const {
    const std::string fen = to_fen(p);
    const auto matches = [&](int n) { return nodes_[n].pos.hash() == p.hash() && to_fen(nodes_[n].pos) == fen; };
    if (matches(0)) return 0;
    for (const Edge& e1 : edges_of(0)) {
        if (e1.child < 0) continue;
        if (matches(e1.child)) return e1.child;
        for (const Edge& e2 : edges_of(e1.child))
            if (e2.child >= 0 && matches(e2.child)) return e2.child;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

std::vector<double> SearchResult::visit_distribution() const {
    std::vector<double> d(visits.size(), 0.0);
    double total = 0;
    for (int v : visits) total += v;
    if (total <= 0) {
        // Budget of one: fall back to the priors.
        return priors;
    }
    for (std::size_t i = 0; i < visits.size(); ++i) d[i] = visits[i] / total;
    return d;
}

Search::Search(EvaluatorPtr model, SearchConfig cfg)
    : type_(SearchType::Mcts), bundle_(ExpertBundle::uniform(std::move(model))), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
}

Search::Search(ExpertBundle bundle, SearchConfig cfg)
    : type_(SearchType::M2cts), bundle_(std::move(bundle)), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
}

void Search::set_config(const SearchConfig& cfg) {
    cfg.validate();
    const bool reseed = cfg.seed != cfg_.seed;
    cfg_ = cfg;
    if (reseed) rng_.seed(cfg_.seed);
}

void Search::clear() { tree_.reset(); }

const Evaluator& Search::pick_expert(std::span<const Position> leaves, SearchResult& res) const {
    if (type_ == SearchType::Mcts) return *bundle_.experts[0];
    const GateDecision d = gate_batch(leaves);
    for (int i = 0; i < kNumPhases; ++i) res.votes[i] += d.votes[i];
    ++res.batches_by_phase[index(d.chosen)];
    return bundle_.expert(d.chosen);
}

SearchResult Search::run(const Position& root, const std::atomic<bool>* stop) {
    if (outcome(root) != Outcome::Ongoing) throw TerminalPositionError("search called on a finished game: " + to_fen(root));
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };

    if (cfg_.reuse_tree && tree_) {
        if (auto found = tree_->find_descendant(root); found && tree_->node(*found).expanded)
        {
            tree_ = tree_->subtree(*found);
            tree_->set_root_position(root);
        } else
            tree_.emplace(root);
    } else {
        tree_.emplace(root);
    }
    SearchTree& tree = *tree_;
    SearchResult res;

    int sims = 0;
    if (!tree.node(0).expanded) {
        const Evaluator& expert = pick_expert(std::span<const Position>(&root, 1), res);
        ++res.batches;
        const Evaluation e = expert.evaluate_unchecked(root);
        tree.expand(0, e);
        SearchTree::Selection sel;
        sel.leaf = 0;
        tree.backup(sel, e.value, cfg_.virtual_loss);
        sims = 1;
    }
    if (cfg_.noise) tree.add_dirichlet_noise(rng_, cfg_.dirichlet_alpha, cfg_.dirichlet_epsilon);

    const auto budget_left = [&] {
        if (stop && stop->load(std::memory_order_relaxed)) return 0;
        if (cfg_.nodes) return *cfg_.nodes - sims;
        return elapsed_ms() < *cfg_.movetime_ms ? cfg_.batch_size : 0;
    };

    std::vector<SearchTree::Selection> pending;
    std::vector<Position> leaves;
    while (true) {
        const int want = std::min(cfg_.batch_size, budget_left());
        if (want <= 0) break;
        pending.clear();
        leaves.clear();
        int done = 0;
        for (int i = 0; i < want; ++i) {
            SearchTree::Selection sel = tree.select(cfg_.c_puct, cfg_.virtual_loss);
            if (sel.collision) {
                tree.revert(sel, cfg_.virtual_loss);
                break;
            }
            const auto& leaf = tree.node(sel.leaf);
            if (leaf.terminal) {
                tree.backup(sel, leaf.terminal_value, cfg_.virtual_loss);
                ++done;
                continue;
            }
            leaves.push_back(leaf.pos);
            pending.push_back(std::move(sel));
        }
        if (!leaves.empty()) {
            const Evaluator& expert = pick_expert(leaves, res);
            ++res.batches;
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                const Evaluation e = expert.evaluate_unchecked(leaves[i]);
                tree.expand(pending[i].leaf, e);
                tree.backup(pending[i], e.value, cfg_.virtual_loss);
            }
            done += static_cast<int>(leaves.size());
        }
        sims += done;
    }

    const auto root_edges = tree.edges_of(0);
    res.nodes = tree.node(0).n;
    res.root_value = tree.node(0).q();
    for (const auto& ed : root_edges) {
        res.moves.push_back(ed.move);
        res.visits.push_back(ed.n);
        res.q.push_back(ed.n > 0 ? ed.q() : 0.0);
        res.priors.push_back(ed.prior);
    }

    int best = 0;
    const int ply = (root.fullmove_number() - 1) * 2 + (root.side_to_move() == Color::Black ? 1 : 0);
    if (cfg_.sample_moves && ply < cfg_.temperature_moves && tree.node(0).n > 1) {
        std::vector<double> weights;
        for (int v : res.visits) weights.push_back(std::pow(static_cast<double>(v), 1.0 / cfg_.temperature));
        std::discrete_distribution<int> pick(weights.begin(), weights.end());
        best = pick(rng_);
    } else {
        for (int i = 1; i < static_cast<int>(root_edges.size()); ++i) {
            const auto& a = root_edges[i];
            const auto& b = root_edges[best];
            const double qa = a.n > 0 ? a.q() : -2.0, qb = b.n > 0 ? b.q() : -2.0;
            if (a.n > b.n || (a.n == b.n && (qa > qb || (qa == qb && a.prior > b.prior)))) best = i;
        }
    }
    res.best_move = root_edges[best].move;

    int cur = 0;
    int edge = root_edges.empty() ? -1 : tree.node(0).edge_begin + best;
    while (edge >= 0) {
        res.pv.push_back(tree.edge(edge).move);
        cur = tree.edge(edge).child;
        if (cur < 0 || !tree.node(cur).expanded || tree.node(cur).edge_count == 0) break;
        int next = -1, most = 0;
        for (int e = tree.node(cur).edge_begin; e < tree.node(cur).edge_begin + tree.node(cur).edge_count; ++e)
            if (tree.edge(e).n > most) {
                most = tree.edge(e).n;
                next = e;
            }
        edge = next;
    }
    res.elapsed_ms = elapsed_ms();
    return res;
}

}  // namespace pmcts
