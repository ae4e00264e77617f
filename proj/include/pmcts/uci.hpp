#pragma once

#include <atomic>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "pmcts/experts.hpp"
#include "pmcts/position.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

struct UciOptions {
    int batch_size = 8;
    int nodes = 800;
    int simulations = 0;     // overrides nodes when > 0
    int fixed_movetime = 0;  // milliseconds; 0 searches by node count
    std::string model_directory;
    std::string search_type = "Auto";  // Auto, MCTS or M2CTS
    int first_device_id = 0;           // accepted for compatibility, unused
    int threads = 1;                   // accepted for compatibility, unused
};

/// UCI front end. Commands are fed line by line; `go` runs the search on a
/// worker thread so that `stop` can interrupt it.
class UciEngine {
public:
    UciEngine(std::ostream& out, std::ostream& log);
    ~UciEngine();

    /// Handles one command line. Returns false after `quit`.
    bool handle(const std::string& line);
    /// Blocks until a running search has printed its bestmove.
    void wait();

    const UciOptions& options() const { return opts_; }
    const Position& position() const { return pos_; }

private:
    void send(const std::string& line);
    void set_option(const std::string& name, const std::string& value);
    void set_position(const std::string& args);
    void go(const std::string& args);
    void stop_search();
    void ensure_model();

    std::ostream& out_;
    std::ostream& log_;
    std::mutex out_mutex_;
    UciOptions opts_;
    Position pos_;

    std::optional<ExpertBundle> bundle_;
    bool bundle_is_expert_set_ = false;
    std::string loaded_dir_;
    bool model_dirty_ = true;
    std::unique_ptr<Search> search_;

    std::thread worker_;
    std::atomic<bool> stop_{false};
};

/// Reads commands until `quit` or end of input.
int uci_loop(std::istream& in, std::ostream& out, std::ostream& log);

}  // namespace pmcts
