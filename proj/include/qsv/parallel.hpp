// Copyright 2026 The qsv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
/**
 * @file
 * Distribution of the state vector over s^n_p workers by parallel-bit
 * ownership, the computation/reorganization schedule, and the bulk
 * synchronous executor.
 */

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qsv/circuits.hpp"
#include "qsv/common.hpp"
#include "qsv/gates.hpp"
#include "qsv/statevec.hpp"

namespace qsv {

/// Parallel bits in concatenation order, most significant first.
struct PartitionPlan {
    Radix radix{2};
    std::vector<int> parallel_bits;

    [[nodiscard]] int n_p() const { return static_cast<int>(parallel_bits.size()); }
    [[nodiscard]] Index worker_count() const {
        return ipow(static_cast<Index>(radix.value()), n_p());
    }
    /// Throws unless the bits are distinct link-level sites.
    void validate(const LevelSpec &spec, int num_sites) const;
    /// Digit requirements selecting the states owned by `worker`.
    [[nodiscard]] Condition restriction(Index worker) const;
    friend bool operator==(const PartitionPlan &, const PartitionPlan &) = default;
};

Index owner_of(Index index, const PartitionPlan &plan);
/// Owner of a value block; parallel bits are link sites, so all states of a
/// block share one owner.
Index owner_of_block(Index block_id, const PartitionPlan &plan, int state_bits);

struct Step {
    std::size_t first = 0; // gate index range [first, last)
    std::size_t last = 0;
    PartitionPlan plan;
    int n_c = 0;
};

struct StepPlan {
    int n_p = 0;
    std::vector<Step> steps;

    /// Every step boundary is a reorganization, the initial scatter included.
    [[nodiscard]] std::size_t reorganizations() const { return steps.size(); }
};

/**
 * Greedy schedule. At each step boundary the new set consists of link bits
 * that the next gate does not touch, preferring previously used bits, with
 * the latest next use (ties keep bits of the old set). When too few used
 * bits are free, unused link bits fill the set and count as used from then
 * on. Measure ops touch nothing.
 */
StepPlan plan_steps(const Circuit &c, int n_p, const LevelSpec &spec);

/// One value block in flight; a null payload is the absent marker.
struct BlockMessage {
    Index block_id = 0;
    std::unique_ptr<StateVector::Block> payload;
    [[nodiscard]] bool absent() const { return payload == nullptr; }
};

/// Number of host threads: QSV_THREADS when set, else the hardware count.
std::size_t host_threads();

/// Fixed set of threads running fork-join supersteps; the calling thread
/// takes part. Each superstep ends with an implicit barrier.
class WorkerPool {
  public:
    explicit WorkerPool(std::size_t threads);
    ~WorkerPool();
    WorkerPool(const WorkerPool &) = delete;
    WorkerPool &operator=(const WorkerPool &) = delete;

    /// Runs fn(0..tasks-1) and returns after all calls finished. The first
    /// exception thrown by a task is rethrown here.
    void run(std::size_t tasks, const std::function<void(std::size_t)> &fn);
    [[nodiscard]] std::size_t threads() const { return helpers_.size() + 1; }

  private:
    void helper_loop();
    void drain();

    std::vector<std::thread> helpers_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    const std::function<void(std::size_t)> *fn_ = nullptr;
    std::size_t tasks_ = 0;
    std::atomic<std::size_t> next_{0};
    std::size_t busy_ = 0;
    std::exception_ptr error_;
};

struct ReorgCounts {
    std::size_t blocks_moved = 0; // payload messages
    std::size_t messages = 0;     // payload and absent-marker messages
    std::uint64_t payload_bytes = 0;
};

/**
 * Moves every block whose owner differs between `old_plan` and `new_plan`
 * from its old owner to its new one through per-worker mailboxes. Absent
 * slots of the replicated skeleton travel as absent markers. Throws
 * TransportError on a lost, duplicated or misrouted block.
 */
ReorgCounts reorganize(std::vector<StateVector> &views,
                       const PartitionPlan &old_plan,
                       const PartitionPlan &new_plan, WorkerPool &pool);

/// Broadcasts the link paths of every allocated block to all workers.
void replicate_skeleton(std::vector<StateVector> &views, WorkerPool &pool);

struct RunStats {
    int n_p = 0;
    std::size_t workers = 1;
    std::size_t threads = 1;
    std::size_t reorg_steps = 0;
    std::size_t blocks_moved = 0;
    std::size_t messages = 0;
    std::uint64_t payload_bytes = 0;
    std::uint64_t laser_ops = 0;
    std::uint64_t transformations = 0;
    double compute_seconds = 0.0; // amplitude arithmetic
    double link_seconds = 0.0;    // link-structure traversal (estimated)
    double comm_seconds = 0.0;    // reorganization and reductions
    double total_seconds = 0.0;
    std::uint64_t link_nodes_visited = 0;
    std::uint64_t amplitude_updates = 0;
    std::vector<std::vector<int>> parallel_sets;
    std::vector<int> n_c;
};

nlohmann::json to_json(const RunStats &stats, bool with_timing = true);

struct RunResult {
    StateVector state;
    RunStats stats;
    std::vector<double> decoherence_sums;
};

/// Runs every non-measure op of `c` from |0...0> in one thread.
RunResult run_sequential(const Circuit &c, const LevelSpec &spec,
                         const ErrorModel &err, bool record_sums = false);

/// Runs `c` on s^n_p workers and gathers the result. `threads` = 0 means
/// min(workers, host_threads()).
RunResult run_parallel(const Circuit &c, int n_p, const LevelSpec &spec,
                       const ErrorModel &err, std::size_t threads = 0,
                       bool record_sums = false);

} // namespace qsv
