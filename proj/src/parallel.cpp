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

#include "qsv/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>

namespace qsv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Relative cost of one link-node visit against one amplitude update, used to
// split measured kernel time into traversal and arithmetic.
constexpr double kLinkVisitWeight = 4.0;
constexpr double kAmplitudeWeight = 1.0;

void split_compute_time(RunStats &st, double kernel_seconds) {
    const double link = static_cast<double>(st.link_nodes_visited) * kLinkVisitWeight;
    const double amp = static_cast<double>(st.amplitude_updates) * kAmplitudeWeight;
    const double frac = link + amp > 0.0 ? link / (link + amp) : 0.0;
    st.link_seconds = kernel_seconds * frac;
    st.compute_seconds = kernel_seconds - st.link_seconds;
}

struct Mailbox {
    std::mutex mutex;
    std::vector<BlockMessage> inbox;
};

} // namespace

void PartitionPlan::validate(const LevelSpec &spec, int num_sites) const {
    std::vector<int> sorted = parallel_bits;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("parallel bits must be distinct");
    }
    for (int b : parallel_bits) {
        if (b < spec.state_bits || b >= num_sites) {
            throw std::invalid_argument("parallel bit " + std::to_string(b) +
                                        " is not a link-level site");
        }
    }
}

Condition PartitionPlan::restriction(Index worker) const {
    if (worker >= worker_count()) {
        throw std::out_of_range("worker id out of range");
    }
    Condition out(parallel_bits.size());
    const auto sv = static_cast<Index>(radix.value());
    for (std::size_t k = parallel_bits.size(); k-- > 0;) {
        out[k] = {parallel_bits[k], static_cast<int>(worker % sv)};
        worker /= sv;
    }
    return out;
}

Index owner_of(Index index, const PartitionPlan &plan) {
    Index id = 0;
    for (int b : plan.parallel_bits) {
        id = id * static_cast<Index>(plan.radix.value()) +
             static_cast<Index>(digit_of(index, b, plan.radix));
    }
    return id;
}

Index owner_of_block(Index block_id, const PartitionPlan &plan, int state_bits) {
    Index id = 0;
    for (int b : plan.parallel_bits) {
        id = id * static_cast<Index>(plan.radix.value()) +
             static_cast<Index>(digit_of(block_id, b - state_bits, plan.radix));
    }
    return id;
}

StepPlan plan_steps(const Circuit &c, int n_p, const LevelSpec &spec) {
    spec.validate(c.num_sites);
    const int link_bits = spec.link_bits();
    if (n_p < 0 || n_p > link_bits) {
        throw std::invalid_argument("n_p = " + std::to_string(n_p) +
                                    " exceeds the " + std::to_string(link_bits) +
                                    " link bits");
    }
    const std::size_t n = c.ops.size();
    const auto M = static_cast<std::size_t>(c.num_sites);
    std::vector<std::vector<int>> touch(n);
    std::vector<std::vector<std::size_t>> occ(M);
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_measure(c.ops[i])) {
            touch[i] = gate_sites(c.ops[i]);
        }
        for (int s : touch[i]) {
            occ[static_cast<std::size_t>(s)].push_back(i);
        }
    }
    auto next_use = [&](int site, std::size_t pos) {
        const auto &o = occ[static_cast<std::size_t>(site)];
        const auto it = std::lower_bound(o.begin(), o.end(), pos);
        return it == o.end() ? n : *it;
    };

    StepPlan plan;
    plan.n_p = n_p;
    std::vector<bool> used(M, false);
    std::vector<int> old_bits;
    std::size_t pos = 0;
    do {
        std::vector<int> fresh;
        std::vector<int> prev;
        for (int site = spec.state_bits; site < c.num_sites; ++site) {
            if (pos < n && std::find(touch[pos].begin(), touch[pos].end(), site) !=
                               touch[pos].end()) {
                continue;
            }
            (used[static_cast<std::size_t>(site)] ? prev : fresh).push_back(site);
        }
        if (prev.size() + fresh.size() < static_cast<std::size_t>(n_p)) {
            throw std::invalid_argument(
                "only " + std::to_string(prev.size() + fresh.size()) +
                " link bits are free at gate " + std::to_string(pos) +
                "; cannot hold " + std::to_string(n_p) + " parallel bits");
        }
        auto in_old = [&](int site) {
            return std::find(old_bits.begin(), old_bits.end(), site) != old_bits.end();
        };
        auto by_next_use = [&](std::vector<int> &v) {
            std::stable_sort(v.begin(), v.end(), [&](int a, int b) {
                const auto na = next_use(a, pos), nb = next_use(b, pos);
                if (na != nb) {
                    return na > nb;
                }
                return in_old(a) && !in_old(b);
            });
        };
        by_next_use(prev);
        std::vector<int> chosen;
        if (prev.size() >= static_cast<std::size_t>(n_p) && n_p > 0) {
            // Any bit at least as late as the n_p-th best keeps the same run
            // length; among those, retain old bits to limit n_c.
            const std::size_t cut = next_use(prev[static_cast<std::size_t>(n_p) - 1], pos);
            std::vector<int> eligible;
            for (int s : prev) {
                if (next_use(s, pos) >= cut) {
                    eligible.push_back(s);
                }
            }
            std::stable_partition(eligible.begin(), eligible.end(), in_old);
            chosen.assign(eligible.begin(), eligible.begin() + n_p);
        } else {
            chosen = prev;
            by_next_use(fresh);
            for (std::size_t k = 0; chosen.size() < static_cast<std::size_t>(n_p); ++k) {
                chosen.push_back(fresh[k]);
                used[static_cast<std::size_t>(fresh[k])] = true;
            }
        }
        // Retained bits keep their concatenation position so only blocks
        // that differ in a new bit change owner.
        std::vector<int> ordered(static_cast<std::size_t>(n_p), -1);
        std::vector<int> incoming;
        int n_c = 0;
        for (int s : chosen) {
            const auto it = std::find(old_bits.begin(), old_bits.end(), s);
            if (it != old_bits.end() && plan.steps.size() > 0) {
                ordered[static_cast<std::size_t>(it - old_bits.begin())] = s;
            } else {
                incoming.push_back(s);
                ++n_c;
            }
        }
        std::sort(incoming.begin(), incoming.end(), std::greater<>());
        auto inc = incoming.begin();
        for (auto &slot : ordered) {
            if (slot < 0) {
                slot = *inc++;
            }
        }
        std::size_t end = n;
        for (int s : ordered) {
            end = std::min(end, next_use(s, pos));
        }
        for (std::size_t i = pos; i < end; ++i) {
            for (int s : touch[i]) {
                used[static_cast<std::size_t>(s)] = true;
            }
        }
        plan.steps.push_back({pos, end, PartitionPlan{c.radix, ordered}, n_c});
        old_bits = ordered;
        pos = end;
    } while (pos < n);
    return plan;
}

std::size_t host_threads() {
    if (const char *env = std::getenv("QSV_THREADS")) {
        std::size_t v = 0;
        const auto *end = env + std::strlen(env);
        const auto [p, ec] = std::from_chars(env, end, v);
        if (ec == std::errc() && p == end && v > 0) {
            return v;
        }
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

WorkerPool::WorkerPool(std::size_t threads) {
    threads = std::max<std::size_t>(threads, 1);
    for (std::size_t i = 1; i < threads; ++i) {
        helpers_.emplace_back([this] { helper_loop(); });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lk(mutex_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto &t : helpers_) {
        t.join();
    }
}

void WorkerPool::run(std::size_t tasks, const std::function<void(std::size_t)> &fn) {
    if (tasks == 0) {
        return;
    }
    if (helpers_.empty() || tasks == 1) {
        for (std::size_t i = 0; i < tasks; ++i) {
            fn(i);
        }
        return;
    }
    {
        std::lock_guard lk(mutex_);
        fn_ = &fn;
        tasks_ = tasks;
        next_.store(0);
        busy_ = helpers_.size();
        error_ = nullptr;
        ++generation_;
    }
    wake_.notify_all();
    drain();
    std::exception_ptr err;
    {
        std::unique_lock lk(mutex_);
        done_.wait(lk, [this] { return busy_ == 0; });
        fn_ = nullptr;
        err = std::exchange(error_, nullptr);
    }
    if (err) {
        std::rethrow_exception(err);
    }
}

void WorkerPool::helper_loop() {
    std::uint64_t seen = 0;
    for (;;) {
        std::unique_lock lk(mutex_);
        wake_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) {
            return;
        }
        seen = generation_;
        lk.unlock();
        drain();
        lk.lock();
        if (--busy_ == 0) {
            done_.notify_all();
        }
    }
}

void WorkerPool::drain() {
    for (;;) {
        const std::size_t i = next_.fetch_add(1);
        if (i >= tasks_) {
            return;
        }
        try {
            (*fn_)(i);
        } catch (...) {
            std::lock_guard lk(mutex_);
            if (!error_) {
                error_ = std::current_exception();
            }
        }
    }
}

void replicate_skeleton(std::vector<StateVector> &views, WorkerPool &pool) {
    const std::size_t W = views.size();
    if (W < 2) {
        return;
    }
    std::vector<std::vector<Index>> ids(W);
    pool.run(W, [&](std::size_t w) { ids[w] = views[w].allocated_block_ids(); });
    pool.run(W, [&](std::size_t w) {
        for (std::size_t src = 0; src < W; ++src) {
            if (src != w) {
                for (Index id : ids[src]) {
                    views[w].ensure_link_path(id);
                }
            }
        }
    });
}

ReorgCounts reorganize(std::vector<StateVector> &views,
                       const PartitionPlan &old_plan,
                       const PartitionPlan &new_plan, WorkerPool &pool) {
    const std::size_t W = views.size();
    if (W == 0 || old_plan.worker_count() > W || new_plan.worker_count() > W) {
        throw std::invalid_argument("reorganize: not enough worker views");
    }
    if (old_plan == new_plan) {
        return {};
    }
    const int sb = views[0].level_spec().state_bits;
    std::vector<Mailbox> boxes(W);
    std::vector<std::vector<std::size_t>> sent(W, std::vector<std::size_t>(W, 0));
    std::vector<ReorgCounts> per(W);

    // Superstep 1: every block changing owner leaves its old owner.
    pool.run(W, [&](std::size_t w) {
        auto &v = views[w];
        for (Index id : v.skeleton_block_ids()) {
            const bool have = v.has_block(id);
            if (owner_of_block(id, old_plan, sb) != w) {
                if (have) {
                    throw TransportError("worker " + std::to_string(w) +
                                         " holds block " + std::to_string(id) +
                                         " it does not own");
                }
                continue;
            }
            const Index to = owner_of_block(id, new_plan, sb);
            if (to == w) {
                continue;
            }
            BlockMessage msg{id, v.take_block(id)};
            ++per[w].messages;
            if (!msg.absent()) {
                ++per[w].blocks_moved;
                per[w].payload_bytes += static_cast<std::uint64_t>(msg.payload->size()) *
                                        sizeof(StateVector::Complex);
            }
            ++sent[w][to];
            std::lock_guard lk(boxes[to].mutex);
            boxes[to].inbox.push_back(std::move(msg));
        }
    });
    // Superstep 2: after the barrier each worker installs what it received.
    pool.run(W, [&](std::size_t w) {
        std::size_t expected = 0;
        for (std::size_t src = 0; src < W; ++src) {
            expected += sent[src][w];
        }
        auto &inbox = boxes[w].inbox;
        if (inbox.size() != expected) {
            throw TransportError("worker " + std::to_string(w) + " expected " +
                                 std::to_string(expected) + " messages, got " +
                                 std::to_string(inbox.size()));
        }
        for (auto &msg : inbox) {
            if (owner_of_block(msg.block_id, new_plan, sb) != w) {
                throw TransportError("block " + std::to_string(msg.block_id) +
                                     " delivered to the wrong worker");
            }
            if (views[w].has_block(msg.block_id)) {
                throw TransportError("block " + std::to_string(msg.block_id) +
                                     " delivered twice");
            }
            if (msg.absent()) {
                views[w].ensure_link_path(msg.block_id);
            } else {
                views[w].install_block(msg.block_id, std::move(msg.payload));
            }
        }
        inbox.clear();
    });
    ReorgCounts total;
    for (const auto &p : per) {
        total.blocks_moved += p.blocks_moved;
        total.messages += p.messages;
        total.payload_bytes += p.payload_bytes;
    }
    return total;
}

nlohmann::json to_json(const RunStats &st, bool with_timing) {
    nlohmann::json j = {
        {"n_p", st.n_p},
        {"workers", st.workers},
        {"reorg_steps", st.reorg_steps},
        {"blocks_moved", st.blocks_moved},
        {"messages", st.messages},
        {"payload_bytes", st.payload_bytes},
        {"laser_ops", st.laser_ops},
        {"transformations", st.transformations},
        {"link_nodes_visited", st.link_nodes_visited},
        {"amplitude_updates", st.amplitude_updates},
        {"parallel_sets", st.parallel_sets},
        {"n_c", st.n_c},
    };
    if (with_timing) {
        j["threads"] = st.threads;
        j["timing"] = {
            {"compute_seconds", st.compute_seconds},
            {"link_seconds", st.link_seconds},
            {"comm_seconds", st.comm_seconds},
            {"total_seconds", st.total_seconds},
        };
    }
    return j;
}

RunResult run_sequential(const Circuit &c, const LevelSpec &spec,
                         const ErrorModel &err, bool record_sums) {
    c.validate();
    err.validate();
    const auto t_start = Clock::now();
    StateVector v = StateVector::basis(c.radix, c.num_sites, spec, 0);
    ExecutionContext ctx;
    ctx.err = err;
    ctx.record_sums = record_sums;
    for (const auto &g : c.ops) {
        if (!is_measure(g)) {
            apply_gate(v, g, ctx);
        }
    }
    RunStats st;
    st.laser_ops = ctx.ordinal;
    st.transformations = ctx.transformations;
    st.link_nodes_visited = v.counters().link_nodes_visited;
    st.amplitude_updates = v.counters().amplitude_updates;
    st.total_seconds = seconds_since(t_start);
    split_compute_time(st, st.total_seconds);
    return {std::move(v), st, std::move(ctx.decoherence_sums)};
}

RunResult run_parallel(const Circuit &c, int n_p, const LevelSpec &spec,
                       const ErrorModel &err, std::size_t threads,
                       bool record_sums) {
    c.validate();
    err.validate();
    const auto t_start = Clock::now();
    const StepPlan plan = plan_steps(c, n_p, spec);
    const Radix s = c.radix;
    const auto W = static_cast<std::size_t>(ipow(static_cast<Index>(s.value()), n_p));
    WorkerPool pool(threads > 0 ? threads : std::min(W, host_threads()));

    std::vector<StateVector> views;
    views.reserve(W);
    for (std::size_t w = 0; w < W; ++w) {
        views.emplace_back(s, c.num_sites, spec);
    }
    views[0].set_amplitude(0, 1.0);

    RunStats st;
    st.n_p = n_p;
    st.workers = W;
    st.threads = pool.threads();
    st.reorg_steps = plan.reorganizations();
    std::vector<double> sums;
    double kernel = 0.0;
    const double rate = err.decoherence_rate;
    std::vector<double> partial(W, 0.0);
    std::uint64_t ordinal = 0;
    PartitionPlan current{s, {}};

    for (const Step &step : plan.steps) {
        step.plan.validate(spec, c.num_sites);
        auto t0 = Clock::now();
        replicate_skeleton(views, pool);
        const ReorgCounts rc = reorganize(views, current, step.plan, pool);
        st.comm_seconds += seconds_since(t0);
        st.blocks_moved += rc.blocks_moved;
        st.messages += rc.messages;
        st.payload_bytes += rc.payload_bytes;
        current = step.plan;
        st.parallel_sets.push_back(step.plan.parallel_bits);
        st.n_c.push_back(step.n_c);

        std::vector<LaserOp> lasers;
        std::vector<double> errors;
        std::vector<std::uint64_t> ordinals;
        for (std::size_t i = step.first; i < step.last; ++i) {
            const GateOp &g = c.ops[i];
            if (is_measure(g)) {
                continue;
            }
            for (int site : gate_sites(g)) {
                if (std::find(step.plan.parallel_bits.begin(),
                              step.plan.parallel_bits.end(),
                              site) != step.plan.parallel_bits.end()) {
                    throw PlanViolation("gate " + std::to_string(i) + " (" +
                                        to_string(g) + ") touches parallel bit " +
                                        std::to_string(site));
                }
            }
            for (auto &op : expand_to_lasers(g, s)) {
                errors.push_back(angle_error(err, ordinal, op.site));
                ordinals.push_back(ordinal++);
                lasers.push_back(std::move(op));
            }
        }
        std::vector<Condition> restrict(W);
        for (std::size_t w = 0; w < W; ++w) {
            restrict[w] = step.plan.restriction(w);
        }

        if (rate == 0.0) {
            t0 = Clock::now();
            pool.run(W, [&](std::size_t w) {
                for (std::size_t k = 0; k < lasers.size(); ++k) {
                    apply_laser(views[w], lasers[k], errors[k], restrict[w]);
                }
            });
            kernel += seconds_since(t0);
            st.transformations += lasers.size();
        } else {
            for (std::size_t k = 0; k < lasers.size(); ++k) {
                const int site = decoherence_site(err, ordinals[k], c.num_sites);
                t0 = Clock::now();
                pool.run(W, [&](std::size_t w) {
                    apply_laser(views[w], lasers[k], errors[k], restrict[w]);
                    damp_site(views[w], site, rate, restrict[w]);
                    partial[w] = views[w].norm_sq();
                });
                kernel += seconds_since(t0);
                // All-reduce of the survival sum.
                t0 = Clock::now();
                double sum = 0.0;
                for (double p : partial) {
                    sum += p;
                }
                if (sum < 1e-300) {
                    throw std::domain_error("decoherence: state vanished");
                }
                st.comm_seconds += seconds_since(t0);
                if (record_sums) {
                    sums.push_back(sum);
                }
                const double scale = 1.0 / std::sqrt(sum);
                t0 = Clock::now();
                pool.run(W, [&](std::size_t w) { views[w].scale_all(scale); });
                kernel += seconds_since(t0);
                st.transformations += 3;
            }
        }
    }
    st.laser_ops = ordinal;

    auto t0 = Clock::now();
    StateVector out(s, c.num_sites, spec);
    for (auto &v : views) {
        st.link_nodes_visited += v.counters().link_nodes_visited;
        st.amplitude_updates += v.counters().amplitude_updates;
        for (Index id : v.allocated_block_ids()) {
            if (out.has_block(id)) {
                throw TransportError("block " + std::to_string(id) +
                                     " held by two workers at gather");
            }
            out.install_block(id, v.take_block(id));
        }
    }
    st.comm_seconds += seconds_since(t0);
    split_compute_time(st, kernel);
    st.total_seconds = seconds_since(t_start);
    return {std::move(out), st, std::move(sums)};
}

} // namespace qsv
