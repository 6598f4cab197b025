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
 * Hierarchical, lazily allocated state vector over s^M basis states.
 *
 * The most significant base-s digits of a state index select slots in the
 * link levels (top level first); the `state_bits` least significant digits
 * index into a value block of s^state_bits amplitudes. An absent slot stands
 * for a sub-tree of zero amplitudes. A configuration with no link levels is
 * the flat vector.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qsv/common.hpp"

namespace qsv {

/// Bit counts of the link levels (top-down) and of the value level.
struct LevelSpec {
    std::vector<int> link_levels;
    int state_bits = 1;

    [[nodiscard]] int link_bits() const {
        return std::accumulate(link_levels.begin(), link_levels.end(), 0);
    }
    [[nodiscard]] int total_bits() const { return link_bits() + state_bits; }

    void validate(int num_sites) const {
        if (state_bits < 1) {
            throw std::invalid_argument("LevelSpec: state_bits must be >= 1");
        }
        for (int b : link_levels) {
            if (b < 1) {
                throw std::invalid_argument(
                    "LevelSpec: every link level must cover >= 1 bit");
            }
        }
        if (total_bits() != num_sites) {
            throw std::invalid_argument(
                "LevelSpec: link bits + state bits = " +
                std::to_string(total_bits()) + " but M = " +
                std::to_string(num_sites));
        }
    }

    static LevelSpec flat(int num_sites) { return LevelSpec{{}, num_sites}; }

    /// `link_bits` bits split into levels of `bits_per_level` (the last level
    /// takes the remainder); the rest form the value level.
    static LevelSpec with_link_bits(int num_sites, int link_bits,
                                    int bits_per_level = 1) {
        if (link_bits < 0 || link_bits >= num_sites || bits_per_level < 1) {
            throw std::invalid_argument(
                "LevelSpec: need 0 <= link_bits < M and bits_per_level >= 1");
        }
        LevelSpec spec{{}, num_sites - link_bits};
        for (int left = link_bits; left > 0; left -= bits_per_level) {
            spec.link_levels.push_back(std::min(left, bits_per_level));
        }
        return spec;
    }

    friend bool operator==(const LevelSpec &, const LevelSpec &) = default;
};

template <typename Scalar>
using PairUnitary = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

template <typename Scalar> constexpr Scalar unitarity_tolerance() {
    if constexpr (std::is_same_v<Scalar, float>) {
        return Scalar(1e-5);
    } else {
        return Scalar(1e-12);
    }
}

/// Frobenius distance of u u^dagger from the identity.
template <typename Scalar>
Scalar unitarity_defect(const PairUnitary<Scalar> &u) {
    return (u * u.adjoint() - PairUnitary<Scalar>::Identity()).norm();
}

template <typename Scalar>
bool is_unitary(const PairUnitary<Scalar> &u,
                Scalar tol = unitarity_tolerance<Scalar>()) {
    return unitarity_defect(u) <= tol;
}

/// Work done by mutating traversals; feeds the link/compute breakdown.
struct TraversalCounters {
    std::uint64_t link_nodes_visited = 0;
    std::uint64_t amplitude_updates = 0;
};

template <typename Scalar = double> class HierarchicalStateVector {
  public:
    using Complex = std::complex<Scalar>;
    using Block = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
    using Matrix2 = PairUnitary<Scalar>;

    HierarchicalStateVector(Radix s, int num_sites, LevelSpec spec)
        : s_(s), num_sites_(num_sites), spec_(std::move(spec)) {
        if (num_sites < 1) {
            throw std::invalid_argument("state vector needs M >= 1");
        }
        spec_.validate(num_sites);
        dimension_ = ipow(static_cast<Index>(s.value()), num_sites);
        pow_.resize(static_cast<std::size_t>(num_sites) + 1);
        for (int k = 0; k <= num_sites; ++k) {
            pow_[static_cast<std::size_t>(k)] =
                ipow(static_cast<Index>(s.value()), k);
        }
        block_size_ = pow_[static_cast<std::size_t>(spec_.state_bits)];

        int hi = num_sites;
        for (int bits : spec_.link_levels) {
            hi -= bits;
            levels_.push_back(
                {bits, hi, pow_[static_cast<std::size_t>(bits)],
                 pow_[static_cast<std::size_t>(hi - spec_.state_bits)]});
        }
        if (levels_.empty()) {
            // Flat vector: a single pseudo link level with one slot.
            levels_.push_back({0, spec_.state_bits, 1, 1});
        }
        site_level_.assign(static_cast<std::size_t>(num_sites), -1);
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            for (int b = 0; b < levels_[l].bits; ++b) {
                site_level_[static_cast<std::size_t>(levels_[l].lo + b)] =
                    static_cast<int>(l);
            }
        }
        root_ = make_link(0);
    }

    HierarchicalStateVector(const HierarchicalStateVector &other)
        : s_(other.s_), num_sites_(other.num_sites_), spec_(other.spec_),
          dimension_(other.dimension_), block_size_(other.block_size_),
          pow_(other.pow_), levels_(other.levels_),
          site_level_(other.site_level_),
          root_(clone(*other.root_, 0)), counters_(other.counters_) {}

    HierarchicalStateVector &operator=(const HierarchicalStateVector &other) {
        if (this != &other) {
            *this = HierarchicalStateVector(other);
        }
        return *this;
    }
    HierarchicalStateVector(HierarchicalStateVector &&) noexcept = default;
    HierarchicalStateVector &
    operator=(HierarchicalStateVector &&) noexcept = default;
    ~HierarchicalStateVector() = default;

    /// Amplitude 1 at `index`; only the blocks on its path are allocated.
    static HierarchicalStateVector basis(Radix s, int num_sites,
                                         LevelSpec spec, Index index) {
        HierarchicalStateVector v(s, num_sites, std::move(spec));
        v.set_amplitude(index, Complex(1));
        return v;
    }

    [[nodiscard]] Radix radix() const { return s_; }
    [[nodiscard]] int num_sites() const { return num_sites_; }
    [[nodiscard]] const LevelSpec &level_spec() const { return spec_; }
    [[nodiscard]] Index dimension() const { return dimension_; }
    [[nodiscard]] Index block_size() const { return block_size_; }
    [[nodiscard]] Index num_block_ids() const { return dimension_ / block_size_; }
    [[nodiscard]] Index block_id_of(Index index) const {
        return index / block_size_;
    }
    [[nodiscard]] bool is_link_site(int site) const {
        check_site(site);
        return site >= spec_.state_bits;
    }
    [[nodiscard]] const TraversalCounters &counters() const { return counters_; }
    void reset_counters() { counters_ = {}; }

    /// Never allocates; an absent path reads as zero.
    [[nodiscard]] Complex amplitude(Index index) const {
        check_index(index);
        const Block *b = find_block(block_id_of(index));
        return b ? (*b)[static_cast<Eigen::Index>(index % block_size_)]
                 : Complex(0);
    }

    void set_amplitude(Index index, Complex value) {
        check_index(index);
        block_for(block_id_of(index))[static_cast<Eigen::Index>(
            index % block_size_)] = value;
    }

    /**
     * Replace every pair (p, q) of amplitudes whose indices agree except that
     * digit(site) is `level_i` at p and `level_j` at q, and whose control
     * digits match, with u * [a_p; a_q]. `restrict` limits the update to
     * indices whose listed digits match (used for ownership), without
     * allocating anything outside it.
     */
    void apply_pair_transform(const Matrix2 &u, int site, int level_i,
                              int level_j, const Condition &controls = {},
                              const Condition &restrict = {}) {
        if (!is_unitary<Scalar>(u)) {
            throw std::invalid_argument(
                "apply_pair_transform: matrix is not unitary (defect " +
                std::to_string(static_cast<double>(unitarity_defect(u))) +
                ")");
        }
        apply_pair_matrix(u, site, level_i, level_j, controls, restrict);
    }

    /// Same as apply_pair_transform without the unitarity check.
    void apply_pair_matrix(const Matrix2 &u, int site, int level_i,
                           int level_j, const Condition &controls = {},
                           const Condition &restrict = {}) {
        check_site(site);
        if (level_i == level_j || level_i < 0 || level_j < 0 ||
            level_i >= s_.value() || level_j >= s_.value()) {
            throw std::invalid_argument(
                "apply_pair_transform: invalid level pair");
        }
        Filter f = make_filter(controls, restrict, site);
        if (f.empty_set) {
            return;
        }
        const auto allowed = allowed_slots(f, -1);
        const ValueFilter vf = value_filter(f);
        const int tl = site_level_[static_cast<std::size_t>(site)];
        if (tl < 0) {
            const Index stride = pow_[static_cast<std::size_t>(site)];
            visit(*root_, 0, 0, allowed, [&](Block &b, Index) {
                pair_in_block(b, u, stride, level_i, level_j, vf);
            });
            return;
        }
        const auto &lg = levels_[static_cast<std::size_t>(tl)];
        const auto pairs = slot_pairs(f, tl, site - lg.lo, level_i, level_j);
        descend_to(*root_, 0, static_cast<std::size_t>(tl), allowed,
                   [&](LinkNode &node) {
                       for (const auto &[a, b] : pairs) {
                           pair_slots(node, static_cast<std::size_t>(tl), a,
                                      b, allowed, u, vf);
                       }
                   });
    }

    /// Multiply every amplitude whose digit(site) is d by factors[d].
    void scale_levels(int site, std::span<const Scalar> factors,
                      const Condition &restrict = {}) {
        check_site(site);
        if (static_cast<int>(factors.size()) != s_.value()) {
            throw std::invalid_argument("scale_levels: need one factor per level");
        }
        Filter f = make_filter({}, restrict, -1);
        if (f.empty_set) {
            return;
        }
        const ValueFilter vf = value_filter(f);
        const int tl = site_level_[static_cast<std::size_t>(site)];
        if (tl < 0) {
            const auto allowed = allowed_slots(f, -1);
            const Index stride = pow_[static_cast<std::size_t>(site)];
            visit(*root_, 0, 0, allowed, [&](Block &b, Index) {
                for (Index off = 0; off < block_size_; ++off) {
                    if (vf.ok(off)) {
                        b[static_cast<Eigen::Index>(off)] *=
                            factors[static_cast<std::size_t>(
                                (off / stride) % static_cast<Index>(s_.value()))];
                    }
                }
                counters_.amplitude_updates += block_size_;
            });
            return;
        }
        // Target on a link level: scale whole sub-trees per slot digit.
        for (int d = 0; d < s_.value(); ++d) {
            if (factors[static_cast<std::size_t>(d)] == Scalar(1)) {
                continue;
            }
            Filter fd = f;
            if (fd.req[static_cast<std::size_t>(site)] >= 0 &&
                fd.req[static_cast<std::size_t>(site)] != d) {
                continue;
            }
            fd.req[static_cast<std::size_t>(site)] = d;
            const auto allowed = allowed_slots(fd, -1);
            const Scalar factor = factors[static_cast<std::size_t>(d)];
            visit(*root_, 0, 0, allowed, [&](Block &b, Index) {
                for (Index off = 0; off < block_size_; ++off) {
                    if (vf.ok(off)) {
                        b[static_cast<Eigen::Index>(off)] *= factor;
                    }
                }
                counters_.amplitude_updates += block_size_;
            });
        }
    }

    void scale_all(Scalar factor) {
        for_each_block([&](Block &b, Index) { b *= factor; });
    }

    /// Sum of |a_i|^2 over allocated blocks.
    [[nodiscard]] Scalar norm_sq() const {
        Scalar total = 0;
        for_each_block([&](const Block &b, Index) { total += b.squaredNorm(); });
        return total;
    }

    /// Probability of each outcome of `sites`; the outcome value is
    /// sum_k digit(sites[k]) * s^k. Zero-probability outcomes are omitted.
    [[nodiscard]] std::map<Index, Scalar>
    outcome_probabilities(std::span<const int> sites) const {
        check_distinct(sites);
        std::map<Index, Scalar> probs;
        for_each_amplitude([&](Index index, const Complex &a) {
            const Scalar p = std::norm(a);
            if (p != Scalar(0)) {
                probs[outcome_of(index, sites)] += p;
            }
        });
        return probs;
    }

    /// Samples an outcome for `sites`, zeroes the non-matching amplitudes
    /// and renormalizes. Returns the digit of each site.
    template <typename URBG>
    std::vector<int> measure_register(std::span<const int> sites, URBG &rng) {
        const auto probs = outcome_probabilities(sites);
        Scalar total = 0;
        for (const auto &[o, p] : probs) {
            total += p;
        }
        if (total < Scalar(1e-12)) {
            throw std::domain_error("measure_register: degenerate state");
        }
        std::uniform_real_distribution<double> uni(0.0, static_cast<double>(total));
        const double r = uni(rng);
        double acc = 0.0;
        Index chosen = probs.rbegin()->first;
        for (const auto &[o, p] : probs) {
            acc += static_cast<double>(p);
            if (r < acc) {
                chosen = o;
                break;
            }
        }
        collapse(sites, chosen);
        std::vector<int> digits(sites.size());
        Index rest = chosen;
        for (auto &d : digits) {
            d = static_cast<int>(rest % static_cast<Index>(s_.value()));
            rest /= static_cast<Index>(s_.value());
        }
        return digits;
    }

    /// Projects onto `outcome` of `sites` and renormalizes.
    void collapse(std::span<const int> sites, Index outcome) {
        check_distinct(sites);
        Scalar kept = 0;
        for_each_block([&](Block &b, Index id) {
            for (Index off = 0; off < block_size_; ++off) {
                auto &a = b[static_cast<Eigen::Index>(off)];
                if (outcome_of(id * block_size_ + off, sites) != outcome) {
                    a = Complex(0);
                } else {
                    kept += std::norm(a);
                }
            }
        });
        if (kept < Scalar(1e-12)) {
            throw std::domain_error("collapse: outcome has zero probability");
        }
        scale_all(Scalar(1) / std::sqrt(kept));
    }

    /// Dense copy, zeros where blocks are absent. Limited to 2^26 entries.
    [[nodiscard]] std::vector<Complex> to_dense() const {
        if (dimension_ > (Index{1} << 26)) {
            throw std::length_error("to_dense: more than 2^26 amplitudes");
        }
        std::vector<Complex> out(static_cast<std::size_t>(dimension_));
        for_each_block([&](const Block &b, Index id) {
            std::copy(b.data(), b.data() + b.size(),
                      out.begin() + static_cast<std::ptrdiff_t>(id * block_size_));
        });
        return out;
    }

    [[nodiscard]] std::size_t allocated_blocks() const {
        std::size_t n = 0;
        for_each_block([&](const Block &, Index) { ++n; });
        return n;
    }

    [[nodiscard]] std::size_t link_nodes() const { return count_links(*root_, 0); }

    [[nodiscard]] std::vector<Index> allocated_block_ids() const {
        std::vector<Index> ids;
        for_each_block([&](const Block &, Index id) { ids.push_back(id); });
        return ids;
    }

    /// Block ids of every slot under an allocated bottom link node, whether
    /// or not the value block itself is present (the replicated skeleton).
    [[nodiscard]] std::vector<Index> skeleton_block_ids() const {
        std::vector<Index> ids;
        skeleton_ids(*root_, 0, 0, ids);
        return ids;
    }

    [[nodiscard]] bool has_block(Index block_id) const {
        return find_block(block_id) != nullptr;
    }

    /// Removes a block and returns it (null when absent).
    std::unique_ptr<Block> take_block(Index block_id) {
        auto *slot = find_slot(block_id, false);
        return slot ? std::move(*slot) : nullptr;
    }

    void install_block(Index block_id, std::unique_ptr<Block> block) {
        if (block && block->size() != static_cast<Eigen::Index>(block_size_)) {
            throw std::invalid_argument("install_block: wrong block size");
        }
        *find_slot(block_id, true) = std::move(block);
    }

    /// Allocates the link nodes above `block_id` without the value block.
    void ensure_link_path(Index block_id) { (void)find_slot(block_id, true); }

    template <typename Fn> void for_each_block(Fn &&fn) {
        visit(*root_, 0, 0, all_slots(), fn);
    }
    template <typename Fn> void for_each_block(Fn &&fn) const {
        visit_const(*root_, 0, 0, fn);
    }
    template <typename Fn> void for_each_amplitude(Fn &&fn) const {
        for_each_block([&](const Block &b, Index id) {
            for (Index off = 0; off < block_size_; ++off) {
                fn(id * block_size_ + off, b[static_cast<Eigen::Index>(off)]);
            }
        });
    }

  private:
    struct LinkNode {
        std::vector<std::unique_ptr<LinkNode>> links;
        std::vector<std::unique_ptr<Block>> blocks;
    };
    struct LevelGeom {
        int bits;
        int lo;          // lowest site covered
        Index slots;     // s^bits
        Index id_weight; // contribution of slot 1 to the block id
    };
    struct Filter {
        std::vector<int> req; // required digit per site, -1 = free
        bool empty_set = false;
    };
    struct ValueFilter {
        bool radix2 = true;
        Index mask = 0;
        Index want = 0;
        std::vector<std::pair<Index, int>> conds;
        [[nodiscard]] bool trivial() const {
            return radix2 ? mask == 0 : conds.empty();
        }
        [[nodiscard]] bool ok(Index off) const {
            if (radix2) {
                return (off & mask) == want;
            }
            for (const auto &[p, d] : conds) {
                if (static_cast<int>((off / p) % 3) != d) {
                    return false;
                }
            }
            return true;
        }
    };
    using Allowed = std::vector<std::vector<Index>>;

    void check_site(int site) const {
        if (site < 0 || site >= num_sites_) {
            throw std::out_of_range("site " + std::to_string(site) +
                                    " outside [0, " +
                                    std::to_string(num_sites_) + ")");
        }
    }
    void check_index(Index index) const {
        if (index >= dimension_) {
            throw std::out_of_range("state index " + std::to_string(index) +
                                    " >= s^M = " + std::to_string(dimension_));
        }
    }
    void check_distinct(std::span<const int> sites) const {
        for (std::size_t a = 0; a < sites.size(); ++a) {
            check_site(sites[a]);
            for (std::size_t b = a + 1; b < sites.size(); ++b) {
                if (sites[a] == sites[b]) {
                    throw std::invalid_argument("duplicate site in register");
                }
            }
        }
    }

    [[nodiscard]] Index outcome_of(Index index, std::span<const int> sites) const {
        Index out = 0;
        const auto sv = static_cast<Index>(s_.value());
        for (std::size_t k = sites.size(); k-- > 0;) {
            out = out * sv +
                  (index / pow_[static_cast<std::size_t>(sites[k])]) % sv;
        }
        return out;
    }

    std::unique_ptr<LinkNode> make_link(std::size_t level) const {
        auto node = std::make_unique<LinkNode>();
        const auto n = static_cast<std::size_t>(levels_[level].slots);
        if (level + 1 == levels_.size()) {
            node->blocks.resize(n);
        } else {
            node->links.resize(n);
        }
        return node;
    }
    std::unique_ptr<Block> make_block() const {
        return std::make_unique<Block>(
            Block::Zero(static_cast<Eigen::Index>(block_size_)));
    }

    std::unique_ptr<LinkNode> clone(const LinkNode &node, std::size_t level) const {
        auto out = std::make_unique<LinkNode>();
        out->links.resize(node.links.size());
        out->blocks.resize(node.blocks.size());
        for (std::size_t k = 0; k < node.links.size(); ++k) {
            if (node.links[k]) {
                out->links[k] = clone(*node.links[k], level + 1);
            }
        }
        for (std::size_t k = 0; k < node.blocks.size(); ++k) {
            if (node.blocks[k]) {
                out->blocks[k] = std::make_unique<Block>(*node.blocks[k]);
            }
        }
        return out;
    }

    [[nodiscard]] std::size_t count_links(const LinkNode &node,
                                          std::size_t level) const {
        std::size_t n = 1;
        for (const auto &c : node.links) {
            if (c) {
                n += count_links(*c, level + 1);
            }
        }
        return n;
    }

    [[nodiscard]] Index slot_at(Index block_id, std::size_t level) const {
        const auto &lg = levels_[level];
        return (block_id / lg.id_weight) % lg.slots;
    }

    [[nodiscard]] const Block *find_block(Index block_id) const {
        const LinkNode *node = root_.get();
        for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
            node = node->links[static_cast<std::size_t>(slot_at(block_id, l))].get();
            if (!node) {
                return nullptr;
            }
        }
        return node->blocks[static_cast<std::size_t>(
                                slot_at(block_id, levels_.size() - 1))]
            .get();
    }

    std::unique_ptr<Block> *find_slot(Index block_id, bool allocate) {
        if (block_id >= num_block_ids()) {
            throw std::out_of_range("block id out of range");
        }
        LinkNode *node = root_.get();
        for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
            auto &child = node->links[static_cast<std::size_t>(slot_at(block_id, l))];
            if (!child) {
                if (!allocate) {
                    return nullptr;
                }
                child = make_link(l + 1);
            }
            node = child.get();
        }
        return &node->blocks[static_cast<std::size_t>(
            slot_at(block_id, levels_.size() - 1))];
    }

    Block &block_for(Index block_id) {
        auto *slot = find_slot(block_id, true);
        if (!*slot) {
            *slot = make_block();
        }
        return **slot;
    }

    Filter make_filter(const Condition &controls, const Condition &restrict,
                       int target) const {
        Filter f;
        f.req.assign(static_cast<std::size_t>(num_sites_), -1);
        auto add = [&](const SiteDigit &c, bool is_control) {
            check_site(c.site);
            if (c.digit < 0 || c.digit >= s_.value()) {
                throw std::invalid_argument("condition digit out of range");
            }
            if (c.site == target) {
                throw std::invalid_argument(
                    is_control ? "control site equals target site"
                               : "restricted site equals target site");
            }
            auto &r = f.req[static_cast<std::size_t>(c.site)];
            if (r >= 0 && r != c.digit) {
                if (is_control) {
                    throw std::invalid_argument("conflicting control digits");
                }
                f.empty_set = true;
            }
            r = c.digit;
        };
        for (std::size_t a = 0; a < controls.size(); ++a) {
            for (std::size_t b = a + 1; b < controls.size(); ++b) {
                if (controls[a].site == controls[b].site) {
                    throw std::invalid_argument("duplicate control site");
                }
            }
            add(controls[a], true);
        }
        for (const auto &r : restrict) {
            add(r, false);
        }
        return f;
    }

    /// Allowed slots per link level, ignoring the digit of `skip_site`.
    [[nodiscard]] Allowed allowed_slots(const Filter &f, int skip_site) const {
        Allowed out(levels_.size());
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            const auto &lg = levels_[l];
            for (Index slot = 0; slot < lg.slots; ++slot) {
                bool ok = true;
                Index rest = slot;
                for (int b = 0; b < lg.bits && ok; ++b) {
                    const int site = lg.lo + b;
                    const int d = static_cast<int>(rest % static_cast<Index>(s_.value()));
                    rest /= static_cast<Index>(s_.value());
                    const int r = f.req[static_cast<std::size_t>(site)];
                    ok = site == skip_site || r < 0 || r == d;
                }
                if (ok) {
                    out[l].push_back(slot);
                }
            }
        }
        return out;
    }

    [[nodiscard]] const Allowed &all_slots() {
        if (all_slots_.empty()) {
            all_slots_ = allowed_slots(
                Filter{std::vector<int>(static_cast<std::size_t>(num_sites_), -1), false}, -1);
        }
        return all_slots_;
    }

    [[nodiscard]] std::vector<std::pair<Index, Index>>
    slot_pairs(const Filter &f, int level, int bit, int li, int lj) const {
        const auto &lg = levels_[static_cast<std::size_t>(level)];
        const Index stride = pow_[static_cast<std::size_t>(bit)];
        const auto sv = static_cast<Index>(s_.value());
        std::vector<std::pair<Index, Index>> pairs;
        const auto allowed = allowed_slots(f, lg.lo + bit);
        for (Index slot : allowed[static_cast<std::size_t>(level)]) {
            if (static_cast<int>((slot / stride) % sv) == li) {
                pairs.emplace_back(slot, slot + static_cast<Index>(lj - li) * stride);
            }
        }
        return pairs;
    }

    [[nodiscard]] ValueFilter value_filter(const Filter &f) const {
        ValueFilter vf;
        vf.radix2 = s_.value() == 2;
        for (int site = 0; site < spec_.state_bits; ++site) {
            const int r = f.req[static_cast<std::size_t>(site)];
            if (r < 0) {
                continue;
            }
            if (vf.radix2) {
                vf.mask |= Index{1} << site;
                vf.want |= static_cast<Index>(r) << site;
            } else {
                vf.conds.emplace_back(pow_[static_cast<std::size_t>(site)], r);
            }
        }
        return vf;
    }

    template <typename Fn>
    void visit(LinkNode &node, std::size_t level, Index id,
               const Allowed &allowed, Fn &&fn) {
        ++counters_.link_nodes_visited;
        const bool bottom = level + 1 == levels_.size();
        const Index w = levels_[level].id_weight;
        for (Index slot : allowed[level]) {
            if (bottom) {
                if (auto &b = node.blocks[static_cast<std::size_t>(slot)]) {
                    fn(*b, id + slot * w);
                }
            } else if (auto &c = node.links[static_cast<std::size_t>(slot)]) {
                visit(*c, level + 1, id + slot * w, allowed, fn);
            }
        }
    }

    template <typename Fn>
    void visit_const(const LinkNode &node, std::size_t level, Index id,
                     Fn &&fn) const {
        const bool bottom = level + 1 == levels_.size();
        const Index w = levels_[level].id_weight;
        if (bottom) {
            for (std::size_t k = 0; k < node.blocks.size(); ++k) {
                if (const auto &b = node.blocks[k]) {
                    fn(static_cast<const Block &>(*b), id + k * w);
                }
            }
        } else {
            for (std::size_t k = 0; k < node.links.size(); ++k) {
                if (const auto &c = node.links[k]) {
                    visit_const(*c, level + 1, id + k * w, fn);
                }
            }
        }
    }

    void skeleton_ids(const LinkNode &node, std::size_t level, Index id,
                      std::vector<Index> &out) const {
        const Index w = levels_[level].id_weight;
        if (level + 1 == levels_.size()) {
            for (std::size_t k = 0; k < node.blocks.size(); ++k) {
                out.push_back(id + k * w);
            }
            return;
        }
        for (std::size_t k = 0; k < node.links.size(); ++k) {
            if (const auto &c = node.links[k]) {
                skeleton_ids(*c, level + 1, id + k * w, out);
            }
        }
    }

    template <typename Fn>
    void descend_to(LinkNode &node, std::size_t level, std::size_t target,
                    const Allowed &allowed, Fn &&fn) {
        ++counters_.link_nodes_visited;
        if (level == target) {
            fn(node);
            return;
        }
        for (Index slot : allowed[level]) {
            if (auto &c = node.links[static_cast<std::size_t>(slot)]) {
                descend_to(*c, level + 1, target, allowed, fn);
            }
        }
    }

    // Pairs slot a with slot b of `node`; absent halves are allocated when
    // the other half is present.
    void pair_slots(LinkNode &node, std::size_t level, Index a, Index b,
                    const Allowed &allowed, const Matrix2 &u,
                    const ValueFilter &vf) {
        const auto ia = static_cast<std::size_t>(a);
        const auto ib = static_cast<std::size_t>(b);
        if (level + 1 == levels_.size()) {
            auto &ba = node.blocks[ia];
            auto &bb = node.blocks[ib];
            if (!ba && !bb) {
                return;
            }
            if (!ba) {
                ba = make_block();
            }
            if (!bb) {
                bb = make_block();
            }
            cross_blocks(*ba, *bb, u, vf);
            return;
        }
        auto &la = node.links[ia];
        auto &lb = node.links[ib];
        if (!la && !lb) {
            return;
        }
        if (!la) {
            la = make_link(level + 1);
        }
        if (!lb) {
            lb = make_link(level + 1);
        }
        lockstep(*la, *lb, level + 1, allowed, u, vf);
    }

    void lockstep(LinkNode &na, LinkNode &nb, std::size_t level,
                  const Allowed &allowed, const Matrix2 &u,
                  const ValueFilter &vf) {
        counters_.link_nodes_visited += 2;
        const bool bottom = level + 1 == levels_.size();
        for (Index slot : allowed[level]) {
            const auto k = static_cast<std::size_t>(slot);
            if (bottom) {
                auto &ba = na.blocks[k];
                auto &bb = nb.blocks[k];
                if (!ba && !bb) {
                    continue;
                }
                if (!ba) {
                    ba = make_block();
                }
                if (!bb) {
                    bb = make_block();
                }
                cross_blocks(*ba, *bb, u, vf);
            } else {
                auto &la = na.links[k];
                auto &lb = nb.links[k];
                if (!la && !lb) {
                    continue;
                }
                if (!la) {
                    la = make_link(level + 1);
                }
                if (!lb) {
                    lb = make_link(level + 1);
                }
                lockstep(*la, *lb, level + 1, allowed, u, vf);
            }
        }
    }

    void cross_blocks(Block &ba, Block &bb, const Matrix2 &u,
                      const ValueFilter &vf) {
        const Complex w = u(0, 0), x = u(0, 1), y = u(1, 0), z = u(1, 1);
        Complex *pa = ba.data();
        Complex *pb = bb.data();
        const Index n = block_size_;
        if (vf.trivial()) {
            for (Index o = 0; o < n; ++o) {
                const Complex p = pa[o], q = pb[o];
                pa[o] = w * p + x * q;
                pb[o] = y * p + z * q;
            }
        } else {
            for (Index o = 0; o < n; ++o) {
                if (!vf.ok(o)) {
                    continue;
                }
                const Complex p = pa[o], q = pb[o];
                pa[o] = w * p + x * q;
                pb[o] = y * p + z * q;
            }
        }
        counters_.amplitude_updates += n;
    }

    void pair_in_block(Block &blk, const Matrix2 &u, Index stride, int li,
                       int lj, const ValueFilter &vf) {
        const Complex w = u(0, 0), x = u(0, 1), y = u(1, 0), z = u(1, 1);
        const Index span = stride * static_cast<Index>(s_.value());
        const Index oi = static_cast<Index>(li) * stride;
        const Index oj = static_cast<Index>(lj) * stride;
        Complex *d = blk.data();
        const Index n = block_size_;
        const bool trivial = vf.trivial();
        for (Index hi = 0; hi < n; hi += span) {
            for (Index lo = 0; lo < stride; ++lo) {
                const Index base = hi + lo;
                if (!trivial && !vf.ok(base)) {
                    continue;
                }
                Complex &a = d[base + oi];
                Complex &b = d[base + oj];
                const Complex p = a, q = b;
                a = w * p + x * q;
                b = y * p + z * q;
            }
        }
        counters_.amplitude_updates += 2 * (n / static_cast<Index>(s_.value()));
    }

    Radix s_;
    int num_sites_;
    LevelSpec spec_;
    Index dimension_ = 0;
    Index block_size_ = 0;
    std::vector<Index> pow_;
    std::vector<LevelGeom> levels_;
    std::vector<int> site_level_;
    std::unique_ptr<LinkNode> root_;
    Allowed all_slots_;
    TraversalCounters counters_;
};

using StateVector = HierarchicalStateVector<double>;

/// Text snapshot: header `s=<s> M=<M>`, then one `<index> <re> <im>` line per
/// nonzero amplitude, 17 significant digits.
template <typename Scalar>
void write_snapshot(std::ostream &os, const HierarchicalStateVector<Scalar> &v) {
    os << "s=" << v.radix().value() << " M=" << v.num_sites() << '\n';
    const auto old_flags = os.flags();
    const auto old_prec = os.precision();
    os << std::setprecision(17);
    v.for_each_amplitude([&](Index index, const std::complex<Scalar> &a) {
        if (a != std::complex<Scalar>(0)) {
            os << index << ' ' << static_cast<double>(a.real()) << ' '
               << static_cast<double>(a.imag()) << '\n';
        }
    });
    os.flags(old_flags);
    os.precision(old_prec);
}

template <typename Scalar = double>
HierarchicalStateVector<Scalar> read_snapshot(std::istream &is,
                                              const LevelSpec &spec) {
    std::string header;
    if (!std::getline(is, header)) {
        throw std::runtime_error("snapshot: missing header");
    }
    int s = 0;
    int m = 0;
    if (std::sscanf(header.c_str(), "s=%d M=%d", &s, &m) != 2) {
        throw std::runtime_error("snapshot: bad header '" + header + "'");
    }
    HierarchicalStateVector<Scalar> v(Radix(s), m, spec);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        Index index = 0;
        double re = 0;
        double im = 0;
        if (!(ls >> index >> re >> im)) {
            throw std::runtime_error("snapshot: bad line '" + line + "'");
        }
        v.set_amplitude(index, {static_cast<Scalar>(re), static_cast<Scalar>(im)});
    }
    return v;
}

} // namespace qsv
