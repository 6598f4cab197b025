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
 * Circuit construction: the repeated-squaring factoring circuit, its
 * reversible modular adder, the QFT, the benchmark catalog and the circuit
 * text format.
 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsv/common.hpp"
#include "qsv/gates.hpp"
#include "qsv/statevec.hpp"

namespace qsv {

struct SiteRange {
    int first = 0;
    int count = 0;

    [[nodiscard]] int at(int k) const;
    [[nodiscard]] int end() const { return first + count; }
    [[nodiscard]] bool contains(int site) const {
        return site >= first && site < end();
    }
    [[nodiscard]] std::vector<int> sites() const;
    friend bool operator==(const SiteRange &, const SiteRange &) = default;
};

/**
 * Site assignment, least significant first: scratch (adder operand B of L
 * bits, carry ancilla, high bit z, comparison flag), then S, P and A.
 * With a_bits = L + 1 the total is 4L + 4.
 */
struct RegisterLayout {
    int L = 0;
    SiteRange scratch;
    SiteRange s_reg;
    SiteRange p_reg;
    SiteRange a_reg;

    static RegisterLayout make(int L, int a_bits);

    [[nodiscard]] int b(int k) const { return scratch.at(k); }
    [[nodiscard]] int carry() const { return scratch.first + L; }
    [[nodiscard]] int high() const { return scratch.first + L + 1; }
    [[nodiscard]] int flag() const { return scratch.first + L + 2; }
    [[nodiscard]] int total_sites() const { return a_reg.end(); }
    void validate() const;
    friend bool operator==(const RegisterLayout &, const RegisterLayout &) = default;
};

struct FactoringSpec {
    std::uint64_t N = 15;
    std::uint64_t X = 7;
    int L = 4;
    int a_bits = 5;

    /// L = bit length of N; a_bits < 0 selects the default L + 1.
    static FactoringSpec make(std::uint64_t N, std::uint64_t X, int a_bits = -1);
    void validate() const;
    friend bool operator==(const FactoringSpec &, const FactoringSpec &) = default;
};

enum class Phase { prepare, f_of_a, fft, measure };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view name);

struct Circuit {
    int num_sites = 0;
    Radix radix{2};
    std::vector<GateOp> ops;
    std::vector<Phase> phases;
    std::optional<RegisterLayout> layout;
    std::optional<FactoringSpec> spec;
    std::string name;

    void add(GateOp g, Phase p);
    void append(const std::vector<GateOp> &gates, Phase p);
    void validate() const;
    [[nodiscard]] std::uint64_t laser_ops() const;
    [[nodiscard]] std::size_t count(Phase p) const;
    /// Sites of the final Measure op (readout order), empty when absent.
    [[nodiscard]] std::vector<int> measured_sites() const;
};

std::uint64_t classical_f(std::uint64_t A, const FactoringSpec &spec);
std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t n);
std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t n);
std::optional<std::uint64_t> modinv(std::uint64_t a, std::uint64_t n);
int bit_length(std::uint64_t n);

/// Doubly controlled S <- (S + contrib) mod N on (a_site, p_site). Requires
/// S < N and the scratch register clear; leaves the scratch clear.
std::vector<GateOp> modulo_add(const RegisterLayout &layout,
                               std::uint64_t contrib, std::uint64_t N,
                               int a_site, int p_site);

/// Unconditional ripple-carry addition (S, z) += (B), and its inverse.
std::vector<GateOp> ripple_add(const RegisterLayout &layout);
std::vector<GateOp> ripple_sub(const RegisterLayout &layout);

/// One outer-loop iteration: P <- P * X^(2^l) mod N when A_l is set.
std::vector<GateOp> modulo_multiply(const RegisterLayout &layout,
                                    const FactoringSpec &spec, int l);

/// Gate list whose product is the inverse; throws on Measure.
std::vector<GateOp> inverse(const std::vector<GateOp> &gates);

/// Hadamard up to the global phase -i: X-type pi rotation followed by a
/// pi/2 rotation.
std::vector<GateOp> hadamard(int site);

/// QFT network on `sites` (sites[0] least significant). The output bits
/// come out in reverse site order; read them through qft_readout_order.
std::vector<GateOp> qft(const std::vector<int> &sites);
std::vector<int> qft_readout_order(const std::vector<int> &sites);

/// Rotation taking |0> to (|0> + |1>)/sqrt(2).
GateOp superposition(int site);

Circuit build_factor_circuit(const FactoringSpec &spec, Radix s);

/// Reduced circuit: preparation of A_0 and one multiply iteration.
Circuit build_multiply_circuit(const FactoringSpec &spec, Radix s);

std::uint64_t op_count_formula(std::uint64_t L);

struct BenchmarkEntry {
    std::string name;
    std::string description;
    std::string states;
    std::uint64_t laser_ops = 0;
    int link_bits = 0;
    int state_bits = 0;
    int radix = 2;
    std::uint64_t N = 0;
    std::uint64_t X = 0;
    int a_bits = 0;
    bool full = true; // false for the single-iteration multiply circuits

    [[nodiscard]] int total_bits() const { return link_bits + state_bits; }
    [[nodiscard]] LevelSpec level_spec() const {
        return LevelSpec::with_link_bits(total_bits(), link_bits, link_bits);
    }
};

const std::vector<BenchmarkEntry> &benchmark_catalog();
const BenchmarkEntry &find_benchmark(std::string_view name);
Circuit make_benchmark(std::string_view name);

/// Continued-fraction period recovery from a QFT outcome y over 2^a_bits.
std::optional<std::uint64_t> recover_period(std::uint64_t y, int a_bits,
                                            const FactoringSpec &spec);
/// Nontrivial factors from an even period, when they exist.
std::optional<std::pair<std::uint64_t, std::uint64_t>>
factors_from_period(std::uint64_t r, const FactoringSpec &spec);

/// Text format: header `s=<s> M=<M>`, one gate per line, `#` comments, and
/// `#@phase`, `#@layout`, `#@spec`, `#@name` directives.
void write_circuit(std::ostream &os, const Circuit &c);
Circuit read_circuit(std::istream &is);
Circuit load_circuit(const std::string &path);

} // namespace qsv
