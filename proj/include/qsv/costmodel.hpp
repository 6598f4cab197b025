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
 * Closed-form execution-time model of the sequential and parallel
 * simulator, its machine presets, and the extraction of step profiles from
 * circuits.
 *
 * Symbols: l laser ops, n_b bits in use, n_l link bits in use, n_p parallel
 * bits, n_c new parallel bits at a reorganization, s levels per QU-bit.
 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsv/circuits.hpp"
#include "qsv/common.hpp"
#include "qsv/parallel.hpp"
#include "qsv/statevec.hpp"

namespace qsv {

struct MachineParams {
    std::string name = "custom";
    double t_op2 = 0.0; // s per state op, two-level model
    double t_op3 = 0.0; // s per state op, three-level model
    double t_t = 0.0;   // s per link traversal unit
    double t_lat = 0.0; // s per message
    double t_b = 0.0;   // s per byte
    double t_lr = 0.0;  // s per block reorganized
    double q = 16.0;    // bytes per state

    static MachineParams t3e();
    static MachineParams sp2();
    /// `key = value` lines (or a JSON object) with keys t_op2, t_op3, t_t,
    /// t_lat, t_b, t_lr, q; all required.
    static MachineParams parse(std::istream &is, std::string name = "custom");
    static MachineParams load(const std::string &path);
    /// Constants measured on this host with small kernels (about a second).
    static MachineParams calibrate_host();
    /// "t3e", "sp2", "host" or a file path.
    static MachineParams named(const std::string &name_or_path);

    void validate() const;
    [[nodiscard]] double t_op(Radix s) const { return s.value() == 2 ? t_op2 : t_op3; }
    /// Every time constant multiplied by c; q is a size and stays.
    [[nodiscard]] MachineParams scaled(double c) const;
};

struct ProfileStep {
    std::uint64_t l = 0;
    int n_b = 0;
    int n_l = 0;
    int n_c = 0;
};

struct StepProfile {
    std::vector<ProfileStep> steps;
    std::uint64_t l_total = 0;
    int n_b_total = 0;

    /// Sum of l equals l_total and n_b never decreases.
    void validate() const;
    /// Same bit usage with every l multiplied so that the total becomes
    /// `l_total`; the running sum is rounded so the parts add up exactly.
    [[nodiscard]] StepProfile scaled_to(std::uint64_t l_total) const;
};

double t_reorg(int n_l, int n_b, int n_c, Radix s, const MachineParams &mp);
double t_dec(std::uint64_t l_total, const MachineParams &mp);
/// l (s^n_l t_t + s^(n_b-1) t_op); the traversal term is zero when n_l = 0.
double t_comp(std::uint64_t l, int n_b, int n_l, Radix s, const MachineParams &mp);
double t_seqflat(std::uint64_t l_total, int n_b_total, Radix s,
                 const MachineParams &mp);
double t_seqdyn(const StepProfile &p, Radix s, const MachineParams &mp);
double t_par(const StepProfile &p, int n_p, Radix s, const MachineParams &mp);
double t_pardec(const StepProfile &p, int n_p, Radix s, const MachineParams &mp);
double t_seqdec(const StepProfile &p, Radix s, const MachineParams &mp);

/**
 * Bit usage of a planned run. Each reorganization starts a new entry that
 * carries its n_c and the usage after the first gate of the step; further
 * entries follow whenever the usage grows. n_b and n_l count the bits (and
 * link bits) touched by a gate so far or chosen as a parallel bit. The
 * value-level bits always count as in use: a value block is processed whole
 * whatever digits are populated.
 */
StepProfile extract_profile(const Circuit &c, const StepPlan &plan,
                            const LevelSpec &spec);

/// Sequential usage: one entry per change of n_b or n_l, n_c = 0.
StepProfile sequential_profile(const Circuit &c, const LevelSpec &spec);

struct Prediction {
    std::string benchmark;
    std::string machine;
    int s = 2;
    int n_p = 0;
    double t_seqflat = 0.0;
    double t_seqdyn = 0.0;
    double t_par = 0.0;
    double t_pardec = 0.0;
    double speedup = 0.0; // t_seqdyn / t_par
};

/// For n_p = 0 the parallel columns use the sequential profile.
Prediction predict(const std::string &benchmark, const Circuit &c,
                   const LevelSpec &spec, int n_p, const MachineParams &mp,
                   std::uint64_t l_total_override = 0);

void write_csv_header(std::ostream &os);
void write_csv_row(std::ostream &os, const Prediction &p);

} // namespace qsv
