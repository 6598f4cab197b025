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
 * Gate-level operations, their expansion into laser operations, and the
 * operational-error and decoherence models.
 */

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "qsv/common.hpp"
#include "qsv/statevec.hpp"

namespace qsv {

using Matrix2 = PairUnitary<double>;

/// u(theta, phi) = [[cos t/2, -i e^{-i phi} sin t/2],
///                  [-i e^{i phi} sin t/2, cos t/2]]
Matrix2 rotation(double theta, double phi);

/// Identity with rows/columns 2 and 3 swapped; basis order |AB> = 2A + B.
Eigen::Matrix4cd cnot_matrix();

struct Rotate {
    int site = 0;
    double theta = 0.0;
    double phi = 0.0;
};
struct CNot {
    int control = 0;
    int target = 1;
};
struct CCNot {
    int control1 = 0;
    int control2 = 1;
    int target = 2;
};
struct CPhase {
    int control = 0;
    int target = 1;
    double angle = 0.0;
};
struct Measure {
    std::vector<int> sites;
};

using GateOp = std::variant<Rotate, CNot, CCNot, CPhase, Measure>;

std::vector<int> gate_sites(const GateOp &g);
bool is_measure(const GateOp &g);
/// Throws std::invalid_argument unless all sites are distinct and < num_sites.
void validate_gate(const GateOp &g, int num_sites);

/**
 * One pair rotation between levels (level_i, level_j) of `site`:
 * e^{i global_phase} * diag(1, e^{i phase}) * u(theta, phi), applied only
 * where every control digit matches.
 */
struct LaserOp {
    int site = 0;
    int level_i = 0;
    int level_j = 1;
    double theta = 0.0;
    double phi = 0.0;
    double phase = 0.0;
    double global_phase = 0.0;
    Condition controls;
};

Matrix2 laser_matrix(const LaserOp &op, double theta_error = 0.0);

/// Throws for Measure.
std::vector<LaserOp> expand_to_lasers(const GateOp &g, Radix s);

/// Laser ops for a gate list, Measure gates contributing zero.
std::uint64_t count_lasers(const std::vector<GateOp> &gates, Radix s);

struct ErrorModel {
    double sigma_theta = 0.0;
    double decoherence_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] bool ideal() const {
        return sigma_theta == 0.0 && decoherence_rate == 0.0;
    }
};

/// Random draws keyed by (seed, laser-op ordinal, site), so the draw for a
/// given op does not depend on which worker executes it or in what order.
double angle_error(const ErrorModel &err, std::uint64_t ordinal, int site);
int decoherence_site(const ErrorModel &err, std::uint64_t ordinal,
                     int num_sites);
std::uint64_t keyed_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

/// Counts shared by the sequential and parallel drivers.
struct ExecutionContext {
    ErrorModel err;
    std::uint64_t ordinal = 0; // laser ops issued so far
    std::uint64_t transformations = 0;
    bool record_sums = false;
    std::vector<double> decoherence_sums;
};

template <typename Scalar>
void apply_laser(HierarchicalStateVector<Scalar> &v, const LaserOp &op,
                 double theta_error = 0.0, const Condition &restrict = {}) {
    const Matrix2 u = laser_matrix(op, theta_error);
    v.apply_pair_transform(u.template cast<std::complex<Scalar>>(), op.site,
                           op.level_i, op.level_j, op.controls, restrict);
}

/// Scales levels >= 1 of `site` by sqrt(1 - rate).
template <typename Scalar>
void damp_site(HierarchicalStateVector<Scalar> &v, int site, double rate,
               const Condition &restrict = {}) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("decoherence rate must lie in [0, 1)");
    }
    const auto f = static_cast<Scalar>(std::sqrt(1.0 - rate));
    std::array<Scalar, 3> factors{Scalar(1), f, f};
    v.scale_levels(site,
                   std::span<const Scalar>(factors.data(),
                                           static_cast<std::size_t>(
                                               v.radix().value())),
                   restrict);
}

/// Damps `site`, then renormalizes globally. Returns the sum before
/// renormalization.
template <typename Scalar>
double decoherence_step(HierarchicalStateVector<Scalar> &v, double rate,
                        int site) {
    damp_site(v, site, rate);
    const double sum = static_cast<double>(v.norm_sq());
    if (sum < 1e-300) {
        throw std::domain_error("decoherence_step: state vanished");
    }
    if (rate > 0.0) {
        v.scale_all(static_cast<Scalar>(1.0 / std::sqrt(sum)));
    }
    return sum;
}

/// Applies a gate: each laser op with its keyed angle error, followed by a
/// decoherence step when the rate is nonzero. Measure collapses the
/// register using a draw keyed by the current ordinal. Returns the number
/// of laser ops applied.
template <typename Scalar>
std::size_t apply_gate(HierarchicalStateVector<Scalar> &v, const GateOp &g,
                       ExecutionContext &ctx) {
    validate_gate(g, v.num_sites());
    if (const auto *m = std::get_if<Measure>(&g)) {
        std::mt19937_64 rng(keyed_seed(ctx.err.seed, ctx.ordinal, ~0ULL));
        v.measure_register(m->sites, rng);
        return 0;
    }
    const auto lasers = expand_to_lasers(g, v.radix());
    for (const auto &op : lasers) {
        apply_laser(v, op, angle_error(ctx.err, ctx.ordinal, op.site));
        ++ctx.transformations;
        if (ctx.err.decoherence_rate > 0.0) {
            const int site =
                decoherence_site(ctx.err, ctx.ordinal, v.num_sites());
            const double sum =
                decoherence_step(v, ctx.err.decoherence_rate, site);
            ctx.transformations += 2;
            if (ctx.record_sums) {
                ctx.decoherence_sums.push_back(sum);
            }
        }
        ++ctx.ordinal;
    }
    return lasers.size();
}

template <typename Scalar>
std::size_t apply_gate(HierarchicalStateVector<Scalar> &v, const GateOp &g,
                       const ErrorModel &err = {}) {
    ExecutionContext ctx;
    ctx.err = err;
    return apply_gate(v, g, ctx);
}

/// Text form used by the circuit file format, e.g. "CNOT 0 1".
std::string to_string(const GateOp &g);

} // namespace qsv
