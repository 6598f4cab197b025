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

#include "qsv/gates.hpp"

#include <algorithm>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace qsv {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};

// Drives the target between 0 and 1 so that a 2 pi pulse on (1, 2) acts as
// Z; R^dagger Z R = X.
LaserOp basis_change(int target, bool inverse) {
    return LaserOp{target, 0, 1, kPi / 2, inverse ? kPi / 2 : -kPi / 2, 0.0, 0.0, {}};
}

LaserOp swap_pulse(int site, bool inverse) {
    return LaserOp{site, 0, 1, inverse ? -kPi : kPi, 0.0, 0.0, 0.0, {}};
}

} // namespace

Matrix2 rotation(double theta, double phi) {
    using C = std::complex<double>;
    const double c = std::cos(theta / 2);
    const double s = std::sin(theta / 2);
    const C mi(0, -1);
    Matrix2 u;
    u << C(c, 0), mi * std::polar(1.0, -phi) * s,
        mi * std::polar(1.0, phi) * s, C(c, 0);
    return u;
}

Eigen::Matrix4cd cnot_matrix() {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    m(0, 0) = 1;
    m(1, 1) = 1;
    m(2, 3) = 1;
    m(3, 2) = 1;
    return m;
}

std::vector<int> gate_sites(const GateOp &g) {
    return std::visit(
        overloaded{
            [](const Rotate &r) { return std::vector<int>{r.site}; },
            [](const CNot &c) { return std::vector<int>{c.control, c.target}; },
            [](const CCNot &c) {
                return std::vector<int>{c.control1, c.control2, c.target};
            },
            [](const CPhase &c) { return std::vector<int>{c.control, c.target}; },
            [](const Measure &m) { return m.sites; },
        },
        g);
}

bool is_measure(const GateOp &g) { return std::holds_alternative<Measure>(g); }

void validate_gate(const GateOp &g, int num_sites) {
    auto sites = gate_sites(g);
    if (sites.empty()) {
        throw std::invalid_argument("gate acts on no sites");
    }
    for (int s : sites) {
        if (s < 0 || s >= num_sites) {
            throw std::invalid_argument("gate site " + std::to_string(s) +
                                        " outside [0, " +
                                        std::to_string(num_sites) + ")");
        }
    }
    std::sort(sites.begin(), sites.end());
    if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) {
        throw std::invalid_argument("gate sites must be distinct: " +
                                    to_string(g));
    }
}

Matrix2 laser_matrix(const LaserOp &op, double theta_error) {
    Matrix2 u = rotation(op.theta + theta_error, op.phi);
    if (op.phase != 0.0) {
        u.row(1) *= std::polar(1.0, op.phase);
    }
    if (op.global_phase != 0.0) {
        u *= std::polar(1.0, op.global_phase);
    }
    return u;
}

std::vector<LaserOp> expand_to_lasers(const GateOp &g, Radix s) {
    const bool three = s.value() == 3;
    return std::visit(
        overloaded{
            [](const Rotate &r) {
                return std::vector<LaserOp>{{r.site, 0, 1, r.theta, r.phi, 0.0, 0.0, {}}};
            },
            [three](const CNot &c) {
                if (!three) {
                    // i * u(pi, 0) is exactly X.
                    return std::vector<LaserOp>{
                        {c.target, 0, 1, kPi, 0.0, 0.0, kPi / 2,
                         {{c.control, 1}}}};
                }
                // The control is driven 1 -> 0 so the 2 pi pulse on the
                // target's (1, 2) pair fires for an original control of 1.
                return std::vector<LaserOp>{
                    basis_change(c.target, false),
                    swap_pulse(c.control, false),
                    {c.target, 1, 2, 2 * kPi, 0.0, 0.0, 0.0, {{c.control, 0}}},
                    swap_pulse(c.control, true),
                    basis_change(c.target, true),
                };
            },
            [three](const CCNot &c) {
                if (!three) {
                    return std::vector<LaserOp>{
                        {c.target, 0, 1, kPi, 0.0, 0.0, kPi / 2,
                         {{c.control1, 1}, {c.control2, 1}}}};
                }
                return std::vector<LaserOp>{
                    basis_change(c.target, false),
                    swap_pulse(c.control1, false),
                    swap_pulse(c.control2, false),
                    {c.target, 1, 2, 2 * kPi, 0.0, 0.0, 0.0,
                     {{c.control1, 0}, {c.control2, 0}}},
                    swap_pulse(c.control2, true),
                    swap_pulse(c.control1, true),
                    basis_change(c.target, true),
                };
            },
            [](const CPhase &c) {
                return std::vector<LaserOp>{
                    {c.target, 0, 1, 0.0, 0.0, c.angle, 0.0, {{c.control, 1}}}};
            },
            [](const Measure &) -> std::vector<LaserOp> {
                throw std::invalid_argument(
                    "expand_to_lasers: Measure has no laser expansion");
            },
        },
        g);
}

std::uint64_t count_lasers(const std::vector<GateOp> &gates, Radix s) {
    std::uint64_t n = 0;
    for (const auto &g : gates) {
        if (!is_measure(g)) {
            n += expand_to_lasers(g, s).size();
        }
    }
    return n;
}

void ErrorModel::validate() const {
    if (!(sigma_theta >= 0.0) || !std::isfinite(sigma_theta)) {
        throw std::invalid_argument("sigma_theta must be finite and >= 0");
    }
    if (!(decoherence_rate >= 0.0 && decoherence_rate < 1.0)) {
        throw std::invalid_argument("decoherence rate must lie in [0, 1)");
    }
}

std::uint64_t keyed_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over a simple combination of the key parts.
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

double angle_error(const ErrorModel &err, std::uint64_t ordinal, int site) {
    if (err.sigma_theta == 0.0) {
        return 0.0;
    }
    std::mt19937_64 eng(
        keyed_seed(err.seed, ordinal, static_cast<std::uint64_t>(site)));
    std::normal_distribution<double> dist(0.0, err.sigma_theta);
    return dist(eng);
}

int decoherence_site(const ErrorModel &err, std::uint64_t ordinal,
                     int num_sites) {
    std::mt19937_64 eng(keyed_seed(err.seed ^ 0x5bd1e995ULL, ordinal, 0x7f));
    std::uniform_int_distribution<int> dist(0, num_sites - 1);
    return dist(eng);
}

std::string to_string(const GateOp &g) {
    std::ostringstream os;
    os << std::setprecision(17);
    std::visit(overloaded{
                   [&](const Rotate &r) {
                       os << "ROT " << r.site << ' ' << r.theta << ' ' << r.phi;
                   },
                   [&](const CNot &c) {
                       os << "CNOT " << c.control << ' ' << c.target;
                   },
                   [&](const CCNot &c) {
                       os << "CCNOT " << c.control1 << ' ' << c.control2 << ' '
                          << c.target;
                   },
                   [&](const CPhase &c) {
                       os << "CPHASE " << c.control << ' ' << c.target << ' '
                          << c.angle;
                   },
                   [&](const Measure &m) {
                       os << "MEASURE";
                       for (int s : m.sites) {
                           os << ' ' << s;
                       }
                   },
               },
               g);
    return os.str();
}

} // namespace qsv
