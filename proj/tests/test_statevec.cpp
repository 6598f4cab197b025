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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "qsv/statevec.hpp"
#include "support/dense_oracle.hpp"

using namespace qsv;
using cd = std::complex<double>;

namespace {

StateVector::Matrix2 eig(const oracle::Mat2 &m) {
    StateVector::Matrix2 u;
    u << m.a, m.b, m.c, m.d;
    return u;
}

double max_diff(const StateVector &v, const oracle::Dense &d) {
    const auto dense = v.to_dense();
    double worst = 0;
    for (std::size_t k = 0; k < dense.size(); ++k) {
        worst = std::max(worst, std::abs(dense[k] - d.a[k]));
    }
    return worst;
}

// Random controlled pair transform applied to both backends.
void random_op(std::mt19937_64 &rng, StateVector &v, oracle::Dense &d) {
    const int s = d.s, m = d.m;
    std::uniform_int_distribution<int> site_d(0, m - 1);
    std::uniform_real_distribution<double> ang(-M_PI, M_PI);
    const int site = site_d(rng);
    int li = 0, lj = 1;
    if (s == 3) {
        li = std::uniform_int_distribution<int>(0, 1)(rng);
        lj = std::uniform_int_distribution<int>(li + 1, 2)(rng);
    }
    Condition conds;
    std::vector<std::pair<int, int>> oc;
    const int nc = std::uniform_int_distribution<int>(0, std::min(2, m - 1))(rng);
    for (int k = 0; k < nc; ++k) {
        const int c = site_d(rng);
        bool dup = c == site;
        for (const auto &x : conds) {
            dup = dup || x.site == c;
        }
        if (dup) {
            continue;
        }
        const int dig = std::uniform_int_distribution<int>(0, s - 1)(rng);
        conds.push_back({c, dig});
        oc.emplace_back(c, dig);
    }
    const auto u = oracle::rot(ang(rng), ang(rng));
    v.apply_pair_transform(eig(u), site, li, lj, conds);
    d.pair(site, li, lj, u, oc);
}

} // namespace

TEST_CASE("basis state M=2 is [1,0,0,0]") {
    const auto v = StateVector::basis(Radix(2), 2, LevelSpec::flat(2), 0);
    const auto d = v.to_dense();
    REQUIRE(d.size() == 4);
    CHECK(d[0] == cd(1, 0));
    CHECK(d[1] == cd(0, 0));
    CHECK(d[2] == cd(0, 0));
    CHECK(d[3] == cd(0, 0));
}

TEST_CASE("bit value, amplitude and probability of QU-bit 0 in |00>") {
    const auto v = StateVector::basis(Radix(2), 2, LevelSpec::flat(2), 0);
    const int site = 0;
    const auto probs = v.outcome_probabilities(std::span<const int>(&site, 1));
    REQUIRE(probs.size() == 1);
    CHECK(probs.begin()->first == 0);
    CHECK(probs.begin()->second == doctest::Approx(1.0));
    CHECK(v.amplitude(0) == cd(1, 0));
}

TEST_CASE("s=3 basis with 10 link and 6 state bits allocates one block") {
    for (int per_level : {1, 2, 10}) {
        const auto spec = LevelSpec::with_link_bits(16, 10, per_level);
        const auto v = StateVector::basis(Radix(3), 16, spec, 0);
        CHECK(v.allocated_blocks() == 1);
        CHECK(v.block_size() == 729);
        CHECK(v.num_block_ids() == 59049);
        CHECK(v.norm_sq() == 1.0);
    }
}

TEST_CASE("amplitude queries do not allocate") {
    const auto spec = LevelSpec::with_link_bits(6, 4, 1);
    const auto v = StateVector::basis(Radix(2), 6, spec, 5);
    CHECK(v.amplitude(5) == cd(1, 0));
    CHECK(v.amplitude(6) == cd(0, 0));
    CHECK(v.amplitude(63) == cd(0, 0));
    CHECK(v.allocated_blocks() == 1);
}

TEST_CASE("equal superposition of one QU-bit has amplitudes of magnitude 1/sqrt2") {
    auto v = StateVector::basis(Radix(2), 1, LevelSpec::flat(1), 0);
    v.apply_pair_transform(eig(oracle::rot(M_PI / 2, 0.4)), 0, 0, 1);
    CHECK(std::abs(v.amplitude(0)) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(std::abs(v.amplitude(1)) == doctest::Approx(1 / std::sqrt(2.0)));
    const int site = 0;
    const auto p = v.outcome_probabilities(std::span<const int>(&site, 1));
    CHECK(p.at(0) == doctest::Approx(0.5));
    CHECK(p.at(1) == doctest::Approx(0.5));
}

TEST_CASE("identity transform leaves the vector unchanged") {
    std::mt19937_64 rng(3);
    const auto spec = LevelSpec::with_link_bits(5, 3, 1);
    StateVector v(Radix(2), 5, spec);
    oracle::Dense d(2, 5);
    v.set_amplitude(0, 1.0);
    for (int k = 0; k < 20; ++k) {
        random_op(rng, v, d);
    }
    const auto before = v.to_dense();
    v.apply_pair_transform(StateVector::Matrix2::Identity(), 2, 0, 1);
    CHECK(v.to_dense() == before);
}

TEST_CASE("controlled swap of a2 and a3 maps (|00>+|10>)/sqrt2 to (|00>+|11>)/sqrt2") {
    // Index = 2*q1 + q0.
    StateVector v(Radix(2), 2, LevelSpec::with_link_bits(2, 1, 1));
    const double h = 1 / std::sqrt(2.0);
    v.set_amplitude(0, h);
    v.set_amplitude(2, h);
    StateVector::Matrix2 x;
    x << 0, 1, 1, 0;
    v.apply_pair_transform(x, 0, 0, 1, {{1, 1}});
    CHECK(std::abs(v.amplitude(0) - h) < 1e-12);
    CHECK(std::abs(v.amplitude(1)) < 1e-12);
    CHECK(std::abs(v.amplitude(2)) < 1e-12);
    CHECK(std::abs(v.amplitude(3) - h) < 1e-12);
}

TEST_CASE("s=3 single site, pi/2 rotation between levels 0 and 1") {
    auto v = StateVector::basis(Radix(3), 1, LevelSpec::flat(1), 0);
    v.apply_pair_transform(eig(oracle::rot(M_PI / 2, 0.0)), 0, 0, 1);
    CHECK(std::abs(v.amplitude(0) - cd(std::cos(M_PI / 4), 0)) < 1e-12);
    CHECK(std::abs(v.amplitude(1) - cd(0, -std::sin(M_PI / 4))) < 1e-12);
    CHECK(v.amplitude(2) == cd(0, 0));
    CHECK(std::abs(v.norm_sq() - 1) < 1e-12);
}

TEST_CASE("pair transforms between levels 1 and 2 and 0 and 2") {
    auto v = StateVector::basis(Radix(3), 3, LevelSpec::with_link_bits(3, 2, 1), 0);
    oracle::Dense d(3, 3);
    const auto u = oracle::rot(1.1, 0.3);
    v.apply_pair_transform(eig(u), 2, 0, 1);
    d.pair(2, 0, 1, u);
    v.apply_pair_transform(eig(u), 2, 1, 2);
    d.pair(2, 1, 2, u);
    v.apply_pair_transform(eig(u), 0, 0, 2, {{2, 2}});
    d.pair(0, 0, 2, u, {{2, 2}});
    CHECK(max_diff(v, d) < 1e-14);
}

TEST_CASE("norm stays 1 after 10000 random pair transforms") {
    std::mt19937_64 rng(11);
    const auto spec = LevelSpec::with_link_bits(8, 5, 2);
    StateVector v = StateVector::basis(Radix(2), 8, spec, 0);
    oracle::Dense d(2, 8);
    for (int k = 0; k < 10000; ++k) {
        random_op(rng, v, d);
    }
    CHECK(std::abs(v.norm_sq() - 1) < 1e-9);
    CHECK(max_diff(v, d) < 1e-10);
}

TEST_CASE("hierarchical and flat backends agree on random sequences") {
    std::mt19937_64 rng(7);
    for (int s : {2, 3}) {
        const int m = s == 2 ? 7 : 5;
        for (int link = 0; link < m; ++link) {
            for (int per_level : {1, 2, 3}) {
                const auto spec = LevelSpec::with_link_bits(m, link, per_level);
                auto v = StateVector::basis(Radix(s), m, spec, 0);
                auto flat = StateVector::basis(Radix(s), m, LevelSpec::flat(m), 0);
                oracle::Dense d(s, m);
                std::mt19937_64 copy = rng;
                for (int k = 0; k < 60; ++k) {
                    random_op(rng, v, d);
                }
                oracle::Dense d2(s, m);
                for (int k = 0; k < 60; ++k) {
                    random_op(copy, flat, d2);
                }
                CHECK(max_diff(v, d) < 1e-12);
                CHECK(max_diff(flat, d) < 1e-12);
            }
        }
    }
}

TEST_CASE("absent regions read back as exact zeros") {
    const auto spec = LevelSpec::with_link_bits(6, 4, 2);
    auto v = StateVector::basis(Radix(2), 6, spec, 0);
    v.apply_pair_transform(eig(oracle::rot(M_PI / 2, 0)), 5, 0, 1);
    const auto dense = v.to_dense();
    for (std::size_t k = 0; k < dense.size(); ++k) {
        if (k != 0 && k != 32) {
            CHECK(dense[k] == cd(0, 0));
        }
    }
    CHECK(v.allocated_blocks() == 2);
}

TEST_CASE("allocation never shrinks") {
    std::mt19937_64 rng(5);
    const auto spec = LevelSpec::with_link_bits(7, 5, 1);
    auto v = StateVector::basis(Radix(2), 7, spec, 0);
    oracle::Dense d(2, 7);
    std::size_t blocks = v.allocated_blocks();
    for (int k = 0; k < 200; ++k) {
        random_op(rng, v, d);
        CHECK(v.allocated_blocks() >= blocks);
        blocks = v.allocated_blocks();
    }
    // Undoing a rotation zeroes amplitudes but keeps their blocks.
    auto w = StateVector::basis(Radix(2), 7, spec, 0);
    w.apply_pair_transform(eig(oracle::rot(M_PI / 2, 0)), 6, 0, 1);
    w.apply_pair_transform(eig(oracle::rot(-M_PI / 2, 0)), 6, 0, 1);
    CHECK(w.allocated_blocks() == 2);
    CHECK(std::abs(w.amplitude(64 - 1 + 1)) < 1e-15);
}

TEST_CASE("pairs with both sides absent are skipped") {
    const auto spec = LevelSpec::with_link_bits(6, 4, 1);
    auto v = StateVector::basis(Radix(2), 6, spec, 0);
    // Control on a digit no allocated state has.
    v.apply_pair_transform(eig(oracle::rot(1.0, 0)), 5, 0, 1, {{4, 1}});
    CHECK(v.allocated_blocks() == 1);
    CHECK(v.amplitude(0) == cd(1, 0));
}

TEST_CASE("non-unitary matrices are rejected") {
    auto v = StateVector::basis(Radix(2), 2, LevelSpec::flat(2), 0);
    StateVector::Matrix2 m;
    m << 1, 0, 0, 2;
    CHECK_THROWS_AS(v.apply_pair_transform(m, 0, 0, 1), std::invalid_argument);
    m << 1, 1e-9, 0, 1;
    CHECK_THROWS_AS(v.apply_pair_transform(m, 0, 0, 1), std::invalid_argument);
    CHECK(is_unitary<double>(StateVector::Matrix2::Identity()));
}

TEST_CASE("invalid sites, levels and controls are rejected") {
    auto v = StateVector::basis(Radix(3), 3, LevelSpec::flat(3), 0);
    const auto u = StateVector::Matrix2::Identity().eval();
    CHECK_THROWS(v.apply_pair_transform(u, 3, 0, 1));
    CHECK_THROWS(v.apply_pair_transform(u, 0, 1, 1));
    CHECK_THROWS(v.apply_pair_transform(u, 0, 0, 3));
    CHECK_THROWS(v.apply_pair_transform(u, 0, 0, 1, {{0, 1}}));
    CHECK_THROWS(v.apply_pair_transform(u, 0, 0, 1, {{1, 1}, {1, 2}}));
    CHECK_THROWS(v.apply_pair_transform(u, 0, 0, 1, {{1, 3}}));
    CHECK_THROWS(StateVector(Radix(2), 4, LevelSpec{{2}, 3}));
    CHECK_THROWS(Radix(4));
}

TEST_CASE("restriction limits a transform to matching states") {
    std::mt19937_64 rng(9);
    const auto spec = LevelSpec::with_link_bits(5, 3, 1);
    auto v = StateVector::basis(Radix(2), 5, spec, 0);
    oracle::Dense d(2, 5);
    for (int k = 0; k < 30; ++k) {
        random_op(rng, v, d);
    }
    const auto u = oracle::rot(0.9, 0.2);
    // Restrict + control must equal a single combined control list.
    v.apply_pair_transform(eig(u), 1, 0, 1, {{2, 1}}, {{4, 0}});
    d.pair(1, 0, 1, u, {{2, 1}, {4, 0}});
    CHECK(max_diff(v, d) < 1e-12);
    // Restriction conflicting with a control selects nothing.
    const auto before = v.to_dense();
    v.apply_pair_transform(eig(u), 1, 0, 1, {{2, 1}}, {{2, 0}});
    CHECK(v.to_dense() == before);
}

TEST_CASE("scale_levels and scale_all") {
    const auto spec = LevelSpec::with_link_bits(4, 2, 1);
    for (int site : {0, 3}) {
        auto v = StateVector::basis(Radix(2), 4, spec, 0);
        oracle::Dense d(2, 4);
        for (int k = 0; k < 4; ++k) {
            const auto u = oracle::rot(M_PI / 2, 0.1 * k);
            v.apply_pair_transform(eig(u), k, 0, 1);
            d.pair(k, 0, 1, u);
        }
        const double f[2] = {1.0, 0.5};
        v.scale_levels(site, f);
        for (std::uint64_t i = 0; i < d.a.size(); ++i) {
            if (d.digit(i, site) == 1) {
                d.a[i] *= 0.5;
            }
        }
        CHECK(max_diff(v, d) < 1e-15);
        v.scale_all(2.0);
        CHECK(v.norm_sq() == doctest::Approx(4 * d.norm_sq()));
    }
}

TEST_CASE("measuring a basis state returns its digits with certainty") {
    // |0110> written with site 3 first: digits of sites 3,2,1,0 = 0,1,1,0.
    const Index idx = 0 * 8 + 1 * 4 + 1 * 2 + 0;
    auto v = StateVector::basis(Radix(2), 4, LevelSpec::with_link_bits(4, 2, 1), idx);
    std::mt19937_64 rng(1);
    const std::vector<int> sites = {3, 2, 1, 0};
    const auto digits = v.measure_register(sites, rng);
    CHECK(digits == std::vector<int>{0, 1, 1, 0});
    CHECK(v.amplitude(idx) == cd(1, 0));
}

TEST_CASE("measurement statistics follow squared amplitudes") {
    int ones = 0;
    constexpr int kRuns = 4000;
    for (int r = 0; r < kRuns; ++r) {
        auto v = StateVector::basis(Radix(2), 1, LevelSpec::flat(1), 0);
        v.apply_pair_transform(eig(oracle::rot(M_PI / 2, 0)), 0, 0, 1);
        std::mt19937_64 rng(static_cast<std::uint64_t>(r));
        const int site = 0;
        ones += v.measure_register(std::span<const int>(&site, 1), rng)[0];
        CHECK(std::abs(v.norm_sq() - 1) < 1e-12);
    }
    // 5 sigma band around 2000.
    CHECK(std::abs(ones - kRuns / 2) < 5 * std::sqrt(kRuns / 4.0));
}

TEST_CASE("same seed, same outcome") {
    std::mt19937_64 gen(21);
    const auto spec = LevelSpec::with_link_bits(6, 3, 1);
    auto v = StateVector::basis(Radix(3), 6, spec, 0);
    oracle::Dense d(3, 6);
    for (int k = 0; k < 40; ++k) {
        random_op(gen, v, d);
    }
    const std::vector<int> sites = {0, 2, 5};
    auto a = v, b = v;
    std::mt19937_64 r1(99), r2(99);
    CHECK(a.measure_register(sites, r1) == b.measure_register(sites, r2));
    CHECK(a.to_dense() == b.to_dense());
}

TEST_CASE("collapse keeps matching states and renormalizes") {
    std::mt19937_64 gen(4);
    const auto spec = LevelSpec::with_link_bits(5, 2, 1);
    auto v = StateVector::basis(Radix(2), 5, spec, 0);
    oracle::Dense d(2, 5);
    for (int k = 0; k < 40; ++k) {
        random_op(gen, v, d);
    }
    const std::vector<int> sites = {4, 1};
    const auto marg = d.marginal(sites);
    const auto probs = v.outcome_probabilities(sites);
    for (const auto &[y, p] : probs) {
        CHECK(p == doctest::Approx(marg[y]).epsilon(1e-12));
    }
    v.collapse(sites, 2); // site 1 = 1, site 4 = 0
    CHECK(std::abs(v.norm_sq() - 1) < 1e-12);
    const auto dense = v.to_dense();
    for (std::uint64_t i = 0; i < dense.size(); ++i) {
        if (d.digit(i, 4) != 0 || d.digit(i, 1) != 1) {
            CHECK(dense[i] == cd(0, 0));
        } else {
            CHECK(std::abs(dense[i] - d.a[i] / std::sqrt(marg[2])) < 1e-12);
        }
    }
}

TEST_CASE("snapshot round trip") {
    std::mt19937_64 gen(8);
    const auto spec = LevelSpec::with_link_bits(5, 2, 1);
    auto v = StateVector::basis(Radix(3), 5, spec, 0);
    oracle::Dense d(3, 5);
    for (int k = 0; k < 30; ++k) {
        random_op(gen, v, d);
    }
    std::stringstream ss;
    write_snapshot(ss, v);
    CHECK(ss.str().rfind("s=3 M=5\n", 0) == 0);
    const auto w = read_snapshot<double>(ss, LevelSpec::flat(5));
    CHECK(w.to_dense() == v.to_dense());
}

TEST_CASE("single precision instantiation") {
    using SV = HierarchicalStateVector<float>;
    auto v = SV::basis(Radix(2), 6, LevelSpec::with_link_bits(6, 3, 1), 0);
    SV::Matrix2 h;
    const float r = 1 / std::sqrt(2.0F);
    h << r, r, r, -r;
    for (int k = 0; k < 6; ++k) {
        v.apply_pair_transform(h, k, 0, 1);
    }
    CHECK(std::abs(v.norm_sq() - 1.0F) < 1e-5F);
    CHECK(std::abs(v.amplitude(37) - std::complex<float>(0.125F, 0)) < 1e-6F);
}

TEST_CASE("block moves between vectors") {
    const auto spec = LevelSpec::with_link_bits(6, 3, 1);
    auto v = StateVector::basis(Radix(2), 6, spec, 9);
    StateVector w(Radix(2), 6, spec);
    const Index id = v.block_id_of(9);
    CHECK(v.has_block(id));
    w.install_block(id, v.take_block(id));
    CHECK_FALSE(v.has_block(id));
    CHECK(w.amplitude(9) == cd(1, 0));
    CHECK(v.norm_sq() == 0.0);
}
