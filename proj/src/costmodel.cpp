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

#include "qsv/costmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace qsv {

namespace {

double spow(Radix s, int e) { return std::pow(static_cast<double>(s.value()), e); }

const char *const kKeys[] = {"t_op2", "t_op3", "t_t", "t_lat", "t_b", "t_lr", "q"};

MachineParams from_map(const std::map<std::string, double> &kv, std::string name) {
    for (const char *k : kKeys) {
        if (!kv.contains(k)) {
            throw std::invalid_argument(std::string("machine parameters: missing key ") + k);
        }
    }
    for (const auto &[k, v] : kv) {
        if (std::find_if(std::begin(kKeys), std::end(kKeys),
                         [&](const char *x) { return k == x; }) == std::end(kKeys)) {
            throw std::invalid_argument("machine parameters: unknown key " + k);
        }
    }
    MachineParams mp{std::move(name), kv.at("t_op2"), kv.at("t_op3"), kv.at("t_t"),
                     kv.at("t_lat"),  kv.at("t_b"),   kv.at("t_lr"),  kv.at("q")};
    mp.validate();
    return mp;
}

} // namespace

MachineParams MachineParams::t3e() {
    return {"t3e", 1.5e-6, 9.0e-7, 4.5e-7, 6e-6, 1e-9, 8e-5, 16.0};
}

MachineParams MachineParams::sp2() {
    return {"sp2", 2.3e-6, 1.28e-6, 1e-6, 2e-5, 2e-8, 5e-4, 16.0};
}

MachineParams MachineParams::parse(std::istream &is, std::string name) {
    const std::string text((std::istreambuf_iterator<char>(is)),
                           std::istreambuf_iterator<char>());
    std::map<std::string, double> kv;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        const auto j = nlohmann::json::parse(text);
        for (const auto &[k, v] : j.items()) {
            kv[k] = v.get<double>();
        }
        return from_map(kv, std::move(name));
    }
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto eq = line.find_first_of("=:");
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        if (eq == std::string::npos) {
            throw std::invalid_argument("machine parameters: bad line '" + line + "'");
        }
        std::istringstream key(line.substr(0, eq));
        std::istringstream val(line.substr(eq + 1));
        std::string k;
        double v = 0.0;
        if (!(key >> k) || !(val >> v)) {
            throw std::invalid_argument("machine parameters: bad line '" + line + "'");
        }
        kv[k] = v;
    }
    return from_map(kv, std::move(name));
}

MachineParams MachineParams::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open machine file '" + path + "'");
    }
    return parse(in, path);
}

MachineParams MachineParams::named(const std::string &name_or_path) {
    if (name_or_path == "t3e") {
        return t3e();
    }
    if (name_or_path == "sp2") {
        return sp2();
    }
    if (name_or_path == "host") {
        return calibrate_host();
    }
    return load(name_or_path);
}

namespace {

template <typename Fn> double time_per(double units, Fn &&fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::max(dt / units, 1e-15);
}

StateVector filled(Radix s, int m, const LevelSpec &spec) {
    StateVector v(s, m, spec);
    v.set_amplitude(0, 1.0);
    const Matrix2 h = rotation(std::numbers::pi / 2, 0.3);
    for (int k = 0; k < m; ++k) {
        v.apply_pair_transform(h, k, 0, 1);
    }
    return v;
}

double state_op_time(Radix s, int m) {
    StateVector v = filled(s, m, LevelSpec::flat(m));
    const Matrix2 u = rotation(0.7, 0.1);
    constexpr int kOps = 24;
    const double pairs = std::pow(static_cast<double>(s.value()), m - 1);
    return time_per(kOps * pairs, [&] {
        for (int k = 0; k < kOps; ++k) {
            v.apply_pair_transform(u, k % m, 0, 1);
        }
    });
}

} // namespace

MachineParams MachineParams::calibrate_host() {
    MachineParams mp;
    mp.name = "host";
    mp.t_op2 = state_op_time(Radix(2), 18);
    mp.t_op3 = state_op_time(Radix(3), 11);

    // Traversal: one allocated block under a wide link level.
    {
        constexpr int kLink = 14;
        StateVector v = StateVector::basis(Radix(2), kLink + 4,
                                           LevelSpec::with_link_bits(kLink + 4, kLink, kLink), 0);
        const Matrix2 u = rotation(0.5, 0.0);
        constexpr int kOps = 64;
        mp.t_t = time_per(kOps * std::pow(2.0, kLink), [&] {
            for (int k = 0; k < kOps; ++k) {
                v.apply_pair_transform(u, k % 4, 0, 1);
            }
        });
    }
    // Message latency: a locked hand-off of a small message.
    {
        std::mutex m;
        std::vector<BlockMessage> box;
        constexpr int kMsgs = 20000;
        mp.t_lat = time_per(kMsgs, [&] {
            for (int k = 0; k < kMsgs; ++k) {
                std::lock_guard lk(m);
                box.push_back(BlockMessage{static_cast<Index>(k), nullptr});
            }
        });
    }
    // Bandwidth: bulk copy.
    {
        std::vector<char> a(std::size_t{32} << 20, 1), b(a.size());
        mp.t_b = time_per(static_cast<double>(a.size()), [&] {
            std::copy(a.begin(), a.end(), b.begin());
        });
    }
    // Per-block reorganization bookkeeping: remove and reinstall blocks.
    {
        constexpr int kLink = 12;
        StateVector v = filled(Radix(2), kLink + 2, LevelSpec::with_link_bits(kLink + 2, kLink, 1));
        const auto ids = v.allocated_block_ids();
        StateVector w(Radix(2), kLink + 2, LevelSpec::with_link_bits(kLink + 2, kLink, 1));
        mp.t_lr = time_per(static_cast<double>(ids.size()), [&] {
            for (Index id : ids) {
                w.install_block(id, v.take_block(id));
            }
        });
    }
    mp.validate();
    return mp;
}

void MachineParams::validate() const {
    for (double v : {t_op2, t_op3, t_t, t_lat, t_b, t_lr, q}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("machine parameters must be finite and > 0");
        }
    }
}

MachineParams MachineParams::scaled(double c) const {
    MachineParams m = *this;
    m.t_op2 *= c;
    m.t_op3 *= c;
    m.t_t *= c;
    m.t_lat *= c;
    m.t_b *= c;
    m.t_lr *= c;
    return m;
}

void StepProfile::validate() const {
    std::uint64_t sum = 0;
    int prev_b = 0;
    for (const auto &st : steps) {
        if (st.n_b < prev_b) {
            throw std::invalid_argument("profile: n_b must not decrease");
        }
        if (st.n_l > st.n_b || st.n_c > st.n_l || st.n_c < 0 || st.n_l < 0) {
            throw std::invalid_argument("profile: need 0 <= n_c <= n_l <= n_b");
        }
        prev_b = st.n_b;
        sum += st.l;
    }
    if (sum != l_total) {
        throw std::invalid_argument("profile: step lengths do not sum to l_total");
    }
}

StepProfile StepProfile::scaled_to(std::uint64_t target) const {
    StepProfile out = *this;
    if (l_total == 0 || steps.empty()) {
        return out;
    }
    // Round the running total so that the parts always add up to the target.
    const double f = static_cast<double>(target) / static_cast<double>(l_total);
    std::uint64_t cum = 0;
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < out.steps.size(); ++i) {
        cum += steps[i].l;
        const auto next = i + 1 == out.steps.size()
                              ? target
                              : static_cast<std::uint64_t>(
                                    std::llround(static_cast<double>(cum) * f));
        out.steps[i].l = next - prev;
        prev = next;
    }
    out.l_total = target;
    return out;
}

double t_reorg(int n_l, int n_b, int n_c, Radix s, const MachineParams &mp) {
    if (n_c < 0 || n_c > n_l || n_l > n_b) {
        throw std::invalid_argument("t_reorg: need 0 <= n_c <= n_l <= n_b");
    }
    if (n_c == 0) {
        return 0.0;
    }
    const double blocks = spow(s, n_l) - spow(s, n_l - n_c);
    return blocks * (mp.t_lat + mp.t_b * mp.q * spow(s, n_b - n_l) + mp.t_lr);
}

double t_dec(std::uint64_t l_total, const MachineParams &mp) {
    return 2.0 * static_cast<double>(l_total) * mp.t_lat;
}

double t_comp(std::uint64_t l, int n_b, int n_l, Radix s, const MachineParams &mp) {
    if (n_l < 0 || n_l > n_b || n_b < 1) {
        throw std::invalid_argument("t_comp: need 0 <= n_l <= n_b and n_b >= 1");
    }
    // No link levels means nothing to traverse.
    const double traverse = n_l == 0 ? 0.0 : spow(s, n_l) * mp.t_t;
    return static_cast<double>(l) * (traverse + spow(s, n_b - 1) * mp.t_op(s));
}

double t_seqflat(std::uint64_t l_total, int n_b_total, Radix s,
                 const MachineParams &mp) {
    // Flat structure: no link levels to traverse.
    return t_comp(l_total, n_b_total, 0, s, mp);
}

double t_seqdyn(const StepProfile &p, Radix s, const MachineParams &mp) {
    p.validate();
    double t = 0.0;
    for (const auto &st : p.steps) {
        t += t_comp(st.l, st.n_b, st.n_l, s, mp);
    }
    return t;
}

double t_par(const StepProfile &p, int n_p, Radix s, const MachineParams &mp) {
    p.validate();
    double t = 0.0;
    for (const auto &st : p.steps) {
        if (n_p < 0 || n_p > st.n_l) {
            throw std::invalid_argument("t_par: n_p exceeds the link bits of a step");
        }
        t += t_comp(st.l, st.n_b - n_p, st.n_l, s, mp) +
             t_reorg(st.n_l, st.n_b, st.n_c, s, mp);
    }
    return t;
}

double t_pardec(const StepProfile &p, int n_p, Radix s, const MachineParams &mp) {
    return 3.0 * t_par(p, n_p, s, mp) + t_dec(p.l_total, mp);
}

double t_seqdec(const StepProfile &p, Radix s, const MachineParams &mp) {
    return 3.0 * t_seqdyn(p, s, mp);
}

namespace {

struct BitTracker {
    std::vector<bool> used;
    int state_bits;
    int n_b;
    int n_l = 0;

    BitTracker(int num_sites, int sb)
        : used(static_cast<std::size_t>(num_sites), false), state_bits(sb), n_b(sb) {
        for (int k = 0; k < sb; ++k) {
            used[static_cast<std::size_t>(k)] = true;
        }
    }
    void mark(int site) {
        if (!used[static_cast<std::size_t>(site)]) {
            used[static_cast<std::size_t>(site)] = true;
            ++n_b;
            if (site >= state_bits) {
                ++n_l;
            }
        }
    }
};

} // namespace

namespace {

// Appends l ops at the current bit usage, merging with the previous entry
// when nothing changed. An entry without ops yet (a reorganization) takes
// the usage of the first gate after it.
void push_ops(StepProfile &p, std::uint64_t l, const BitTracker &bits, bool fresh) {
    auto *last = p.steps.empty() ? nullptr : &p.steps.back();
    if (!fresh && last != nullptr &&
        (last->l == 0 || (last->n_b == bits.n_b && last->n_l == bits.n_l))) {
        last->l += l;
        last->n_b = bits.n_b;
        last->n_l = bits.n_l;
    } else {
        p.steps.push_back({l, bits.n_b, bits.n_l, 0});
    }
    p.l_total += l;
}

} // namespace

StepProfile extract_profile(const Circuit &c, const StepPlan &plan,
                            const LevelSpec &spec) {
    spec.validate(c.num_sites);
    BitTracker bits(c.num_sites, spec.state_bits);
    StepProfile p;
    std::size_t expected_first = 0;
    for (const auto &step : plan.steps) {
        if (step.first != expected_first || step.last < step.first ||
            step.last > c.ops.size()) {
            throw std::invalid_argument("profile: plan does not tile the circuit");
        }
        expected_first = step.last;
        for (int b : step.plan.parallel_bits) {
            bits.mark(b);
        }
        // The reorganization happens at the usage reached so far; the
        // computation that follows grows the structure gate by gate.
        push_ops(p, 0, bits, true);
        p.steps.back().n_c = step.n_c;
        for (std::size_t i = step.first; i < step.last; ++i) {
            if (is_measure(c.ops[i])) {
                continue;
            }
            for (int site : gate_sites(c.ops[i])) {
                bits.mark(site);
            }
            push_ops(p, expand_to_lasers(c.ops[i], c.radix).size(), bits, false);
        }
    }
    if (expected_first != c.ops.size()) {
        throw std::invalid_argument("profile: plan does not cover the circuit");
    }
    p.n_b_total = bits.n_b;
    p.validate();
    return p;
}

StepProfile sequential_profile(const Circuit &c, const LevelSpec &spec) {
    spec.validate(c.num_sites);
    BitTracker bits(c.num_sites, spec.state_bits);
    StepProfile p;
    for (const auto &g : c.ops) {
        if (is_measure(g)) {
            continue;
        }
        for (int site : gate_sites(g)) {
            bits.mark(site);
        }
        push_ops(p, expand_to_lasers(g, c.radix).size(), bits, p.steps.empty());
    }
    p.n_b_total = bits.n_b;
    p.validate();
    return p;
}

Prediction predict(const std::string &benchmark, const Circuit &c,
                   const LevelSpec &spec, int n_p, const MachineParams &mp,
                   std::uint64_t l_total_override) {
    mp.validate();
    StepProfile seq = sequential_profile(c, spec);
    StepProfile par = n_p == 0 ? seq : extract_profile(c, plan_steps(c, n_p, spec), spec);
    if (l_total_override > 0) {
        seq = seq.scaled_to(l_total_override);
        par = par.scaled_to(l_total_override);
    }
    Prediction out;
    out.benchmark = benchmark;
    out.machine = mp.name;
    out.s = c.radix.value();
    out.n_p = n_p;
    out.t_seqflat = t_seqflat(seq.l_total, c.num_sites, c.radix, mp);
    out.t_seqdyn = t_seqdyn(seq, c.radix, mp);
    out.t_par = t_par(par, n_p, c.radix, mp);
    out.t_pardec = t_pardec(par, n_p, c.radix, mp);
    out.speedup = out.t_seqdyn / out.t_par;
    return out;
}

void write_csv_header(std::ostream &os) {
    os << "benchmark,machine,s,n_p,t_seqflat,t_seqdyn,t_par,t_pardec,speedup\n";
}

void write_csv_row(std::ostream &os, const Prediction &p) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(9) << p.benchmark << ',' << p.machine << ',' << p.s << ','
       << p.n_p << ',' << p.t_seqflat << ',' << p.t_seqdyn << ',' << p.t_par << ','
       << p.t_pardec << ',' << p.speedup << '\n';
    os.flags(flags);
    os.precision(prec);
}

} // namespace qsv
