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

#include "qsv/circuits.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <utility>

namespace qsv {

namespace {

constexpr double kPi = std::numbers::pi;

GateOp not_gate(int site) { return Rotate{site, kPi, 0.0}; }

void append(std::vector<GateOp> &out, const std::vector<GateOp> &more) {
    out.insert(out.end(), more.begin(), more.end());
}

// Cuccaro majority / unmajority-and-add blocks.
void maj(std::vector<GateOp> &out, int c, int b, int a) {
    out.push_back(CNot{a, b});
    out.push_back(CNot{a, c});
    out.push_back(CCNot{c, b, a});
}

void uma(std::vector<GateOp> &out, int c, int b, int a) {
    out.push_back(CCNot{c, b, a});
    out.push_back(CNot{a, c});
    out.push_back(CNot{c, b});
}

void for_each_set_bit(std::uint64_t v, int width, auto &&fn) {
    for (int k = 0; k < width; ++k) {
        if ((v >> k) & 1U) {
            fn(k);
        }
    }
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

int SiteRange::at(int k) const {
    if (k < 0 || k >= count) {
        throw std::out_of_range("register offset out of range");
    }
    return first + k;
}

std::vector<int> SiteRange::sites() const {
    std::vector<int> out(static_cast<std::size_t>(count));
    std::iota(out.begin(), out.end(), first);
    return out;
}

RegisterLayout RegisterLayout::make(int L, int a_bits) {
    if (L < 1 || a_bits < 0) {
        throw std::invalid_argument("layout needs L >= 1 and a_bits >= 0");
    }
    RegisterLayout r;
    r.L = L;
    r.scratch = {0, L + 3};
    r.s_reg = {r.scratch.end(), L};
    r.p_reg = {r.s_reg.end(), L};
    r.a_reg = {r.p_reg.end(), a_bits};
    return r;
}

void RegisterLayout::validate() const {
    const SiteRange order[] = {scratch, s_reg, p_reg, a_reg};
    int next = 0;
    for (const auto &r : order) {
        if (r.first != next || r.count < 0) {
            throw std::invalid_argument("register ranges must tile [0, M)");
        }
        next = r.end();
    }
    if (scratch.count != L + 3 || s_reg.count != L || p_reg.count != L) {
        throw std::invalid_argument("register widths inconsistent with L");
    }
}

int bit_length(std::uint64_t n) {
    int bits = 0;
    while (n) {
        ++bits;
        n >>= 1U;
    }
    return bits;
}

FactoringSpec FactoringSpec::make(std::uint64_t N, std::uint64_t X, int a_bits) {
    FactoringSpec s;
    s.N = N;
    s.X = X;
    s.L = bit_length(N);
    s.a_bits = a_bits < 0 ? s.L + 1 : a_bits;
    s.validate();
    return s;
}

void FactoringSpec::validate() const {
    if (N < 3 || N >= (1ULL << 31)) {
        throw std::invalid_argument("N must lie in [3, 2^31)");
    }
    if (!(X > 1 && X < N) || std::gcd(X, N) != 1) {
        throw std::invalid_argument("X must satisfy 1 < X < N and gcd(X, N) = 1");
    }
    if (L != bit_length(N)) {
        throw std::invalid_argument("L must equal the bit length of N");
    }
    if (a_bits < 0 || a_bits > 30) {
        throw std::invalid_argument("a_bits must lie in [0, 30]");
    }
}

std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::prepare:
        return "prepare";
    case Phase::f_of_a:
        return "f(A)";
    case Phase::fft:
        return "fft";
    case Phase::measure:
        return "measure";
    }
    return "?";
}

Phase phase_from_string(std::string_view name) {
    for (Phase p : {Phase::prepare, Phase::f_of_a, Phase::fft, Phase::measure}) {
        if (to_string(p) == name) {
            return p;
        }
    }
    throw std::invalid_argument("unknown phase '" + std::string(name) + "'");
}

void Circuit::add(GateOp g, Phase p) {
    ops.push_back(std::move(g));
    phases.push_back(p);
}

void Circuit::append(const std::vector<GateOp> &gates, Phase p) {
    for (const auto &g : gates) {
        add(g, p);
    }
}

void Circuit::validate() const {
    if (num_sites < 1) {
        throw std::invalid_argument("circuit needs M >= 1");
    }
    if (ops.size() != phases.size()) {
        throw std::invalid_argument("one phase tag per op required");
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
        validate_gate(ops[i], num_sites);
        if (is_measure(ops[i]) != (phases[i] == Phase::measure)) {
            throw std::invalid_argument(
                "Measure ops belong to the measure phase and only there");
        }
    }
    if (layout) {
        layout->validate();
        if (layout->total_sites() != num_sites) {
            throw std::invalid_argument("layout does not cover the circuit");
        }
    }
    if (spec) {
        spec->validate();
    }
}

std::uint64_t Circuit::laser_ops() const { return count_lasers(ops, radix); }

std::size_t Circuit::count(Phase p) const {
    return static_cast<std::size_t>(std::count(phases.begin(), phases.end(), p));
}

std::vector<int> Circuit::measured_sites() const {
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        if (const auto *m = std::get_if<Measure>(&*it)) {
            return m->sites;
        }
    }
    return {};
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t n) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % n);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t n) {
    std::uint64_t r = 1 % n;
    base %= n;
    while (exp) {
        if (exp & 1U) {
            r = mulmod(r, base, n);
        }
        base = mulmod(base, base, n);
        exp >>= 1U;
    }
    return r;
}

std::optional<std::uint64_t> modinv(std::uint64_t a, std::uint64_t n) {
    std::int64_t t = 0, nt = 1;
    auto r = static_cast<std::int64_t>(n), nr = static_cast<std::int64_t>(a % n);
    while (nr != 0) {
        const std::int64_t q = r / nr;
        t = std::exchange(nt, t - q * nt);
        r = std::exchange(nr, r - q * nr);
    }
    if (r != 1) {
        return std::nullopt;
    }
    if (t < 0) {
        t += static_cast<std::int64_t>(n);
    }
    return static_cast<std::uint64_t>(t);
}

std::uint64_t classical_f(std::uint64_t A, const FactoringSpec &spec) {
    return powmod(spec.X, A, spec.N);
}

std::vector<GateOp> ripple_add(const RegisterLayout &lay) {
    std::vector<GateOp> out;
    const int n = lay.L;
    maj(out, lay.carry(), lay.s_reg.at(0), lay.b(0));
    for (int k = 1; k < n; ++k) {
        maj(out, lay.b(k - 1), lay.s_reg.at(k), lay.b(k));
    }
    out.push_back(CNot{lay.b(n - 1), lay.high()});
    for (int k = n - 1; k >= 1; --k) {
        uma(out, lay.b(k - 1), lay.s_reg.at(k), lay.b(k));
    }
    uma(out, lay.carry(), lay.s_reg.at(0), lay.b(0));
    return out;
}

std::vector<GateOp> ripple_sub(const RegisterLayout &lay) {
    return inverse(ripple_add(lay));
}

std::vector<GateOp> modulo_add(const RegisterLayout &lay, std::uint64_t contrib,
                               std::uint64_t N, int a_site, int p_site) {
    lay.validate();
    if (N < 2 || N >= (1ULL << lay.L)) {
        throw std::invalid_argument("modulo_add: N must fit in L bits");
    }
    if (contrib >= N) {
        throw std::invalid_argument("modulo_add: contribution must be < N");
    }
    for (int site : {a_site, p_site}) {
        if (site < 0 || site >= lay.total_sites() || lay.scratch.contains(site) ||
            lay.s_reg.contains(site)) {
            throw std::invalid_argument(
                "modulo_add: controls must lie outside S and scratch");
        }
    }
    if (a_site == p_site) {
        throw std::invalid_argument("modulo_add: controls must be distinct");
    }
    const int L = lay.L;
    const auto add = ripple_add(lay);
    const auto sub = ripple_sub(lay);

    std::vector<GateOp> load_c;
    for_each_set_bit(contrib, L,
                     [&](int k) { load_c.push_back(CCNot{a_site, p_site, lay.b(k)}); });
    std::vector<GateOp> load_n;
    for_each_set_bit(N, L, [&](int k) { load_n.push_back(not_gate(lay.b(k))); });
    std::vector<GateOp> flag_load_n;
    for_each_set_bit(N, L,
                     [&](int k) { flag_load_n.push_back(CNot{lay.flag(), lay.b(k)}); });

    std::vector<GateOp> out;
    // S += c
    append(out, load_c);
    append(out, add);
    append(out, load_c);
    // S -= N; the borrow lands in z and is copied to the flag.
    append(out, load_n);
    append(out, sub);
    append(out, load_n);
    out.push_back(CNot{lay.high(), lay.flag()});
    // S += N when the subtraction underflowed.
    append(out, flag_load_n);
    append(out, add);
    append(out, flag_load_n);
    // Clear the flag: it is set exactly when the result is >= c.
    append(out, load_c);
    append(out, sub);
    out.push_back(not_gate(lay.high()));
    out.push_back(CNot{lay.high(), lay.flag()});
    out.push_back(not_gate(lay.high()));
    append(out, add);
    append(out, load_c);
    return out;
}

std::vector<GateOp> modulo_multiply(const RegisterLayout &lay,
                                    const FactoringSpec &spec, int l) {
    spec.validate();
    if (l < 0 || l >= lay.a_reg.count) {
        throw std::invalid_argument("modulo_multiply: A bit out of range");
    }
    std::uint64_t c = spec.X % spec.N;
    for (int k = 0; k < l; ++k) {
        c = mulmod(c, c, spec.N);
    }
    const std::uint64_t cinv = *modinv(c, spec.N);
    const int a = lay.a_reg.at(l);
    const int L = lay.L;

    std::vector<GateOp> out;
    for (int p = 0; p < L; ++p) {
        append(out, modulo_add(lay, mulmod(c, (1ULL << p) % spec.N, spec.N),
                               spec.N, a, lay.p_reg.at(p)));
    }
    // Controlled swap of P and S.
    for (int k = 0; k < L; ++k) {
        const int s = lay.s_reg.at(k);
        const int p = lay.p_reg.at(k);
        out.push_back(CNot{s, p});
        out.push_back(CCNot{a, p, s});
        out.push_back(CNot{s, p});
    }
    // S now holds the old product; subtract cinv * P_new to clear it.
    for (int p = L - 1; p >= 0; --p) {
        append(out, inverse(modulo_add(
                        lay, mulmod(cinv, (1ULL << p) % spec.N, spec.N), spec.N,
                        a, lay.p_reg.at(p))));
    }
    return out;
}

std::vector<GateOp> inverse(const std::vector<GateOp> &gates) {
    std::vector<GateOp> out;
    out.reserve(gates.size());
    for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
        if (const auto *r = std::get_if<Rotate>(&*it)) {
            out.push_back(Rotate{r->site, -r->theta, r->phi});
        } else if (const auto *p = std::get_if<CPhase>(&*it)) {
            out.push_back(CPhase{p->control, p->target, -p->angle});
        } else if (is_measure(*it)) {
            throw std::invalid_argument("inverse: Measure is not invertible");
        } else {
            out.push_back(*it);
        }
    }
    return out;
}

std::vector<GateOp> hadamard(int site) {
    return {Rotate{site, kPi, 0.0}, Rotate{site, kPi / 2, -kPi / 2}};
}

GateOp superposition(int site) { return Rotate{site, kPi / 2, kPi / 2}; }

std::vector<GateOp> qft(const std::vector<int> &sites) {
    std::vector<GateOp> out;
    const int n = static_cast<int>(sites.size());
    for (int j = n - 1; j >= 0; --j) {
        append(out, hadamard(sites[static_cast<std::size_t>(j)]));
        for (int k = j - 1; k >= 0; --k) {
            out.push_back(CPhase{sites[static_cast<std::size_t>(k)],
                                 sites[static_cast<std::size_t>(j)],
                                 kPi / static_cast<double>(1ULL << (j - k))});
        }
    }
    return out;
}

std::vector<int> qft_readout_order(const std::vector<int> &sites) {
    return {sites.rbegin(), sites.rend()};
}

Circuit build_factor_circuit(const FactoringSpec &spec, Radix s) {
    spec.validate();
    Circuit c;
    const auto lay = RegisterLayout::make(spec.L, spec.a_bits);
    c.num_sites = lay.total_sites();
    c.radix = s;
    c.layout = lay;
    c.spec = spec;
    c.name = "factor" + std::to_string(spec.N);
    c.add(not_gate(lay.p_reg.at(0)), Phase::prepare);
    for (int l = 0; l < spec.a_bits; ++l) {
        // Each A bit is rotated just before its multiply so later bits stay
        // unused (and unallocated) as long as possible.
        c.add(superposition(lay.a_reg.at(l)), Phase::prepare);
        c.append(modulo_multiply(lay, spec, l), Phase::f_of_a);
    }
    if (spec.a_bits > 0) {
        const auto a = lay.a_reg.sites();
        c.append(qft(a), Phase::fft);
        c.add(Measure{qft_readout_order(a)}, Phase::measure);
    }
    c.validate();
    return c;
}

Circuit build_multiply_circuit(const FactoringSpec &spec, Radix s) {
    FactoringSpec one = spec;
    one.a_bits = 1;
    one.validate();
    Circuit c;
    const auto lay = RegisterLayout::make(one.L, 1);
    c.num_sites = lay.total_sites();
    c.radix = s;
    c.layout = lay;
    c.spec = one;
    c.name = "mult" + std::to_string(one.N);
    c.add(not_gate(lay.p_reg.at(0)), Phase::prepare);
    c.add(superposition(lay.a_reg.at(0)), Phase::prepare);
    c.append(modulo_multiply(lay, one, 0), Phase::f_of_a);
    c.validate();
    return c;
}

std::uint64_t op_count_formula(std::uint64_t L) {
    return 252 * L * L * L + 8 * L * L + L + 3;
}

const std::vector<BenchmarkEntry> &benchmark_catalog() {
    static const std::vector<BenchmarkEntry> catalog = {
        {"Mult2", "Modulo Multiply, two state", "2^16", 7137, 10, 6, 2, 15, 7, 1, false},
        {"Mult3", "Modulo Multiply, three state", "3^16", 8854, 10, 6, 3, 15, 7, 1, false},
        {"f15_9bits", "Factor 15, 9 A bits", "2^24", 70904, 16, 8, 2, 15, 7, 9, true},
        {"f15_3bits", "Factor 15, 3 A bits", "2^18", 70793, 12, 6, 2, 15, 7, 3, true},
        {"f21", "Factor 21", "2^24", 139678, 16, 8, 2, 21, 2, 6, true},
        {"f35", "Factor 35", "2^28", 237798, 20, 8, 2, 35, 2, 7, true},
    };
    return catalog;
}

const BenchmarkEntry &find_benchmark(std::string_view name) {
    for (const auto &e : benchmark_catalog()) {
        if (e.name == name) {
            return e;
        }
    }
    throw std::invalid_argument("unknown benchmark '" + std::string(name) + "'");
}

Circuit make_benchmark(std::string_view name) {
    const auto &e = find_benchmark(name);
    const auto spec = FactoringSpec::make(e.N, e.X, e.a_bits);
    Circuit c = e.full ? build_factor_circuit(spec, Radix(e.radix))
                       : build_multiply_circuit(spec, Radix(e.radix));
    c.name = e.name;
    if (c.num_sites != e.total_bits()) {
        throw std::logic_error("benchmark " + e.name + " has " +
                               std::to_string(c.num_sites) + " sites, expected " +
                               std::to_string(e.total_bits()));
    }
    return c;
}

std::optional<std::uint64_t> recover_period(std::uint64_t y, int a_bits,
                                            const FactoringSpec &spec) {
    if (y == 0 || a_bits <= 0) {
        return std::nullopt;
    }
    const std::uint64_t Q = 1ULL << a_bits;
    // Convergents h/k of y/Q.
    std::uint64_t num = y, den = Q;
    std::uint64_t k_prev = 1, k = 0; // k_{-2}, k_{-1}
    while (den != 0) {
        const std::uint64_t a = num / den;
        const std::uint64_t k_next = a * k + k_prev;
        if (k_next > spec.N) {
            break;
        }
        k_prev = k;
        k = k_next;
        for (std::uint64_t r = k; r <= spec.N; r += k) {
            if (powmod(spec.X, r, spec.N) == 1) {
                return r;
            }
        }
        num = std::exchange(den, num - a * den);
    }
    return std::nullopt;
}

std::optional<std::pair<std::uint64_t, std::uint64_t>>
factors_from_period(std::uint64_t r, const FactoringSpec &spec) {
    if (r == 0 || r % 2 != 0) {
        return std::nullopt;
    }
    const std::uint64_t x = powmod(spec.X, r / 2, spec.N);
    if (x == spec.N - 1) {
        return std::nullopt;
    }
    const std::uint64_t f1 = std::gcd(x + spec.N - 1, spec.N);
    const std::uint64_t f2 = std::gcd(x + 1, spec.N);
    for (std::uint64_t f : {f1, f2}) {
        if (f > 1 && f < spec.N) {
            return std::pair{f, spec.N / f};
        }
    }
    return std::nullopt;
}

void write_circuit(std::ostream &os, const Circuit &c) {
    os << "s=" << c.radix.value() << " M=" << c.num_sites << '\n';
    if (!c.name.empty()) {
        os << "#@name " << c.name << '\n';
    }
    if (c.layout) {
        os << "#@layout " << c.layout->L << ' ' << c.layout->a_reg.count << '\n';
    }
    if (c.spec) {
        os << "#@spec " << c.spec->N << ' ' << c.spec->X << ' ' << c.spec->a_bits
           << '\n';
    }
    std::optional<Phase> current;
    for (std::size_t i = 0; i < c.ops.size(); ++i) {
        if (current != c.phases[i]) {
            current = c.phases[i];
            os << "#@phase " << to_string(*current) << '\n';
        }
        os << to_string(c.ops[i]) << '\n';
    }
}

Circuit read_circuit(std::istream &is) {
    Circuit c;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    Phase phase = Phase::f_of_a;
    auto fail = [&](const std::string &why) {
        throw std::runtime_error("circuit line " + std::to_string(lineno) + ": " +
                                 why);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        if (t.rfind("#@", 0) == 0) {
            std::istringstream ds(t.substr(2));
            std::string key;
            ds >> key;
            if (key == "phase") {
                std::string rest;
                std::getline(ds, rest);
                phase = phase_from_string(trim(rest));
            } else if (key == "name") {
                std::getline(ds, c.name);
                c.name = trim(c.name);
            } else if (key == "layout") {
                int L = 0, a = 0;
                if (!(ds >> L >> a)) {
                    fail("bad #@layout directive");
                }
                c.layout = RegisterLayout::make(L, a);
            } else if (key == "spec") {
                std::uint64_t N = 0, X = 0;
                int a = 0;
                if (!(ds >> N >> X >> a)) {
                    fail("bad #@spec directive");
                }
                c.spec = FactoringSpec::make(N, X, a);
            }
            continue;
        }
        if (t[0] == '#') {
            continue;
        }
        std::istringstream ls(t);
        if (!have_header) {
            int s = 0, m = 0;
            if (std::sscanf(t.c_str(), "s=%d M=%d", &s, &m) != 2) {
                fail("expected header 's=<s> M=<M>'");
            }
            c.radix = Radix(s);
            c.num_sites = m;
            have_header = true;
            continue;
        }
        std::string op;
        ls >> op;
        GateOp g;
        bool ok = false;
        if (op == "ROT") {
            Rotate r;
            ok = static_cast<bool>(ls >> r.site >> r.theta >> r.phi);
            g = r;
        } else if (op == "CNOT") {
            CNot x;
            ok = static_cast<bool>(ls >> x.control >> x.target);
            g = x;
        } else if (op == "CCNOT") {
            CCNot x;
            ok = static_cast<bool>(ls >> x.control1 >> x.control2 >> x.target);
            g = x;
        } else if (op == "CPHASE") {
            CPhase x;
            ok = static_cast<bool>(ls >> x.control >> x.target >> x.angle);
            g = x;
        } else if (op == "MEASURE") {
            Measure m;
            int site = 0;
            while (ls >> site) {
                m.sites.push_back(site);
            }
            ok = !m.sites.empty() && ls.eof();
            g = m;
        } else {
            fail("unknown op '" + op + "'");
        }
        std::string extra;
        if (!ok || (!is_measure(g) && (ls >> extra))) {
            fail("malformed " + op + " line");
        }
        const Phase p = is_measure(g) ? Phase::measure : phase;
        c.add(std::move(g), p);
    }
    if (!have_header) {
        throw std::runtime_error("circuit: missing header");
    }
    c.validate();
    return c;
}

Circuit load_circuit(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open circuit file '" + path + "'");
    }
    return read_circuit(in);
}

} // namespace qsv
