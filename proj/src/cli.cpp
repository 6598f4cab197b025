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

#include "qsv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsv/circuits.hpp"
#include "qsv/costmodel.hpp"
#include "qsv/gates.hpp"
#include "qsv/parallel.hpp"
#include "qsv/statevec.hpp"

namespace qsv::cli {

using nlohmann::json;

namespace {

struct Options {
    std::string bench;
    std::string circuit;
    int radix = 0;
    int link_bits = -1;
    int state_bits = -1;
    std::string np = "0";
    double sigma_theta = 0.0;
    double decoherence = 0.0;
    std::uint64_t seed = 1;
    std::string machine;
    std::string out;
    std::string format = "json";
    std::size_t threads = 0;
    std::uint64_t laser_ops = 0;
    bool own_count = false;
    bool no_timing = false;
    std::string sweep;
    bool observe = false;
};

struct Loaded {
    Circuit circuit;
    LevelSpec spec;
    const BenchmarkEntry *entry = nullptr;
};

Circuit circuit_for(const Options &o, const BenchmarkEntry *&entry) {
    if (o.bench.empty() == o.circuit.empty()) {
        throw CLI::ValidationError("exactly one of --bench and --circuit is required");
    }
    if (!o.circuit.empty()) {
        Circuit c = load_circuit(o.circuit);
        if (o.radix != 0 && o.radix != c.radix.value()) {
            throw CLI::ValidationError("--radix differs from the circuit file");
        }
        return c;
    }
    entry = &find_benchmark(o.bench);
    if (o.radix == 0 || o.radix == entry->radix) {
        return make_benchmark(o.bench);
    }
    const auto fs = FactoringSpec::make(entry->N, entry->X, entry->a_bits);
    Circuit c = entry->full ? build_factor_circuit(fs, Radix(o.radix))
                            : build_multiply_circuit(fs, Radix(o.radix));
    c.name = entry->name;
    return c;
}

LevelSpec spec_for(int m, int link_bits) {
    if (link_bits < 0 || link_bits >= m) {
        throw CLI::ValidationError("link bits must lie in [0, " + std::to_string(m) + ")");
    }
    return LevelSpec::with_link_bits(m, link_bits, std::max(link_bits, 1));
}

Loaded load(const Options &o) {
    Loaded r;
    r.circuit = circuit_for(o, r.entry);
    const int m = r.circuit.num_sites;
    int link = std::max(0, m - 8);
    if (o.state_bits >= 0) {
        link = m - o.state_bits;
    } else if (o.link_bits >= 0) {
        link = o.link_bits;
    } else if (r.entry != nullptr && r.entry->total_bits() == m) {
        link = r.entry->link_bits;
    }
    r.spec = spec_for(m, link);
    return r;
}

ErrorModel error_model(const Options &o) {
    ErrorModel err{o.sigma_theta, o.decoherence, o.seed};
    err.validate();
    return err;
}

json config_json(const std::string &command, const Options &o, const Loaded &l) {
    json j = {
        {"command", command},
        {"benchmark", l.circuit.name},
        {"circuit_file", o.circuit},
        {"radix", l.circuit.radix.value()},
        {"sites", l.circuit.num_sites},
        {"gates", l.circuit.ops.size()},
        {"laser_ops", l.circuit.laser_ops()},
        {"link_bits", l.spec.link_bits()},
        {"state_bits", l.spec.state_bits},
        {"np", o.np},
        {"sigma_theta", o.sigma_theta},
        {"decoherence", o.decoherence},
        {"seed", o.seed},
        {"format", o.format},
    };
    if (!o.machine.empty()) {
        j["machine"] = o.machine;
    }
    return j;
}

void write_config_comments(std::ostream &os, const json &config) {
    for (const auto &[k, v] : config.items()) {
        os << "# " << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    }
}

double rounded(double p) { return std::round(p * 1e12) / 1e12; }

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

class Sink {
  public:
    Sink(const std::string &path, std::ostream &fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) {
                throw std::runtime_error("cannot write " + path);
            }
            os_ = &file_;
        }
    }
    std::ostream &operator*() { return *os_; }

  private:
    std::ofstream file_;
    std::ostream *os_;
};

RunResult execute(const Loaded &l, int n_p, const ErrorModel &err, std::size_t threads) {
    return n_p == 0 ? run_sequential(l.circuit, l.spec, err)
                    : run_parallel(l.circuit, n_p, l.spec, err, threads);
}

json timing_json(const RunStats &st) {
    return {{"threads", st.threads},
            {"compute_seconds", st.compute_seconds},
            {"link_seconds", st.link_seconds},
            {"comm_seconds", st.comm_seconds},
            {"total_seconds", st.total_seconds}};
}

int cmd_simulate(const Options &o, std::ostream &out) {
    const Loaded l = load(o);
    const auto nps = parse_int_list(o.np);
    if (nps.size() != 1) {
        throw CLI::ValidationError("simulate takes a single --np value");
    }
    const ErrorModel err = error_model(o);
    const RunResult r = execute(l, nps[0], err, o.threads);

    std::vector<int> sites = l.circuit.measured_sites();
    if (sites.empty() && l.circuit.layout) {
        sites = l.circuit.layout->a_reg.sites();
        std::reverse(sites.begin(), sites.end());
    }
    std::map<Index, double> hist;
    if (!sites.empty()) {
        for (const auto &[y, p] : r.state.outcome_probabilities(sites)) {
            if (rounded(p) > 0.0) {
                hist[y] = rounded(p);
            }
        }
    }

    json result = {{"norm_sq", rounded(r.state.norm_sq())}, {"measured_sites", sites}};
    json h = json::object();
    for (const auto &[y, p] : hist) {
        h[std::to_string(y)] = p;
    }
    result["histogram"] = h;
    if (!hist.empty()) {
        std::mt19937_64 rng(keyed_seed(o.seed, ~0ULL, 1));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double total = 0.0;
        for (const auto &kv : hist) {
            total += kv.second;
        }
        double pick = u(rng) * total;
        Index y = hist.rbegin()->first;
        for (const auto &[k, p] : hist) {
            if ((pick -= p) < 0.0) {
                y = k;
                break;
            }
        }
        result["sample"] = y;
        const auto &spec = l.circuit.spec;
        if (spec && l.circuit.measured_sites().size() == static_cast<std::size_t>(spec->a_bits)) {
            const auto period = recover_period(y, spec->a_bits, *spec);
            result["period"] = period ? json(*period) : json(nullptr);
            if (period) {
                const auto f = factors_from_period(*period, *spec);
                result["factors"] = f ? json{f->first, f->second} : json(nullptr);
            }
        }
    }

    Sink sink(o.out, out);
    const json config = config_json("simulate", o, l);
    if (o.format == "csv") {
        write_config_comments(*sink, config);
        *sink << "outcome,probability\n";
        for (const auto &[y, p] : hist) {
            *sink << y << ',' << std::setprecision(12) << p << '\n';
        }
        return 0;
    }
    json doc = {{"config", config}, {"result", result}, {"stats", to_json(r.stats, false)}};
    if (!o.no_timing) {
        doc["timing"] = timing_json(r.stats);
    }
    *sink << doc.dump(2) << '\n';
    return 0;
}

int cmd_predict(const Options &o, std::ostream &out) {
    const Loaded l = load(o);
    const MachineParams mp = MachineParams::named(o.machine.empty() ? "t3e" : o.machine);
    std::uint64_t l_total = o.laser_ops;
    if (l_total == 0 && !o.own_count && l.entry != nullptr &&
        l.circuit.radix.value() == l.entry->radix) {
        l_total = l.entry->laser_ops;
    }
    std::vector<Prediction> rows;
    for (int n_p : parse_int_list(o.np)) {
        rows.push_back(predict(l.circuit.name, l.circuit, l.spec, n_p, mp, l_total));
    }

    Sink sink(o.out, out);
    json config = config_json("predict", o, l);
    config["machine"] = mp.name;
    config["profile_laser_ops"] = l_total != 0 ? l_total : l.circuit.laser_ops();
    if (o.format == "csv") {
        write_config_comments(*sink, config);
        write_csv_header(*sink);
        for (const auto &p : rows) {
            write_csv_row(*sink, p);
        }
        return 0;
    }
    json arr = json::array();
    for (const auto &p : rows) {
        arr.push_back({{"benchmark", p.benchmark},
                       {"machine", p.machine},
                       {"s", p.s},
                       {"n_p", p.n_p},
                       {"t_seqflat", p.t_seqflat},
                       {"t_seqdyn", p.t_seqdyn},
                       {"t_par", p.t_par},
                       {"t_pardec", p.t_pardec},
                       {"speedup", p.speedup}});
    }
    *sink << json{{"config", config}, {"rows", arr}}.dump(2) << '\n';
    return 0;
}

double model_time(const Circuit &c, const LevelSpec &spec, int n_p, bool decoherent,
                  const MachineParams &mp) {
    if (n_p == 0) {
        const auto prof = sequential_profile(c, spec);
        return decoherent ? t_seqdec(prof, c.radix, mp) : t_seqdyn(prof, c.radix, mp);
    }
    const auto prof = extract_profile(c, plan_steps(c, n_p, spec), spec);
    return decoherent ? t_pardec(prof, n_p, c.radix, mp) : t_par(prof, n_p, c.radix, mp);
}

int cmd_sweep(const Options &o, std::ostream &out) {
    const Loaded base = load(o);
    const MachineParams mp = MachineParams::named(o.machine.empty() ? "t3e" : o.machine);
    const auto nps = parse_int_list(o.np);
    if (nps.size() != 1) {
        throw CLI::ValidationError("the link-bit sweep takes a single --np value");
    }
    const ErrorModel err = error_model(o);
    const bool dec = err.decoherence_rate > 0.0;

    struct Row {
        int link = 0;
        double predicted = 0.0;
        double observed = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<Row> rows;
    for (int link : parse_int_list(o.sweep)) {
        Loaded l = base;
        l.spec = spec_for(l.circuit.num_sites, link);
        if (link < nps[0]) {
            continue;
        }
        Row row{link};
        try {
            row.predicted = model_time(l.circuit, l.spec, nps[0], dec, mp);
        } catch (const std::invalid_argument &) {
            continue; // too few free link bits somewhere in the circuit
        }
        if (o.observe) {
            row.observed = execute(l, nps[0], err, o.threads).stats.total_seconds;
        }
        rows.push_back(row);
    }
    if (rows.empty()) {
        throw CLI::ValidationError("empty link-bit sweep");
    }
    double best_p = rows[0].predicted, best_o = rows[0].observed;
    for (const auto &r : rows) {
        best_p = std::min(best_p, r.predicted);
        best_o = std::min(best_o, r.observed);
    }

    Sink sink(o.out, out);
    json config = config_json("compare", o, base);
    config["machine"] = mp.name;
    config["sweep"] = o.sweep;
    if (o.format == "csv") {
        write_config_comments(*sink, config);
        *sink << "link_bits,state_bits,predicted_seconds,predicted_normalized";
        *sink << (o.observe ? ",observed_seconds,observed_normalized\n" : "\n");
        for (const auto &r : rows) {
            *sink << r.link << ',' << base.circuit.num_sites - r.link << ','
                  << fmt(r.predicted) << ',' << fmt(r.predicted / best_p);
            if (o.observe) {
                *sink << ',' << fmt(r.observed) << ',' << fmt(r.observed / best_o);
            }
            *sink << '\n';
        }
        return 0;
    }
    json arr = json::array();
    for (const auto &r : rows) {
        json j = {{"link_bits", r.link},
                  {"state_bits", base.circuit.num_sites - r.link},
                  {"predicted_seconds", r.predicted},
                  {"predicted_normalized", r.predicted / best_p}};
        if (o.observe) {
            j["observed_seconds"] = r.observed;
            j["observed_normalized"] = r.observed / best_o;
        }
        arr.push_back(j);
    }
    *sink << json{{"config", config}, {"rows", arr}}.dump(2) << '\n';
    return 0;
}

int cmd_compare(const Options &o, std::ostream &out) {
    if (!o.sweep.empty()) {
        return cmd_sweep(o, out);
    }
    const Loaded l = load(o);
    const MachineParams mp = MachineParams::named(o.machine.empty() ? "host" : o.machine);
    const ErrorModel err = error_model(o);
    const bool dec = err.decoherence_rate > 0.0;

    json arr = json::array();
    for (int n_p : parse_int_list(o.np)) {
        const RunResult r = execute(l, n_p, err, o.threads);
        const RunStats &st = r.stats;
        const double calc = model_time(l.circuit, l.spec, n_p, dec, mp);
        const double parts = st.compute_seconds + st.link_seconds + st.comm_seconds;
        auto pct = [&](double x) { return parts > 0.0 ? 100.0 * x / parts : 0.0; };
        arr.push_back({{"benchmark", l.circuit.name},
                       {"n_p", n_p},
                       {"workers", st.workers},
                       {"threads", st.threads},
                       {"observed_seconds", st.total_seconds},
                       {"calculated_seconds", calc},
                       {"relative_difference", (calc - st.total_seconds) / st.total_seconds},
                       {"compute_pct", pct(st.compute_seconds)},
                       {"link_pct", pct(st.link_seconds)},
                       {"comm_pct", pct(st.comm_seconds)},
                       {"reorg_steps", st.reorg_steps},
                       {"blocks_moved", st.blocks_moved}});
    }

    Sink sink(o.out, out);
    json config = config_json("compare", o, l);
    config["machine"] = mp.name;
    if (o.format == "csv") {
        write_config_comments(*sink, config);
        *sink << "benchmark,n_p,workers,observed_seconds,calculated_seconds,"
                 "relative_difference,compute_pct,link_pct,comm_pct\n";
        for (const auto &r : arr) {
            *sink << r["benchmark"].get<std::string>() << ',' << r["n_p"] << ','
                  << r["workers"] << ',' << fmt(r["observed_seconds"]) << ','
                  << fmt(r["calculated_seconds"]) << ',' << fmt(r["relative_difference"])
                  << ',' << fmt(r["compute_pct"]) << ',' << fmt(r["link_pct"]) << ','
                  << fmt(r["comm_pct"]) << '\n';
        }
        return 0;
    }
    *sink << json{{"config", config}, {"rows", arr}, {"machine_params",
                                                      {{"t_op2", mp.t_op2},
                                                       {"t_op3", mp.t_op3},
                                                       {"t_t", mp.t_t},
                                                       {"t_lat", mp.t_lat},
                                                       {"t_b", mp.t_b},
                                                       {"t_lr", mp.t_lr},
                                                       {"q", mp.q}}}}
                 .dump(2)
          << '\n';
    return 0;
}

int cmd_emit(const Options &o, std::ostream &out) {
    const Loaded l = load(o);
    Sink sink(o.out, out);
    write_circuit(*sink, l.circuit);
    return 0;
}

int cmd_catalog(const Options &o, std::ostream &out) {
    Sink sink(o.out, out);
    json arr = json::array();
    for (const auto &e : benchmark_catalog()) {
        const Circuit c = make_benchmark(e.name);
        arr.push_back({{"name", e.name},
                       {"description", e.description},
                       {"states", e.states},
                       {"reference_laser_ops", e.laser_ops},
                       {"link_bits", e.link_bits},
                       {"state_bits", e.state_bits},
                       {"radix", e.radix},
                       {"gates", c.ops.size()},
                       {"laser_ops", c.laser_ops()}});
    }
    if (o.format == "csv") {
        *sink << "name,description,states,reference_laser_ops,link_bits,state_bits,"
                 "radix,gates,laser_ops\n";
        for (const auto &r : arr) {
            *sink << r["name"].get<std::string>() << ",\""
                  << r["description"].get<std::string>() << "\","
                  << r["states"].get<std::string>() << ',' << r["reference_laser_ops"]
                  << ',' << r["link_bits"] << ',' << r["state_bits"] << ',' << r["radix"]
                  << ',' << r["gates"] << ',' << r["laser_ops"] << '\n';
        }
        return 0;
    }
    *sink << arr.dump(2) << '\n';
    return 0;
}

void add_common(CLI::App *sub, Options &o) {
    sub->add_option("--bench", o.bench, "catalog benchmark name");
    sub->add_option("--circuit", o.circuit, "circuit text file")->check(CLI::ExistingFile);
    sub->add_option("--radix", o.radix, "levels per site")->check(CLI::IsMember({2, 3}));
    sub->add_option("--link-bits", o.link_bits, "sites held in the link level");
    sub->add_option("--state-bits", o.state_bits, "sites held in value blocks");
    sub->add_option("--out", o.out, "output file (default stdout)");
    sub->add_option("--format", o.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

void add_errors(CLI::App *sub, Options &o) {
    sub->add_option("--sigma-theta", o.sigma_theta, "std. dev. of pulse angle errors")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--decoherence", o.decoherence, "amplitude damping rate per op")
        ->check(CLI::Range(0.0, 0.999999));
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--threads", o.threads, "host threads (0 = automatic)");
}

} // namespace

std::vector<int> parse_int_list(const std::string &text) {
    auto to_int = [&](const std::string &s) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(s, &pos);
        } catch (const std::exception &) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size() || v < 0) {
            throw CLI::ValidationError("bad integer list '" + text + "'");
        }
        return v;
    };
    std::vector<int> r;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const int lo = to_int(text.substr(0, dots));
        const int hi = to_int(text.substr(dots + 2));
        if (hi < lo) {
            throw CLI::ValidationError("empty range '" + text + "'");
        }
        for (int v = lo; v <= hi; ++v) {
            r.push_back(v);
        }
        return r;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        r.push_back(to_int(item));
    }
    if (r.empty()) {
        throw CLI::ValidationError("empty list");
    }
    return r;
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"qsv: hierarchical state-vector simulator for ion-trap circuits"};
    app.require_subcommand(1);
    Options o;

    auto *sim = app.add_subcommand("simulate", "run a circuit and report the readout histogram");
    add_common(sim, o);
    add_errors(sim, o);
    sim->add_option("--np", o.np, "parallel bits (workers = s^np)");
    sim->add_flag("--no-timing", o.no_timing, "omit wall-clock fields");

    auto *pred = app.add_subcommand("predict", "evaluate the execution-time model");
    add_common(pred, o);
    pred->add_option("--np", o.np, "parallel bits: N, A..B or A,B,C");
    pred->add_option("--machine", o.machine, "t3e, sp2, host or a parameter file");
    pred->add_option("--laser-ops", o.laser_ops, "scale the profile to this many laser ops");
    pred->add_flag("--own-count", o.own_count,
                   "use the generated circuit's laser-op count for catalog benchmarks");

    auto *cmp = app.add_subcommand("compare", "observed against calculated run times");
    add_common(cmp, o);
    add_errors(cmp, o);
    cmp->add_option("--np", o.np, "parallel bits: N, A..B or A,B,C");
    cmp->add_option("--machine", o.machine, "t3e, sp2, host (default) or a parameter file");
    cmp->add_option("--sweep-link-bits", o.sweep, "link-bit sweep, e.g. 4..12");
    cmp->add_flag("--observe", o.observe, "also time each sweep point");

    auto *emit = app.add_subcommand("emit", "write a benchmark circuit as text");
    add_common(emit, o);

    auto *cat = app.add_subcommand("catalog", "list the benchmark circuits");
    cat->add_option("--out", o.out, "output file (default stdout)");
    cat->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    std::vector<const char *> argv;
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (sim->parsed()) {
            return cmd_simulate(o, out);
        }
        if (pred->parsed()) {
            return cmd_predict(o, out);
        }
        if (cmp->parsed()) {
            return cmd_compare(o, out);
        }
        if (emit->parsed()) {
            return cmd_emit(o, out);
        }
        return cmd_catalog(o, out);
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err);
    } catch (const std::exception &e) {
        err << "qsv: " << e.what() << '\n';
        return 2;
    }
}

} // namespace qsv::cli
