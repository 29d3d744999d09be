// Command-line front end: runs a model from a sectioned key = value config,
// emits CSV curve data plus a run manifest, compares model routes against the
// Monte Carlo oracle, and reproduces the two variance figure families.
//
// Exit codes: 0 ok, 1 tolerance/invariant failure, 2 usage or config error.
// The manifest doubles as a config: comment lines carry versions, timings and
// diagnostics, followed by the fully resolved section text, so a run can be
// repeated byte-for-byte by pointing --config at its own manifest.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "microkin/microkin.hpp"

namespace fs = std::filesystem;
using namespace microkin;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;       // <0: take from config
    long long replicas = -1;   // <0: take from config
    bool quiet = false;
};

// ---------------------------------------------------------------------------
// small utilities

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw UsageError("empty value list: '" + s + "'");
    return out;
}

cfg::Config load_config(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw UsageError("cannot open config file: " + path);
    return cfg::parse_file(path);
}

fs::path resolve_out_dir(const CliArgs& cli, const cfg::Config& c) {
    std::string dir;
    if (!cli.out_dir.empty())
        dir = cli.out_dir;
    else if (c.has("experiment") && c.section("experiment").has("out"))
        dir = c.section("experiment").get_string("out");
    else if (const char* env = std::getenv("MICROKIN_OUT"); env && *env)
        dir = env;
    else
        dir = ".";
    fs::create_directories(dir);
    return dir;
}

// Bounded worker pool for independent sweep points; the caller writes the
// collected results in index order so output bytes never depend on timing.
template <typename Fn>
void parallel_for(int n_items, Fn&& fn) {
    int n_workers = static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::clamp(n_workers, 1, 8);
    n_workers = std::min(n_workers, n_items);
    if (n_workers <= 1) {
        for (int i = 0; i < n_items; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_items; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// run manifest

struct Manifest {
    std::string command;
    cfg::Config resolved;
    std::vector<std::string> outputs;      // file names, relative to out dir
    std::vector<std::string> diagnostics;  // "key = value" lines
    std::vector<std::string> flags;        // open-question flags raised
    std::string verdict;                   // compare only
    double elapsed_s = 0.0;
};

void write_manifest(const fs::path& dir, const Manifest& m) {
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw std::runtime_error("cannot open output file: " + (dir / "manifest.txt").string());
    out << "# microkin manifest\n";
    out << "# version = " << kVersion << "\n";
    out << "# compiler = " << __VERSION__ << "\n";
    out << "# command = " << m.command << "\n";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3f", m.elapsed_s);
    out << "# elapsed_seconds = " << buf << "\n";
    for (const auto& d : m.diagnostics) out << "# diag: " << d << "\n";
    for (const auto& f : m.flags) out << "# flag: " << f << "\n";
    if (!m.verdict.empty()) out << "# verdict = " << m.verdict << "\n";
    for (const auto& o : m.outputs) out << "# output: " << o << "\n";
    out << "\n" << cfg::serialize(m.resolved);
}

// ---------------------------------------------------------------------------
// config -> domain objects

core::Grid1D grid_from(const cfg::Config& c) {
    const auto& s = c.section("grid");
    core::Grid1D g;
    g.L = s.get_double_or("L", 1.0);
    g.n = static_cast<int>(s.get_int("n"));
    core::validate(g);
    return g;
}

core::ReactionRates rates_from(const cfg::Config& c) {
    const auto& s = c.section("rates");
    core::ReactionRates r;
    r.k1 = s.get_double_or("k1", 0.0);
    r.kminus1 = s.get_double_or("kminus1", 0.0);
    r.k2 = s.get_double_or("k2", 0.0);
    core::validate(r);
    return r;
}

core::SiteDensity sites_from(const cfg::Config& c, const core::Grid1D& g) {
    if (!c.has("sites")) return core::uniform_sites(g, 1);
    const auto& s = c.section("sites");
    const int per_cell = static_cast<int>(s.get_int_or("per_cell", 1));
    const std::string mode = s.get_string_or("mode", "uniform");
    core::SiteDensity sd;
    if (mode == "uniform")
        sd = core::uniform_sites(g, per_cell);
    else if (mode == "interval")
        sd = core::sites_on_interval(g, s.get_double("a"), s.get_double("b"), per_cell);
    else
        throw UsageError("unknown site mode: " + mode);
    core::validate(sd, g);
    return sd;
}

core::InitialDistribution initial_from(const cfg::Config& c, const core::Grid1D& g) {
    std::string kind = "uniform";
    if (c.has("initial")) kind = c.section("initial").get_string_or("kind", "uniform");
    if (kind == "uniform") return core::uniform_initial(g);
    if (kind == "cosine") return core::cosine_initial(g);
    throw UsageError("unknown initial distribution: " + kind);
}

core::BoundaryPair boundaries_from(const cfg::Config& c) {
    core::BoundaryPair bc;
    if (c.has("run") && c.section("run").has("boundaries")) {
        const std::string v = c.section("run").get_string("boundaries");
        const auto comma = v.find(',');
        if (comma == std::string::npos) {
            bc.left = bc.right = core::boundary_from_string(v);
        } else {
            bc.left = core::boundary_from_string(v.substr(0, comma));
            bc.right = core::boundary_from_string(v.substr(comma + 1));
        }
    }
    return bc;
}

pde::SolveOptions solve_options_from(const cfg::Config& c) {
    pde::SolveOptions opt;
    if (c.has("run")) {
        const auto& s = c.section("run");
        opt.t_end = s.get_double_or("t_end", opt.t_end);
        opt.dt = s.get_double_or("dt", opt.dt);
        opt.store_every = static_cast<int>(s.get_int_or("store_every", 0));
        opt.conservation_tol = s.get_double_or("conservation_tol", opt.conservation_tol);
    }
    if (opt.store_every == 0) {
        const long long nsteps = static_cast<long long>(std::ceil(opt.t_end / opt.dt));
        opt.store_every = static_cast<int>(std::max<long long>(1, nsteps / 200));
    }
    return opt;
}

renewal::PushPullParams pushpull_from(const cfg::Config& c) {
    const auto& s = c.section("pushpull");
    renewal::PushPullParams p;
    p.interval.L = s.get_double_or("L", 1.0);
    p.interval.D = s.get_double_or("D", 1.0);
    p.x1 = s.get_double_or("x1", 0.0);
    const std::string inj = s.get_string_or("injection", "uniform");
    if (inj == "uniform")
        p.injection = renewal::Injection::Uniform;
    else if (inj == "point")
        p.injection = renewal::Injection::Point;
    else
        throw UsageError("unknown injection kind: " + inj);
    p.y = s.get_double_or("y", 0.0);
    p.gamma = s.get_double_or("gamma", 0.0);
    p.k1 = s.get_double_or("k1", 0.0);
    renewal::validate(p);
    return p;
}

markov::BirthDeathSpec markov_from(const cfg::Config& c, double kminus1) {
    const auto& s = c.section("markov");
    markov::BirthDeathSpec spec;
    spec.S = static_cast<int>(s.get_int("S"));
    spec.M = static_cast<int>(s.get_int("M"));
    spec.tau1 = s.get_double("tau1");
    spec.kminus1 = kminus1;
    markov::validate(spec);
    return spec;
}

markov::MMSpec mm_from(const cfg::Config& c) {
    const auto& s = c.section("mm");
    markov::MMSpec spec;
    spec.M0 = static_cast<int>(s.get_int("M0"));
    spec.E0 = static_cast<int>(s.get_int("E0"));
    spec.kminus1 = s.get_double("kminus1");
    spec.k2 = s.get_double("k2");
    spec.tau1 = s.get_double("tau1");
    markov::validate(spec);
    return spec;
}

// diffusivity shared by the spatial models
double grid_D(const cfg::Config& c) {
    if (c.has("rates") && c.section("rates").has("D")) return c.section("rates").get_double("D");
    if (c.has("grid") && c.section("grid").has("D")) return c.section("grid").get_double("D");
    return 1.0;
}

long long seed_from(const CliArgs& cli, const cfg::Config& c) {
    if (cli.seed >= 0) return cli.seed;
    if (c.has("experiment")) return c.section("experiment").get_int_or("seed", 12345);
    return 12345;
}

mc::SimOptions sim_options_from(const cfg::Config& c) {
    mc::SimOptions opt;
    if (c.has("mc")) {
        const auto& s = c.section("mc");
        opt.sample_every = static_cast<int>(s.get_int_or("sample_every", opt.sample_every));
        opt.avg_start = s.get_double_or("avg_start", opt.avg_start);
    }
    return opt;
}

// ---------------------------------------------------------------------------
// run subcommand

void write_moment_csv(const fs::path& path, const pde::FieldSeries& series,
                      const core::SiteDensity& S0) {
    csv::Writer w(path.string(), {"t", "mean", "var", "fraction_bound"});
    for (const auto& f : series.snapshots) {
        const auto m = pde::moments_bound(f, S0);
        w.row({f.time, m.mean, m.variance, m.fraction});
    }
}

void write_fields_csv(const fs::path& path, const pde::FieldSeries& series) {
    csv::Writer w(path.string(), {"t", "x", "S", "p"});
    for (const auto& f : series.snapshots)
        for (int i = 0; i < f.grid.n; ++i)
            for (int b = 0; b < f.levels(i); ++b)
                w.row({f.time, f.grid.center(i), static_cast<double>(b), f.p[i][b]});
}

void write_ensemble_csv(const fs::path& path, const mc::EnsembleStats& e) {
    csv::Writer w(path.string(), {"t", "mean", "var", "se"});
    for (size_t i = 0; i < e.t.size(); ++i) w.row({e.t[i], e.mean[i], e.var[i], e.se[i]});
}

int cmd_run(const CliArgs& cli) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg::Config conf = load_config(cli.config_path);
    if (!conf.has("experiment")) throw UsageError("config needs an [experiment] section");
    const std::string model = conf.section("experiment").get_string("model");
    const long long seed = seed_from(cli, conf);
    conf.section("experiment").set("seed", seed);
    const fs::path dir = resolve_out_dir(cli, conf);

    Manifest man;
    man.command = "run " + model;
    man.diagnostics.push_back("seed = " + std::to_string(seed));

    if (model == "two_state" || model == "ladder") {
        const auto grid = grid_from(conf);
        const auto rates = rates_from(conf);
        const auto S0 = sites_from(conf, grid);
        const auto m0 = initial_from(conf, grid);
        const auto bc = boundaries_from(conf);
        auto opt = solve_options_from(conf);
        const double M0 = conf.section("experiment").get_double_or("M0", 1.0);
        conf.section("experiment").set("M0", M0);
        const auto series = (model == "two_state")
                                ? pde::solve_two_state(grid, grid_D(conf), rates, S0, m0, bc, M0, opt)
                                : pde::solve_ladder(grid, grid_D(conf), rates, S0, m0, bc, M0, opt);
        write_moment_csv(dir / (model + ".csv"), series, S0);
        write_fields_csv(dir / (model + "_fields.csv"), series);
        man.outputs.push_back(model + ".csv");
        man.outputs.push_back(model + "_fields.csv");
        man.diagnostics.push_back("steps = " + std::to_string(series.steps));
        man.diagnostics.push_back("max_mass_drift = " + fmt(series.max_mass_drift));
        if (model == "two_state")
            man.diagnostics.push_back(
                "steady_residual = " +
                fmt(pde::steady_residual_norm(series.final_state(), grid_D(conf), rates, S0, M0)));
    } else if (model == "boundary_binding") {
        const auto grid = grid_from(conf);
        const auto rates = rates_from(conf);
        const auto m0 = initial_from(conf, grid);
        auto opt = solve_options_from(conf);
        const int S0b = static_cast<int>(conf.section("sites").get_int("S0"));
        const double M0 = conf.section("experiment").get_double_or("M0", 1.0);
        conf.section("experiment").set("M0", M0);
        const auto series = pde::solve_boundary_binding(grid, grid_D(conf), rates, S0b, m0, M0, opt);
        csv::Writer w((dir / "boundary_binding.csv").string(), {"t", "mean", "var", "mass"});
        const double dx = grid.dx();
        for (const auto& st : series.snapshots)
            w.row({st.time, st.mean_bound(), st.variance_bound(), st.total_mass(dx)});
        man.outputs.push_back("boundary_binding.csv");
        man.diagnostics.push_back("max_conservation_drift = " + fmt(series.max_conservation_drift));
        man.diagnostics.push_back("max_prob_leak = " + fmt(series.max_prob_leak));
    } else if (model == "pushpull_renewal") {
        const auto p = pushpull_from(conf);
        const auto& r = conf.section("run");
        const double tau_min = r.get_double_or("tau_min", 1e-2);
        const double tau_max = r.get_double_or("tau_max", 1e2);
        const int n_tau = static_cast<int>(r.get_int_or("n_tau", 81));
        csv::Writer w((dir / "pushpull_renewal.csv").string(), {"tau", "Sbar", "nbar"});
        for (int i = 0; i < n_tau; ++i) {
            const double tau =
                tau_min * std::pow(tau_max / tau_min, static_cast<double>(i) / (n_tau - 1));
            w.row({tau, renewal::survival_laplace(tau, p), renewal::nbar_laplace(tau, p)});
        }
        man.outputs.push_back("pushpull_renewal.csv");
        man.diagnostics.push_back("survival_zero = " + fmt(renewal::survival_zero(p)));
        man.diagnostics.push_back("alpha = " + fmt(renewal::decay_rate_alpha(p)));
        man.diagnostics.push_back("steady_variance = " + fmt(renewal::steady_variance(p)));
        const auto sm = renewal::steady_mean(p);
        man.diagnostics.push_back("steady_mean_formula = " + fmt(sm.value));
        man.diagnostics.push_back("steady_mean_laplace = " + fmt(p.gamma * renewal::survival_zero(p)));
        if (!sm.in_domain) man.flags.push_back(sm.note);
    } else if (model == "pushpull_continuum") {
        const auto& s = conf.section("pushpull");
        renewal::ContinuumParams p;
        p.interval.L = s.get_double_or("L", 1.0);
        p.interval.D = s.get_double_or("D", 1.0);
        p.x1 = s.get_double_or("x1", 0.0);
        p.gamma = s.get_double_or("gamma", 0.0);
        p.k1 = s.get_double_or("k1", 0.0);
        const auto prof = renewal::continuum_profile(p);
        csv::Writer w((dir / "pushpull_continuum.csv").string(), {"x", "c"});
        for (size_t i = 0; i < prof.c.t.size(); ++i) w.row({prof.c.t[i], prof.c.v[i]});
        man.outputs.push_back("pushpull_continuum.csv");
        man.diagnostics.push_back("N0 = " + fmt(prof.N0));
    } else if (model == "markov") {
        const auto klist = parse_list(conf.section("markov").get_string("kminus1"));
        if (conf.has("sweep")) {
            const auto& sw = conf.section("sweep");
            const std::string param = sw.get_string("parameter");
            if (param != "M" && param != "S")
                throw UsageError("sweep axis must name an existing parameter (M or S), got '" +
                                 param + "'");
            const long long from = sw.get_int("from");
            const long long to = sw.get_int("to");
            const long long step = sw.get_int_or("step", 1);
            if (to < from || step <= 0) throw UsageError("empty sweep range");
            std::vector<long long> values;
            for (long long v = from; v <= to; v += step) values.push_back(v);
            std::vector<std::string> cols{param};
            for (double kv : klist) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "var_k%g", kv);
                cols.push_back(buf);
            }
            std::vector<std::vector<double>> rows(values.size());
            parallel_for(static_cast<int>(values.size()), [&](int i) {
                rows[i].push_back(static_cast<double>(values[i]));
                for (double kv : klist) {
                    auto spec = markov_from(conf, kv);
                    if (param == "M")
                        spec.M = static_cast<int>(values[i]);
                    else
                        spec.S = static_cast<int>(values[i]);
                    markov::validate(spec);
                    rows[i].push_back(markov::stationary_dist(spec).variance);
                }
            });
            csv::Writer w((dir / "markov_sweep.csv").string(), cols);
            for (const auto& row : rows) w.row(row);
            man.outputs.push_back("markov_sweep.csv");
            man.diagnostics.push_back("sweep_points = " + std::to_string(values.size()));
        } else {
            if (klist.size() != 1)
                throw UsageError("a kminus1 list needs a [sweep] section");
            const auto spec = markov_from(conf, klist[0]);
            const auto d = markov::stationary_dist(spec);
            csv::Writer w((dir / "markov.csv").string(), {"k", "n_open", "P"});
            for (size_t j = 0; j < d.P.size(); ++j) {
                const int k = d.k_min + static_cast<int>(j);
                w.row({static_cast<double>(k), static_cast<double>(spec.S - k), d.P[j]});
            }
            man.outputs.push_back("markov.csv");
            man.diagnostics.push_back("mean_open = " + fmt(d.mean_open));
            man.diagnostics.push_back("var_open = " + fmt(d.variance));
        }
    } else if (model == "mm") {
        const auto spec = mm_from(conf);
        const auto opt = solve_options_from(conf);
        const auto res = markov::mm_master(spec, opt.t_end, opt.dt);
        csv::Writer w((dir / "mm.csv").string(), {"t", "mean_product", "mean_bound"});
        const size_t stride = std::max<size_t>(1, res.t.size() / 400);
        for (size_t i = 0; i < res.t.size(); i += stride)
            w.row({res.t[i], res.mean_product[i], res.mean_bound[i]});
        man.outputs.push_back("mm.csv");
        man.diagnostics.push_back("max_leak = " + fmt(res.max_leak));
        man.diagnostics.push_back("final_mean_product = " + fmt(res.mean_product.back()));
    } else if (model == "pushpull_chain") {
        const auto& s = conf.section("chain");
        markov::PushPullChainSpec spec;
        spec.S = static_cast<int>(s.get_int("S"));
        spec.kminus1 = s.get_double("kminus1");
        spec.tau1 = s.get_double("tau1");
        spec.gamma = s.get_double("gamma");
        spec.Kminus1 = s.get_double("Kminus1");
        spec.q_max = static_cast<int>(s.get_int_or("q_max", 0));
        const std::string rule = s.get_string_or("rule", "total_minus_bound");
        if (rule == "literal_free_q")
            spec.rule = markov::AgonistRule::LiteralFreeQ;
        else if (rule != "total_minus_bound")
            throw UsageError("unknown agonist rule: " + rule);
        const auto opt = solve_options_from(conf);
        const auto series = markov::pushpull_chain(spec, opt.t_end, opt.dt);
        csv::Writer w((dir / "pushpull_chain.csv").string(),
                      {"t", "mean_open", "var_open", "mean_q"});
        const size_t stride = std::max<size_t>(1, series.t.size() / 400);
        for (size_t i = 0; i < series.t.size(); i += stride)
            w.row({series.t[i], series.moments[i].mean_open, series.moments[i].var_open,
                   series.moments[i].mean_q});
        man.outputs.push_back("pushpull_chain.csv");
        man.diagnostics.push_back("max_leak = " + fmt(series.max_leak));
        man.diagnostics.push_back("tail_mass = " + fmt(series.tail_mass));
        const auto st = markov::stationary_pushpull_chain(spec);
        man.diagnostics.push_back("stationary_mean_open = " + fmt(st.moments.mean_open));
        man.diagnostics.push_back("stationary_var_open = " + fmt(st.moments.var_open));
    } else if (model == "mc_model1" || model == "mc_boundary_binding") {
        const auto grid = grid_from(conf);
        const auto rates = rates_from(conf);
        const auto& s = conf.section("mc");
        const int M0 = static_cast<int>(conf.section("experiment").get_int_or("M0", 1));
        const double t_end = s.get_double("t_end");
        const double dt = s.get_double("dt");
        const long long R = (cli.replicas > 0) ? cli.replicas : s.get_int_or("R", 100);
        conf.section("mc").set("R", R);
        const auto opt = sim_options_from(conf);
        if (model == "mc_model1") {
            const auto S0 = sites_from(conf, grid);
            const auto bc = boundaries_from(conf);
            const auto e = mc::simulate_model1(grid, grid_D(conf), rates, S0, M0, bc, t_end, dt, R,
                                               seed, opt);
            write_ensemble_csv(dir / "mc_model1.csv", e);
            man.outputs.push_back("mc_model1.csv");
            man.diagnostics.push_back("steady_mean = " + fmt(e.steady_mean));
            man.diagnostics.push_back("steady_mean_se = " + fmt(e.steady_mean_se));
        } else {
            const int S0b = static_cast<int>(conf.section("sites").get_int("S0"));
            const auto bb = mc::simulate_boundary_binding(grid, grid_D(conf), rates, S0b, M0, t_end,
                                                          dt, R, seed, opt);
            csv::Writer w((dir / "mc_boundary_binding.csv").string(),
                          {"t", "mean", "var", "se", "interior_mean"});
            for (size_t i = 0; i < bb.bound.t.size(); ++i)
                w.row({bb.bound.t[i], bb.bound.mean[i], bb.bound.var[i], bb.bound.se[i],
                       bb.interior.mean[i]});
            man.outputs.push_back("mc_boundary_binding.csv");
            man.diagnostics.push_back("steady_mean = " + fmt(bb.bound.steady_mean));
            man.diagnostics.push_back("steady_mean_se = " + fmt(bb.bound.steady_mean_se));
        }
    } else if (model == "mc_pushpull") {
        const auto p = pushpull_from(conf);
        const auto& s = conf.section("mc");
        const double h = s.get_double_or("h", 0.01 * p.interval.L);
        const double t_end = s.get_double("t_end");
        const double dt = s.get_double("dt");
        const long long R = (cli.replicas > 0) ? cli.replicas : s.get_int_or("R", 100);
        conf.section("mc").set("R", R);
        const auto e = mc::simulate_pushpull(p, h, t_end, dt, R, seed, sim_options_from(conf));
        write_ensemble_csv(dir / "mc_pushpull.csv", e);
        man.outputs.push_back("mc_pushpull.csv");
        man.diagnostics.push_back("steady_mean = " + fmt(e.steady_mean));
        man.diagnostics.push_back("steady_mean_se = " + fmt(e.steady_mean_se));
        man.diagnostics.push_back("steady_var = " + fmt(e.steady_var));
    } else if (model == "mc_survival") {
        const auto p = pushpull_from(conf);
        const auto& s = conf.section("mc");
        const double t_max = s.get_double("t_max");
        const int n_points = static_cast<int>(s.get_int_or("n_points", 25));
        const long long R = (cli.replicas > 0) ? cli.replicas : s.get_int_or("R", 10000);
        conf.section("mc").set("R", R);
        std::vector<double> t_grid(n_points);
        for (int i = 0; i < n_points; ++i) t_grid[i] = t_max * (i + 1) / n_points;
        const auto est = mc::estimate_survival(p, t_grid, R, seed, s.get_double_or("dt", 0.0),
                                               s.get_double_or("h", 0.0));
        csv::Writer w((dir / "mc_survival.csv").string(), {"t", "S", "se"});
        for (size_t i = 0; i < est.t.size(); ++i) w.row({est.t[i], est.S[i], est.se[i]});
        man.outputs.push_back("mc_survival.csv");
        man.diagnostics.push_back("alpha_hat = " + fmt(est.alpha_hat));
        man.diagnostics.push_back("alpha_valid = " + std::to_string(est.alpha_valid ? 1 : 0));
        man.diagnostics.push_back("survivors_end = " + std::to_string(est.survivors_end));
    } else if (model == "mc_gillespie") {
        const auto klist = parse_list(conf.section("markov").get_string("kminus1"));
        if (klist.size() != 1) throw UsageError("mc_gillespie needs a single kminus1");
        const auto spec = markov_from(conf, klist[0]);
        const auto& s = conf.section("mc");
        const long long n_events = s.get_int_or("n_events", 10000);
        const auto occ = mc::gillespie_occupancy_events(spec, n_events, seed);
        csv::Writer w((dir / "mc_gillespie.csv").string(), {"k", "occupancy", "se"});
        for (size_t j = 0; j < occ.mean.size(); ++j)
            w.row({static_cast<double>(occ.k_min + static_cast<int>(j)), occ.mean[j], occ.se[j]});
        man.outputs.push_back("mc_gillespie.csv");
        man.diagnostics.push_back("mean_open = " + fmt(occ.mean_open));
        man.diagnostics.push_back("var_open = " + fmt(occ.var_open));
    } else if (model == "mc_mm") {
        const auto spec = mm_from(conf);
        const auto& s = conf.section("mc");
        const double t_end = s.get_double("t_end");
        const long long R = (cli.replicas > 0) ? cli.replicas : s.get_int_or("R", 1000);
        conf.section("mc").set("R", R);
        const auto g = mc::gillespie_mm(spec, t_end, R, seed,
                                        static_cast<int>(s.get_int_or("n_samples", 101)));
        csv::Writer w((dir / "mc_mm.csv").string(), {"t", "mean", "var", "se"});
        for (size_t i = 0; i < g.t.size(); ++i) w.row({g.t[i], g.mean[i], g.var[i], g.se[i]});
        man.outputs.push_back("mc_mm.csv");
    } else {
        throw UsageError("unknown model: " + model);
    }

    man.resolved = conf;
    man.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, man);
    if (!cli.quiet) {
        std::cout << "run " << model << ": wrote";
        for (const auto& o : man.outputs) std::cout << " " << (dir / o).string();
        std::cout << " (+" << (dir / "manifest.txt").string() << ")\n";
        for (const auto& f : man.flags) std::cout << "flag: " << f << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// compare subcommand

int cmd_compare(const CliArgs& cli) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg::Config conf = load_config(cli.config_path);
    if (!conf.has("compare")) throw UsageError("config needs a [compare] section");
    const std::string kind = conf.section("compare").get_string("kind");
    const long long seed = seed_from(cli, conf);
    const fs::path dir = resolve_out_dir(cli, conf);

    Manifest man;
    man.command = "compare " + kind;
    man.diagnostics.push_back("seed = " + std::to_string(seed));
    bool pass = true;

    if (kind == "pushpull_mean") {
        const auto p = pushpull_from(conf);
        const auto& s = conf.section("mc");
        const double h = s.get_double_or("h", 0.01 * p.interval.L);
        const double t_end = s.get_double_or("t_end", 10.0);
        const double dt = s.get_double_or("dt", 0.9 * h * h / (2.0 * p.interval.D));
        const long long R = (cli.replicas > 0) ? cli.replicas : s.get_int_or("R", 2000);
        conf.section("mc").set("R", R);

        const double trusted = p.gamma * renewal::survival_zero(p);
        const auto formula = renewal::steady_mean(p);
        renewal::ContinuumParams cp;
        cp.interval = p.interval;
        cp.x1 = p.x1;
        cp.gamma = p.gamma / p.interval.L;  // matched source density for uniform injection
        cp.k1 = p.k1;
        const double continuum = renewal::continuum_profile(cp).N0;
        const auto e = mc::simulate_pushpull(p, h, t_end, dt, R, seed, sim_options_from(conf));
        const double band = 3.0 * e.steady_mean_se;
        pass = std::abs(e.steady_mean - trusted) <= band;

        csv::Writer w((dir / "compare_pushpull_mean.csv").string(),
                       {"quantity", "value", "stderr", "note"});
        w.row_strings({"steady_mean_laplace", fmt(trusted), "0", "trusted analytic route"});
        w.row_strings({"steady_mean_continuum", fmt(continuum), "0", "uniform-source profile"});
        w.row_strings({"steady_mean_formula", fmt(formula.value), "0",
                       formula.in_domain ? "in-domain" : formula.note});
        w.row_strings({"steady_mean_mc", fmt(e.steady_mean), fmt(e.steady_mean_se),
                       pass ? "within 3 SE of trusted" : "OUTSIDE 3 SE of trusted"});
        man.outputs.push_back("compare_pushpull_mean.csv");
        man.diagnostics.push_back("trusted = " + fmt(trusted));
        man.diagnostics.push_back("mc = " + fmt(e.steady_mean) + " +/- " + fmt(e.steady_mean_se));
        man.diagnostics.push_back("formula = " + fmt(formula.value));
        man.diagnostics.push_back("formula_minus_trusted = " + fmt(formula.value - trusted));
        if (!formula.in_domain) man.flags.push_back(formula.note);
    } else if (kind == "markov_stationary") {
        const auto klist = parse_list(conf.section("markov").get_string("kminus1"));
        if (klist.size() != 1) throw UsageError("markov_stationary needs a single kminus1");
        const auto spec = markov_from(conf, klist[0]);
        const long long n_events =
            conf.has("mc") ? conf.section("mc").get_int_or("n_events", 100000) : 100000;
        const auto d = markov::stationary_dist(spec);
        const auto occ = mc::gillespie_occupancy_events(spec, n_events, seed);
        csv::Writer w((dir / "compare_markov_stationary.csv").string(),
                       {"k", "P_analytic", "P_mc", "se", "within_3se"});
        for (size_t j = 0; j < d.P.size(); ++j) {
            const double diff = std::abs(d.P[j] - occ.mean[j]);
            const double band = 3.0 * occ.se[j] + 1e-3;
            const bool ok = diff <= band;
            pass = pass && ok;
            w.row({static_cast<double>(d.k_min + static_cast<int>(j)), d.P[j], occ.mean[j],
                   occ.se[j], ok ? 1.0 : 0.0});
        }
        man.outputs.push_back("compare_markov_stationary.csv");
        man.diagnostics.push_back("n_events = " + std::to_string(n_events));
    } else {
        throw UsageError("unknown compare kind: " + kind);
    }

    man.verdict = pass ? "PASS" : "FAIL";
    man.resolved = conf;
    man.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, man);
    if (!cli.quiet) {
        std::cout << "compare " << kind << ": " << man.verdict << "\n";
        for (const auto& f : man.flags) std::cout << "flag: " << f << "\n";
    }
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// figure-data subcommand

int cmd_figure(const CliArgs& cli, const std::string& figure_id) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg::Config conf;
    if (!cli.config_path.empty()) conf = load_config(cli.config_path);
    const fs::path dir = resolve_out_dir(cli, conf);
    Manifest man;
    man.command = "figure-data " + figure_id;

    if (figure_id == "variance1") {
        const std::vector<double> ratios{0.5, 1.0, 2.0, 4.0};
        csv::Writer w((dir / "variance1.csv").string(),
                      {"M0", "var_r0.5", "var_r1", "var_r2", "var_r4"});
        for (int M0 = 0; M0 <= 2000; M0 += 2) {
            std::vector<double> row{static_cast<double>(M0)};
            for (double r : ratios) row.push_back(pde::variance_bound(M0 * r));
            w.row(row);
        }
        man.outputs.push_back("variance1.csv");
        conf.section("figure").set("id", std::string("variance1"));
    } else if (figure_id == "varianceMarkov") {
        const std::vector<double> ks{250.0, 500.0, 1000.0, 1500.0};
        const int m_max = 400;
        std::vector<std::vector<double>> rows(m_max + 1);
        parallel_for(m_max + 1, [&](int M) {
            rows[M].push_back(static_cast<double>(M));
            for (double kv : ks) {
                markov::BirthDeathSpec spec;
                spec.S = 10;
                spec.tau1 = 0.01;
                spec.M = M;
                spec.kminus1 = kv;
                rows[M].push_back(markov::stationary_dist(spec).variance);
            }
        });
        csv::Writer w((dir / "varianceMarkov.csv").string(),
                      {"M", "var_k250", "var_k500", "var_k1000", "var_k1500"});
        for (const auto& row : rows) w.row(row);
        man.outputs.push_back("varianceMarkov.csv");
        conf.section("figure").set("id", std::string("varianceMarkov"));
    } else {
        throw UsageError("unknown figure id: " + figure_id);
    }

    man.resolved = conf;
    man.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, man);
    if (!cli.quiet)
        std::cout << "figure-data " << figure_id << ": wrote "
                  << (dir / man.outputs.front()).string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// selftest subcommand

int cmd_selftest(const CliArgs& cli) {
    int fails = 0;
    auto check = [&](const char* name, bool ok) {
        if (!cli.quiet || !ok)
            std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++fails;
    };

    check("fraction_bound(2) == 1/2", std::abs(pde::fraction_bound(2.0) - 0.5) <= 1e-12);
    check("fraction_bound(6) == 1/3", std::abs(pde::fraction_bound(6.0) - 1.0 / 3.0) <= 1e-12);
    check("variance_bound peak 0.25 at rho = 2",
          std::abs(pde::variance_bound(2.0) - 0.25) <= 1e-12);

    {
        markov::BirthDeathSpec s;
        s.S = 4;
        s.M = 6;
        s.tau1 = 0.3;
        s.kminus1 = 2.0;
        const auto d = markov::stationary_dist(s);
        double worst = 0.0;
        for (size_t j = 1; j < d.P.size(); ++j) {
            const int k = d.k_min + static_cast<int>(j);
            worst = std::max(worst, std::abs(markov::binding_rate(k, s) * d.P[j] -
                                             s.kminus1 * (s.S - k + 1) * d.P[j - 1]));
        }
        check("detailed balance to 1e-10", worst <= 1e-10);
    }
    {
        const std::string text = "[a]\nx = 1.5\ny = hello\n\n[b]\nz = -2\n";
        const auto c = cfg::parse(text);
        check("config round-trip", cfg::parse(cfg::serialize(c)) == c);
    }
    {
        renewal::PushPullParams p;
        p.interval = {1.0, 1.0};
        p.x1 = 0.0;
        p.gamma = 2.0;
        p.k1 = 1.0;
        p.injection = renewal::Injection::Uniform;
        auto c = renewal::mean_transient(p, [](double) { return 1.0; }, 2.0, 1e-3);
        double worst = 0.0;
        for (size_t i = 0; i < c.t.size(); ++i)
            worst = std::max(worst, std::abs(c.v[i] - (1.0 + p.gamma * c.t[i])));
        check("renewal mean, constant survival", worst <= 1e-4);
    }
    check("M/M/infinity variance equals mean",
          std::abs(renewal::steady_variance_exponential(3.0, 1.5) - 2.0) <= 1e-12);
    {
        renewal::PushPullParams p;
        p.interval = {renewal::kPi, 1.0};
        p.x1 = 0.0;
        p.y = 0.0;
        p.injection = renewal::Injection::Point;
        p.gamma = 1.0;
        p.k1 = 1.0;
        check("normalized decay rate 1 + pi/3",
              std::abs(renewal::decay_rate_alpha(p) - (1.0 + renewal::kPi / 3.0)) <= 1e-12);
    }
    std::cout << (fails ? "selftest: FAIL\n" : "selftest: ok\n");
    return fails ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"microdomain binding kinetics toolkit"};
    app.require_subcommand(1);

    CliArgs cli;
    std::string figure_id;
    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", cli.config_path, "config file path");
        if (need_config) opt->required();
        sub->add_option("--out", cli.out_dir, "output directory");
        sub->add_option("--seed", cli.seed, "override the config seed");
        sub->add_option("--replicas", cli.replicas, "override Monte Carlo replica count");
        sub->add_flag("--quiet", cli.quiet, "suppress status output");
    };

    auto* run = app.add_subcommand("run", "run one model from a config");
    add_common(run, true);
    auto* compare = app.add_subcommand("compare", "cross-validate two model routes");
    add_common(compare, true);
    auto* figure = app.add_subcommand("figure-data", "emit a figure curve bundle");
    figure->add_option("figure_id", figure_id, "variance1 | varianceMarkov")->required();
    add_common(figure, false);
    auto* selftest = app.add_subcommand("selftest", "quick internal sanity checks");
    add_common(selftest, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(cli);
        if (compare->parsed()) return cmd_compare(cli);
        if (figure->parsed()) return cmd_figure(cli, figure_id);
        return cmd_selftest(cli);
    } catch (const cfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const core::ValidationError& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
