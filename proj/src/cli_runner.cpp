#include "sfpe/cli_runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "sfpe/bel_weight.hpp"
#include "sfpe/errors.hpp"
#include "sfpe/integral_identities.hpp"
#include "sfpe/parallel.hpp"
#include "sfpe/picard_solver.hpp"
#include "sfpe/problem_file.hpp"
#include "sfpe/rng.hpp"
#include "sfpe/sde_engine.hpp"
#include "sfpe/verification.hpp"

namespace sfpe {

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

/// Canonical description of a run; its hash identifies the configuration in
/// every report header. Thread counts and output paths are deliberately left
/// out so artifacts compare equal across worker counts and destinations.
class Canonical {
public:
    explicit Canonical(const std::string& command) { ss_ << command; }

    template <class T>
    Canonical& add(const std::string& key, const T& value) {
        ss_ << ';' << key << '=' << std::setprecision(17) << value;
        return *this;
    }

    std::uint64_t hash() const { return fnv1a64(ss_.str()); }

private:
    std::ostringstream ss_;
};

std::string header_line(std::uint64_t hash, std::uint64_t seed) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "# config_hash=%016" PRIx64 ",seed=%" PRIu64, hash, seed);
    return buf;
}

std::ofstream open_output(const std::string& path, const std::string& field,
                          std::ios::openmode mode = std::ios::out) {
    std::ofstream f(path, mode | std::ios::trunc);
    if (!f) {
        throw ConfigError(field, "cannot open output file '" + path + "'");
    }
    f << std::setprecision(17);
    return f;
}

Vec parse_point(const std::string& text, const Problem& p) {
    const int d = p.dimension();
    Vec x(d);
    if (text.empty()) {
        for (int i = 0; i < d; ++i) {
            const auto& ax = p.axes[static_cast<std::size_t>(i)];
            x[i] = 0.5 * (ax.lo + ax.hi);
        }
        return x;
    }
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw ConfigError("x", "--x: '" + item + "' is not a number");
        }
    }
    if (static_cast<int>(v.size()) != d) {
        throw ConfigError("x", "--x needs " + std::to_string(d) + " comma-separated values");
    }
    for (int i = 0; i < d; ++i) {
        x[i] = v[static_cast<std::size_t>(i)];
    }
    return x;
}

std::string format_point(const Vec& x) {
    std::ostringstream ss;
    ss << std::setprecision(17);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        ss << (i ? "," : "") << x[i];
    }
    return ss.str();
}

struct McOptions {
    std::size_t paths = 1000;
    std::size_t steps = 50;
    std::uint64_t seed = 0;
    std::string rule = "sqrt_substitution";
    bool no_control_variate = false;

    McConfig build(bool tamed, unsigned threads) const {
        McConfig mc;
        mc.n_paths = paths;
        mc.n_steps = steps;
        mc.base_seed = seed;
        mc.tamed = tamed;
        try {
            mc.rule = parse_singular_rule(rule);
        } catch (const InvalidArgument& e) {
            throw ConfigError("rule", e.what());
        }
        mc.control_variate = !no_control_variate;
        mc.threads = threads;
        try {
            mc.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(paths < 100 ? "paths" : "steps", e.what());
        }
        return mc;
    }

    void describe(Canonical& c) const {
        c.add("paths", paths).add("steps", steps).add("seed", seed).add("rule", rule).add(
            "control_variate", !no_control_variate);
    }
};

void add_mc_options(CLI::App* cmd, McOptions& o) {
    cmd->add_option("--paths", o.paths, "Monte-Carlo paths per grid node");
    cmd->add_option("--steps", o.steps, "time steps per path");
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--rule", o.rule, "singular quadrature: sqrt_substitution | right_rectangle");
    cmd->add_flag("--no-control-variate", o.no_control_variate,
                  "disable the g(x) / f(r, x, v) control values in the gradient slots");
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string problem;
    double t0 = 0.0;
    std::string x;
    std::size_t steps = 50;
    std::size_t paths = 100;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_simulate(const SimulateOptions& o, unsigned threads, std::ostream& log) {
    const ProblemFile pf = load_problem_file(o.problem);
    const Problem& p = pf.problem;
    const Vec x = parse_point(o.x, p);
    if (!(o.t0 < p.T) || !std::isfinite(o.t0)) {
        throw ConfigError("t0", "--t0 must be finite and below T");
    }
    if (o.steps < 1 || o.paths < 1) {
        throw ConfigError(o.steps < 1 ? "steps" : "paths", "--steps and --paths must be >= 1");
    }
    Canonical c("simulate");
    c.add("problem", fnv1a64(pf.text)).add("t0", o.t0).add("x", format_point(x));
    c.add("steps", o.steps).add("paths", o.paths).add("seed", o.seed);

    auto grid = std::make_shared<const TimeGrid>(TimeGrid::uniform(o.t0, p.T, o.steps));
    const auto paths = simulate_paths(*p.coeffs, o.t0, x, grid, o.paths, RngSpec{o.seed, 0},
                                      SimulationOptions{pf.tamed, p.domain}, threads);
    const int d = p.dimension();
    auto f = open_output(o.out, "out");
    f << header_line(c.hash(), o.seed) << '\n' << "path_id,s";
    for (int i = 1; i <= d; ++i) {
        f << ",X_" << i;
    }
    for (int i = 1; i <= d; ++i) {
        for (int j = 1; j <= d; ++j) {
            f << ",J_" << i << j;
        }
    }
    f << '\n';
    std::size_t diverged = 0;
    for (std::size_t id = 0; id < paths.size(); ++id) {
        const auto& path = paths[id];
        diverged += path.diverged() ? 1 : 0;
        for (std::size_t k = 0; k < path.n_nodes(); ++k) {
            f << id << ',' << (*grid)[k];
            const auto xk = path.x(k);
            for (int i = 0; i < d; ++i) {
                f << ',' << xk[i];
            }
            const auto jk = path.j(k);
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    f << ',' << jk(i, j);
                }
            }
            f << '\n';
        }
    }
    log << "simulate: " << paths.size() << " paths (" << diverged << " diverged) -> " << o.out
        << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- solve

struct SolveOptions {
    std::string problem;
    McOptions mc;
    double tol = 1e-3;
    std::size_t max_iters = 20;
    std::optional<double> lambda;
    std::string out_grid;
    std::string out_diag;
};

void write_diagnostics(const std::string& path, std::uint64_t hash, std::uint64_t seed,
                       const SolveDiagnostics& diag, const std::string& extra) {
    auto f = open_output(path, "out-diag");
    f << header_line(hash, seed) << '\n';
    f << "# lambda=" << diag.lambda << ",c_V=" << diag.c_V << ",tol=" << diag.tol
      << ",converged=" << (diag.converged ? "true" : "false") << '\n';
    if (!extra.empty()) {
        f << extra << '\n';
    }
    f << "iteration,distance,ratio,noise_floor,max_std_error,diverged\n";
    for (const auto& r : diag.sweeps) {
        f << r.iteration << ',' << r.distance << ',' << r.ratio << ',' << r.noise_floor << ','
          << r.max_std_error << ',' << r.diverged << '\n';
    }
}

std::string diag_path(const SolveOptions& o) {
    return o.out_diag.empty() ? o.out_grid + ".diag.csv" : o.out_diag;
}

void write_grid_file(const ValueGrid& grid, const std::string& path) {
    const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    auto f = open_output(path, "out-grid", csv ? std::ios::out : std::ios::out | std::ios::binary);
    if (csv) {
        write_grid_csv(grid, f);
    } else {
        write_grid_binary(grid, f);
    }
}

int cmd_solve(const SolveOptions& o, unsigned threads, std::ostream& log, std::uint64_t& hash_out) {
    const ProblemFile pf = load_problem_file(o.problem);
    const McConfig mc = o.mc.build(pf.tamed, threads);
    if (!(o.tol > 0.0)) {
        throw ConfigError("tol", "--tol must be > 0");
    }
    if (o.max_iters < 1) {
        throw ConfigError("max-iters", "--max-iters must be >= 1");
    }
    if (o.lambda && !(*o.lambda >= 0.0)) {
        throw ConfigError("lambda", "--lambda must be >= 0");
    }
    Canonical c("solve");
    c.add("problem", fnv1a64(pf.text)).add("tol", o.tol).add("max_iters", o.max_iters);
    c.add("lambda", o.lambda ? std::to_string(*o.lambda) : std::string("auto"));
    o.mc.describe(c);
    hash_out = c.hash();

    const SolveResult result = solve(pf.problem, mc, o.tol, o.max_iters, o.lambda);
    write_grid_file(result.v, o.out_grid);

    std::string extra;
    if (pf.reference) {
        const ComparisonRegion region{5.0 * pf.problem.effective_delta_T(), std::nullopt};
        const ErrorReport e = compare_to_reference(result.v, *pf.reference, region, pf.problem.V);
        std::ostringstream ss;
        ss << std::setprecision(17) << "# reference sup_value=" << e.sup_value
           << ",sup_grad=" << e.sup_grad << ",rms_value=" << e.rms_value
           << ",rms_grad=" << e.rms_grad << ",nodes=" << e.n_nodes;
        extra = ss.str();
    }
    write_diagnostics(diag_path(o), hash_out, o.mc.seed, result.diagnostics, extra);
    log << "solve: " << result.diagnostics.sweeps.size() << " sweeps, lambda="
        << result.diagnostics.lambda << ", final distance="
        << result.diagnostics.sweeps.back().distance
        << (result.diagnostics.converged ? " (converged)" : " (max iterations)") << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- verify integrals

struct IntegralOptions {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_verify_integrals(const IntegralOptions& o, std::ostream& log) {
    Canonical c("verify integrals");
    c.add("n", o.n).add("seed", o.seed);
    std::vector<SingularIntegralQuery> queries{
        {0.0, 1.0, 0.0}, {0.0, 2.0, 1.0}, {1.0, 3.0, 0.5}, {0.0, 1.0, 4.0}, {2.0, 3.0, 1.0}};
    const CounterRng rng(o.seed, 0);
    std::array<double, 3> u{};
    for (std::size_t i = 0; queries.size() < o.n + 5; ++i) {
        rng.uniforms(i, 0, u);
        const double a = 10.0 * std::min(u[0], u[1]);
        const double b = 10.0 * std::max(u[0], u[1]);
        if (b > a) {
            queries.push_back({a, b, 10.0 * u[2]});
        }
    }
    auto f = open_output(o.out, "out");
    f << header_line(c.hash(), o.seed) << '\n' << "a,b,lambda,value,bound,oracle,abs_err,pass\n";
    std::size_t failed = 0;
    for (const auto& q : queries) {
        const double value = singular_exp_integral(q);
        const double bound = q.lambda > 0.0 ? singular_exp_integral_bound(q)
                                            : std::numeric_limits<double>::infinity();
        const double oracle = singular_exp_integral_oracle(q);
        const double err = std::abs(value - oracle);
        const bool pass = err <= 1e-9 * (1.0 + std::abs(oracle)) && value <= bound;
        failed += pass ? 0 : 1;
        f << q.a << ',' << q.b << ',' << q.lambda << ',' << value << ',' << bound << ',' << oracle
          << ',' << err << ',' << (pass ? "true" : "false") << '\n';
    }
    log << "verify integrals: " << queries.size() << " rows, " << failed << " failing -> " << o.out
        << '\n';
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- verify moments

struct MomentOptions {
    std::string problem;
    double t0 = 0.0;
    std::string x;
    std::size_t steps = 50;
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_verify_moments(const MomentOptions& o, unsigned threads, std::ostream& log) {
    const ProblemFile pf = load_problem_file(o.problem);
    const Problem& p = pf.problem;
    const Vec x = parse_point(o.x, p);
    if (!(o.t0 < p.T)) {
        throw ConfigError("t0", "--t0 must be below T");
    }
    if (o.paths < 1000) {
        throw ConfigError("paths", "verify moments needs at least 1000 paths");
    }
    if (o.steps < 1) {
        throw ConfigError("steps", "--steps must be >= 1");
    }
    Canonical c("verify moments");
    c.add("problem", fnv1a64(pf.text)).add("t0", o.t0).add("x", format_point(x));
    c.add("steps", o.steps).add("paths", o.paths).add("seed", o.seed);

    auto grid = std::make_shared<const TimeGrid>(TimeGrid::uniform(o.t0, p.T, o.steps));
    const auto acc = reduce_paths(*p.coeffs, x, grid, o.paths, RngSpec{o.seed, 0},
                                  SimulationOptions{pf.tamed, p.domain}, threads,
                                  NodeMomentAccumulator(grid->n_nodes()),
                                  [&](NodeMomentAccumulator& a, PathBundle& path) {
                                      if (!path.diverged()) {
                                          accumulate_Y(path, *p.coeffs);
                                      }
                                      a.add(path);
                                  });
    const auto xj = moment_bound_report_X_J(acc, *p.coeffs, *grid, x);
    const auto z = z_moment_report(acc, *p.coeffs, *grid);
    auto f = open_output(o.out, "out");
    f << header_line(c.hash(), o.seed) << '\n'
      << "s,emp_EX2,bound_i,emp_EJ2,bound_ii,emp_EY2,bound_iii,emp_EZ2,bound_iv,pass\n";
    std::size_t failed = 0;
    for (std::size_t k = 1; k < grid->n_nodes(); ++k) {
        const auto& a = xj.rows[k];
        const auto& b = z.rows[k - 1];
        const bool pass = a.pass && b.pass;
        failed += pass ? 0 : 1;
        f << a.s << ',' << a.emp_x2 << ',' << a.bound_i << ',' << a.emp_j2 << ',' << a.bound_ii
          << ',' << b.emp_y2 << ',' << b.bound_iii << ',' << b.emp_z2 << ',' << b.bound_iv << ','
          << (pass ? "true" : "false") << '\n';
    }
    log << "verify moments: " << o.paths << " paths (" << acc.diverged << " diverged), " << failed
        << " failing rows -> " << o.out << '\n';
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
    std::string suite = "all";
    McOptions mc;
    double tol = 1e-6;
    std::size_t max_iters = 8;
    std::string out_md;
    std::string out_csv;
};

int cmd_bench(BenchOptions o, unsigned threads, std::ostream& log) {
    if (o.mc.paths == 1000) {
        // keep the default but make it explicit in the hash
    }
    std::vector<Benchmark> selected;
    if (o.suite == "all") {
        selected = benchmark_suite();
    } else {
        std::stringstream ss(o.suite);
        std::string name;
        while (std::getline(ss, name, ',')) {
            try {
                selected.push_back(find_benchmark(name));
            } catch (const InvalidArgument& e) {
                throw ConfigError("suite", e.what());
            }
        }
    }
    const McConfig mc = o.mc.build(false, threads);
    Canonical c("bench");
    c.add("suite", o.suite).add("tol", o.tol).add("max_iters", o.max_iters);
    o.mc.describe(c);
    const std::string header = header_line(c.hash(), o.mc.seed);

    auto md = open_output(o.out_md, "out-md");
    auto csv = open_output(o.out_csv, "out-csv");
    md << "<!-- " << header.substr(2) << " -->\n\n# Benchmark report\n\n"
       << "paths/node = " << mc.n_paths << ", steps = " << mc.n_steps << ", tol = " << o.tol
       << ", max sweeps = " << o.max_iters << "\n\n"
       << "| benchmark | sweeps | lambda | c_V | final distance | sup err value | sup err grad "
          "| rms value | rms grad | max SE |\n"
       << "|---|---|---|---|---|---|---|---|---|---|\n";
    csv << header << '\n'
        << "benchmark,sweeps,lambda,c_V,final_distance,sup_value,sup_grad,rms_value,rms_grad,"
           "max_std_error\n";
    for (const auto& b : selected) {
        const SolveResult r = solve(b.problem, mc, o.tol, o.max_iters);
        const ErrorReport e = compare_to_reference(r.v, b.reference, b.region, b.problem.V);
        const double max_se =
            *std::max_element(r.std_error.data().begin(), r.std_error.data().end());
        const auto& d = r.diagnostics;
        md << "| " << b.name << " | " << d.sweeps.size() << " | " << d.lambda << " | " << d.c_V
           << " | " << d.sweeps.back().distance << " | " << e.sup_value << " | " << e.sup_grad
           << " | " << e.rms_value << " | " << e.rms_grad << " | " << max_se << " |\n";
        csv << b.name << ',' << d.sweeps.size() << ',' << d.lambda << ',' << d.c_V << ','
            << d.sweeps.back().distance << ',' << e.sup_value << ',' << e.sup_grad << ','
            << e.rms_value << ',' << e.rms_grad << ',' << max_se << '\n';
        log << "bench: " << b.name << " sup_value=" << e.sup_value << " sup_grad=" << e.sup_grad
            << '\n';
    }
    md << "\n## Benchmarks\n\n";
    for (const auto& b : selected) {
        md << "- **" << b.name << "** (" << b.reference.provenance << "): " << b.description
           << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- probe contraction

struct ProbeOptions {
    std::string problem;
    McOptions mc;
    std::size_t pairs = 5;
    std::optional<double> lambda;
    double amplitude = 1.0;
    std::string out;
};

int cmd_probe_contraction(const ProbeOptions& o, unsigned threads, std::ostream& log) {
    const ProblemFile pf = load_problem_file(o.problem);
    const Problem& p = pf.problem;
    const McConfig mc = o.mc.build(pf.tamed, threads);
    if (o.pairs < 1) {
        throw ConfigError("pairs", "--pairs must be >= 1");
    }
    if (!(o.amplitude > 0.0)) {
        throw ConfigError("amplitude", "--amplitude must be > 0");
    }
    Canonical c("probe contraction");
    c.add("problem", fnv1a64(pf.text)).add("pairs", o.pairs).add("amplitude", o.amplitude);
    c.add("lambda", o.lambda ? std::to_string(*o.lambda) : std::string("auto"));
    o.mc.describe(c);

    double c_V = p.c_V.value_or(0.0);
    if (p.L > 0.0 && !p.c_V) {
        c_V = estimate_c_V(p, mc);
    }
    double lambda = 0.0;
    if (o.lambda) {
        lambda = *o.lambda;
    } else if (p.L > 0.0) {
        lambda = lambda_star(c_V, p.L);
    }
    double factor = 0.0;
    if (p.L > 0.0) {
        factor = lambda > 0.0 ? contraction_factor(c_V, p.L, lambda)
                              : std::numeric_limits<double>::infinity();
    }

    const ValueGrid layout = p.zero_grid();
    auto f = open_output(o.out, "out");
    f << header_line(c.hash(), o.mc.seed) << '\n' << "pair,lambda,c_V,factor,ratio,noise,pass\n";
    std::size_t failed = 0;
    const std::uint64_t base_stream = std::uint64_t{1} << 41;
    for (std::size_t i = 0; i < o.pairs; ++i) {
        const ValueGrid w1 = random_grid(layout, o.mc.seed, base_stream + 2 * i, o.amplitude);
        const ValueGrid w2 = random_grid(layout, o.mc.seed, base_stream + 2 * i + 1, o.amplitude);
        const auto r = contraction_probe(p, w1, w2, lambda, mc);
        const bool pass = r.ratio <= factor + 3.0 * r.noise;
        failed += pass ? 0 : 1;
        f << i << ',' << lambda << ',' << c_V << ',' << factor << ',' << r.ratio << ',' << r.noise
          << ',' << (pass ? "true" : "false") << '\n';
    }
    log << "probe contraction: lambda=" << lambda << ", factor bound=" << factor << ", " << failed
        << " failing pairs -> " << o.out << '\n';
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

void emit_error(std::ostream& err, int code, const std::string& kind, const std::string& message,
                const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json record{{"status", "error"}, {"exit_code", code}, {"kind", kind},
                          {"message", message}};
    record.update(extra);
    err << record.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte-Carlo solver for stochastic fixed point equations", "sfpe"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker count (default: $SFPE_THREADS or all cores)");

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "simulate paths with their Jacobians");
    c_sim->add_option("--problem", sim.problem, "problem file")->required();
    c_sim->add_option("--t0", sim.t0, "start time");
    c_sim->add_option("--x", sim.x, "start point, comma separated (default: box center)");
    c_sim->add_option("--steps", sim.steps, "time steps");
    c_sim->add_option("--paths", sim.paths, "number of paths");
    c_sim->add_option("--seed", sim.seed, "base seed");
    c_sim->add_option("--out", sim.out, "output CSV")->required();

    SolveOptions sol;
    auto* c_sol = app.add_subcommand("solve", "Picard iteration for the fixed point");
    c_sol->add_option("--problem", sol.problem, "problem file")->required();
    add_mc_options(c_sol, sol.mc);
    c_sol->add_option("--tol", sol.tol, "stop when the weighted sweep distance is below this");
    c_sol->add_option("--max-iters", sol.max_iters, "maximum number of sweeps");
    c_sol->add_option("--lambda", sol.lambda, "weight rate (default: c_V^2 L^2 pi^3)");
    c_sol->add_option("--out-grid", sol.out_grid, "grid output (.csv for text, else binary)")
        ->required();
    c_sol->add_option("--out-diag", sol.out_diag, "diagnostics CSV (default: <out-grid>.diag.csv)");

    auto* c_verify = app.add_subcommand("verify", "numerical checks");
    c_verify->require_subcommand(1);
    IntegralOptions ints;
    auto* c_int = c_verify->add_subcommand("integrals", "singular integral identity and bound");
    c_int->add_option("--n", ints.n, "number of random queries");
    c_int->add_option("--seed", ints.seed, "base seed");
    c_int->add_option("--out", ints.out, "output CSV")->required();
    MomentOptions mom;
    auto* c_mom = c_verify->add_subcommand("moments", "moment bounds for X, J, Y and Z");
    c_mom->add_option("--problem", mom.problem, "problem file")->required();
    c_mom->add_option("--t0", mom.t0, "start time");
    c_mom->add_option("--x", mom.x, "start point (default: box center)");
    c_mom->add_option("--steps", mom.steps, "time steps");
    c_mom->add_option("--paths", mom.paths, "number of paths (>= 1000)");
    c_mom->add_option("--seed", mom.seed, "base seed");
    c_mom->add_option("--out", mom.out, "output CSV")->required();

    BenchOptions bench;
    auto* c_bench = app.add_subcommand("bench", "run the benchmark suite");
    c_bench->add_option("--suite", bench.suite, "'all' or comma-separated benchmark names");
    add_mc_options(c_bench, bench.mc);
    c_bench->add_option("--tol", bench.tol, "sweep distance tolerance");
    c_bench->add_option("--max-iters", bench.max_iters, "maximum sweeps per benchmark");
    c_bench->add_option("--out-md", bench.out_md, "Markdown report")->required();
    c_bench->add_option("--out-csv", bench.out_csv, "CSV report")->required();

    auto* c_probe = app.add_subcommand("probe", "empirical probes");
    c_probe->require_subcommand(1);
    ProbeOptions probe;
    auto* c_con = c_probe->add_subcommand("contraction", "contraction ratio on random grid pairs");
    c_con->add_option("--problem", probe.problem, "problem file")->required();
    add_mc_options(c_con, probe.mc);
    c_con->add_option("--pairs", probe.pairs, "number of random grid pairs");
    c_con->add_option("--lambda", probe.lambda, "weight rate (default: c_V^2 L^2 pi^3)");
    c_con->add_option("--amplitude", probe.amplitude, "random grid amplitude");
    c_con->add_option("--out", probe.out, "output CSV")->required();

    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e, out, err);
        }
        emit_error(err, kExitConfig, "config", e.what(), {{"field", "command-line"}});
        return kExitConfig;
    }

    const unsigned workers = resolve_threads(threads);
    std::uint64_t solve_hash = 0;
    try {
        if (*c_sim) {
            return cmd_simulate(sim, workers, out);
        }
        if (*c_sol) {
            return cmd_solve(sol, workers, out, solve_hash);
        }
        if (*c_int) {
            return cmd_verify_integrals(ints, out);
        }
        if (*c_mom) {
            return cmd_verify_moments(mom, workers, out);
        }
        if (*c_bench) {
            return cmd_bench(bench, workers, out);
        }
        if (*c_con) {
            return cmd_probe_contraction(probe, workers, out);
        }
        emit_error(err, kExitConfig, "config", "no subcommand selected");
        return kExitConfig;
    } catch (const ConfigError& e) {
        emit_error(err, kExitConfig, "config", e.what(), {{"field", e.field()}});
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        emit_error(err, kExitConfig, "invalid-argument", e.what());
        return kExitConfig;
    } catch (const OutOfRange& e) {
        emit_error(err, kExitConfig, "out-of-range", e.what());
        return kExitConfig;
    } catch (const DivergingIteration& e) {
        const std::string path = diag_path(sol);
        write_diagnostics(path, solve_hash, sol.mc.seed, e.diagnostics(), "# diverging iteration");
        emit_error(err, kExitNumerical, "diverging-iteration", e.what(), {{"diagnostics", path}});
        return kExitNumerical;
    } catch (const FailedSweep& e) {
        nlohmann::json extra{{"node", e.node()}};
        if (*c_sol) {
            const std::string path = diag_path(sol);
            write_diagnostics(path, solve_hash, sol.mc.seed, SolveDiagnostics{}, "# failed sweep");
            extra["diagnostics"] = path;
        }
        emit_error(err, kExitNumerical, "failed-sweep", e.what(), extra);
        return kExitNumerical;
    } catch (const IllConditionedSigma& e) {
        emit_error(err, kExitNumerical, "ill-conditioned-sigma", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        emit_error(err, kExitCheckFailed, "internal", e.what());
        return kExitCheckFailed;
    }
}

}  // namespace sfpe
