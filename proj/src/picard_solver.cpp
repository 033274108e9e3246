#include "sfpe/picard_solver.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "sfpe/bel_weight.hpp"
#include "sfpe/errors.hpp"
#include "sfpe/parallel.hpp"
#include "sfpe/rng.hpp"
#include "sfpe/sde_engine.hpp"
#include "sfpe/stats.hpp"

namespace sfpe {

SingularQuadrature singular_quadrature(double t, double T, std::size_t n_steps, SingularRule rule) {
    if (!(T > t) || !std::isfinite(t) || !std::isfinite(T)) {
        throw InvalidArgument("singular_quadrature: requires finite t < T");
    }
    if (n_steps < 2) {
        throw InvalidArgument("singular_quadrature: need at least two steps");
    }
    std::vector<double> nodes;
    std::vector<double> weights;
    nodes.reserve(n_steps + 1);
    weights.reserve(n_steps + 1);

    if (rule == SingularRule::RightRectangle) {
        const double h = (T - t) / static_cast<double>(n_steps);
        for (std::size_t k = 0; k <= n_steps; ++k) {
            nodes.push_back(k == n_steps ? T : t + static_cast<double>(k) * h);
            weights.push_back(k == 0 ? 0.0 : h);
        }
    } else {
        // r = t + u^2 on [t, t + ell]: int h(r) dr = int_0^sqrt(ell) h(t + u^2) 2u du,
        // trapezoid in u (the u = 0 end carries weight 0).
        const std::size_t m = std::max<std::size_t>(1, n_steps / 10);
        const std::size_t n_rest = n_steps - m;
        const double ell = 0.1 * (T - t);
        const double du = std::sqrt(ell) / static_cast<double>(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double u = static_cast<double>(k) * du;
            nodes.push_back(t + u * u);
            weights.push_back(2.0 * u * du);
        }
        const double split = t + ell;
        const double h = (T - split) / static_cast<double>(n_rest);
        for (std::size_t j = 0; j <= n_rest; ++j) {
            nodes.push_back(j == 0 ? split : (j == n_rest ? T : split + static_cast<double>(j) * h));
            weights.push_back(j == n_rest ? 0.0 : h);
        }
        // Half trapezoid weight at u = sqrt(ell).
        weights[m] += std::sqrt(ell) * du;
    }
    return {std::make_shared<const TimeGrid>(std::move(nodes)), std::move(weights)};
}

namespace {

constexpr double kMaxDivergedFraction = 1e-3;

struct NodeAccumulator {
    std::vector<RunningMoments> est;   // grid-major, m per grid
    std::vector<RunningMoments> diff;  // Phi(grid j) - Phi(grid 0), j >= 1
    std::size_t diverged = 0;

    NodeAccumulator() = default;
    NodeAccumulator(std::size_t n_grids, std::size_t m)
        : est(n_grids * m), diff((n_grids - 1) * m) {}

    void merge(const NodeAccumulator& other) {
        for (std::size_t i = 0; i < est.size(); ++i) {
            est[i].merge(other.est[i]);
        }
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i].merge(other.diff[i]);
        }
        diverged += other.diverged;
    }
};

struct SweepSetup {
    const Problem& problem;
    const McConfig& mc;
    std::vector<const ValueGrid*> grids;
    std::vector<SingularQuadrature> quads;  // one per time node
    unsigned threads = 1;
};

SweepSetup make_setup(const Problem& problem, const McConfig& mc,
                      std::vector<const ValueGrid*> grids) {
    problem.validate();
    mc.validate();
    const ValueGrid& layout = *grids.front();
    if (layout.dimension() != problem.dimension() ||
        layout.components() != problem.dimension() + 1 || layout.T() != problem.T) {
        throw InvalidArgument("apply_phi: grid does not match the problem");
    }
    for (const auto* g : grids) {
        if (!g->same_layout(layout)) {
            throw InvalidArgument("apply_phi: input grids must share node sets");
        }
    }
    SweepSetup setup{problem, mc, std::move(grids), {}, resolve_threads(mc.threads)};
    for (double t : layout.time_nodes()) {
        setup.quads.push_back(singular_quadrature(t, problem.T, mc.n_steps, mc.rule));
    }
    return setup;
}

std::uint64_t node_stream(const ValueGrid& layout, std::size_t ti, std::size_t si) {
    return static_cast<std::uint64_t>(ti * layout.n_space() + si);
}

void check_divergence(std::size_t diverged, std::size_t n_paths, std::size_t node) {
    if (static_cast<double>(diverged) > kMaxDivergedFraction * static_cast<double>(n_paths)) {
        throw FailedSweep("node " + std::to_string(node) + ": " + std::to_string(diverged) +
                              " of " + std::to_string(n_paths) + " paths diverged",
                          node);
    }
}

NodeAccumulator estimate_node(const SweepSetup& s, std::size_t ti, std::size_t si,
                              unsigned inner_threads) {
    const Problem& p = s.problem;
    const ValueGrid& layout = *s.grids.front();
    const std::size_t K = s.grids.size();
    const int d = p.dimension();
    const auto m = static_cast<std::size_t>(d + 1);
    const double t = layout.time_nodes()[ti];
    const double t_max = layout.t_max();
    const Vec x = layout.space_point(si);
    const SingularQuadrature& quad = s.quads[ti];
    const TimeGrid& grid = *quad.grid;
    const std::size_t last = grid.n_nodes() - 1;
    const double horizon = p.T - t;

    // Deterministic control values g(x) and f(r_k, x, w(r_k, x)).
    double g_x = 0.0;
    std::vector<double> f_x(K * grid.n_nodes(), 0.0);
    if (s.mc.control_variate) {
        g_x = p.g(x);
        std::array<double, kMaxDim + 1> buf{};
        for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t k = 1; k <= last; ++k) {
                if (quad.weights[k] == 0.0) {
                    continue;
                }
                const double r = grid[k];
                s.grids[j]->evaluate(std::min(r, t_max), x, std::span<double>(buf.data(), m));
                f_x[j * grid.n_nodes() + k] = p.f(r, x, std::span<const double>(buf.data(), m));
            }
        }
    }

    const SimulationOptions options{s.mc.tamed, p.domain};
    const RngSpec rng{s.mc.base_seed, node_stream(layout, ti, si)};

    auto fold = [&](NodeAccumulator& acc, PathBundle& path) {
        if (path.diverged()) {
            ++acc.diverged;
            return;
        }
        accumulate_Y(path, *p.coeffs);

        std::array<std::array<double, kMaxDim + 1>, 2> e{};
        std::array<double, kMaxDim + 1> w{};
        const Vec x_T = path.x(last);
        const double g_T = p.g(x_T);
        const Vec y_T = path.y(last);
        for (std::size_t j = 0; j < K; ++j) {
            e[j][0] = g_T;
            for (int i = 0; i < d; ++i) {
                e[j][static_cast<std::size_t>(i) + 1] = (g_T - g_x) * (y_T[i] / horizon);
            }
        }
        for (std::size_t k = 1; k <= last; ++k) {
            const double weight = quad.weights[k];
            if (weight == 0.0) {
                continue;
            }
            const double r = grid[k];
            const Vec x_r = path.x(k);
            const Vec y_r = path.y(k);
            const double gap = r - t;
            for (std::size_t j = 0; j < K; ++j) {
                s.grids[j]->evaluate(std::min(r, t_max), x_r, std::span<double>(w.data(), m));
                const double f_r = p.f(r, x_r, std::span<const double>(w.data(), m));
                e[j][0] += weight * f_r;
                const double coef = weight * (f_r - f_x[j * grid.n_nodes() + k]) / gap;
                for (int i = 0; i < d; ++i) {
                    e[j][static_cast<std::size_t>(i) + 1] += coef * y_r[i];
                }
            }
        }
        for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t c = 0; c < m; ++c) {
                acc.est[j * m + c].add(e[j][c]);
                if (j > 0) {
                    acc.diff[(j - 1) * m + c].add(e[j][c] - e[0][c]);
                }
            }
        }
    };

    NodeAccumulator acc = reduce_paths(*p.coeffs, x, quad.grid, s.mc.n_paths, rng, options,
                                       inner_threads, NodeAccumulator(K, m), fold);
    const std::size_t node = ti * layout.n_space() + si;
    check_divergence(acc.diverged, s.mc.n_paths, node);
    for (const auto& mom : acc.est) {
        if (!std::isfinite(mom.mean())) {
            throw FailedSweep("node " + std::to_string(node) + ": non-finite estimate", node);
        }
    }
    return acc;
}

/// Runs `work(ti, si, inner_threads)` over all nodes: across nodes when there
/// are enough of them, otherwise across path blocks inside each node.
template <class Result, class Work>
std::vector<Result> for_each_node(const ValueGrid& layout, unsigned threads, Work work) {
    const std::size_t n = layout.n_nodes();
    std::vector<Result> out(n);
    const std::size_t n_space = layout.n_space();
    if (threads > 1 && n >= threads) {
        parallel_for(n, threads, [&](std::size_t i) { out[i] = work(i / n_space, i % n_space, 1u); });
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = work(i / n_space, i % n_space, threads);
        }
    }
    return out;
}

std::vector<NodeAccumulator> run_sweep(const SweepSetup& setup) {
    return for_each_node<NodeAccumulator>(
        *setup.grids.front(), setup.threads,
        [&](std::size_t ti, std::size_t si, unsigned inner) {
            return estimate_node(setup, ti, si, inner);
        });
}

PhiEstimate collect(const std::vector<NodeAccumulator>& accs, const ValueGrid& layout,
                    std::size_t j) {
    PhiEstimate out{layout, layout, 0};
    const auto m = static_cast<std::size_t>(layout.components());
    for (std::size_t i = 0; i < accs.size(); ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            const auto& mom = accs[i].est[j * m + c];
            out.value.data()[i * m + c] = mom.mean();
            out.std_error.data()[i * m + c] = mom.std_error();
        }
        out.diverged += accs[i].diverged;
    }
    return out;
}

}  // namespace

PhiEstimate apply_phi(const ValueGrid& vf, const Problem& problem, const McConfig& mc) {
    const SweepSetup setup = make_setup(problem, mc, {&vf});
    return collect(run_sweep(setup), vf, 0);
}

PairedPhi apply_phi_paired(const ValueGrid& w1, const ValueGrid& w2, const Problem& problem,
                           const McConfig& mc) {
    const SweepSetup setup = make_setup(problem, mc, {&w1, &w2});
    const auto accs = run_sweep(setup);
    PairedPhi out{collect(accs, w1, 0), collect(accs, w1, 1), w1};
    const auto m = static_cast<std::size_t>(w1.components());
    for (std::size_t i = 0; i < accs.size(); ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            out.diff_std_error.data()[i * m + c] = accs[i].diff[c].std_error();
        }
    }
    return out;
}

ValueGrid feynman_kac_estimate(const ValueGrid& vf, const Problem& problem, const McConfig& mc) {
    const SweepSetup setup = make_setup(problem, mc, {&vf});
    const auto m = static_cast<std::size_t>(vf.components());
    const double t_max = vf.t_max();

    struct Acc {
        RunningMoments value;
        std::size_t diverged = 0;
        void merge(const Acc& o) {
            value.merge(o.value);
            diverged += o.diverged;
        }
    };

    const auto accs = for_each_node<Acc>(vf, setup.threads, [&](std::size_t ti, std::size_t si,
                                                                unsigned inner) {
        const SingularQuadrature& quad = setup.quads[ti];
        const std::size_t last = quad.grid->n_nodes() - 1;
        const Vec x = vf.space_point(si);
        std::array<double, kMaxDim + 1> w{};
        auto fold = [&](Acc& acc, PathBundle& path) {
            if (path.diverged()) {
                ++acc.diverged;
                return;
            }
            double e = problem.g(Vec(path.x(last)));
            for (std::size_t k = 1; k <= last; ++k) {
                if (quad.weights[k] == 0.0) {
                    continue;
                }
                const double r = (*quad.grid)[k];
                const Vec x_r = path.x(k);
                vf.evaluate(std::min(r, t_max), x_r, std::span<double>(w.data(), m));
                e += quad.weights[k] * problem.f(r, x_r, std::span<const double>(w.data(), m));
            }
            acc.value.add(e);
        };
        const SimulationOptions options{mc.tamed, problem.domain};
        const RngSpec rng{mc.base_seed, node_stream(vf, ti, si)};
        Acc acc = reduce_paths(*problem.coeffs, x, quad.grid, mc.n_paths, rng, options, inner,
                               Acc{}, fold);
        check_divergence(acc.diverged, mc.n_paths, ti * vf.n_space() + si);
        return acc;
    });

    ValueGrid out(vf.T(), vf.delta_T(), vf.time_nodes(), vf.axes(), 1);
    for (std::size_t i = 0; i < accs.size(); ++i) {
        out.data()[i] = accs[i].value.mean();
    }
    return out;
}

double lambda_star(double c_V, double L) {
    if (!(c_V > 0.0) || !(L > 0.0) || !std::isfinite(c_V) || !std::isfinite(L)) {
        throw InvalidArgument("lambda_star: c_V and L must be finite and > 0");
    }
    return c_V * c_V * L * L * std::numbers::pi * std::numbers::pi * std::numbers::pi;
}

double contraction_factor(double c_V, double L, double lambda) {
    if (!(lambda > 0.0)) {
        throw InvalidArgument("contraction_factor: lambda must be > 0");
    }
    const double pi3 = std::numbers::pi * std::numbers::pi * std::numbers::pi;
    return c_V * L * std::sqrt(pi3 / (4.0 * lambda));
}

ContractionProbeResult contraction_probe(const Problem& problem, const ValueGrid& w1,
                                         const ValueGrid& w2, double lambda, const McConfig& mc) {
    const WeightedNormSpec spec{lambda, problem.V, problem.T};
    ContractionProbeResult out;
    out.denominator = weighted_distance(w1, w2, spec);
    if (!(out.denominator > 0.0)) {
        throw InvalidArgument("contraction_probe: |w1 - w2|_lambda must be > 0");
    }
    const PairedPhi phi = apply_phi_paired(w1, w2, problem, mc);
    out.numerator = weighted_distance(phi.first.value, phi.second.value, spec);
    out.ratio = out.numerator / out.denominator;
    out.noise = weighted_norm(phi.diff_std_error, spec) / out.denominator;
    return out;
}

double estimate_c_V(const Problem& problem, const McConfig& mc) {
    problem.validate();
    const int d = problem.dimension();
    Vec center(d);
    Vec half(d);
    for (int i = 0; i < d; ++i) {
        const auto& ax = problem.axes[static_cast<std::size_t>(i)];
        center[i] = 0.5 * (ax.lo + ax.hi);
        half[i] = 0.5 * (ax.hi - ax.lo);
    }
    std::vector<Vec> points{center};
    for (int i = 0; i < d; ++i) {
        for (double sign : {-1.0, 1.0}) {
            Vec x = center;
            x[i] += sign * 0.5 * half[i];
            points.push_back(x);
        }
    }
    const std::size_t n_paths = std::clamp<std::size_t>(mc.n_paths, 100, 5000);
    const SimulationOptions options{mc.tamed, problem.domain};
    const unsigned threads = resolve_threads(mc.threads);
    double worst = 0.0;
    std::uint64_t stream = std::uint64_t{1} << 40;  // disjoint from node streams
    for (const Vec& x : points) {
        for (double frac : {0.125, 0.25, 0.5, 1.0}) {
            const auto report =
                lyapunov_condition_probe(*problem.coeffs, problem.V, 0.0, x, frac * problem.T,
                                         n_paths, mc.n_steps, RngSpec{mc.base_seed, stream++},
                                         options, threads);
            worst = std::max(worst, report.ci_high);
        }
    }
    return 1.25 * worst;
}

SolveResult solve(const Problem& problem, const McConfig& mc, double tol, std::size_t max_iters,
                  std::optional<double> lambda) {
    problem.validate();
    mc.validate();
    if (!(tol > 0.0)) {
        throw InvalidArgument("solve: tol must be > 0");
    }
    if (max_iters == 0) {
        throw InvalidArgument("solve: max_iters must be >= 1");
    }
    SolveDiagnostics diag;
    diag.tol = tol;
    if (lambda) {
        if (!(*lambda >= 0.0) || !std::isfinite(*lambda)) {
            throw InvalidArgument("solve: lambda must be finite and >= 0");
        }
        diag.lambda = *lambda;
        diag.c_V = problem.c_V.value_or(0.0);
    } else if (problem.L == 0.0) {
        diag.lambda = 0.0;
        diag.c_V = problem.c_V.value_or(0.0);
    } else {
        diag.c_V = problem.c_V ? *problem.c_V : estimate_c_V(problem, mc);
        diag.lambda = lambda_star(diag.c_V, problem.L);
    }
    const WeightedNormSpec spec{diag.lambda, problem.V, problem.T};

    ValueGrid v = problem.zero_grid();
    ValueGrid se = v;
    double previous = 0.0;
    int rising = 0;
    for (std::size_t k = 1; k <= max_iters; ++k) {
        const auto start = std::chrono::steady_clock::now();
        PhiEstimate est = apply_phi(v, problem, mc);
        SweepRecord rec;
        rec.iteration = k;
        rec.distance = weighted_distance(est.value, v, spec);
        rec.ratio = (k > 1 && previous > 0.0) ? rec.distance / previous : 0.0;
        rec.noise_floor = 3.0 * weighted_norm(est.std_error, spec);
        rec.max_std_error = *std::max_element(est.std_error.data().begin(),
                                              est.std_error.data().end());
        rec.diverged = est.diverged;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        v = std::move(est.value);
        se = std::move(est.std_error);
        diag.sweeps.push_back(rec);

        if (rec.distance <= tol) {
            diag.converged = true;
            break;
        }
        rising = (k > 1 && rec.ratio > 1.0 && rec.distance > rec.noise_floor) ? rising + 1 : 0;
        if (rising >= 3) {
            throw DivergingIteration("Picard distances grew for three consecutive sweeps", diag);
        }
        previous = rec.distance;
    }
    return {std::move(v), std::move(se), std::move(diag)};
}

IntegrabilityReport integrability_guard(const Problem& problem,
                                        const std::vector<std::pair<double, Vec>>& samples) {
    IntegrabilityReport out;
    const auto m = static_cast<std::size_t>(problem.dimension() + 1);
    const std::vector<double> zero(m, 0.0);
    for (const auto& [t, x] : samples) {
        const double g_ratio = std::abs(problem.g(x)) / problem.V(problem.T, x);
        double f_ratio = 0.0;
        if (t < problem.T) {
            f_ratio = std::abs(problem.f(t, x, zero)) * std::sqrt(problem.T - t) / problem.V(t, x);
        }
        if (!std::isfinite(g_ratio) || !std::isfinite(f_ratio)) {
            out.finite = false;
        } else {
            out.sup_terminal_ratio = std::max(out.sup_terminal_ratio, g_ratio);
            out.sup_nonlinearity_ratio = std::max(out.sup_nonlinearity_ratio, f_ratio);
        }
        ++out.n_samples;
    }
    return out;
}

double sampled_lipschitz_constant(const Problem& problem, std::size_t n, std::uint64_t seed,
                                  double scale) {
    problem.validate();
    const int d = problem.dimension();
    const auto m = static_cast<std::size_t>(d + 1);
    const CounterRng rng(seed, 0);
    const double t_hi = problem.T - problem.effective_delta_T();
    std::vector<double> u(1 + static_cast<std::size_t>(d) + 2 * m);
    std::vector<double> v(m);
    std::vector<double> w(m);
    Vec x(d);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rng.uniforms(i, 0, u);
        const double t = u[0] * t_hi;
        for (int a = 0; a < d; ++a) {
            const auto& ax = problem.axes[static_cast<std::size_t>(a)];
            x[a] = ax.lo + u[1 + static_cast<std::size_t>(a)] * (ax.hi - ax.lo);
        }
        double dist2 = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            v[c] = scale * (2.0 * u[1 + d + c] - 1.0);
            w[c] = scale * (2.0 * u[1 + d + m + c] - 1.0);
            dist2 += (v[c] - w[c]) * (v[c] - w[c]);
        }
        if (dist2 == 0.0) {
            continue;
        }
        worst = std::max(worst, std::abs(problem.f(t, x, v) - problem.f(t, x, w)) / std::sqrt(dist2));
    }
    return worst;
}

}  // namespace sfpe
