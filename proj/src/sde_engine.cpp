#include "sfpe/sde_engine.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "sfpe/errors.hpp"

namespace sfpe {

void PathBundle::reset(std::shared_ptr<const TimeGrid> g, int d) {
    grid = std::move(g);
    dim = d;
    const std::size_t n = grid->n_nodes();
    const auto du = static_cast<std::size_t>(d);
    X.assign(n * du, 0.0);
    J.assign(n * du * du, 0.0);
    dW.assign((n - 1) * du, 0.0);
    Y.assign(n * du, 0.0);
    y_filled = false;
    diverged_at.reset();
}

void simulate_path(const CoefficientSet& coeffs, const Vec& x0,
                   const std::shared_ptr<const TimeGrid>& grid, const SeedTag& tag,
                   const SimulationOptions& options, PathBundle& out) {
    const int d = coeffs.dimension();
    if (x0.size() != d) {
        throw InvalidArgument("simulate_path: starting point has wrong dimension");
    }
    out.reset(grid, d);
    out.seed_tag = tag;

    const CounterRng rng(tag.base_seed, tag.stream);
    const bool constant_sigma = coeffs.diffusion_state_independent();
    const bool frozen_sigma = coeffs.diffusion_constant();
    const bool frozen_dmu = coeffs.drift_jacobian_constant();
    const std::size_t n_steps = grid->n_steps();
    const auto du = static_cast<std::size_t>(d);

    Vec x = x0;
    Vec mu(d);
    Mat sigma(d, d);
    Mat dmu(d, d);
    Mat dsig(d, d);
    Mat noise_jac(d, d);
    std::array<double, kMaxDim> xi{};

    out.x(0) = x;
    out.j(0) = Mat::Identity(d, d);
    if (options.domain && !options.domain->contains(x)) {
        out.diverged_at = 0;
    }
    if (frozen_sigma) {
        coeffs.diffusion(grid->t0(), x, sigma);
    }
    if (frozen_dmu) {
        coeffs.drift_jacobian(grid->t0(), x, dmu);
    }

    for (std::size_t k = 0; k < n_steps && !out.diverged_at; ++k) {
        const double t = (*grid)[k];
        const double h = grid->step(k);
        rng.normals(tag.path_index, static_cast<std::uint32_t>(k), std::span<double>(xi.data(), du));
        double* dw = out.dW.data() + k * du;
        const double sqrt_h = std::sqrt(h);
        for (std::size_t i = 0; i < du; ++i) {
            dw[i] = sqrt_h * xi[i];
        }

        coeffs.drift(t, x, mu);
        if (!frozen_sigma) {
            coeffs.diffusion(t, x, sigma);
        }
        if (!frozen_dmu) {
            coeffs.drift_jacobian(t, x, dmu);
        }

        const double tame = options.tamed ? 1.0 / (1.0 + h * mu.norm()) : 1.0;
        const double th = tame * h;

        // Variational equation: column c of J gets
        //   (dmu/dx) J_c h + sum_i (dsigma/dx_i) dW J_ic.
        const double* jk = out.J.data() + k * du * du;
        double* jn = out.J.data() + (k + 1) * du * du;
        for (int c = 0; c < d; ++c) {
            for (int r = 0; r < d; ++r) {
                double acc = 0.0;
                for (int l = 0; l < d; ++l) {
                    acc += dmu(r, l) * jk[l + c * d];
                }
                jn[r + c * d] = jk[r + c * d] + th * acc;
            }
        }
        if (!constant_sigma) {
            for (int i = 0; i < d; ++i) {
                coeffs.diffusion_derivative(t, x, i, dsig);
                noise_jac.col(i) = dsig * ConstVecMap(dw, d);
            }
            for (int c = 0; c < d; ++c) {
                for (int r = 0; r < d; ++r) {
                    double acc = 0.0;
                    for (int l = 0; l < d; ++l) {
                        acc += noise_jac(r, l) * jk[l + c * d];
                    }
                    jn[r + c * d] += acc;
                }
            }
        }

        double* xn = out.X.data() + (k + 1) * du;
        bool finite = true;
        for (int r = 0; r < d; ++r) {
            double acc = x[r] + th * mu[r];
            for (int c = 0; c < d; ++c) {
                acc += sigma(r, c) * dw[c];
            }
            xn[r] = acc;
            x[r] = acc;
            finite = finite && std::isfinite(acc);
        }
        for (std::size_t i = 0; i < du * du; ++i) {
            finite = finite && std::isfinite(jn[i]);
        }

        if (!finite || (options.domain && !options.domain->contains(x))) {
            out.diverged_at = k + 1;
        }
    }

    if (out.diverged_at) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t k = *out.diverged_at + 1; k < grid->n_nodes(); ++k) {
            out.x(k).setConstant(nan);
            out.j(k).setConstant(nan);
        }
    }
}

std::vector<PathBundle> simulate_paths(const CoefficientSet& coeffs, double t, const Vec& x0,
                                       const std::shared_ptr<const TimeGrid>& grid,
                                       std::size_t n_paths, const RngSpec& rng,
                                       const SimulationOptions& options, unsigned threads) {
    if (!grid || grid->t0() != t) {
        throw InvalidArgument("simulate_paths: time grid must start at t");
    }
    if (n_paths == 0) {
        throw InvalidArgument("simulate_paths: n_paths must be positive");
    }
    std::vector<PathBundle> paths(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t p) {
        simulate_path(coeffs, x0, grid, SeedTag{rng.base_seed, rng.stream, p}, options, paths[p]);
    });
    return paths;
}

void NodeMomentAccumulator::add(const PathBundle& path) {
    if (path.diverged()) {
        ++diverged;
        return;
    }
    const double t0 = path.grid->t0();
    for (std::size_t k = 0; k < path.n_nodes(); ++k) {
        x2[k].add(path.x(k).squaredNorm());
        j2[k].add(path.j(k).squaredNorm());
        if (path.y_filled) {
            const double y2v = path.y(k).squaredNorm();
            y2[k].add(y2v);
            if (k > 0) {
                const double gap = (*path.grid)[k] - t0;
                z2[k].add(y2v / (gap * gap));
            }
        }
    }
}

void NodeMomentAccumulator::merge(const NodeMomentAccumulator& other) {
    if (x2.empty()) {
        *this = other;
        return;
    }
    for (std::size_t k = 0; k < x2.size() && k < other.x2.size(); ++k) {
        x2[k].merge(other.x2[k]);
        j2[k].merge(other.j2[k]);
        y2[k].merge(other.y2[k]);
        z2[k].merge(other.z2[k]);
    }
    diverged += other.diverged;
}

bool MomentBoundReport::all_pass() const {
    for (const auto& r : rows) {
        if (!r.pass) {
            return false;
        }
    }
    return !rows.empty();
}

double growth_constant_m(const CoefficientSet& coeffs, const TimeGrid& grid) {
    const int d = coeffs.dimension();
    const Vec zero = Vec::Zero(d);
    Vec mu;
    Mat sigma;
    double m = 0.0;
    for (double s : grid.nodes()) {
        coeffs.drift(s, zero, mu);
        coeffs.diffusion(s, zero, sigma);
        m = std::max(m, 0.5 * mu.squaredNorm() + sigma.squaredNorm());
    }
    return m;
}

MomentBoundReport moment_bound_report_X_J(const NodeMomentAccumulator& moments,
                                          const CoefficientSet& coeffs, const TimeGrid& grid,
                                          const Vec& x0) {
    MomentBoundReport report;
    const double c = coeffs.c_mono();
    const double d = static_cast<double>(coeffs.dimension());
    const double T = grid.T();
    const double t = grid.t0();
    report.m = growth_constant_m(coeffs, grid);
    report.diverged = moments.diverged;
    report.n_paths = moments.x2.empty() ? 0 : moments.x2[0].count + moments.diverged;

    const double bound_i = std::exp((2.0 * c + 1.0) * T) * (x0.squaredNorm() + report.m / (2.0 * c + 1.0));
    const double bound_ii = d * std::exp(2.0 * c * (T - t));
    for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
        MomentBoundRow row;
        row.s = grid[k];
        row.emp_x2 = moments.x2[k].mean();
        row.se_x2 = moments.x2[k].std_error();
        row.bound_i = bound_i;
        row.emp_j2 = moments.j2[k].mean();
        row.se_j2 = moments.j2[k].std_error();
        row.bound_ii = bound_ii;
        row.pass = row.emp_x2 - 3.0 * row.se_x2 <= bound_i && row.emp_j2 - 3.0 * row.se_j2 <= bound_ii;
        report.rows.push_back(row);
    }
    return report;
}

MomentBoundReport moment_bound_report_X_J(const std::vector<PathBundle>& paths,
                                          const CoefficientSet& coeffs) {
    if (paths.size() < 1000) {
        throw InvalidArgument("moment_bound_report_X_J: need at least 1000 paths");
    }
    const auto& grid = paths.front().grid;
    NodeMomentAccumulator acc(grid->n_nodes());
    for (const auto& p : paths) {
        acc.add(p);
    }
    const Vec x0 = paths.front().x(0);
    return moment_bound_report_X_J(acc, coeffs, *grid, x0);
}

}  // namespace sfpe
