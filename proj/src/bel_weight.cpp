#include "sfpe/bel_weight.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <limits>
#include <optional>

#include "sfpe/errors.hpp"

namespace sfpe {

namespace {

[[noreturn]] void throw_ill_conditioned(double residual, double rhs_norm) {
    throw IllConditionedSigma("sigma solve failed: residual " + std::to_string(residual) +
                              " vs |rhs| " + std::to_string(rhs_norm));
}

void solve_diagonal(const Mat& sigma, const double* rhs, double* y, int d) {
    double res2 = 0.0;
    double rhs2 = 0.0;
    bool finite = true;
    for (int i = 0; i < d; ++i) {
        y[i] = rhs[i] / sigma(i, i);
        const double r = sigma(i, i) * y[i] - rhs[i];
        res2 += r * r;
        rhs2 += rhs[i] * rhs[i];
        finite = finite && std::isfinite(y[i]);
    }
    if (!finite || res2 > 1e-16 * rhs2) {
        throw_ill_conditioned(std::sqrt(res2), std::sqrt(rhs2));
    }
}

void check_residual(const Mat& sigma, const Vec& rhs, const Vec& y) {
    const double rhs_norm = rhs.norm();
    const double residual = (sigma * y - rhs).norm();
    if (!y.allFinite() || residual > 1e-8 * rhs_norm) {
        throw_ill_conditioned(residual, rhs_norm);
    }
}

}  // namespace

void solve_sigma(const Mat& sigma, const Vec& rhs, Vec& y, bool diagonal_hint) {
    const auto d = rhs.size();
    y.resize(d);
    if (diagonal_hint || d == 1) {
        solve_diagonal(sigma, rhs.data(), y.data(), static_cast<int>(d));
        return;
    }
    Eigen::ColPivHouseholderQR<Mat> qr(sigma);
    y = qr.solve(rhs);
    check_residual(sigma, rhs, y);
}

void accumulate_Y(PathBundle& path, const CoefficientSet& coeffs) {
    const auto& grid = *path.grid;
    const int d = path.dim;
    const auto du = static_cast<std::size_t>(d);
    const bool diagonal = coeffs.diffusion_diagonal() || d == 1;
    const bool frozen = coeffs.diffusion_constant();
    const std::size_t last = path.diverged_at ? *path.diverged_at : grid.n_steps();

    Mat sigma(d, d);
    Vec rhs(d);
    Vec inc(d);
    std::optional<Eigen::ColPivHouseholderQR<Mat>> qr;
    if (frozen) {
        coeffs.diffusion(grid[0], path.x(0), sigma);
        if (!diagonal) {
            qr.emplace(sigma);
        }
    }
    double* Y = path.Y.data();
    std::fill(Y, Y + du, 0.0);
    for (std::size_t k = 0; k < last; ++k) {
        if (!frozen) {
            coeffs.diffusion(grid[k], path.x(k), sigma);
        }
        const double* jk = path.J.data() + k * du * du;
        const double* dw = path.dW.data() + k * du;
        for (int r = 0; r < d; ++r) {
            double acc = 0.0;
            for (int c = 0; c < d; ++c) {
                acc += jk[r + c * d] * dw[c];
            }
            rhs[r] = acc;
        }
        if (diagonal) {
            solve_diagonal(sigma, rhs.data(), inc.data(), d);
        } else if (qr) {
            inc = qr->solve(rhs);
            check_residual(sigma, rhs, inc);
        } else {
            solve_sigma(sigma, rhs, inc, false);
        }
        for (std::size_t i = 0; i < du; ++i) {
            Y[(k + 1) * du + i] = Y[k * du + i] + inc[static_cast<Eigen::Index>(i)];
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = last + 1; k < grid.n_nodes(); ++k) {
        path.y(k).setConstant(nan);
    }
    path.y_filled = true;
}

ZSample z_at_node(const PathBundle& path, std::size_t k) {
    if (!path.y_filled) {
        throw InvalidArgument("z_at_node: path has no accumulated Y");
    }
    if (k == 0 || k >= path.n_nodes()) {
        throw InvalidArgument("z_at_node: node must satisfy 0 < k < n_nodes");
    }
    const double gap = (*path.grid)[k] - path.grid->t0();
    ZSample out;
    out.s = (*path.grid)[k];
    out.z.resize(path.dim + 1);
    out.z[0] = 1.0;
    out.z.tail(path.dim) = path.y(k) / gap;
    return out;
}

ZSample z_at(const PathBundle& path, double t, double s) {
    if (!(s > t)) {
        throw InvalidArgument("z_at: requires s > t");
    }
    const auto& grid = *path.grid;
    if (grid.t0() != t) {
        throw InvalidArgument("z_at: path was not started at t");
    }
    const auto& nodes = grid.nodes();
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), s);
    if (it == nodes.end() || *it != s) {
        throw InvalidArgument("z_at: s must be a grid node");
    }
    return z_at_node(path, static_cast<std::size_t>(it - nodes.begin()));
}

bool ZMomentReport::all_pass() const {
    for (const auto& r : rows) {
        if (!r.pass) {
            return false;
        }
    }
    return !rows.empty();
}

double z_second_moment_bound(int d, double alpha, double c, double gap) {
    // int_0^gap exp(2 c r) dr, written with expm1 for small c * gap.
    const double integral = std::expm1(2.0 * c * gap) / (2.0 * c);
    return static_cast<double>(d) / (alpha * gap * gap) * integral;
}

ZMomentReport z_moment_report(const NodeMomentAccumulator& moments, const CoefficientSet& coeffs,
                              const TimeGrid& grid) {
    ZMomentReport report;
    const int d = coeffs.dimension();
    const double alpha = coeffs.alpha();
    const double c = coeffs.c_mono();
    const double T = grid.T();
    const double t = grid.t0();
    report.diverged = moments.diverged;
    report.n_paths = moments.y2.empty() ? 0 : moments.y2[0].count + moments.diverged;

    const double bound_iii = static_cast<double>(d) * T / alpha * std::exp(2.0 * c * T);
    for (std::size_t k = 1; k < grid.n_nodes(); ++k) {
        ZMomentRow row;
        row.s = grid[k];
        row.emp_y2 = moments.y2[k].mean();
        row.se_y2 = moments.y2[k].std_error();
        row.bound_iii = bound_iii;
        row.emp_z2 = moments.z2[k].mean();
        row.se_z2 = moments.z2[k].std_error();
        row.bound_iv = z_second_moment_bound(d, alpha, c, row.s - t);
        row.pass = row.emp_y2 - 3.0 * row.se_y2 <= bound_iii &&
                   row.emp_z2 - 3.0 * row.se_z2 <= row.bound_iv;
        report.rows.push_back(row);
    }
    return report;
}

ZMomentReport z_moment_report(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                              double t) {
    if (paths.size() < 1000) {
        throw InvalidArgument("z_moment_report: need at least 1000 paths");
    }
    const auto& grid = paths.front().grid;
    if (grid->t0() != t) {
        throw InvalidArgument("z_moment_report: paths were not started at t");
    }
    NodeMomentAccumulator acc(grid->n_nodes());
    for (const auto& p : paths) {
        if (!p.y_filled && !p.diverged()) {
            throw InvalidArgument("z_moment_report: path without accumulated Y");
        }
        acc.add(p);
    }
    return z_moment_report(acc, coeffs, *grid);
}

}  // namespace sfpe
