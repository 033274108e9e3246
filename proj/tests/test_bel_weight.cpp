#include <doctest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "sfpe/bel_weight.hpp"
#include "sfpe/coefficients.hpp"
#include "sfpe/errors.hpp"
#include "sfpe/sde_engine.hpp"

using namespace sfpe;

namespace {

std::shared_ptr<const TimeGrid> grid(double t0, double T, std::size_t n) {
    return std::make_shared<const TimeGrid>(TimeGrid::uniform(t0, T, n));
}

Vec zeros(int d) { return Vec::Zero(d); }

}  // namespace

TEST_CASE("Y reproduces the Brownian increment sum bitwise for identity sigma") {
    auto c = make_brownian(2, 1.0, 0.5);
    auto paths = simulate_paths(*c, 0.0, zeros(2), grid(0.0, 1.0, 16), 8, {1, 1});
    for (auto& p : paths) {
        accumulate_Y(p, *c);
        Vec w = Vec::Zero(2);
        CHECK(p.y(0).isZero(0.0));
        for (std::size_t k = 1; k < p.n_nodes(); ++k) {
            w += p.dw(k - 1);
            CHECK(p.y(k)[0] == w[0]);
            CHECK(p.y(k)[1] == w[1]);
            const auto z = z_at_node(p, k);
            CHECK(z.z[0] == 1.0);
            CHECK(z.z[1] == w[0] / p.grid->operator[](k));
        }
    }
}

TEST_CASE("doubling sigma halves the spatial weight for fixed increments") {
    auto c1 = make_brownian(1, 1.0, 0.5);
    auto c2 = make_brownian(1, 2.0, 0.5);
    auto g = grid(0.0, 1.0, 10);
    PathBundle p;
    simulate_path(*c1, zeros(1), g, SeedTag{4, 0, 3}, {}, p);
    PathBundle q = p;  // same dW; X differs but Y only sees sigma and J
    accumulate_Y(p, *c1);
    accumulate_Y(q, *c2);
    for (std::size_t k = 1; k < p.n_nodes(); ++k) {
        CHECK(q.y(k)[0] == doctest::Approx(0.5 * p.y(k)[0]).epsilon(1e-15));
    }
    CHECK(z_at(q, 0.0, 1.0).z[1] == doctest::Approx(0.5 * z_at(p, 0.0, 1.0).z[1]).epsilon(1e-15));
}

TEST_CASE("z_at preconditions") {
    auto c = make_brownian(1, 1.0, 0.5);
    PathBundle p;
    simulate_path(*c, zeros(1), grid(0.0, 1.0, 4), SeedTag{}, {}, p);
    CHECK_THROWS_AS(z_at(p, 0.0, 0.5), InvalidArgument);  // no Y yet
    accumulate_Y(p, *c);
    CHECK_THROWS_AS(z_at(p, 0.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(z_at(p, 0.5, 0.25), InvalidArgument);
    CHECK_THROWS_AS(z_at(p, 0.0, 0.3), InvalidArgument);  // not a node
    CHECK(z_at(p, 0.0, 1.0).z[0] == 1.0);
}

TEST_CASE("OU weight variance matches the Ito isometry") {
    auto c = make_ornstein_uhlenbeck(1, 1.0, 0.0, 1.0, 0.5);
    auto g = grid(0.0, 1.0, 100);
    struct Acc {
        RunningMoments y2;
        void merge(const Acc& o) { y2.merge(o.y2); }
    };
    const Acc acc = reduce_paths(*c, zeros(1), g, 100000, {8, 0}, {}, 1, Acc{},
                                 [&](Acc& a, PathBundle& p) {
                                     accumulate_Y(p, *c);
                                     a.y2.add(p.y(100)[0] * p.y(100)[0]);
                                 });
    // Euler J_k = (1 - h)^k, so the discrete isometry is sum_k (1 - h)^{2k} h.
    const double h = 0.01;
    double discrete = 0.0;
    for (int k = 0; k < 100; ++k) {
        discrete += std::pow(1.0 - h, 2 * k) * h;
    }
    CHECK(oracle::within_se(acc.y2.mean(), discrete, acc.y2.std_error()));
    CHECK(std::abs(discrete - 0.5 * (1.0 - std::exp(-2.0))) < 5e-3);
}

TEST_CASE("Brownian Z moment, scaling and 1/(s-t) growth") {
    auto c = make_brownian(2, 1.0, 0.5);
    auto g = grid(0.0, 0.5, 10);
    auto paths = simulate_paths(*c, 0.0, zeros(2), g, 20000, {2, 0});
    for (auto& p : paths) {
        accumulate_Y(p, *c);
    }
    const auto rep = z_moment_report(paths, *c, 0.0);
    CHECK(rep.all_pass());
    const auto& last = rep.rows.back();
    CHECK(oracle::within_se(last.emp_z2, 4.0, last.se_z2));
    CHECK(last.emp_z2 <= last.bound_iv);
    CHECK(last.bound_iv >= 4.0);
    // Second moment ~ d / (s - t): first node vs last node ratio close to 10.
    const double growth = rep.rows.front().emp_z2 / last.emp_z2;
    CHECK(growth >= 10.0 / 2.0);
    CHECK(growth <= 10.0 * 2.0);

    auto c2 = make_brownian(2, 2.0, 0.5);
    CHECK(c2->alpha() == doctest::Approx(4.0));
    auto p2 = simulate_paths(*c2, 0.0, zeros(2), g, 20000, {2, 0});
    for (auto& p : p2) {
        accumulate_Y(p, *c2);
    }
    const auto r2 = z_moment_report(p2, *c2, 0.0);
    CHECK(r2.all_pass());
    CHECK(oracle::within_se(r2.rows.back().emp_z2, 2.0 / (4.0 * 0.5), r2.rows.back().se_z2));
}

TEST_CASE("Z second-moment bound formula") {
    // (d / (alpha g^2)) * int_0^g e^{2cr} dr = d (e^{2cg} - 1) / (2 c alpha g^2).
    const double b = z_second_moment_bound(2, 1.0, 0.5, 0.5);
    CHECK(b == doctest::Approx(2.0 * (std::exp(0.5) - 1.0) / (0.25)).epsilon(1e-13));
}

TEST_CASE("sigma solve: residual check and operator bound") {
    Mat s(2, 2);
    s << 2.0, 0.5, 0.1, 1.5;
    Vec rhs(2);
    rhs << 1.0, -2.0;
    Vec y;
    solve_sigma(s, rhs, y);
    CHECK((s * y - rhs).norm() <= 1e-14);

    // |sigma^{-1} w| <= |w| / sqrt(alpha) with alpha the min eigenvalue of sigma sigma^T.
    const double alpha = Eigen::SelfAdjointEigenSolver<Mat>(s * s.transpose()).eigenvalues().minCoeff();
    const CounterRng rng(3, 3);
    std::array<double, 2> u{};
    for (std::uint64_t i = 0; i < 200; ++i) {
        rng.normals(i, 0, u);
        Vec w(2);
        w << u[0], u[1];
        solve_sigma(s, w, y);
        CHECK(y.norm() <= w.norm() / std::sqrt(alpha) * (1.0 + 1e-12));
    }

    Mat singular(2, 2);
    singular << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(solve_sigma(singular, rhs, y), IllConditionedSigma);
    Mat zero_diag = Mat::Zero(1, 1);
    Vec r1(1);
    r1 << 1.0;
    CHECK_THROWS_AS(solve_sigma(zero_diag, r1, y, true), IllConditionedSigma);
}
