#include <doctest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "sfpe/coefficients.hpp"
#include "sfpe/sde_engine.hpp"

using namespace sfpe;

namespace {

std::shared_ptr<const TimeGrid> grid(double t0, double T, std::size_t n) {
    return std::make_shared<const TimeGrid>(TimeGrid::uniform(t0, T, n));
}

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

}  // namespace

TEST_CASE("brownian paths are sums of increments and J stays the identity") {
    auto c = make_brownian(2, 1.0, 0.5);
    const auto paths = simulate_paths(*c, 0.0, vec({0.0, 0.0}), grid(0.0, 1.0, 20), 16, {3, 1});
    for (const auto& p : paths) {
        Vec w = Vec::Zero(2);
        CHECK(p.x(0).isZero(0.0));
        for (std::size_t k = 0; k < p.n_nodes(); ++k) {
            CHECK(p.j(k).isIdentity(0.0));
            if (k > 0) {
                w += p.dw(k - 1);
            }
            CHECK((p.x(k) - w).norm() <= 1e-14);
        }
    }
}

TEST_CASE("paths are reproducible and independent of the worker count") {
    auto c = make_ornstein_uhlenbeck(2, 1.0, 0.0, 1.0, 0.5);
    const auto g = grid(0.0, 1.0, 25);
    const auto a = simulate_paths(*c, 0.0, vec({0.3, -0.2}), g, 40, {9, 2}, {}, 1);
    const auto b = simulate_paths(*c, 0.0, vec({0.3, -0.2}), g, 40, {9, 2}, {}, 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].X == b[i].X);
        CHECK(a[i].J == b[i].J);
        CHECK(a[i].dW == b[i].dW);
        CHECK(a[i].seed_tag == SeedTag{9, 2, i});
    }
    PathBundle single;
    simulate_path(*c, vec({0.3, -0.2}), g, SeedTag{9, 2, 5}, {}, single);
    CHECK(single.X == a[5].X);
}

TEST_CASE("increments have variance equal to the step length") {
    auto c = make_brownian(1, 1.0, 0.5);
    const auto g = std::make_shared<const TimeGrid>(TimeGrid::refined_toward_end(0.0, 1.0, 8, 0.7));
    struct Acc {
        std::vector<RunningMoments> m = std::vector<RunningMoments>(8);
        void merge(const Acc& o) {
            for (std::size_t k = 0; k < m.size(); ++k) {
                m[k].merge(o.m[k]);
            }
        }
    };
    const Acc acc = reduce_paths(*c, vec({0.0}), g, 20000, {1, 0}, {}, 1, Acc{},
                                 [](Acc& a, PathBundle& p) {
                                     for (std::size_t k = 0; k < 8; ++k) {
                                         a.m[k].add(p.dw(k)[0] * p.dw(k)[0]);
                                     }
                                 });
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(oracle::within_se(acc.m[k].mean(), g->step(k), acc.m[k].std_error(), 5.0));
    }
}

TEST_CASE("OU mean and Jacobian against the exact solution") {
    auto c = make_ornstein_uhlenbeck(1, 1.0, 0.0, 1.0, 0.5);
    const auto g = grid(0.0, 1.0, 200);
    struct Acc {
        RunningMoments x;
        void merge(const Acc& o) { x.merge(o.x); }
    };
    const Acc acc = reduce_paths(*c, vec({1.0}), g, 100000, {2, 0}, {}, 1, Acc{},
                                 [](Acc& a, PathBundle& p) { a.x.add(p.x(200)[0]); });
    // Euler bias for the mean is (1 - h)^n - e^{-1} = O(h); include it in the target.
    const double euler_mean = std::pow(1.0 - 1.0 / 200.0, 200);
    CHECK(oracle::within_se(acc.x.mean(), euler_mean, acc.x.std_error()));
    CHECK(std::abs(euler_mean - std::exp(-1.0)) < 2e-3);

    PathBundle p;
    simulate_path(*c, vec({1.0}), g, SeedTag{2, 0, 0}, {}, p);
    for (std::size_t k : {50, 100, 200}) {
        CHECK(p.j(k)(0, 0) == doctest::Approx(std::exp(-(*g)[k])).epsilon(3e-3));
    }
}

TEST_CASE("constant coefficients give a time-constant Jacobian") {
    Mat A = Mat::Zero(2, 2);
    Mat S(2, 2);
    S << 1.0, 0.2, 0.0, 0.8;
    auto c = make_linear(A, vec({0.5, -0.5}), S, 0.5);
    const auto paths = simulate_paths(*c, 0.0, vec({0.0, 0.0}), grid(0.0, 1.0, 10), 4, {0, 0});
    for (const auto& p : paths) {
        for (std::size_t k = 0; k < p.n_nodes(); ++k) {
            CHECK(p.j(k).isIdentity(0.0));
        }
    }
}

TEST_CASE("domain exit and blow-up are flagged with the step index") {
    auto c = make_brownian(1, 1.0, 0.5);
    SimulationOptions opt;
    opt.domain = Box{{-0.01}, {0.01}};
    const auto paths = simulate_paths(*c, 0.0, vec({0.0}), grid(0.0, 1.0, 10), 8, {4, 0}, opt);
    for (const auto& p : paths) {
        REQUIRE(p.diverged());
        CHECK(*p.diverged_at >= 1);
    }
    auto explosive = make_diagonal_polynomial(1, {0.0, 0.0, 0.0, 50.0}, {1.0}, 1.0, 0.5);
    PathBundle p;
    simulate_path(*explosive, vec({3.0}), grid(0.0, 1.0, 10), SeedTag{0, 0, 0}, {}, p);
    CHECK(p.diverged());
    SimulationOptions tamed;
    tamed.tamed = true;
    simulate_path(*explosive, vec({3.0}), grid(0.0, 1.0, 10), SeedTag{0, 0, 0}, tamed, p);
    CHECK_FALSE(p.diverged());
}

TEST_CASE("coefficient conditions") {
    std::vector<ConditionSample> cloud;
    const CounterRng rng(1, 1);
    std::array<double, 6> u{};
    for (std::uint64_t i = 0; i < 200; ++i) {
        rng.uniforms(i, 0, u);
        cloud.push_back({u[0], vec({4 * u[1] - 2, 4 * u[2] - 2}), vec({4 * u[3] - 2, 4 * u[4] - 2}),
                         vec({u[5] - 0.5, 0.3})});
    }
    const auto ou = check_coefficient_conditions(*make_ornstein_uhlenbeck(2, 1.0, 0.0, 1.0, 0.1), cloud);
    CHECK(ou.ok());
    CHECK(ou.worst_monotonicity_ratio <= 0.0);
    CHECK(ou.worst_ellipticity_ratio == doctest::Approx(1.0));

    const auto expl = check_coefficient_conditions(
        *make_diagonal_polynomial(2, {0.0, 1.0}, {1.0}, 1.0, 1.5), cloud);
    CHECK_FALSE(expl.monotonicity_ok);
    CHECK(expl.witness.has_value());
    CHECK(expl.worst_monotonicity_ratio == doctest::Approx(1.0));

    // Black-Scholes-type diffusion on a box away from zero: alpha is the min of (0.2 x)^2.
    std::vector<ConditionSample> pos;
    double brute = 1e300;
    for (std::uint64_t i = 0; i < 200; ++i) {
        rng.uniforms(i, 1, u);
        const Vec x = vec({1.0 + u[1], 1.0 + u[2]});
        pos.push_back({0.0, x, vec({1.0 + u[3], 1.0 + u[4]}), vec({u[5] - 0.5, 0.4})});
        brute = std::min(brute, std::pow(0.2 * x.minCoeff(), 2));
    }
    const auto bs = check_coefficient_conditions(
        *make_diagonal_polynomial(2, {0.0, 0.05}, {0.0, 0.2}, 0.04, 0.5), pos);
    CHECK(bs.min_eigenvalue == doctest::Approx(brute).epsilon(1e-12));
    CHECK(bs.worst_ellipticity_ratio >= bs.min_eigenvalue - 1e-15);
}

TEST_CASE("analytic derivatives match central differences") {
    std::vector<Vec> pts{vec({0.5, 1.2}), vec({1.5, 0.7}), vec({2.0, 2.5})};
    auto poly = make_diagonal_polynomial(2, {0.1, -0.5, 0.0, -0.3}, {0.2, 0.3}, 0.01, 1.0);
    const double e1 = derivative_consistency_error(*poly, 0.0, pts, 1e-3);
    const double e2 = derivative_consistency_error(*poly, 0.0, pts, 5e-4);
    CHECK(e1 < 1e-5);
    CHECK(e2 < 0.3 * e1 + 1e-12);  // second order: halving h quarters the error
}

TEST_CASE("moment bounds for X and J") {
    auto bm = make_brownian(2, 1.0, 0.5);
    const auto g = grid(0.0, 1.0, 20);
    std::vector<PathBundle> paths = simulate_paths(*bm, 0.0, vec({0.0, 0.0}), g, 4000, {6, 0});
    const auto rep = moment_bound_report_X_J(paths, *bm);
    CHECK(rep.all_pass());
    CHECK(rep.m == doctest::Approx(2.0));
    const auto& last = rep.rows.back();
    CHECK(last.emp_j2 == doctest::Approx(2.0));
    CHECK(oracle::within_se(last.emp_x2, 2.0, last.se_x2));
    CHECK(last.emp_x2 <= last.bound_i);

    auto ou = make_ornstein_uhlenbeck(1, 1.0, 0.0, 1.0, 0.5);
    NodeMomentAccumulator acc = reduce_paths(*ou, vec({0.5}), g, 2000, {7, 0}, {}, 1,
                                             NodeMomentAccumulator(g->n_nodes()),
                                             [](NodeMomentAccumulator& a, PathBundle& p) { a.add(p); });
    const auto ou_rep = moment_bound_report_X_J(acc, *ou, *g, vec({0.5}));
    CHECK(ou_rep.all_pass());
    CHECK(ou_rep.rows.back().emp_j2 == doctest::Approx(std::pow(0.95, 40)).epsilon(1e-12));
    CHECK_THROWS(moment_bound_report_X_J(std::vector<PathBundle>(paths.begin(), paths.begin() + 10), *bm));
}
