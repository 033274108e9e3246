#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sfpe/errors.hpp"
#include "sfpe/picard_solver.hpp"
#include "sfpe/verification.hpp"

using namespace sfpe;

namespace {

Problem heat_problem(TerminalFn g, NonlinearityFn f, double L) {
    Problem p;
    p.name = "test";
    p.coeffs = make_brownian(1, 1.0, 0.5);
    p.T = 1.0;
    p.axes = {SpaceAxis{-2.0, 2.0, 9}};
    p.n_time = 6;
    p.delta_T = 0.1;
    p.g = std::move(g);
    p.f = std::move(f);
    p.L = L;
    p.V = LyapunovV::constant(1.0);
    p.c_V = 1.5;
    return p;
}

NonlinearityFn zero_f() {
    return [](double, const Vec&, std::span<const double>) { return 0.0; };
}

McConfig mc(std::size_t paths, std::uint64_t seed = 1) {
    McConfig m;
    m.n_paths = paths;
    m.n_steps = 20;
    m.base_seed = seed;
    m.threads = 1;
    return m;
}

}  // namespace

TEST_CASE("lambda star and the contraction factor") {
    CHECK(lambda_star(1.0, 1.0) == doctest::Approx(oracle::kPi3).epsilon(1e-15));
    CHECK(lambda_star(2.0, 3.0) == doctest::Approx(oracle::k36Pi3).epsilon(1e-15));
    CHECK(lambda_star(1e-8, 1.0) < 1e-14);
    CHECK_THROWS_AS(lambda_star(0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(lambda_star(1.0, -1.0), InvalidArgument);
    CHECK(contraction_factor(1.3, 0.7, lambda_star(1.3, 0.7)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(contraction_factor(1.3, 0.7, 2.0 * lambda_star(1.3, 0.7)) ==
          doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("singular quadrature rules") {
    for (auto rule : {SingularRule::SqrtSubstitution, SingularRule::RightRectangle}) {
        for (std::size_t n : {10, 37, 50}) {
            const auto q = singular_quadrature(0.2, 1.0, n, rule);
            double sum = 0.0;
            for (double w : q.weights) {
                CHECK(w >= 0.0);
                sum += w;
            }
            CHECK(sum == doctest::Approx(0.8).epsilon(1e-14));
            CHECK(q.weights.front() == 0.0);
            CHECK(q.grid->t0() == 0.2);
            CHECK(q.grid->T() == 1.0);
            CHECK(q.weights.size() == q.grid->n_nodes());
        }
    }
    // int_t^T (r - t)^{-1/2} dr = 2 sqrt(T - t): the substitution handles it far better.
    auto integrate = [](SingularRule rule) {
        const auto q = singular_quadrature(0.0, 1.0, 50, rule);
        double s = 0.0;
        for (std::size_t k = 1; k < q.weights.size(); ++k) {
            s += q.weights[k] / std::sqrt((*q.grid)[k]);
        }
        return std::abs(s - 2.0);
    };
    CHECK(integrate(SingularRule::SqrtSubstitution) < integrate(SingularRule::RightRectangle));
    CHECK(parse_singular_rule("right_rectangle") == SingularRule::RightRectangle);
    CHECK(to_string(SingularRule::SqrtSubstitution) == "sqrt_substitution");
    CHECK_THROWS_AS(parse_singular_rule("midpoint"), InvalidArgument);
}

TEST_CASE("config and problem validation") {
    McConfig m;
    m.n_paths = 99;
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
    m.n_paths = 100;
    m.n_steps = 9;
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
    auto p = heat_problem([](const Vec& x) { return x[0]; }, zero_f(), 0.0);
    CHECK_NOTHROW(p.validate());
    p.g = nullptr;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("phi with f = 0 and g = x gives (x, 1)") {
    auto p = heat_problem([](const Vec& x) { return x[0]; }, zero_f(), 0.0);
    const auto r = apply_phi(p.zero_grid(), p, mc(4000));
    const auto& v = r.value;
    for (std::size_t ti = 0; ti < v.n_time(); ++ti) {
        for (std::size_t si = 0; si < v.n_space(); ++si) {
            const double x = v.space_point(si)[0];
            CHECK(oracle::within_se(v.value(ti, si)[0], x, r.std_error.value(ti, si)[0], 4.0));
            CHECK(oracle::within_se(v.value(ti, si)[1], 1.0, r.std_error.value(ti, si)[1], 4.0));
        }
    }
}

TEST_CASE("phi with f = 0 and g = x^2 gives (x^2 + T - t, 2x)") {
    auto p = heat_problem([](const Vec& x) { return x[0] * x[0]; }, zero_f(), 0.0);
    for (bool cv : {true, false}) {
        McConfig m = mc(4000);
        m.control_variate = cv;
        const auto r = apply_phi(p.zero_grid(), p, m);
        const auto& v = r.value;
        for (std::size_t ti = 0; ti < v.n_time(); ++ti) {
            const double t = v.time_nodes()[ti];
            for (std::size_t si = 0; si < v.n_space(); ++si) {
                const double x = v.space_point(si)[0];
                CHECK(oracle::within_se(v.value(ti, si)[0], x * x + 1.0 - t,
                                        r.std_error.value(ti, si)[0], 4.0));
                CHECK(oracle::within_se(v.value(ti, si)[1], 2.0 * x, r.std_error.value(ti, si)[1], 4.0));
            }
        }
    }
}

TEST_CASE("phi with g = 0 and f = 1: value T - t, spatial mean zero") {
    auto p = heat_problem([](const Vec&) { return 0.0; },
                          [](double, const Vec&, std::span<const double>) { return 1.0; }, 0.0);
    McConfig m = mc(2000);
    m.control_variate = false;
    const auto r = apply_phi(p.zero_grid(), p, m);
    for (std::size_t ti = 0; ti < r.value.n_time(); ++ti) {
        const double t = r.value.time_nodes()[ti];
        for (std::size_t si = 0; si < r.value.n_space(); ++si) {
            CHECK(r.value.value(ti, si)[0] == doctest::Approx(1.0 - t).epsilon(1e-13));
            CHECK(oracle::within_se(r.value.value(ti, si)[1], 0.0, r.std_error.value(ti, si)[1], 4.0));
        }
    }
}

TEST_CASE("first component equals the weight-one Feynman-Kac estimate bitwise") {
    auto p = heat_problem([](const Vec& x) { return std::cos(x[0]); },
                          [](double t, const Vec& x, std::span<const double> v) {
                              return 0.3 * std::sin(v[0]) - 0.2 * v[1] + t * x[0];
                          },
                          0.3 * std::sqrt(2.0) + 0.1);
    const auto w = random_grid(p.zero_grid(), 4, 4, 1.0);
    const auto phi = apply_phi(w, p, mc(300));
    const auto fk = feynman_kac_estimate(w, p, mc(300));
    REQUIRE(fk.components() == 1);
    for (std::size_t ti = 0; ti < fk.n_time(); ++ti) {
        for (std::size_t si = 0; si < fk.n_space(); ++si) {
            CHECK(fk.value(ti, si)[0] == phi.value.value(ti, si)[0]);
        }
    }
}

TEST_CASE("phi is independent of the worker count") {
    auto p = heat_problem([](const Vec& x) { return x[0] * x[0]; },
                          [](double, const Vec&, std::span<const double> v) { return 0.5 * v[1]; }, 0.5);
    const auto w = random_grid(p.zero_grid(), 2, 0, 1.0);
    McConfig a = mc(600), b = mc(600);
    b.threads = 8;
    CHECK(apply_phi(w, p, a).value.data() == apply_phi(w, p, b).value.data());
}

TEST_CASE("standard error halves roughly as 1/sqrt(2) when paths double") {
    auto p = heat_problem([](const Vec& x) { return x[0]; }, zero_f(), 0.0);
    const auto r1 = apply_phi(p.zero_grid(), p, mc(2000, 5));
    const auto r2 = apply_phi(p.zero_grid(), p, mc(4000, 6));
    const std::size_t ti = 0, si = 4;
    for (std::size_t c = 0; c < 2; ++c) {
        const double ratio = r2.std_error.value(ti, si)[c] / r1.std_error.value(ti, si)[c];
        CHECK(ratio >= 1.0 / std::sqrt(2.0) - 0.1);
        CHECK(ratio <= 1.0 / std::sqrt(2.0) + 0.1);
    }
}

TEST_CASE("contraction probe") {
    auto indep = heat_problem([](const Vec& x) { return x[0]; },
                              [](double, const Vec& x, std::span<const double>) { return x[0]; }, 0.0);
    const auto w1 = random_grid(indep.zero_grid(), 1, 0, 1.0);
    const auto w2 = random_grid(indep.zero_grid(), 1, 1, 1.0);
    const auto r0 = contraction_probe(indep, w1, w2, 5.0, mc(200));
    CHECK(r0.ratio == 0.0);
    CHECK_THROWS_AS(contraction_probe(indep, w1, w1, 5.0, mc(200)), InvalidArgument);

    auto lin = heat_problem([](const Vec&) { return 0.0; },
                            [](double, const Vec&, std::span<const double> v) { return 0.5 * v[1]; },
                            0.5);
    const double ls = lambda_star(*lin.c_V, lin.L);
    const auto r1 = contraction_probe(lin, w1, w2, ls, mc(500));
    CHECK(r1.ratio <= 0.5 + 3.0 * r1.noise);
    const auto r2 = contraction_probe(lin, w1, w2, 2.0 * ls, mc(500));
    CHECK(r2.ratio <= 0.5 / std::sqrt(2.0) + 3.0 * r2.noise);
    CHECK(r1.numerator > 0.0);
}

TEST_CASE("solve: f = 0 stops once the sweep repeats itself") {
    auto p = heat_problem([](const Vec& x) { return x[0]; }, zero_f(), 0.0);
    const auto r = solve(p, mc(300), 1e-12, 10);
    REQUIRE(r.diagnostics.sweeps.size() == 2);
    CHECK(r.diagnostics.converged);
    CHECK(r.diagnostics.sweeps[1].distance == 0.0);
    CHECK(r.diagnostics.lambda == 0.0);

    const auto once = solve(p, mc(300), 1e6, 10);
    CHECK(once.diagnostics.sweeps.size() == 1);
    CHECK(once.diagnostics.converged);
    for (const auto& s : r.diagnostics.sweeps) {
        CHECK(s.distance >= 0.0);
    }
}

TEST_CASE("solve: fixed-point residual on a coupled benchmark") {
    auto b = find_benchmark("heat_linear");
    McConfig m = mc(1000);
    const double tol = 1e-3;
    const auto r = solve(b.problem, m, tol, 15);
    const WeightedNormSpec spec{r.diagnostics.lambda, b.problem.V, b.problem.T};
    const auto again = apply_phi(r.v, b.problem, m);
    const double residual = weighted_distance(again.value, r.v, spec);
    CHECK(residual <= 2.0 * tol + 3.0 * weighted_norm(again.std_error, spec));
    for (std::size_t k = 1; k < r.diagnostics.sweeps.size(); ++k) {
        const auto& s = r.diagnostics.sweeps[k];
        if (r.diagnostics.sweeps[k - 1].distance > s.noise_floor) {
            CHECK(s.ratio <= 0.6);
        }
    }
}

TEST_CASE("solve: a non-contracting map raises DivergingIteration") {
    auto p = heat_problem([](const Vec&) { return 1.0; },
                          [](double, const Vec&, std::span<const double> v) { return 20.0 * v[0]; },
                          20.0);
    try {
        solve(p, mc(200), 1e-8, 12, 0.0);
        FAIL("expected DivergingIteration");
    } catch (const DivergingIteration& e) {
        CHECK(e.diagnostics().sweeps.size() >= 4);
        CHECK(e.diagnostics().sweeps.back().ratio > 1.0);
    }
}

TEST_CASE("too many diverged paths fail the sweep") {
    auto p = heat_problem([](const Vec& x) { return x[0]; }, zero_f(), 0.0);
    p.domain = Box{{-2.05}, {2.05}};
    CHECK_THROWS_AS(apply_phi(p.zero_grid(), p, mc(200)), FailedSweep);
}

TEST_CASE("integrability guard and sampled Lipschitz constant") {
    Problem p = heat_problem([](const Vec& x) { return x[0] * x[0]; },
                             [](double, const Vec& x, std::span<const double> v) {
                                 return std::sin(x[0]) + std::clamp(v[0], -1.0, 1.0);
                             },
                             1.0);
    p.V = LyapunovV::polynomial(3.0);
    std::vector<std::pair<double, Vec>> samples;
    double brute = 0.0;
    for (int i = -1000; i <= 1000; ++i) {
        Vec x(1);
        x[0] = 0.01 * i;
        samples.emplace_back(0.0, x);
        brute = std::max(brute, x[0] * x[0] / (1.0 + std::pow(std::abs(x[0]), 3)));
    }
    const auto rep = integrability_guard(p, samples);
    CHECK(rep.finite);
    CHECK(rep.n_samples == samples.size());
    CHECK(rep.sup_terminal_ratio == doctest::Approx(brute).epsilon(1e-14));
    CHECK(rep.sup_terminal_ratio <= 1.4);
    CHECK(rep.sup_nonlinearity_ratio <= 1.0);
    CHECK(sampled_lipschitz_constant(p, 2000, 3) <= 1.0 + 1e-12);

    Problem e = p;
    e.g = [](const Vec& x) { return std::exp(x[0]); };
    auto sup_on = [&](double r) {
        std::vector<std::pair<double, Vec>> s;
        for (int i = 0; i <= 100; ++i) {
            Vec x(1);
            x[0] = r * i / 100.0;
            s.emplace_back(0.0, x);
        }
        return integrability_guard(e, s).sup_terminal_ratio;
    };
    CHECK(sup_on(20.0) > 100.0 * sup_on(10.0));
}
