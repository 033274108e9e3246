#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sfpe/coefficients.hpp"
#include "sfpe/errors.hpp"
#include "sfpe/rng.hpp"
#include "sfpe/value_function.hpp"
#include "sfpe/verification.hpp"

using namespace sfpe;

namespace {

ValueGrid grid_1d(int components = 2) {
    return ValueGrid::uniform(1.0, 0.1, 6, {SpaceAxis{-1.0, 1.0, 9}}, components);
}

ValueGrid grid_2d() {
    return ValueGrid::uniform(1.0, 0.05, 4, {SpaceAxis{-1.0, 2.0, 5}, SpaceAxis{0.0, 1.0, 3}}, 3);
}

Vec point(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

}  // namespace

TEST_CASE("layout invariants") {
    const auto g = grid_1d();
    CHECK(g.t_max() == doctest::Approx(0.9));
    CHECK(g.t_max() < g.T());
    CHECK(g.axis_nodes(0).front() == -1.0);
    CHECK(g.axis_nodes(0).back() == 1.0);
    CHECK(g.n_nodes() == 6 * 9);
    CHECK_THROWS_AS(ValueGrid::uniform(1.0, 0.0, 3, {SpaceAxis{-1, 1, 3}}, 1), InvalidArgument);
    CHECK_THROWS_AS(ValueGrid::uniform(1.0, 0.1, 3, {SpaceAxis{1, -1, 3}}, 1), InvalidArgument);
}

TEST_CASE("evaluation: constants, affine exactness and bit-exact nodes") {
    auto g = grid_2d();
    for (std::size_t ti = 0; ti < g.n_time(); ++ti) {
        for (std::size_t si = 0; si < g.n_space(); ++si) {
            const Vec x = g.space_point(si);
            auto v = g.value(ti, si);
            v[0] = 7.25;
            v[1] = 1.5 * x[0] - 0.75 * x[1] + 0.5 * g.time_nodes()[ti] + 0.1;
            v[2] = std::sin(3.0 * x[0] + x[1]) + std::exp(g.time_nodes()[ti]);
        }
    }
    for (std::size_t ti = 0; ti < g.n_time(); ++ti) {
        for (std::size_t si = 0; si < g.n_space(); ++si) {
            const Vec e = g.evaluate(g.time_nodes()[ti], g.space_point(si));
            for (int c = 0; c < 3; ++c) {
                CHECK(e[c] == g.value(ti, si)[static_cast<std::size_t>(c)]);
            }
        }
    }
    const CounterRng rng(1, 2);
    std::array<double, 3> u{};
    for (std::uint64_t i = 0; i < 500; ++i) {
        rng.uniforms(i, 0, u);
        const double t = u[0] * g.t_max();
        const Vec x = point({-1.0 + 3.0 * u[1], u[2]});
        const Vec e = g.evaluate(t, x);
        CHECK(e[0] == doctest::Approx(7.25).epsilon(1e-15));
        CHECK(e[1] == doctest::Approx(1.5 * x[0] - 0.75 * x[1] + 0.5 * t + 0.1).epsilon(1e-13));
    }
    // clamping at the faces
    CHECK(g.evaluate(0.0, point({-5.0, 9.0}))[1] == g.evaluate(0.0, point({-1.0, 1.0}))[1]);
    CHECK_THROWS_AS(g.evaluate(0.96, point({0.0, 0.0})), OutOfRange);
    CHECK_THROWS_AS(g.evaluate(-0.01, point({0.0, 0.0})), OutOfRange);
}

TEST_CASE("evaluation is continuous across cell faces") {
    auto g = random_grid(grid_2d(), 5, 0, 1.0);
    const double face = g.axis_nodes(0)[2];
    for (double t : {0.0, 0.3, 0.61}) {
        for (double y : {0.0, 0.2, 0.77}) {
            const Vec a = g.evaluate(t, point({std::nextafter(face, -1e9), y}));
            const Vec b = g.evaluate(t, point({std::nextafter(face, 1e9), y}));
            CHECK((a - b).norm() <= 1e-12);
        }
    }
}

TEST_CASE("weighted norm examples and norm properties") {
    const WeightedNormSpec spec{0.0, LyapunovV::constant(1.0), 1.0};
    auto z = grid_1d(3);
    CHECK(weighted_norm(z, spec) == 0.0);
    for (std::size_t ti = 0; ti < z.n_time(); ++ti) {
        for (std::size_t si = 0; si < z.n_space(); ++si) {
            z.value(ti, si)[0] = 1.0;
        }
    }
    CHECK(weighted_norm(z, spec) == doctest::Approx(1.0).epsilon(1e-15));  // sqrt(T) at t = 0

    const WeightedNormSpec ws{2.5, LyapunovV::polynomial(1.5), 1.0};
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto a = random_grid(grid_2d(), 17, 2 * k, 2.0);
        const auto b = random_grid(grid_2d(), 17, 2 * k + 1, 0.5);
        const double na = weighted_norm(a, ws);
        ValueGrid scaled = a;
        for (double& v : scaled.data()) {
            v *= -3.0;
        }
        CHECK(weighted_norm(scaled, ws) == doctest::Approx(3.0 * na).epsilon(1e-15));
        ValueGrid sum = a;
        for (std::size_t i = 0; i < sum.data().size(); ++i) {
            sum.data()[i] += b.data()[i];
        }
        CHECK(weighted_norm(sum, ws) <= (na + weighted_norm(b, ws)) * (1.0 + 1e-15));
        CHECK(weighted_distance(a, b, ws) == weighted_norm(a - b, ws));
    }
    CHECK_THROWS_AS(weighted_distance(grid_1d(), grid_2d(), ws), InvalidArgument);
}

TEST_CASE("property: norm monotone in lambda and sandwich on random grids") {
    const CounterRng rng(99, 0);
    std::array<double, 2> u{};
    for (std::uint64_t k = 0; k < 100; ++k) {
        rng.uniforms(k, 0, u);
        const double Lam = 20.0 * u[0];
        const double lam = Lam + 20.0 * u[1];
        const auto w = random_grid(grid_2d(), 3, k, 1.0);
        const LyapunovV V = LyapunovV::polynomial(2.0);
        const double nL = weighted_norm(w, {Lam, V, 1.0});
        const double nl = weighted_norm(w, {lam, V, 1.0});
        CHECK(nL <= nl);
        CHECK(nl <= std::exp((lam - Lam) * 1.0) * nL * (1.0 + 1e-14));
    }
}

TEST_CASE("lyapunov V") {
    const auto V = LyapunovV::polynomial(1.5, 2.0);
    CHECK(V(0.0, point({0.0})) == 2.0);
    CHECK(V(0.0, point({4.0})) == doctest::Approx(2.0 * 9.0));
    CHECK(LyapunovV::constant(3.0)(0.5, point({100.0})) == 3.0);
    CHECK_THROWS_AS(LyapunovV::constant(0.0).validate(), InvalidArgument);
}

TEST_CASE("lyapunov probe: Brownian bound and scale invariance") {
    auto c = make_brownian(1, 1.0, 0.5);
    const auto r = lyapunov_condition_probe(*c, LyapunovV::constant(1.0), 0.0, point({0.0}), 1.0,
                                            20000, 20, {1, 0});
    // E|Z| sqrt(s-t) <= sqrt(1 + s - t) = sqrt(2) by Cauchy-Schwarz.
    CHECK(r.estimate - 3.0 * r.std_error <= std::sqrt(2.0));
    CHECK(r.ci_low < r.estimate);
    CHECK(r.ci_high > r.estimate);
    const auto r2 = lyapunov_condition_probe(*c, LyapunovV::constant(5.0), 0.0, point({0.0}), 1.0,
                                             20000, 20, {1, 0});
    CHECK(r2.estimate == doctest::Approx(r.estimate).epsilon(1e-14));

    // Brute-force oracle: with V = 1 and s - t = 1, the probe is E sqrt(1 + N^2).
    RunningMoments m;
    const CounterRng rng(77, 0);
    std::array<double, 1> n{};
    for (std::uint64_t i = 0; i < 1000000; ++i) {
        rng.normals(i, 0, n);
        m.add(std::sqrt(1.0 + n[0] * n[0]));
    }
    CHECK(std::abs(r.estimate - m.mean()) <= 3.0 * std::hypot(r.std_error, m.std_error()));
}

TEST_CASE("binary and csv round trip") {
    const auto g = random_grid(grid_2d(), 8, 1, 3.0);
    std::stringstream ss;
    write_grid_binary(g, ss);
    const auto back = read_grid_binary(ss);
    CHECK(back.same_layout(g));
    CHECK(back.data() == g.data());
    CHECK(back.time_nodes() == g.time_nodes());

    std::stringstream bad("NOTAGRID");
    CHECK_THROWS(read_grid_binary(bad));

    std::ostringstream csv;
    write_grid_csv(g, csv);
    CHECK(csv.str().find("t,x_1,x_2,v_0,v_1,v_2") != std::string::npos);
}
