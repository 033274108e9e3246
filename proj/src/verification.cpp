#include "sfpe/verification.hpp"

#include <cmath>
#include <numbers>

#include "sfpe/errors.hpp"
#include "sfpe/rng.hpp"

namespace sfpe {

namespace {

Vec to_vec(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = v[i];
    }
    return out;
}

}  // namespace

SolutionSpec quadratic_solution(std::vector<double> q, double k, double T) {
    const Vec qv = to_vec(q);
    SolutionSpec s;
    s.name = "quadratic";
    s.u = [qv, k, T](double t, const Vec& x) {
        return (qv.array() * x.array().square()).sum() + k * (T - t);
    };
    s.du_dt = [k](double, const Vec&) { return -k; };
    s.grad = [qv](double, const Vec& x) -> Vec { return 2.0 * qv.array() * x.array(); };
    s.hessian = [qv](double, const Vec&) -> Mat { return Mat((2.0 * qv).asDiagonal()); };
    return s;
}

SolutionSpec trig_solution(double amplitude, std::vector<double> omega, double beta, double T) {
    const Vec w = to_vec(omega);
    SolutionSpec s;
    s.name = "trig";
    s.u = [=](double t, const Vec& x) {
        return amplitude * std::sin(w.dot(x)) * std::exp(-beta * (T - t));
    };
    s.du_dt = [=](double t, const Vec& x) {
        return beta * amplitude * std::sin(w.dot(x)) * std::exp(-beta * (T - t));
    };
    s.grad = [=](double t, const Vec& x) -> Vec {
        return (amplitude * std::cos(w.dot(x)) * std::exp(-beta * (T - t))) * w;
    };
    s.hessian = [=](double t, const Vec& x) -> Mat {
        return Mat((-amplitude * std::sin(w.dot(x)) * std::exp(-beta * (T - t))) * (w * w.transpose()));
    };
    s.jet = [=](double t, const Vec& x) {
        const double phase = w.dot(x);
        const double decay = amplitude * std::exp(-beta * (T - t));
        const double sn = std::sin(phase);
        const double cs = std::cos(phase);
        SolutionJet j;
        j.u = decay * sn;
        j.du_dt = beta * j.u;
        j.grad = (decay * cs) * w;
        j.hessian = (-j.u) * (w * w.transpose());
        return j;
    };
    return s;
}

SolutionSpec gaussian_bump_solution(double amplitude, std::vector<double> center, double width,
                                    double beta, double T) {
    if (!(width > 0.0)) {
        throw InvalidArgument("gaussian_bump_solution: width must be > 0");
    }
    const Vec c = to_vec(center);
    const double w2 = width * width;
    auto base = [=](double t, const Vec& x) {
        return amplitude * std::exp(-(x - c).squaredNorm() / (2.0 * w2) - beta * (T - t));
    };
    SolutionSpec s;
    s.name = "gaussian_bump";
    s.u = base;
    s.du_dt = [=](double t, const Vec& x) { return beta * base(t, x); };
    s.grad = [=](double t, const Vec& x) -> Vec { return (-base(t, x) / w2) * (x - c); };
    s.hessian = [=](double t, const Vec& x) -> Mat {
        const Vec r = x - c;
        const auto d = x.size();
        return Mat(base(t, x) * (r * r.transpose() / (w2 * w2) - Mat::Identity(d, d) / w2));
    };
    return s;
}

SolutionJet SolutionSpec::evaluate(double t, const Vec& x) const {
    if (jet) {
        return jet(t, x);
    }
    return {u(t, x), du_dt(t, x), grad(t, x), hessian(t, x)};
}

Coupling zero_coupling() {
    return {"zero", [](double, std::span<const double>) { return 0.0; }, 0.0};
}

Coupling linear_coupling(double a0, std::vector<double> a) {
    double norm2 = a0 * a0;
    for (double v : a) {
        norm2 += v * v;
    }
    Coupling c;
    c.name = "linear";
    c.lipschitz = std::sqrt(norm2);
    c.ell = [a0, a = std::move(a)](double y, std::span<const double> z) {
        if (z.size() != a.size()) {
            throw InvalidArgument("linear coupling: gradient slot size mismatch");
        }
        double out = a0 * y;
        for (std::size_t i = 0; i < a.size(); ++i) {
            out += a[i] * z[i];
        }
        return out;
    };
    return c;
}

Coupling sine_coupling(double a) {
    return {"sine", [a](double y, std::span<const double>) { return a * std::sin(y); },
            std::abs(a)};
}

Vec ReferenceSolution::value(double t, const Vec& x) const {
    const Vec gr = grad(t, x);
    Vec out(gr.size() + 1);
    out[0] = u(t, x);
    out.tail(gr.size()) = gr;
    return out;
}

namespace {

double generator_of(const CoefficientSet& coeffs, const SolutionJet& j, double t, const Vec& x) {
    const int d = coeffs.dimension();
    Vec mu(d);
    Mat sigma(d, d);
    coeffs.drift(t, x, mu);
    coeffs.diffusion(t, x, sigma);
    double trace = 0.0;
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            trace += sigma.row(r).dot(sigma.row(c)) * j.hessian(r, c);
        }
    }
    return j.du_dt + j.grad.dot(mu) + 0.5 * trace;
}

}  // namespace

ManufacturedProblem manufactured_problem(const SolutionSpec& spec, CoefficientPtr coeffs,
                                         const Coupling& ell, const ProblemLayout& layout) {
    if (!spec.u || !spec.du_dt || !spec.grad || !spec.hessian) {
        throw InvalidArgument("manufactured_problem: solution family '" + spec.name +
                              "' lacks a required derivative");
    }
    if (!ell.ell || !(ell.lipschitz >= 0.0)) {
        throw InvalidArgument("manufactured_problem: coupling needs ell and a Lipschitz constant");
    }
    if (!coeffs) {
        throw InvalidArgument("manufactured_problem: coefficients missing");
    }
    const int d = coeffs->dimension();

    ManufacturedProblem out;
    Problem& p = out.problem;
    p.name = "manufactured_" + spec.name;
    p.coeffs = coeffs;
    p.T = layout.T;
    p.axes = layout.axes;
    p.n_time = layout.n_time;
    p.delta_T = layout.delta_T;
    p.V = layout.V;
    p.c_V = layout.c_V;
    p.L = ell.lipschitz;
    const double T = layout.T;
    p.g = [spec, T](const Vec& x) { return spec.u(T, x); };
    p.f = [spec, ell, coeffs, d](double t, const Vec& x, std::span<const double> v) {
        const SolutionJet j = spec.evaluate(t, x);
        const double source =
            -generator_of(*coeffs, j, t, x) -
            ell.ell(j.u, std::span<const double>(j.grad.data(), static_cast<std::size_t>(d)));
        return source + ell.ell(v[0], v.subspan(1, static_cast<std::size_t>(d)));
    };
    out.reference.provenance = "manufactured";
    out.reference.u = spec.u;
    out.reference.grad = spec.grad;
    return out;
}

double pde_residual(const Problem& problem, const SolutionSpec& spec, double t, const Vec& x) {
    const Vec gr = spec.grad(t, x);
    std::vector<double> v(static_cast<std::size_t>(gr.size()) + 1);
    v[0] = spec.u(t, x);
    for (Eigen::Index i = 0; i < gr.size(); ++i) {
        v[static_cast<std::size_t>(i) + 1] = gr[i];
    }
    const SolutionJet j{spec.u(t, x), spec.du_dt(t, x), gr, spec.hessian(t, x)};
    return generator_of(*problem.coeffs, j, t, x) + problem.f(t, x, v);
}

ErrorReport compare_to_reference(const ValueGrid& vf, const ReferenceSolution& ref,
                                 const ComparisonRegion& region, const LyapunovV& V) {
    ErrorReport out;
    const double T = vf.T();
    double sum_v = 0.0;
    double sum_g = 0.0;
    for (std::size_t ti = 0; ti < vf.n_time(); ++ti) {
        const double t = vf.time_nodes()[ti];
        if (t > T - region.t_cut) {
            continue;
        }
        for (std::size_t si = 0; si < vf.n_space(); ++si) {
            const Vec x = vf.space_point(si);
            if (region.window && !region.window->contains(x)) {
                continue;
            }
            const Vec exact = ref.value(t, x);
            const auto got = vf.value(ti, si);
            if (exact.size() != static_cast<Eigen::Index>(got.size())) {
                throw InvalidArgument("compare_to_reference: component count mismatch");
            }
            const double ev = std::abs(got[0] - exact[0]);
            double eg2 = 0.0;
            for (Eigen::Index c = 1; c < exact.size(); ++c) {
                const double e = got[static_cast<std::size_t>(c)] - exact[c];
                eg2 += e * e;
            }
            out.sup_value = std::max(out.sup_value, ev);
            out.sup_grad = std::max(out.sup_grad, std::sqrt(eg2));
            sum_v += ev * ev;
            sum_g += eg2;
            out.weighted =
                std::max(out.weighted, std::sqrt((ev * ev + eg2) * (T - t)) / V(t, x));
            ++out.n_nodes;
        }
    }
    if (out.n_nodes == 0) {
        throw InvalidArgument("compare_to_reference: region contains no grid node");
    }
    out.rms_value = std::sqrt(sum_v / static_cast<double>(out.n_nodes));
    out.rms_grad = std::sqrt(sum_g / static_cast<double>(out.n_nodes));
    return out;
}

ValueGrid sample_reference(const ValueGrid& layout, const ReferenceSolution& ref) {
    ValueGrid out = layout;
    for (std::size_t ti = 0; ti < out.n_time(); ++ti) {
        for (std::size_t si = 0; si < out.n_space(); ++si) {
            const Vec v = ref.value(out.time_nodes()[ti], out.space_point(si));
            auto dst = out.value(ti, si);
            if (static_cast<Eigen::Index>(dst.size()) != v.size()) {
                throw InvalidArgument("sample_reference: component count mismatch");
            }
            for (std::size_t c = 0; c < dst.size(); ++c) {
                dst[c] = v[static_cast<Eigen::Index>(c)];
            }
        }
    }
    return out;
}

ValueGrid random_grid(const ValueGrid& layout, std::uint64_t seed, std::uint64_t stream,
                      double amplitude) {
    ValueGrid out = layout;
    const CounterRng rng(seed, stream);
    auto& data = out.data();
    const auto m = static_cast<std::size_t>(out.components());
    for (std::size_t node = 0; node < out.n_nodes(); ++node) {
        rng.uniforms(node, 0, std::span<double>(data.data() + node * m, m));
        for (std::size_t c = 0; c < m; ++c) {
            data[node * m + c] = amplitude * (2.0 * data[node * m + c] - 1.0);
        }
    }
    return out;
}

namespace {

Problem closed_form_problem(std::string name, CoefficientPtr coeffs, const ProblemLayout& layout,
                            TerminalFn g) {
    Problem p;
    p.name = std::move(name);
    p.coeffs = std::move(coeffs);
    p.T = layout.T;
    p.axes = layout.axes;
    p.n_time = layout.n_time;
    p.delta_T = layout.delta_T;
    p.V = layout.V;
    p.c_V = layout.c_V;
    p.g = std::move(g);
    p.f = [](double, const Vec&, std::span<const double>) { return 0.0; };
    p.L = 0.0;
    return p;
}

Benchmark from_manufactured(std::string name, std::string description, ManufacturedProblem mp,
                            ComparisonRegion region) {
    mp.problem.name = name;
    return {std::move(name), std::move(description), std::move(mp.problem),
            std::move(mp.reference), std::move(region)};
}

}  // namespace

std::vector<Benchmark> benchmark_suite() {
    constexpr double T = 1.0;
    constexpr double pi = std::numbers::pi;
    const double t_cut = 5.0 * (T / 50.0);
    std::vector<Benchmark> out;

    ProblemLayout heat;
    heat.T = T;
    heat.axes = {{-2.0, 2.0, 21}};
    heat.n_time = 6;
    heat.V = LyapunovV::polynomial(1.5);

    {
        Problem p = closed_form_problem("heat_linear", make_brownian(1, 1.0, 0.5), heat,
                                        [](const Vec& x) { return x[0]; });
        ReferenceSolution ref{"closed-form", [](double, const Vec& x) { return x[0]; },
                              [](double, const Vec&) -> Vec { return Vec::Ones(1); }};
        out.push_back({"heat_linear", "f = 0, g(x) = x, Brownian motion", std::move(p),
                       std::move(ref), {t_cut, std::nullopt}});
    }
    out.push_back(from_manufactured(
        "heat_quadratic", "f = 0, g(x) = x^2, Brownian motion; u = x^2 + (T - t)",
        manufactured_problem(quadratic_solution({1.0}, 1.0, T), make_brownian(1, 1.0, 0.5),
                             zero_coupling(), heat),
        {t_cut, std::nullopt}));
    {
        Problem p = closed_form_problem("ou_linear", make_ornstein_uhlenbeck(1, 1.0, 0.0, 1.0, 0.5),
                                        heat, [](const Vec& x) { return x[0]; });
        ReferenceSolution ref{
            "closed-form", [T](double t, const Vec& x) { return x[0] * std::exp(-(T - t)); },
            [T](double t, const Vec&) -> Vec { return Vec::Constant(1, std::exp(-(T - t))); }};
        out.push_back({"ou_linear", "f = 0, g(x) = x, Ornstein-Uhlenbeck; u = x e^{-(T-t)}",
                       std::move(p), std::move(ref), {t_cut, std::nullopt}});
    }

    ProblemLayout sine;
    sine.T = T;
    sine.axes = {{-2.0 * pi, 2.0 * pi, 41}};
    sine.n_time = 11;
    sine.V = LyapunovV::constant(1.0);
    const ComparisonRegion inner{t_cut, Box{{-pi}, {pi}}};
    out.push_back(from_manufactured(
        "sine_eigen", "u = sin(x) e^{-(T-t)/2}, f = 0",
        manufactured_problem(trig_solution(1.0, {1.0}, 0.5, T), make_brownian(1, 1.0, 0.5),
                             zero_coupling(), sine),
        inner));
    out.push_back(from_manufactured(
        "sine_coupled", "u = sin(x) e^{-(T-t)/2}, ell(y, z) = 0.5 z (L = 0.5)",
        manufactured_problem(trig_solution(1.0, {1.0}, 0.5, T), make_brownian(1, 1.0, 0.5),
                             linear_coupling(0.0, {0.5}), sine),
        inner));

    ProblemLayout bump;
    bump.T = T;
    bump.axes = {{-3.0, 3.0, 13}, {-3.0, 3.0, 13}};
    bump.n_time = 6;
    bump.V = LyapunovV::constant(1.0);
    out.push_back(from_manufactured(
        "bump_2d", "2-d Gaussian bump under Ornstein-Uhlenbeck, ell(y, z) = 0.25 sin(y)",
        manufactured_problem(gaussian_bump_solution(1.0, {0.0, 0.0}, 1.0, 0.5, T),
                             make_ornstein_uhlenbeck(2, 0.5, 0.0, 1.0, 0.5), sine_coupling(0.25),
                             bump),
        {t_cut, Box{{-1.5, -1.5}, {1.5, 1.5}}}));
    return out;
}

Benchmark find_benchmark(const std::string& name) {
    for (auto& b : benchmark_suite()) {
        if (b.name == name) {
            return b;
        }
    }
    throw InvalidArgument("unknown benchmark '" + name + "'");
}

}  // namespace sfpe
