#include "sfpe/problem_file.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sfpe/errors.hpp"

namespace sfpe {

namespace {

namespace pt = boost::property_tree;

class Sections {
public:
    explicit Sections(const pt::ptree& tree) : tree_(tree) {}

    bool has(const std::string& section) const { return tree_.find(section) != tree_.not_found(); }

    std::optional<std::string> raw(const std::string& section, const std::string& key) const {
        const auto sec = tree_.get_child_optional(section);
        if (!sec) {
            return std::nullopt;
        }
        const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        return value ? std::optional<std::string>(trim(*value)) : std::nullopt;
    }

    std::string string(const std::string& section, const std::string& key,
                       std::optional<std::string> fallback = std::nullopt) const {
        if (auto v = raw(section, key)) {
            return *v;
        }
        if (fallback) {
            return *fallback;
        }
        throw ConfigError(section + "." + key, "missing required field " + section + "." + key);
    }

    double number(const std::string& section, const std::string& key,
                  std::optional<double> fallback = std::nullopt) const {
        if (auto v = raw(section, key)) {
            return parse_number(*v, section + "." + key);
        }
        if (fallback) {
            return *fallback;
        }
        throw ConfigError(section + "." + key, "missing required field " + section + "." + key);
    }

    std::optional<double> optional_number(const std::string& section, const std::string& key) const {
        if (auto v = raw(section, key)) {
            return parse_number(*v, section + "." + key);
        }
        return std::nullopt;
    }

    std::vector<double> list(const std::string& section, const std::string& key,
                             std::optional<std::vector<double>> fallback = std::nullopt) const {
        const auto v = raw(section, key);
        if (!v) {
            if (fallback) {
                return *fallback;
            }
            throw ConfigError(section + "." + key, "missing required field " + section + "." + key);
        }
        std::vector<double> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            out.push_back(parse_number(trim(item), section + "." + key));
        }
        if (out.empty()) {
            throw ConfigError(section + "." + key, section + "." + key + " is empty");
        }
        return out;
    }

    /// Length-d list; a single value is broadcast.
    std::vector<double> per_axis(const std::string& section, const std::string& key, int d,
                                 std::optional<double> fallback = std::nullopt) const {
        std::vector<double> v;
        if (raw(section, key) || !fallback) {
            v = list(section, key);
        } else {
            v = {*fallback};
        }
        if (v.size() == 1) {
            v.assign(static_cast<std::size_t>(d), v[0]);
        }
        if (static_cast<int>(v.size()) != d) {
            throw ConfigError(section + "." + key, section + "." + key + " needs 1 or " +
                                                       std::to_string(d) + " entries");
        }
        return v;
    }

    void reject_unknown(const std::map<std::string, std::set<std::string>>& allowed) const {
        for (const auto& [section, body] : tree_) {
            const auto it = allowed.find(section);
            if (it == allowed.end()) {
                throw ConfigError(section, "unknown section [" + section + "]");
            }
            for (const auto& [key, value] : body) {
                if (!it->second.count(key)) {
                    throw ConfigError(section + "." + key,
                                      "unknown field " + section + "." + key);
                }
            }
        }
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            return {};
        }
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

private:
    static double parse_number(const std::string& s, const std::string& field) {
        double v = 0.0;
        const auto* end = s.data() + s.size();
        const auto res = std::from_chars(s.data(), end, v);
        if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
            throw ConfigError(field, field + ": '" + s + "' is not a finite number");
        }
        return v;
    }

    const pt::ptree& tree_;
};

int as_count(double v, const std::string& field, int min_value) {
    if (v != std::floor(v) || v < min_value || v > 1e9) {
        throw ConfigError(field, field + " must be an integer >= " + std::to_string(min_value));
    }
    return static_cast<int>(v);
}

Mat as_matrix(const std::vector<double>& v, int d, const std::string& field) {
    if (static_cast<int>(v.size()) != d * d) {
        throw ConfigError(field, field + " needs " + std::to_string(d * d) + " entries (row-major)");
    }
    Mat m(d, d);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            m(r, c) = v[static_cast<std::size_t>(r * d + c)];
        }
    }
    return m;
}

const std::map<std::string, std::set<std::string>> kSchema{
    {"problem", {"name"}},
    {"coefficients",
     {"model", "dimension", "c", "scale", "theta", "mean", "A", "b", "S", "drift", "diffusion",
      "alpha", "scheme"}},
    {"domain",
     {"T", "delta_T", "lo", "hi", "nodes", "time_nodes", "state_lo", "state_hi"}},
    {"terminal", {"g", "scale", "value", "omega"}},
    {"nonlinearity", {"L", "type", "a0", "a", "source", "sine_source", "coupling", "amplitude"}},
    {"lyapunov", {"form", "scale", "exponent", "c_V"}},
    {"solution", {"family", "q", "k", "amplitude", "omega", "beta", "center", "width"}},
};

CoefficientPtr parse_coefficients(const Sections& s, int& d) {
    const std::string model = s.string("coefficients", "model");
    d = as_count(s.number("coefficients", "dimension"), "coefficients.dimension", 1);
    if (d > kMaxDim) {
        throw ConfigError("coefficients.dimension", "dimension exceeds " + std::to_string(kMaxDim));
    }
    const double c = s.number("coefficients", "c");
    if (!(c > 0.0)) {
        throw ConfigError("coefficients.c", "coefficients.c must be > 0");
    }
    if (model == "brownian") {
        return make_brownian(d, s.number("coefficients", "scale", 1.0), c);
    }
    if (model == "ou") {
        return make_ornstein_uhlenbeck(d, s.number("coefficients", "theta", 1.0),
                                       s.number("coefficients", "mean", 0.0),
                                       s.number("coefficients", "scale", 1.0), c);
    }
    if (model == "linear") {
        const Mat A = as_matrix(s.list("coefficients", "A"), d, "coefficients.A");
        Vec b = Vec::Zero(d);
        if (s.raw("coefficients", "b")) {
            const auto bv = s.per_axis("coefficients", "b", d);
            for (int i = 0; i < d; ++i) {
                b[i] = bv[static_cast<std::size_t>(i)];
            }
        }
        Mat S = Mat::Identity(d, d);
        if (s.raw("coefficients", "S")) {
            S = as_matrix(s.list("coefficients", "S"), d, "coefficients.S");
        }
        return make_linear(A, b, S, c);
    }
    if (model == "polynomial") {
        return make_diagonal_polynomial(d, s.list("coefficients", "drift"),
                                        s.list("coefficients", "diffusion"),
                                        s.number("coefficients", "alpha"), c);
    }
    throw ConfigError("coefficients.model", "unknown model '" + model +
                                                "' (brownian, ou, linear, polynomial)");
}

TerminalFn parse_terminal(const Sections& s, int d) {
    const std::string kind = s.string("terminal", "g");
    const double scale = s.number("terminal", "scale", 1.0);
    if (kind == "zero") {
        return [](const Vec&) { return 0.0; };
    }
    if (kind == "constant") {
        const double value = s.number("terminal", "value");
        return [value](const Vec&) { return value; };
    }
    if (kind == "linear") {
        return [scale](const Vec& x) { return scale * x.sum(); };
    }
    if (kind == "quadratic") {
        return [scale](const Vec& x) { return scale * x.squaredNorm(); };
    }
    if (kind == "sine") {
        const auto w = s.per_axis("terminal", "omega", d, 1.0);
        Vec omega(d);
        for (int i = 0; i < d; ++i) {
            omega[i] = w[static_cast<std::size_t>(i)];
        }
        return [scale, omega](const Vec& x) { return scale * std::sin(omega.dot(x)); };
    }
    if (kind == "exp") {
        return [scale](const Vec& x) { return scale * std::exp(x.sum()); };
    }
    throw ConfigError("terminal.g", "unknown terminal function '" + kind +
                                        "' (zero, constant, linear, quadratic, sine, exp)");
}

SolutionSpec parse_solution(const Sections& s, int d, double T) {
    const std::string family = s.string("solution", "family");
    if (family == "quadratic") {
        return quadratic_solution(s.per_axis("solution", "q", d, 1.0), s.number("solution", "k", 0.0),
                                  T);
    }
    if (family == "trig") {
        return trig_solution(s.number("solution", "amplitude", 1.0),
                             s.per_axis("solution", "omega", d, 1.0),
                             s.number("solution", "beta", 0.5), T);
    }
    if (family == "bump") {
        return gaussian_bump_solution(s.number("solution", "amplitude", 1.0),
                                      s.per_axis("solution", "center", d, 0.0),
                                      s.number("solution", "width", 1.0),
                                      s.number("solution", "beta", 0.5), T);
    }
    throw ConfigError("solution.family", "unknown solution family '" + family +
                                             "' (quadratic, trig, bump)");
}

Coupling parse_coupling(const Sections& s, int d) {
    const std::string kind = s.string("nonlinearity", "coupling", "zero");
    if (kind == "zero") {
        return zero_coupling();
    }
    if (kind == "linear") {
        return linear_coupling(s.number("nonlinearity", "a0", 0.0),
                               s.per_axis("nonlinearity", "a", d, 0.0));
    }
    if (kind == "sine") {
        return sine_coupling(s.number("nonlinearity", "amplitude"));
    }
    throw ConfigError("nonlinearity.coupling", "unknown coupling '" + kind + "' (zero, linear, sine)");
}

/// f = source + sine_source sin(sum x) + a0 v_1 + a . (v_2..v_{d+1}).
std::pair<NonlinearityFn, double> parse_nonlinearity(const Sections& s, int d) {
    const std::string kind = s.string("nonlinearity", "type", "zero");
    if (kind == "zero") {
        return {[](double, const Vec&, std::span<const double>) { return 0.0; }, 0.0};
    }
    if (kind == "constant") {
        const double value = s.number("nonlinearity", "source");
        return {[value](double, const Vec&, std::span<const double>) { return value; }, 0.0};
    }
    if (kind == "linear") {
        const double source = s.number("nonlinearity", "source", 0.0);
        const double sine = s.number("nonlinearity", "sine_source", 0.0);
        const double a0 = s.number("nonlinearity", "a0", 0.0);
        const auto a = s.per_axis("nonlinearity", "a", d, 0.0);
        double lip2 = a0 * a0;
        for (double v : a) {
            lip2 += v * v;
        }
        NonlinearityFn f = [=](double, const Vec& x, std::span<const double> v) {
            double out = source + sine * std::sin(x.sum()) + a0 * v[0];
            for (std::size_t i = 0; i < a.size(); ++i) {
                out += a[i] * v[i + 1];
            }
            return out;
        };
        return {f, std::sqrt(lip2)};
    }
    throw ConfigError("nonlinearity.type", "unknown nonlinearity '" + kind + "' (zero, constant, linear)");
}

}  // namespace

ProblemFile parse_problem(const std::string& text) {
    // '#' comment lines are accepted in addition to the INI ';' form.
    std::string cleaned;
    {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const auto first = line.find_first_not_of(" \t");
            if (first != std::string::npos && line[first] == '#') {
                line.clear();
            }
            cleaned += line;
            cleaned += '\n';
        }
    }
    pt::ptree tree;
    try {
        std::istringstream in(cleaned);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("file", std::string("malformed problem file: ") + e.what());
    }
    const Sections s(tree);
    s.reject_unknown(kSchema);

    ProblemFile out;
    out.text = text;
    Problem& p = out.problem;
    p.name = s.string("problem", "name", "problem");

    int d = 0;
    p.coeffs = parse_coefficients(s, d);
    const std::string scheme = s.string("coefficients", "scheme", "euler");
    if (scheme != "euler" && scheme != "tamed") {
        throw ConfigError("coefficients.scheme", "scheme must be euler or tamed");
    }
    out.tamed = scheme == "tamed";

    p.T = s.number("domain", "T");
    if (!(p.T > 0.0)) {
        throw ConfigError("domain.T", "domain.T must be > 0");
    }
    p.delta_T = s.number("domain", "delta_T", 0.0);
    if (p.delta_T < 0.0 || p.delta_T >= p.T) {
        throw ConfigError("domain.delta_T", "domain.delta_T must lie in [0, T)");
    }
    const auto lo = s.per_axis("domain", "lo", d);
    const auto hi = s.per_axis("domain", "hi", d);
    const double default_nodes = d <= 2 ? 41.0 : 11.0;
    const auto nodes = s.per_axis("domain", "nodes", d, default_nodes);
    for (int i = 0; i < d; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!(hi[k] > lo[k])) {
            throw ConfigError("domain.hi", "domain.hi must exceed domain.lo on every axis");
        }
        p.axes.push_back({lo[k], hi[k],
                          static_cast<std::size_t>(as_count(nodes[k], "domain.nodes", 2))});
    }
    p.n_time = static_cast<std::size_t>(as_count(s.number("domain", "time_nodes", 11.0),
                                                 "domain.time_nodes", 1));
    if (s.raw("domain", "state_lo") || s.raw("domain", "state_hi")) {
        Box box{s.per_axis("domain", "state_lo", d), s.per_axis("domain", "state_hi", d)};
        try {
            box.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError("domain.state_hi", e.what());
        }
        p.domain = box;
    }

    if (!s.raw("nonlinearity", "L")) {
        throw ConfigError("nonlinearity.L", "missing required field nonlinearity.L (Lipschitz constant of f)");
    }
    p.L = s.number("nonlinearity", "L");
    if (!(p.L >= 0.0)) {
        throw ConfigError("nonlinearity.L", "nonlinearity.L must be >= 0");
    }

    const std::string form = s.string("lyapunov", "form", "polynomial");
    const double v_scale = s.number("lyapunov", "scale", 1.0);
    if (form == "constant") {
        p.V = LyapunovV::constant(v_scale);
    } else if (form == "polynomial") {
        p.V = LyapunovV::polynomial(s.number("lyapunov", "exponent", p.coeffs->c_mono() + 1.0),
                                    v_scale);
    } else {
        throw ConfigError("lyapunov.form", "lyapunov.form must be constant or polynomial");
    }
    try {
        p.V.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("lyapunov.scale", e.what());
    }
    p.c_V = s.optional_number("lyapunov", "c_V");
    if (p.c_V && !(*p.c_V > 0.0)) {
        throw ConfigError("lyapunov.c_V", "lyapunov.c_V must be > 0");
    }

    double lipschitz = 0.0;
    if (s.has("solution")) {
        if (s.has("terminal")) {
            throw ConfigError("terminal", "[terminal] is implied by [solution]; remove one");
        }
        const Coupling ell = parse_coupling(s, d);
        ProblemLayout layout{p.T, p.axes, p.n_time, p.delta_T, p.V, p.c_V};
        auto mp = manufactured_problem(parse_solution(s, d, p.T), p.coeffs, ell, layout);
        p.g = std::move(mp.problem.g);
        p.f = std::move(mp.problem.f);
        out.reference = std::move(mp.reference);
        lipschitz = ell.lipschitz;
    } else {
        p.g = parse_terminal(s, d);
        auto [f, lip] = parse_nonlinearity(s, d);
        p.f = std::move(f);
        lipschitz = lip;
    }
    if (p.L + 1e-12 < lipschitz) {
        throw ConfigError("nonlinearity.L", "nonlinearity.L = " + std::to_string(p.L) +
                                                " is below the Lipschitz constant " +
                                                std::to_string(lipschitz) + " of f");
    }
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("file", e.what());
    }
    return out;
}

ProblemFile load_problem_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("problem", "cannot open problem file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

}  // namespace sfpe
