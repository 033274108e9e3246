#include "sfpe/value_function.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "sfpe/bel_weight.hpp"
#include "sfpe/errors.hpp"

namespace sfpe {

namespace {

// Finds the cell [nodes[i], nodes[i+1]] holding x (already clamped) and the
// fractional position inside it; frac == 0 exactly at a node. `inv_step` is
// the reciprocal of the nominal uniform spacing (0 for non-uniform nodes).
void locate(const std::vector<double>& nodes, double inv_step, double x, std::size_t& index,
            double& frac) {
    const std::size_t n = nodes.size();
    if (n == 1) {
        index = 0;
        frac = 0.0;
        return;
    }
    std::size_t i;
    if (inv_step > 0.0) {
        const double guess = std::floor((x - nodes.front()) * inv_step);
        i = static_cast<std::size_t>(std::clamp(guess, 0.0, static_cast<double>(n - 2)));
        while (i > 0 && x < nodes[i]) {
            --i;
        }
        while (i + 2 < n && x >= nodes[i + 1]) {
            ++i;
        }
    } else {
        const auto it = std::upper_bound(nodes.begin() + 1, nodes.end() - 1, x);
        i = static_cast<std::size_t>(it - nodes.begin()) - 1;
    }
    index = i;
    frac = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
}

}  // namespace

ValueGrid::ValueGrid(double T, double delta_T, std::vector<double> time_nodes,
                     std::vector<SpaceAxis> axes, int components)
    : T_(T), delta_T_(delta_T), time_nodes_(std::move(time_nodes)), axes_(std::move(axes)),
      components_(components) {
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw InvalidArgument("ValueGrid: T must be finite and > 0");
    }
    if (!(delta_T > 0.0) || !(delta_T < T)) {
        throw InvalidArgument("ValueGrid: delta_T must lie in (0, T)");
    }
    if (time_nodes_.empty()) {
        throw InvalidArgument("ValueGrid: need at least one time node");
    }
    for (std::size_t k = 0; k < time_nodes_.size(); ++k) {
        if (!std::isfinite(time_nodes_[k]) || time_nodes_[k] < 0.0 ||
            (k > 0 && !(time_nodes_[k] > time_nodes_[k - 1]))) {
            throw InvalidArgument("ValueGrid: time nodes must be finite, >= 0, strictly increasing");
        }
    }
    if (time_nodes_.back() > T - delta_T) {
        throw InvalidArgument("ValueGrid: time nodes must not exceed T - delta_T");
    }
    if (axes_.empty() || static_cast<int>(axes_.size()) > kMaxDim) {
        throw InvalidArgument("ValueGrid: dimension out of range");
    }
    if (components < 1) {
        throw InvalidArgument("ValueGrid: need at least one component");
    }
    strides_.assign(axes_.size(), 1);
    for (std::size_t a = axes_.size(); a-- > 0;) {
        const auto& ax = axes_[a];
        if (ax.count == 0 || !std::isfinite(ax.lo) || !std::isfinite(ax.hi) ||
            (ax.count > 1 && !(ax.hi > ax.lo))) {
            throw InvalidArgument("ValueGrid: each axis needs count >= 1 and lo < hi");
        }
        strides_[a] = n_space_;
        n_space_ *= ax.count;
    }
    axis_nodes_.resize(axes_.size());
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const auto& ax = axes_[a];
        auto& nodes = axis_nodes_[a];
        nodes.resize(ax.count);
        if (ax.count == 1) {
            nodes[0] = ax.lo;
            continue;
        }
        const double h = (ax.hi - ax.lo) / static_cast<double>(ax.count - 1);
        for (std::size_t j = 0; j + 1 < ax.count; ++j) {
            nodes[j] = ax.lo + static_cast<double>(j) * h;
        }
        nodes.back() = ax.hi;
    }
    axis_inv_step_.resize(axes_.size());
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const auto& ax = axes_[a];
        axis_inv_step_[a] =
            ax.count > 1 ? static_cast<double>(ax.count - 1) / (ax.hi - ax.lo) : 0.0;
    }
    values_.assign(n_nodes() * static_cast<std::size_t>(components_), 0.0);
}

ValueGrid ValueGrid::uniform(double T, double delta_T, std::size_t n_time,
                             std::vector<SpaceAxis> axes, int components) {
    if (n_time == 0) {
        throw InvalidArgument("ValueGrid::uniform: need at least one time node");
    }
    std::vector<double> nodes(n_time);
    const double t_last = T - delta_T;
    for (std::size_t k = 0; k < n_time; ++k) {
        nodes[k] = n_time == 1 ? 0.0
                               : t_last * static_cast<double>(k) / static_cast<double>(n_time - 1);
    }
    if (n_time > 1) {
        nodes.back() = t_last;
    }
    return ValueGrid(T, delta_T, std::move(nodes), std::move(axes), components);
}

std::span<const double> ValueGrid::value(std::size_t ti, std::size_t si) const {
    const auto m = static_cast<std::size_t>(components_);
    return {values_.data() + (ti * n_space_ + si) * m, m};
}

std::span<double> ValueGrid::value(std::size_t ti, std::size_t si) {
    const auto m = static_cast<std::size_t>(components_);
    return {values_.data() + (ti * n_space_ + si) * m, m};
}

Vec ValueGrid::space_point(std::size_t si) const {
    Vec x(dimension());
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const std::size_t j = (si / strides_[a]) % axes_[a].count;
        x[static_cast<Eigen::Index>(a)] = axis_nodes_[a][j];
    }
    return x;
}

void ValueGrid::evaluate(double t, const Vec& x, std::span<double> out) const {
    if (!(t >= time_nodes_.front()) || t > T_ - delta_T_) {
        throw OutOfRange("ValueGrid::evaluate: t outside [" + std::to_string(time_nodes_.front()) +
                         ", T - delta_T]");
    }
    if (x.size() != dimension() || out.size() != static_cast<std::size_t>(components_)) {
        throw InvalidArgument("ValueGrid::evaluate: argument size mismatch");
    }
    std::size_t ti = 0;
    double tf = 0.0;
    locate(time_nodes_, 0.0, std::min(t, time_nodes_.back()), ti, tf);

    const int d = dimension();
    std::size_t cell[kMaxDim];
    double frac[kMaxDim];
    for (int a = 0; a < d; ++a) {
        const auto& ax = axes_[static_cast<std::size_t>(a)];
        const double xc = std::clamp(x[a], ax.lo, ax.count > 1 ? ax.hi : ax.lo);
        locate(axis_nodes_[static_cast<std::size_t>(a)], axis_inv_step_[static_cast<std::size_t>(a)], xc,
               cell[a], frac[a]);
    }

    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t m = static_cast<std::size_t>(components_);
    for (int tc = 0; tc < 2; ++tc) {
        const double wt = tc == 0 ? 1.0 - tf : tf;
        if (wt == 0.0) {
            continue;
        }
        const std::size_t tindex = ti + static_cast<std::size_t>(tc);
        for (unsigned corner = 0; corner < (1u << d); ++corner) {
            double w = wt;
            std::size_t si = 0;
            for (int a = 0; a < d && w != 0.0; ++a) {
                const bool upper = (corner >> a) & 1u;
                w *= upper ? frac[a] : 1.0 - frac[a];
                si += (cell[a] + (upper ? 1 : 0)) * strides_[static_cast<std::size_t>(a)];
            }
            if (w == 0.0) {
                continue;
            }
            const double* v = values_.data() + (tindex * n_space_ + si) * m;
            for (std::size_t c = 0; c < m; ++c) {
                out[c] += w * v[c];
            }
        }
    }
}

Vec ValueGrid::evaluate(double t, const Vec& x) const {
    Vec out(components_);
    evaluate(t, x, std::span<double>(out.data(), static_cast<std::size_t>(components_)));
    return out;
}

bool ValueGrid::same_layout(const ValueGrid& other) const {
    return T_ == other.T_ && delta_T_ == other.delta_T_ && time_nodes_ == other.time_nodes_ &&
           axes_ == other.axes_ && components_ == other.components_;
}

ValueGrid operator-(const ValueGrid& a, const ValueGrid& b) {
    if (!a.same_layout(b)) {
        throw InvalidArgument("ValueGrid subtraction: mismatched node sets");
    }
    ValueGrid out = a;
    for (std::size_t i = 0; i < out.values_.size(); ++i) {
        out.values_[i] = a.values_[i] - b.values_[i];
    }
    return out;
}

void LyapunovV::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidArgument("LyapunovV: scale must be finite and > 0");
    }
    if (form == Form::Polynomial && (!(exponent > 0.0) || !std::isfinite(exponent))) {
        throw InvalidArgument("LyapunovV: exponent must be finite and > 0");
    }
}

double LyapunovV::operator()(double, const Vec& x) const {
    if (form == Form::Constant) {
        return scale;
    }
    return scale * (1.0 + std::pow(x.norm(), exponent));
}

std::string LyapunovV::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    if (form == Form::Constant) {
        os << "constant(" << scale << ")";
    } else {
        os << scale << "*(1+|x|^" << exponent << ")";
    }
    return os.str();
}

namespace {

double weighted_sup(const ValueGrid& grid, const WeightedNormSpec& spec,
                    const ValueGrid* subtract) {
    spec.V.validate();
    if (!std::isfinite(spec.lambda)) {
        throw InvalidArgument("weighted_norm: lambda must be finite");
    }
    if (!(spec.T > 0.0)) {
        throw InvalidArgument("weighted_norm: T must be > 0");
    }
    const std::size_t m = static_cast<std::size_t>(grid.components());
    std::vector<double> inv_v(grid.n_space());
    double sup = 0.0;
    for (std::size_t ti = 0; ti < grid.n_time(); ++ti) {
        const double t = grid.time_nodes()[ti];
        const double time_factor = std::exp(spec.lambda * t) * std::sqrt(spec.T - t);
        for (std::size_t si = 0; si < grid.n_space(); ++si) {
            const auto a = grid.value(ti, si);
            double norm2 = 0.0;
            for (std::size_t c = 0; c < m; ++c) {
                const double v = subtract ? a[c] - subtract->value(ti, si)[c] : a[c];
                norm2 += v * v;
            }
            const double vx = spec.V(t, grid.space_point(si));
            sup = std::max(sup, time_factor * std::sqrt(norm2) / vx);
        }
    }
    return sup;
}

}  // namespace

double weighted_norm(const ValueGrid& w, const WeightedNormSpec& spec) {
    return weighted_sup(w, spec, nullptr);
}

double weighted_distance(const ValueGrid& a, const ValueGrid& b, const WeightedNormSpec& spec) {
    if (!a.same_layout(b)) {
        throw InvalidArgument("weighted_distance: mismatched node sets");
    }
    return weighted_sup(a, spec, &b);
}

namespace {

struct ScalarAcc {
    RunningMoments moments;
    std::size_t diverged = 0;
    void merge(const ScalarAcc& o) {
        moments.merge(o.moments);
        diverged += o.diverged;
    }
};

}  // namespace

LyapunovProbeReport lyapunov_condition_probe(const CoefficientSet& coeffs, const LyapunovV& V,
                                             double t, const Vec& x, double s,
                                             std::size_t n_paths, std::size_t n_steps,
                                             const RngSpec& rng, const SimulationOptions& options,
                                             unsigned threads) {
    if (!(s > t)) {
        throw InvalidArgument("lyapunov_condition_probe: requires s > t");
    }
    if (n_paths < 2) {
        throw InvalidArgument("lyapunov_condition_probe: need at least two paths");
    }
    V.validate();
    auto grid = std::make_shared<const TimeGrid>(TimeGrid::uniform(t, s, n_steps));
    const double gap = s - t;
    const double v0 = V(t, x);
    const std::size_t last = grid->n_nodes() - 1;

    const ScalarAcc acc = reduce_paths(
        coeffs, x, grid, n_paths, rng, options, threads, ScalarAcc{},
        [&](ScalarAcc& a, PathBundle& path) {
            if (path.diverged()) {
                ++a.diverged;
                return;
            }
            accumulate_Y(path, coeffs);
            const double znorm = std::sqrt(1.0 + path.y(last).squaredNorm() / (gap * gap));
            const Vec xs = path.x(last);
            a.moments.add(V(s, xs) * znorm * std::sqrt(gap) / v0);
        });

    LyapunovProbeReport report;
    report.estimate = acc.moments.mean();
    report.std_error = acc.moments.std_error();
    report.ci_low = report.estimate - 1.96 * report.std_error;
    report.ci_high = report.estimate + 1.96 * report.std_error;
    report.n_paths = n_paths;
    report.diverged = acc.diverged;
    return report;
}

namespace {

constexpr char kMagic[8] = {'S', 'F', 'P', 'E', 'G', 'R', 'I', 'D'};

template <class T>
void put_le(std::ostream& out, T value) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw InvalidArgument("read_grid_binary: truncated input");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_grid_binary(const ValueGrid& grid, std::ostream& out) {
    out.write(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.dimension()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.components()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.n_time()));
    put_le<double>(out, grid.T());
    put_le<double>(out, grid.delta_T());
    for (double t : grid.time_nodes()) {
        put_le<double>(out, t);
    }
    for (const auto& ax : grid.axes()) {
        put_le<double>(out, ax.lo);
        put_le<double>(out, ax.hi);
        put_le<std::uint64_t>(out, ax.count);
    }
    for (double v : grid.data()) {
        put_le<double>(out, v);
    }
}

ValueGrid read_grid_binary(std::istream& in) {
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw InvalidArgument("read_grid_binary: bad magic");
    }
    if (get_le<std::uint32_t>(in) != 1) {
        throw InvalidArgument("read_grid_binary: unsupported version");
    }
    const auto d = get_le<std::uint32_t>(in);
    const auto m = get_le<std::uint32_t>(in);
    const auto n_time = get_le<std::uint32_t>(in);
    if (d == 0 || d > static_cast<std::uint32_t>(kMaxDim)) {
        throw InvalidArgument("read_grid_binary: bad dimension");
    }
    const double T = get_le<double>(in);
    const double delta_T = get_le<double>(in);
    std::vector<double> times(n_time);
    for (auto& t : times) {
        t = get_le<double>(in);
    }
    std::vector<SpaceAxis> axes(d);
    for (auto& ax : axes) {
        ax.lo = get_le<double>(in);
        ax.hi = get_le<double>(in);
        ax.count = get_le<std::uint64_t>(in);
    }
    ValueGrid grid(T, delta_T, std::move(times), std::move(axes), static_cast<int>(m));
    for (auto& v : grid.data()) {
        v = get_le<double>(in);
    }
    return grid;
}

void write_grid_csv(const ValueGrid& grid, std::ostream& out) {
    const auto old_precision = out.precision(17);
    out << "# grid T=" << grid.T() << " delta_T=" << grid.delta_T() << " axes=";
    for (std::size_t a = 0; a < grid.axes().size(); ++a) {
        const auto& ax = grid.axes()[a];
        out << (a ? ";" : "") << ax.lo << ':' << ax.hi << ':' << ax.count;
    }
    out << '\n' << 't';
    for (int i = 1; i <= grid.dimension(); ++i) {
        out << ",x_" << i;
    }
    for (int c = 0; c < grid.components(); ++c) {
        out << ",v_" << c;
    }
    out << '\n';
    for (std::size_t ti = 0; ti < grid.n_time(); ++ti) {
        for (std::size_t si = 0; si < grid.n_space(); ++si) {
            out << grid.time_nodes()[ti];
            const Vec x = grid.space_point(si);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                out << ',' << x[i];
            }
            for (double v : grid.value(ti, si)) {
                out << ',' << v;
            }
            out << '\n';
        }
    }
    out.precision(old_precision);
}

}  // namespace sfpe
