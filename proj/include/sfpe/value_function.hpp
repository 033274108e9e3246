#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sfpe/coefficients.hpp"
#include "sfpe/linalg.hpp"
#include "sfpe/sde_engine.hpp"

namespace sfpe {

/// Uniform node set on [lo, hi] with `count` nodes (count == 1 puts the single node at lo).
struct SpaceAxis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 2;

    bool operator==(const SpaceAxis&) const = default;
};

/// v : [0, T - delta_T] x box -> R^m stored on a tensor grid.
///
/// Linear in time, multilinear in space, clamped at the box faces. Values are
/// stored row-major as [time][space multi-index (first axis slowest)][component].
/// Reading at a stored node returns the stored value bit-exactly.
class ValueGrid {
public:
    ValueGrid(double T, double delta_T, std::vector<double> time_nodes, std::vector<SpaceAxis> axes,
              int components);

    /// n_time uniform time nodes on [0, T - delta_T], zero-initialized.
    static ValueGrid uniform(double T, double delta_T, std::size_t n_time,
                             std::vector<SpaceAxis> axes, int components);

    double T() const { return T_; }
    double delta_T() const { return delta_T_; }
    int dimension() const { return static_cast<int>(axes_.size()); }
    int components() const { return components_; }
    const std::vector<double>& time_nodes() const { return time_nodes_; }
    const std::vector<SpaceAxis>& axes() const { return axes_; }
    const std::vector<double>& axis_nodes(int axis) const { return axis_nodes_[axis]; }
    std::size_t n_time() const { return time_nodes_.size(); }
    std::size_t n_space() const { return n_space_; }
    std::size_t n_nodes() const { return n_time() * n_space_; }
    /// Largest readable time.
    double t_max() const { return time_nodes_.back(); }

    std::span<const double> value(std::size_t time_index, std::size_t space_index) const;
    std::span<double> value(std::size_t time_index, std::size_t space_index);
    Vec space_point(std::size_t space_index) const;

    const std::vector<double>& data() const { return values_; }
    std::vector<double>& data() { return values_; }

    /// Interpolated value at (t, x); x is clamped into the box.
    /// Throws OutOfRange when t lies outside [first time node, T - delta_T].
    void evaluate(double t, const Vec& x, std::span<double> out) const;
    Vec evaluate(double t, const Vec& x) const;

    /// Same time nodes, axes, component count, T and delta_T.
    bool same_layout(const ValueGrid& other) const;

    /// Elementwise a - b (layouts must match).
    friend ValueGrid operator-(const ValueGrid& a, const ValueGrid& b);

private:
    double T_;
    double delta_T_;
    std::vector<double> time_nodes_;
    std::vector<SpaceAxis> axes_;
    std::vector<std::vector<double>> axis_nodes_;
    std::vector<double> axis_inv_step_;
    std::vector<std::size_t> strides_;
    int components_;
    std::size_t n_space_ = 1;
    std::vector<double> values_;
};

/// Positive weight V(t, x) = scale * (1 + |x|^exponent), or the constant `scale`.
struct LyapunovV {
    enum class Form { Constant, Polynomial };

    Form form = Form::Polynomial;
    double scale = 1.0;
    double exponent = 2.0;

    static LyapunovV constant(double value) { return {Form::Constant, value, 0.0}; }
    /// Default form 1 + |x|^(c + 1).
    static LyapunovV polynomial(double exponent, double scale = 1.0) {
        return {Form::Polynomial, scale, exponent};
    }

    void validate() const;
    double operator()(double t, const Vec& x) const;
    std::string describe() const;
};

/// Parameters of |w|_lambda = sup e^{lambda t} |w(t,x)| sqrt(T - t) / V(t, x).
struct WeightedNormSpec {
    double lambda = 0.0;
    LyapunovV V;
    double T = 1.0;
};

/// Discrete sup of the weighted norm over the grid nodes (a lower bound for
/// the sup over the continuum). Uses the Euclidean norm on each node vector.
double weighted_norm(const ValueGrid& w, const WeightedNormSpec& spec);

/// |a - b|_lambda; throws InvalidArgument on mismatched layouts.
double weighted_distance(const ValueGrid& a, const ValueGrid& b, const WeightedNormSpec& spec);

struct LyapunovProbeReport {
    double estimate = 0.0;  ///< E[V(s,X_s) |Z_s|] sqrt(s-t) / V(t,x)
    double std_error = 0.0;
    double ci_low = 0.0;    ///< 95% normal interval
    double ci_high = 0.0;
    std::size_t n_paths = 0;
    std::size_t diverged = 0;
};

/// Monte-Carlo estimate of the admissible constant in
///   E[V(s, X) |Z_s|] <= (c / sqrt(s - t)) V(t, x).
LyapunovProbeReport lyapunov_condition_probe(const CoefficientSet& coeffs, const LyapunovV& V,
                                             double t, const Vec& x, double s,
                                             std::size_t n_paths, std::size_t n_steps,
                                             const RngSpec& rng,
                                             const SimulationOptions& options = {},
                                             unsigned threads = 1);

/// Binary grid layout, all fields little-endian:
///   "SFPEGRID" | u32 version (=1) | u32 d | u32 components | u32 n_time
///   | f64 T | f64 delta_T | f64[n_time] time nodes
///   | d x (f64 lo, f64 hi, u64 count) | f64 values (row-major, see ValueGrid).
void write_grid_binary(const ValueGrid& grid, std::ostream& out);
ValueGrid read_grid_binary(std::istream& in);

/// CSV layout: a `# grid ...` header line with T, delta_T and the axes, then
/// rows t,x_1..x_d,v_0..v_{m-1} with 17 significant digits.
void write_grid_csv(const ValueGrid& grid, std::ostream& out);

}  // namespace sfpe
