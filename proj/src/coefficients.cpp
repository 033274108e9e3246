#include "sfpe/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sfpe/errors.hpp"

namespace sfpe {

CoefficientSet::CoefficientSet(int dimension, double alpha, double c_mono)
    : dim_(dimension), alpha_(alpha), c_mono_(c_mono) {
    if (dimension < 1 || dimension > kMaxDim) {
        throw InvalidArgument("CoefficientSet: dimension must be in [1, " +
                              std::to_string(kMaxDim) + "]");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw InvalidArgument("CoefficientSet: alpha must be finite and > 0");
    }
    if (!(c_mono > 0.0) || !std::isfinite(c_mono)) {
        throw InvalidArgument("CoefficientSet: c_mono must be finite and > 0");
    }
}

namespace {

class ScaledIdentityDiffusion : public CoefficientSet {
public:
    ScaledIdentityDiffusion(int d, double scale, double c_mono)
        : CoefficientSet(d, scale * scale, c_mono), scale_(scale) {}

    void diffusion(double, const Vec&, Mat& out) const override {
        out = scale_ * Mat::Identity(dimension(), dimension());
    }
    void diffusion_derivative(double, const Vec&, int, Mat& out) const override {
        out = Mat::Zero(dimension(), dimension());
    }
    bool diffusion_state_independent() const override { return true; }
    bool diffusion_diagonal() const override { return true; }
    bool diffusion_constant() const override { return true; }
    bool drift_jacobian_constant() const override { return true; }

protected:
    double scale_;
};

class Brownian final : public ScaledIdentityDiffusion {
public:
    using ScaledIdentityDiffusion::ScaledIdentityDiffusion;

    std::string name() const override { return "brownian"; }
    void drift(double, const Vec& x, Vec& out) const override { out = Vec::Zero(x.size()); }
    void drift_jacobian(double, const Vec&, Mat& out) const override {
        out = Mat::Zero(dimension(), dimension());
    }
};

class OrnsteinUhlenbeck final : public ScaledIdentityDiffusion {
public:
    OrnsteinUhlenbeck(int d, double theta, double mean, double scale, double c_mono)
        : ScaledIdentityDiffusion(d, scale, c_mono), theta_(theta), mean_(mean) {}

    std::string name() const override { return "ou"; }
    void drift(double, const Vec& x, Vec& out) const override {
        out = -theta_ * (x.array() - mean_).matrix();
    }
    void drift_jacobian(double, const Vec&, Mat& out) const override {
        out = -theta_ * Mat::Identity(dimension(), dimension());
    }

private:
    double theta_;
    double mean_;
};

double min_eigenvalue_of_ssT(const Mat& s) {
    const Mat ssT = s * s.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(ssT, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

class Linear final : public CoefficientSet {
public:
    Linear(const Mat& A, const Vec& b, const Mat& S, double c_mono)
        : CoefficientSet(static_cast<int>(A.rows()), min_eigenvalue_of_ssT(S), c_mono),
          A_(A), b_(b), S_(S) {}

    std::string name() const override { return "linear"; }
    void drift(double, const Vec& x, Vec& out) const override { out = A_ * x + b_; }
    void diffusion(double, const Vec&, Mat& out) const override { out = S_; }
    void drift_jacobian(double, const Vec&, Mat& out) const override { out = A_; }
    void diffusion_derivative(double, const Vec&, int, Mat& out) const override {
        out = Mat::Zero(dimension(), dimension());
    }
    bool diffusion_state_independent() const override { return true; }
    bool diffusion_diagonal() const override { return S_.isDiagonal(0.0); }
    bool diffusion_constant() const override { return true; }
    bool drift_jacobian_constant() const override { return true; }

private:
    Mat A_;
    Vec b_;
    Mat S_;
};

double poly_value(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc = acc * x + *it;
    }
    return acc;
}

double poly_derivative(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        acc = acc * x + static_cast<double>(k) * c[k];
    }
    return acc;
}

class DiagonalPolynomial final : public CoefficientSet {
public:
    DiagonalPolynomial(int d, std::vector<double> drift, std::vector<double> diffusion,
                       double alpha, double c_mono)
        : CoefficientSet(d, alpha, c_mono), drift_(std::move(drift)),
          diffusion_(std::move(diffusion)) {
        if (diffusion_.empty()) {
            throw InvalidArgument("diagonal polynomial: diffusion coefficients must be non-empty");
        }
    }

    std::string name() const override { return "poly_diagonal"; }
    void drift(double, const Vec& x, Vec& out) const override {
        out.resize(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            out[i] = poly_value(drift_, x[i]);
        }
    }
    void diffusion(double, const Vec& x, Mat& out) const override {
        out = Mat::Zero(dimension(), dimension());
        for (int i = 0; i < dimension(); ++i) {
            out(i, i) = poly_value(diffusion_, x[i]);
        }
    }
    void drift_jacobian(double, const Vec& x, Mat& out) const override {
        out = Mat::Zero(dimension(), dimension());
        for (int i = 0; i < dimension(); ++i) {
            out(i, i) = poly_derivative(drift_, x[i]);
        }
    }
    void diffusion_derivative(double, const Vec& x, int j, Mat& out) const override {
        out = Mat::Zero(dimension(), dimension());
        out(j, j) = poly_derivative(diffusion_, x[j]);
    }
    bool diffusion_state_independent() const override { return diffusion_.size() <= 1; }
    bool diffusion_diagonal() const override { return true; }
    bool diffusion_constant() const override { return diffusion_.size() <= 1; }
    bool drift_jacobian_constant() const override { return drift_.size() <= 2; }

private:
    std::vector<double> drift_;
    std::vector<double> diffusion_;
};

}  // namespace

CoefficientPtr make_brownian(int d, double scale, double c_mono) {
    if (!(scale > 0.0)) {
        throw InvalidArgument("brownian: scale must be > 0");
    }
    return std::make_shared<Brownian>(d, scale, c_mono);
}

CoefficientPtr make_ornstein_uhlenbeck(int d, double theta, double mean, double scale,
                                       double c_mono) {
    if (!(scale > 0.0)) {
        throw InvalidArgument("ou: scale must be > 0");
    }
    return std::make_shared<OrnsteinUhlenbeck>(d, theta, mean, scale, c_mono);
}

CoefficientPtr make_linear(const Mat& A, const Vec& b, const Mat& S, double c_mono) {
    if (A.rows() != A.cols() || S.rows() != A.rows() || S.cols() != A.cols() ||
        b.size() != A.rows()) {
        throw InvalidArgument("linear: inconsistent matrix shapes");
    }
    return std::make_shared<Linear>(A, b, S, c_mono);
}

CoefficientPtr make_diagonal_polynomial(int d, std::vector<double> drift,
                                        std::vector<double> diffusion, double alpha,
                                        double c_mono) {
    return std::make_shared<DiagonalPolynomial>(d, std::move(drift), std::move(diffusion), alpha,
                                                c_mono);
}

CoefficientConditionReport check_coefficient_conditions(const CoefficientSet& coeffs,
                                                        const std::vector<ConditionSample>& cloud) {
    if (cloud.empty()) {
        throw InvalidArgument("check_coefficient_conditions: empty cloud");
    }
    CoefficientConditionReport report;
    report.worst_monotonicity_ratio = -std::numeric_limits<double>::infinity();
    report.worst_frobenius_ratio = 0.0;
    report.worst_ellipticity_ratio = std::numeric_limits<double>::infinity();
    report.min_eigenvalue = std::numeric_limits<double>::infinity();

    double worst_combined = -std::numeric_limits<double>::infinity();
    Vec mx, my;
    Mat sx, sy;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud[i];
        coeffs.drift(p.t, p.x, mx);
        coeffs.diffusion(p.t, p.x, sx);

        const Vec diff = p.x - p.y;
        const double dist2 = diff.squaredNorm();
        if (dist2 > 0.0) {
            coeffs.drift(p.t, p.y, my);
            coeffs.diffusion(p.t, p.y, sy);
            const double mono = diff.dot(mx - my) / dist2;
            const double frob = 0.5 * (sx - sy).squaredNorm() / dist2;
            report.worst_monotonicity_ratio = std::max(report.worst_monotonicity_ratio, mono);
            report.worst_frobenius_ratio = std::max(report.worst_frobenius_ratio, frob);
            const double combined = std::max(mono, frob);
            if (combined > worst_combined) {
                worst_combined = combined;
                report.witness = i;
            }
        }

        const double v2 = p.v.squaredNorm();
        if (v2 > 0.0) {
            const Vec sTv = sx.transpose() * p.v;
            report.worst_ellipticity_ratio =
                std::min(report.worst_ellipticity_ratio, sTv.squaredNorm() / v2);
        }
        report.min_eigenvalue = std::min(report.min_eigenvalue, min_eigenvalue_of_ssT(sx));
    }
    const double half_c = 0.5 * coeffs.c_mono();
    report.monotonicity_ok =
        report.worst_monotonicity_ratio <= half_c && report.worst_frobenius_ratio <= half_c;
    report.ellipticity_ok = report.min_eigenvalue >= coeffs.alpha() &&
                            report.worst_ellipticity_ratio >= coeffs.alpha();
    return report;
}

double derivative_consistency_error(const CoefficientSet& coeffs, double t,
                                    const std::vector<Vec>& points, double h) {
    const int d = coeffs.dimension();
    double worst = 0.0;
    Vec mp, mm;
    Mat sp, sm, jac, dsig;
    for (const auto& x : points) {
        coeffs.drift_jacobian(t, x, jac);
        for (int j = 0; j < d; ++j) {
            Vec xp = x;
            Vec xm = x;
            xp[j] += h;
            xm[j] -= h;
            coeffs.drift(t, xp, mp);
            coeffs.drift(t, xm, mm);
            const Vec fd = (mp - mm) / (2.0 * h);
            worst = std::max(worst, (fd - jac.col(j)).cwiseAbs().maxCoeff());

            coeffs.diffusion(t, xp, sp);
            coeffs.diffusion(t, xm, sm);
            coeffs.diffusion_derivative(t, x, j, dsig);
            const Mat fds = (sp - sm) / (2.0 * h);
            worst = std::max(worst, (fds - dsig).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

}  // namespace sfpe
