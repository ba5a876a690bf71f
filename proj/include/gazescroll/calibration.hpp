#pragma once

// Moving-dot calibration: target path generation, a regression calibrator
// mapping raw gaze estimates onto true screen positions, and error metrics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazescroll/core.hpp"

namespace gazescroll::calibration {

struct CalibrationPath {
    std::vector<Point> points;
    double duration_ms = 5000.0;
    double rate_hz = 25.0;
};

inline constexpr std::size_t kPathPoints = 125;
inline constexpr std::size_t kMinPairs = 25;

/// 125 targets evenly spaced by arc length around the screen border,
/// clockwise from the top-left corner.
inline CalibrationPath generate_dot_path(const ScreenGeometry& g) {
    g.validate();
    const double w = g.width_px, h = g.height_px;
    const double perimeter = 2.0 * (w + h);
    const double step = perimeter / static_cast<double>(kPathPoints);

    CalibrationPath path;
    path.points.reserve(kPathPoints);
    for (std::size_t i = 0; i < kPathPoints; ++i) {
        double s = step * static_cast<double>(i);
        if (s < w) {
            path.points.push_back({s, 0.0});
        } else if ((s -= w) < h) {
            path.points.push_back({w, s});
        } else if ((s -= h) < w) {
            path.points.push_back({w - s, h});
        } else {
            s -= w;
            path.points.push_back({0.0, h - s});
        }
    }
    return path;
}

struct CalibrationPair {
    GazeSample raw;
    Point truth;
};

enum class CalibratorKind { Identity, PolynomialRidge, Kernel };

inline std::string_view to_string(CalibratorKind k) {
    switch (k) {
    case CalibratorKind::Identity: return "identity";
    case CalibratorKind::PolynomialRidge: return "polynomial-ridge";
    case CalibratorKind::Kernel: return "kernel";
    }
    return "identity";
}

struct FitOptions {
    CalibratorKind kind = CalibratorKind::PolynomialRidge;
    double ridge_lambda = 1e-3;
    // Gaussian kernel width for the kernel variant, in pixels.
    double kernel_width_px = 250.0;
};

class InsufficientCalibrationData : public std::invalid_argument {
public:
    explicit InsufficientCalibrationData(std::size_t n)
        : std::invalid_argument("calibration needs at least " + std::to_string(kMinPairs) +
                                " pairs, got " + std::to_string(n)) {}
};

/// Per-axis regression from raw (x, y) to corrected (x, y).
///
/// The polynomial model keeps feature means/scales and weights so it can be
/// serialized as a flat coefficient vector; the kernel model keeps its
/// training inputs and dual weights.
class Calibrator {
public:
    Calibrator() = default;

    static Calibrator identity(const ScreenGeometry& g) {
        Calibrator c;
        c.geometry_ = g;
        return c;
    }

    [[nodiscard]] CalibratorKind kind() const { return kind_; }
    [[nodiscard]] int degree() const { return degree_; }
    [[nodiscard]] double training_error_cm() const { return training_error_cm_; }
    [[nodiscard]] const ScreenGeometry& geometry() const { return geometry_; }

    [[nodiscard]] Point map(double x, double y) const {
        switch (kind_) {
        case CalibratorKind::Identity: return {x, y};
        case CalibratorKind::PolynomialRidge: {
            const auto f = features(x, y, degree_);
            double cx = target_mean_[0], cy = target_mean_[1];
            for (std::size_t j = 0; j < f.size(); ++j) {
                if (feature_scale_[j] == 0.0) continue;
                const double z = (f[j] - feature_mean_[j]) / feature_scale_[j];
                cx += weights_x_[j] * z;
                cy += weights_y_[j] * z;
            }
            return {cx, cy};
        }
        case CalibratorKind::Kernel: {
            double cx = target_mean_[0], cy = target_mean_[1];
            for (std::size_t i = 0; i < kernel_inputs_.size(); ++i) {
                const double k = kernel(kernel_inputs_[i], {x, y});
                cx += weights_x_[i] * k;
                cy += weights_y_[i] * k;
            }
            return {cx, cy};
        }
        }
        return {x, y};
    }

    /// Flat coefficient vector for persistence; see from_coefficients.
    [[nodiscard]] std::vector<double> coefficients() const {
        std::vector<double> out;
        switch (kind_) {
        case CalibratorKind::Identity: break;
        case CalibratorKind::PolynomialRidge:
            out.push_back(degree_);
            out.insert(out.end(), target_mean_.begin(), target_mean_.end());
            out.insert(out.end(), feature_mean_.begin(), feature_mean_.end());
            out.insert(out.end(), feature_scale_.begin(), feature_scale_.end());
            out.insert(out.end(), weights_x_.begin(), weights_x_.end());
            out.insert(out.end(), weights_y_.begin(), weights_y_.end());
            break;
        case CalibratorKind::Kernel:
            out.push_back(kernel_width_px_);
            out.insert(out.end(), target_mean_.begin(), target_mean_.end());
            for (std::size_t i = 0; i < kernel_inputs_.size(); ++i) {
                out.insert(out.end(), {kernel_inputs_[i].x, kernel_inputs_[i].y, weights_x_[i],
                                       weights_y_[i]});
            }
            break;
        }
        return out;
    }

    static Calibrator from_coefficients(CalibratorKind kind, std::span<const double> c,
                                        const ScreenGeometry& g, double training_error_cm = 0.0) {
        Calibrator cal;
        cal.geometry_ = g;
        cal.kind_ = kind;
        cal.training_error_cm_ = training_error_cm;
        auto bad = [] { return std::invalid_argument("malformed calibrator coefficients"); };
        switch (kind) {
        case CalibratorKind::Identity:
            if (!c.empty()) throw bad();
            break;
        case CalibratorKind::PolynomialRidge: {
            if (c.empty()) throw bad();
            cal.degree_ = static_cast<int>(c[0]);
            if (cal.degree_ != 1 && cal.degree_ != 2) throw bad();
            const std::size_t m = cal.degree_ == 2 ? 5 : 2;
            if (c.size() != 3 + 4 * m) throw bad();
            auto it = c.begin() + 1;
            cal.target_mean_.assign(it, it + 2);
            it += 2;
            cal.feature_mean_.assign(it, it + static_cast<std::ptrdiff_t>(m));
            it += static_cast<std::ptrdiff_t>(m);
            cal.feature_scale_.assign(it, it + static_cast<std::ptrdiff_t>(m));
            it += static_cast<std::ptrdiff_t>(m);
            cal.weights_x_.assign(it, it + static_cast<std::ptrdiff_t>(m));
            it += static_cast<std::ptrdiff_t>(m);
            cal.weights_y_.assign(it, it + static_cast<std::ptrdiff_t>(m));
            break;
        }
        case CalibratorKind::Kernel: {
            if (c.size() < 3 || (c.size() - 3) % 4 != 0) throw bad();
            cal.kernel_width_px_ = c[0];
            cal.target_mean_.assign(c.begin() + 1, c.begin() + 3);
            for (std::size_t i = 3; i < c.size(); i += 4) {
                cal.kernel_inputs_.push_back({c[i], c[i + 1]});
                cal.weights_x_.push_back(c[i + 2]);
                cal.weights_y_.push_back(c[i + 3]);
            }
            break;
        }
        }
        return cal;
    }

private:
    friend Calibrator fit_calibrator(std::span<const CalibrationPair>, const ScreenGeometry&,
                                     const FitOptions&);

    static std::vector<double> features(double x, double y, int degree) {
        if (degree == 1) return {x, y};
        return {x, y, x * x, x * y, y * y};
    }

    [[nodiscard]] double kernel(Point a, Point b) const {
        const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
        return std::exp(-d2 / (2.0 * kernel_width_px_ * kernel_width_px_));
    }

    ScreenGeometry geometry_;
    CalibratorKind kind_ = CalibratorKind::Identity;
    int degree_ = 2;
    double training_error_cm_ = 0.0;
    double kernel_width_px_ = 250.0;
    std::vector<double> target_mean_;
    std::vector<double> feature_mean_;
    std::vector<double> feature_scale_;
    std::vector<double> weights_x_;
    std::vector<double> weights_y_;
    std::vector<Point> kernel_inputs_;
};

class AlreadyCalibrated : public std::invalid_argument {
public:
    AlreadyCalibrated() : std::invalid_argument("sample is already calibrated") {}
};

/// Corrects a raw sample. Corrected points are never clamped; a point that
/// lands outside the screen is marked off-screen.
inline GazeSample apply(const Calibrator& c, const GazeSample& s) {
    if (s.kind != SampleKind::Raw) throw AlreadyCalibrated();
    const Point p = c.map(s.x_px, s.y_px);
    GazeSample out = s;
    out.x_px = p.x;
    out.y_px = p.y;
    out.kind = SampleKind::Calibrated;
    out.on_screen = c.geometry().contains(p.x, p.y);
    return out;
}

struct ErrorReport {
    double mean_cm = 0.0;
    std::vector<double> per_point_cm;
};

inline ErrorReport evaluate_error(const Calibrator& c, std::span<const CalibrationPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("error evaluation needs at least one pair");
    ErrorReport r;
    r.per_point_cm.reserve(pairs.size());
    double sum = 0.0;
    for (const CalibrationPair& p : pairs) {
        const Point m = c.map(p.raw.x_px, p.raw.y_px);
        const double e = px_to_cm(c.geometry(), distance(m, p.truth));
        r.per_point_cm.push_back(e);
        sum += e;
    }
    r.mean_cm = sum / static_cast<double>(pairs.size());
    return r;
}

namespace detail {

struct RidgeSolution {
    std::vector<double> mean, scale, wx, wy;
    double tx = 0.0, ty = 0.0;
};

inline RidgeSolution solve_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& tx,
                                 const Eigen::VectorXd& ty, double lambda) {
    const Eigen::Index n = features.rows(), m = features.cols();
    RidgeSolution sol;
    sol.tx = tx.mean();
    sol.ty = ty.mean();
    Eigen::MatrixXd z(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double mu = features.col(j).mean();
        const double var = (features.col(j).array() - mu).square().mean();
        const double sd = var > 1e-18 ? std::sqrt(var) : 0.0;
        sol.mean.push_back(mu);
        sol.scale.push_back(sd);
        z.col(j) = sd > 0.0 ? Eigen::VectorXd((features.col(j).array() - mu) / sd)
                            : Eigen::VectorXd::Zero(n);
    }
    Eigen::MatrixXd a = z.transpose() * z;
    a.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const Eigen::VectorXd wx = ldlt.solve(z.transpose() * (tx.array() - sol.tx).matrix());
    const Eigen::VectorXd wy = ldlt.solve(z.transpose() * (ty.array() - sol.ty).matrix());
    sol.wx.assign(wx.data(), wx.data() + m);
    sol.wy.assign(wy.data(), wy.data() + m);
    return sol;
}

inline double mean_error_cm(const Calibrator& c, std::span<const CalibrationPair> pairs) {
    return evaluate_error(c, pairs).mean_cm;
}

}  // namespace detail

/// Fits the default degree-2 polynomial ridge calibrator (or the kernel
/// variant). Degenerate raw layouts fall back to an affine fit, and a model
/// that does worse than no correction on its own training pairs is replaced
/// by the identity.
inline Calibrator fit_calibrator(std::span<const CalibrationPair> pairs, const ScreenGeometry& g,
                                 const FitOptions& opts = {}) {
    g.validate();
    if (pairs.size() < kMinPairs) throw InsufficientCalibrationData(pairs.size());
    for (const CalibrationPair& p : pairs) {
        if (p.raw.kind != SampleKind::Raw) throw AlreadyCalibrated();
    }

    const auto n = static_cast<Eigen::Index>(pairs.size());
    Eigen::VectorXd tx(n), ty(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        tx[i] = pairs[static_cast<std::size_t>(i)].truth.x;
        ty[i] = pairs[static_cast<std::size_t>(i)].truth.y;
    }

    Calibrator cal;
    cal.geometry_ = g;

    if (opts.kind == CalibratorKind::Identity) {
        cal.training_error_cm_ = detail::mean_error_cm(cal, pairs);
        return cal;
    }

    if (opts.kind == CalibratorKind::Kernel) {
        cal.kind_ = CalibratorKind::Kernel;
        cal.kernel_width_px_ = opts.kernel_width_px;
        cal.target_mean_ = {tx.mean(), ty.mean()};
        for (const CalibrationPair& p : pairs) cal.kernel_inputs_.push_back({p.raw.x_px, p.raw.y_px});
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                k(i, j) = cal.kernel(cal.kernel_inputs_[static_cast<std::size_t>(i)],
                                     cal.kernel_inputs_[static_cast<std::size_t>(j)]);
            }
        }
        k.diagonal().array() += std::max(opts.ridge_lambda, 1e-9) * static_cast<double>(n);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
        const Eigen::VectorXd ax = ldlt.solve((tx.array() - cal.target_mean_[0]).matrix());
        const Eigen::VectorXd ay = ldlt.solve((ty.array() - cal.target_mean_[1]).matrix());
        cal.weights_x_.assign(ax.data(), ax.data() + n);
        cal.weights_y_.assign(ay.data(), ay.data() + n);
    } else {
        auto build = [&](int degree) {
            const Eigen::Index m = degree == 2 ? 5 : 2;
            Eigen::MatrixXd f(n, m);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto row = Calibrator::features(pairs[static_cast<std::size_t>(i)].raw.x_px,
                                                      pairs[static_cast<std::size_t>(i)].raw.y_px,
                                                      degree);
                for (Eigen::Index j = 0; j < m; ++j) f(i, j) = row[static_cast<std::size_t>(j)];
            }
            return f;
        };
        auto full_rank = [&](const Eigen::MatrixXd& f) {
            Eigen::MatrixXd centered = f.rowwise() - f.colwise().mean();
            for (Eigen::Index j = 0; j < centered.cols(); ++j) {
                const double norm = centered.col(j).norm();
                if (norm > 0.0) centered.col(j) /= norm;
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered);
            qr.setThreshold(1e-8);
            return qr.rank() == centered.cols();
        };

        int degree = 2;
        Eigen::MatrixXd f = build(2);
        if (!full_rank(f)) {
            degree = 1;
            f = build(1);
        }
        const auto sol = detail::solve_ridge(f, tx, ty, opts.ridge_lambda);
        cal.kind_ = CalibratorKind::PolynomialRidge;
        cal.degree_ = degree;
        cal.target_mean_ = {sol.tx, sol.ty};
        cal.feature_mean_ = sol.mean;
        cal.feature_scale_ = sol.scale;
        cal.weights_x_ = sol.wx;
        cal.weights_y_ = sol.wy;
    }

    cal.training_error_cm_ = detail::mean_error_cm(cal, pairs);
    Calibrator ident = Calibrator::identity(g);
    const double ident_error = detail::mean_error_cm(ident, pairs);
    if (cal.training_error_cm_ > ident_error) {
        ident.training_error_cm_ = ident_error;
        return ident;
    }
    return cal;
}

}  // namespace gazescroll::calibration
