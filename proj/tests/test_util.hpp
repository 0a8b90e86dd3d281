// Test-only oracles kept independent of the implementation paths they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>

namespace testutil {

// ---------------------------------------------------------------------------
// adaptive Simpson quadrature

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double eps,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double eps = 1e-9, int depth = 40) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, simpson(f, a, b, fa, fm, fb), eps, depth);
}

// ---------------------------------------------------------------------------
// Gaussian conditioning

/// Condition a joint Gaussian N(mean, cov) of dimension k+1 (last coordinate
/// is the target) on the first k coordinates taking the observed values.
struct Conditioned {
    double mu;
    double var;
};

inline Conditioned condition_last(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                  const Eigen::VectorXd& observed) {
    const auto k = observed.size();
    const Eigen::MatrixXd s22 = cov.topLeftCorner(k, k);
    const Eigen::VectorXd s12 = cov.block(k, 0, 1, k).transpose();
    const double s11 = cov(k, k);
    const Eigen::VectorXd w = s22.ldlt().solve(s12);
    Conditioned c;
    c.mu = mean[k] + w.dot(observed - mean.head(k));
    c.var = s11 - w.dot(s12);
    return c;
}

// ---------------------------------------------------------------------------
// projected gradient ascent for max w.z s.t. ||w||2 = 1, w >= 0

inline Eigen::VectorXd projected_gradient_weights(const Eigen::VectorXd& z, int iters = 5000,
                                                  double lr = 0.05) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(z.size(), 1.0 / std::sqrt(double(z.size())));
    for (int i = 0; i < iters; ++i) {
        w += lr * z;
        w = w.cwiseMax(0.0);
        const double n = w.norm();
        if (n > 0) w /= n;
    }
    return w;
}

}  // namespace testutil
