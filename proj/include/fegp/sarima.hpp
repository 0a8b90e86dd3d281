#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace fegp {

struct SarimaOrder {
    int p = 1, d = 0, q = 1;  // nonseasonal AR, differencing, MA
    int P = 0, D = 1, Q = 1;  // seasonal
    int s = 96;               // season length

    int n_params() const { return p + q + P + Q; }
    void validate() const {
        if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0 || s < 1)
            throw std::invalid_argument("SarimaOrder: negative order or s < 1");
    }
};

struct SarimaModel {
    SarimaOrder order;
    std::vector<double> phi, theta;    // nonseasonal AR / MA
    std::vector<double> Phi, Theta;    // seasonal AR / MA
    double intercept = 0.0;
    double resid_var = 0.0;
};

// ---------------------------------------------------------------------------
// differencing

/// (1-B)^d (1-B^s)^D applied to the series; output shortened by d + D*s.
inline std::vector<double> difference(std::span<const double> series, int d, int D, int s) {
    if (d < 0 || D < 0 || s < 1) throw std::invalid_argument("difference: bad orders");
    if (series.size() <= static_cast<std::size_t>(d + D * s))
        throw std::invalid_argument("difference: series too short");
    std::vector<double> z(series.begin(), series.end());
    for (int k = 0; k < d; ++k) {
        std::vector<double> nz(z.size() - 1);
        for (std::size_t i = 1; i < z.size(); ++i) nz[i - 1] = z[i] - z[i - 1];
        z = std::move(nz);
    }
    for (int k = 0; k < D; ++k) {
        std::vector<double> nz(z.size() - static_cast<std::size_t>(s));
        for (std::size_t i = static_cast<std::size_t>(s); i < z.size(); ++i)
            nz[i - s] = z[i] - z[i - s];
        z = std::move(nz);
    }
    return z;
}

namespace detail {

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

/// (1 - sum phi_i B^i)(1 - sum Phi_I B^{sI}) expanded; index k is the B^k coefficient.
inline std::vector<double> ar_poly(const std::vector<double>& phi, const std::vector<double>& Phi,
                                   int s) {
    std::vector<double> a(phi.size() + 1, 0.0);
    a[0] = 1.0;
    for (std::size_t i = 0; i < phi.size(); ++i) a[i + 1] = -phi[i];
    std::vector<double> b(Phi.size() * static_cast<std::size_t>(s) + 1, 0.0);
    b[0] = 1.0;
    for (std::size_t i = 0; i < Phi.size(); ++i) b[(i + 1) * s] = -Phi[i];
    return poly_mul(a, b);
}

/// (1 + sum theta_j B^j)(1 + sum Theta_J B^{sJ}) expanded.
inline std::vector<double> ma_poly(const std::vector<double>& theta,
                                   const std::vector<double>& Theta, int s) {
    std::vector<double> a(theta.size() + 1, 0.0);
    a[0] = 1.0;
    for (std::size_t i = 0; i < theta.size(); ++i) a[i + 1] = theta[i];
    std::vector<double> b(Theta.size() * static_cast<std::size_t>(s) + 1, 0.0);
    b[0] = 1.0;
    for (std::size_t i = 0; i < Theta.size(); ++i) b[(i + 1) * s] = Theta[i];
    return poly_mul(a, b);
}

/// Differencing polynomial (1-B)^d (1-B^s)^D expanded.
inline std::vector<double> diff_poly(int d, int D, int s) {
    std::vector<double> g{1.0};
    const std::vector<double> db{1.0, -1.0};
    for (int k = 0; k < d; ++k) g = poly_mul(g, db);
    std::vector<double> ds(static_cast<std::size_t>(s) + 1, 0.0);
    ds[0] = 1.0;
    ds[static_cast<std::size_t>(s)] = -1.0;
    for (int k = 0; k < D; ++k) g = poly_mul(g, ds);
    return g;
}

/// One-step residuals of a(B) w_t = c + m(B) e_t on the differenced series,
/// pre-sample residuals zero, conditioning on the first max-AR-lag values.
inline std::vector<double> css_residuals(std::span<const double> w, const std::vector<double>& a,
                                         const std::vector<double>& m, double c,
                                         std::size_t* start_out = nullptr) {
    const std::size_t ka = a.size() - 1, km = m.size() - 1;
    std::vector<double> e(w.size(), 0.0);
    const std::size_t start = ka;
    for (std::size_t t = start; t < w.size(); ++t) {
        double pred = c;
        for (std::size_t k = 1; k <= ka; ++k) pred += -a[k] * w[t - k];
        for (std::size_t k = 1; k <= km && k <= t; ++k) pred += m[k] * e[t - k];
        e[t] = w[t] - pred;
    }
    if (start_out) *start_out = start;
    return e;
}

/// Soft stationarity/invertibility penalty: polynomial roots with modulus
/// <= 1.01 are penalized quadratically. Roots via companion-matrix eigenvalues.
inline double root_penalty(const std::vector<double>& coeffs) {
    // strip trailing zeros; degree 0 has no roots
    std::size_t deg = coeffs.size() - 1;
    while (deg > 0 && coeffs[deg] == 0.0) --deg;
    if (deg == 0) return 0.0;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg),
                                                 static_cast<Eigen::Index>(deg));
    for (std::size_t i = 0; i < deg; ++i) comp(0, static_cast<Eigen::Index>(i)) = -coeffs[i + 1] / coeffs[0];
    for (std::size_t i = 1; i < deg; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    // companion roots r satisfy coeffs(1/z)=0 ordering; coeffs are in B, roots of
    // the reversed polynomial are 1/z, so |eigenvalue| >= 1/1.01 is the bad zone
    double pen = 0.0;
    const Eigen::VectorXcd ev = comp.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const double inv_mod = std::abs(ev[i]);  // = 1/|root|
        const double excess = inv_mod - 1.0 / 1.01;
        if (excess > 0) pen += excess * excess;
    }
    return 1000.0 * pen;
}

}  // namespace detail

struct SarimaFitOptions {
    int max_iters = 500;
    double grad_tol = 1e-8;
    bool fit_intercept = true;
};

/// Conditional-sum-of-squares fit: gradient descent with backtracking from
/// zero initialization, central-difference gradients.
inline SarimaModel fit_sarima(std::span<const double> series, const SarimaOrder& order,
                              const SarimaFitOptions& opts = {}) {
    order.validate();
    const std::vector<double> w = difference(series, order.d, order.D, order.s);
    const int np = order.n_params() + (opts.fit_intercept ? 1 : 0);
    if (w.size() < static_cast<std::size_t>(10 * (order.n_params() + 1)))
        throw std::invalid_argument("fit_sarima: insufficient data for the requested order");

    auto unpack = [&](const Eigen::VectorXd& x, SarimaModel& m) {
        int k = 0;
        m.order = order;
        m.phi.assign(x.data() + k, x.data() + k + order.p); k += order.p;
        m.theta.assign(x.data() + k, x.data() + k + order.q); k += order.q;
        m.Phi.assign(x.data() + k, x.data() + k + order.P); k += order.P;
        m.Theta.assign(x.data() + k, x.data() + k + order.Q); k += order.Q;
        m.intercept = opts.fit_intercept ? x[k] : 0.0;
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        SarimaModel m;
        unpack(x, m);
        const auto a = detail::ar_poly(m.phi, m.Phi, order.s);
        const auto mm = detail::ma_poly(m.theta, m.Theta, order.s);
        std::size_t start = 0;
        const auto e = detail::css_residuals(w, a, mm, m.intercept, &start);
        double css = 0.0;
        for (std::size_t t = start; t < e.size(); ++t) css += e[t] * e[t];
        double pen = 0.0;
        if (order.p) pen += detail::root_penalty(detail::ar_poly(m.phi, {}, 1));
        if (order.q) pen += detail::root_penalty(detail::ma_poly(m.theta, {}, 1));
        if (order.P) pen += detail::root_penalty(detail::ar_poly({}, m.Phi, order.s));
        if (order.Q) pen += detail::root_penalty(detail::ma_poly({}, m.Theta, order.s));
        return css + pen;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(np);
    double fx = objective(x);
    if (np > 0) {
        const double fd_h = 1e-6;
        double step = 1.0;
        for (int it = 0; it < opts.max_iters; ++it) {
            Eigen::VectorXd g(np);
            for (int k = 0; k < np; ++k) {
                Eigen::VectorXd xp = x, xm = x;
                xp[k] += fd_h;
                xm[k] -= fd_h;
                g[k] = (objective(xp) - objective(xm)) / (2.0 * fd_h);
            }
            const double gn = g.norm();
            if (gn < opts.grad_tol * (1.0 + std::abs(fx))) break;
            const Eigen::VectorXd dir = -g / gn;
            double t = step;
            bool moved = false;
            for (int ls = 0; ls < 50; ++ls) {
                const Eigen::VectorXd cand = x + t * dir;
                const double fc = objective(cand);
                if (std::isfinite(fc) && fc <= fx - 1e-4 * t * gn) {
                    x = cand;
                    fx = fc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if (!moved || t < 1e-14) break;
            step = std::min(1.0, t * 2.0);
        }
    }

    SarimaModel m;
    unpack(x, m);

    const auto a = detail::ar_poly(m.phi, m.Phi, order.s);
    const auto mm = detail::ma_poly(m.theta, m.Theta, order.s);
    std::size_t start = 0;
    const auto e = detail::css_residuals(w, a, mm, m.intercept, &start);
    double css = 0.0;
    for (std::size_t t = start; t < e.size(); ++t) css += e[t] * e[t];
    const std::size_t eff = e.size() - start;
    m.resid_var = eff > 0 ? css / static_cast<double>(eff) : 0.0;
    if (!(m.resid_var >= 0.0) || !std::isfinite(m.resid_var))
        throw std::runtime_error("fit_sarima: non-finite residual variance");
    return m;
}

/// One-step-ahead conditional mean, integrated back to the original scale.
inline double forecast_one(const SarimaModel& m, std::span<const double> history) {
    const SarimaOrder& o = m.order;
    const auto a = detail::ar_poly(m.phi, m.Phi, o.s);
    const auto mp = detail::ma_poly(m.theta, m.Theta, o.s);
    const std::size_t ka = a.size() - 1, km = mp.size() - 1;
    // AR/MA lags beyond the available differenced history follow the CSS
    // pre-sample convention (zeros), so only the differencing lead is a hard
    // requirement.
    const std::size_t need = static_cast<std::size_t>(o.d + o.D * o.s) + 1;
    if (history.size() < need)
        throw std::invalid_argument("forecast_one: insufficient history");

    const std::vector<double> z = difference(history, o.d, o.D, o.s);
    const auto e = detail::css_residuals(z, a, mp, m.intercept);

    const std::size_t n = z.size();
    double z_next = m.intercept;
    for (std::size_t k = 1; k <= ka; ++k) {
        if (k > n) break;
        z_next += -a[k] * z[n - k];
    }
    for (std::size_t k = 1; k <= km; ++k) {
        if (k > n) break;
        z_next += mp[k] * e[n - k];
    }

    // undo differencing: g(B) y = z with g = 1 + sum g_k B^k
    const auto g = detail::diff_poly(o.d, o.D, o.s);
    double y_next = z_next;
    const std::size_t ny = history.size();
    for (std::size_t k = 1; k < g.size(); ++k) y_next -= g[k] * history[ny - k];
    return y_next;
}

}  // namespace fegp
