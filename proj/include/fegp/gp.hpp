#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "fegp/features.hpp"
#include "fegp/relief.hpp"

namespace fegp {

struct Hyperparams {
    double sigma = 1.0;    // kernel amplitude
    double beta = 1.0;     // length scale
    double sigma_n = 0.1;  // observation noise std

    void validate() const {
        if (!(sigma > 0) || !(beta > 0) || !(sigma_n >= 0) || !std::isfinite(sigma) ||
            !std::isfinite(beta) || !std::isfinite(sigma_n))
            throw std::invalid_argument("Hyperparams: sigma, beta must be > 0; sigma_n >= 0");
    }
};

enum class KernelKind { feature_embedded, naive_time };

/// Retained training points: time indices, residual targets, and aligned
/// feature vectors (standardized space for the FE kernel).
struct TrainingWindow {
    std::vector<std::int64_t> indices;
    std::vector<double> targets;
    std::vector<FeatureVector> features;
    double mean_value = 0.0;  // constant mean function M(t)

    std::size_t size() const { return indices.size(); }
    void validate() const {
        if (indices.empty() || indices.size() != targets.size() ||
            indices.size() != features.size())
            throw std::invalid_argument("TrainingWindow: empty or misaligned");
    }
    void push_back(std::int64_t idx, double target, FeatureVector fv) {
        indices.push_back(idx);
        targets.push_back(target);
        features.push_back(std::move(fv));
    }
};

struct PrunePolicy {
    std::size_t max_size = 672;
    double extreme_keep_fraction = 0.0;

    void validate() const {
        if (max_size < 1) throw std::invalid_argument("PrunePolicy: max_size must be >= 1");
        if (extreme_keep_fraction < 0 || extreme_keep_fraction > 1)
            throw std::invalid_argument("PrunePolicy: extreme_keep_fraction outside [0,1]");
    }
};

struct FegpModel {
    TrainingWindow window;
    FeatureWeights weights;
    Hyperparams hyper;
    KernelKind kind = KernelKind::feature_embedded;
    Standardizer standardizer;  // raw feature space -> the space `window.features` lives in
};

// ---------------------------------------------------------------------------
// kernels

/// RBF kernel over weighted feature vectors: sigma^2 exp(-||w.(a-b)||^2 / 2 beta^2).
inline double kernel(const FeatureVector& a, const FeatureVector& b, const FeatureWeights& w,
                     const Hyperparams& h) {
    const double d = weighted_distance(a, b, w);
    return h.sigma * h.sigma * std::exp(-d * d / (2.0 * h.beta * h.beta));
}

/// Squared-exponential over the time axis (Naive-GP baseline).
inline double naive_kernel(std::int64_t t_i, std::int64_t t_j, const Hyperparams& h) {
    const double d = static_cast<double>(t_i - t_j);
    return h.sigma * h.sigma * std::exp(-d * d / (2.0 * h.beta * h.beta));
}

/// Squared kernel-space distances between all pairs of training points;
/// hyper-parameter independent, so it can be reused across a fit.
inline Eigen::MatrixXd squared_distances(const TrainingWindow& w, const FeatureWeights& weights,
                                         KernelKind kind) {
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXd d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d2(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double d;
            if (kind == KernelKind::feature_embedded)
                d = weighted_distance(w.features[i], w.features[j], weights);
            else
                d = static_cast<double>(w.indices[i] - w.indices[j]);
            d2(i, j) = d2(j, i) = d * d;
        }
    }
    return d2;
}

inline Eigen::MatrixXd covariance_from_distances(const Eigen::MatrixXd& d2, const Hyperparams& h) {
    // scalar std::exp, not Eigen's vectorized exp, so results are bit-identical
    // with the element-wise kernel() used on the prediction path
    const double s2 = h.sigma * h.sigma;
    const double denom = 2.0 * h.beta * h.beta;
    Eigen::MatrixXd c =
        d2.unaryExpr([&](double v) { return s2 * std::exp(-v / denom); });
    c.diagonal().array() += h.sigma_n * h.sigma_n;
    return c;
}

/// C = K + sigma_n^2 I.
inline Eigen::MatrixXd build_covariance(const TrainingWindow& w, const FeatureWeights& weights,
                                        const Hyperparams& h, KernelKind kind) {
    w.validate();
    h.validate();
    return covariance_from_distances(squared_distances(w, weights, kind), h);
}

struct CholeskyResult {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};

/// Cholesky with a jitter ladder: 1e-10 sigma^2 escalating x10 up to 1e-6 sigma^2.
inline CholeskyResult cholesky_with_jitter(Eigen::MatrixXd c, double sigma) {
    CholeskyResult r;
    r.llt.compute(c);
    if (r.llt.info() == Eigen::Success) return r;
    const double s2 = sigma * sigma;
    for (double j = 1e-10 * s2; j <= 1e-6 * s2 * (1.0 + 1e-12); j *= 10.0) {
        Eigen::MatrixXd cj = c;
        cj.diagonal().array() += j;
        r.llt.compute(cj);
        if (r.llt.info() == Eigen::Success) {
            r.jitter = j;
            return r;
        }
    }
    throw std::runtime_error("cholesky_with_jitter: factorization failed at max jitter");
}

// ---------------------------------------------------------------------------
// marginal likelihood

/// (y-M)^T C^-1 (y-M) + log|C|, via Cholesky.
inline double nlml(const TrainingWindow& w, const FeatureWeights& weights, const Hyperparams& h,
                   KernelKind kind) {
    const Eigen::MatrixXd c = build_covariance(w, weights, h, kind);
    const CholeskyResult ch = cholesky_with_jitter(c, h.sigma);
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = w.targets[i] - w.mean_value;
    const Eigen::VectorXd alpha = ch.llt.solve(r);
    const double logdet = 2.0 * ch.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return r.dot(alpha) + logdet;
}

namespace detail {

struct NlmlEval {
    double value;
    Eigen::Vector3d grad;  // d/d(log sigma), d/d(log beta), d/d(log sigma_n)
};

/// NLML and its analytic gradient in log-parameter space, from a precomputed
/// squared-distance matrix. grad_theta = tr((C^-1 - alpha alpha^T) dC/dtheta).
inline NlmlEval nlml_with_grad(const Eigen::MatrixXd& d2, const Eigen::VectorXd& r,
                               const Hyperparams& h) {
    const Eigen::MatrixXd k =
        (h.sigma * h.sigma * (-d2 / (2.0 * h.beta * h.beta)).array().exp()).matrix();
    Eigen::MatrixXd c = k;
    c.diagonal().array() += h.sigma_n * h.sigma_n;
    const CholeskyResult ch = cholesky_with_jitter(c, h.sigma);

    const Eigen::VectorXd alpha = ch.llt.solve(r);
    const auto n = d2.rows();
    const Eigen::MatrixXd cinv = ch.llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd a = cinv - alpha * alpha.transpose();

    NlmlEval e;
    e.value = r.dot(alpha) +
              2.0 * ch.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    e.grad[0] = 2.0 * a.cwiseProduct(k).sum();
    e.grad[1] = a.cwiseProduct(k.cwiseProduct(d2)).sum() / (h.beta * h.beta);
    e.grad[2] = 2.0 * h.sigma_n * h.sigma_n * a.trace();
    return e;
}

}  // namespace detail

struct FitOptions {
    int max_iters = 300;
    int restarts = 5;
    std::uint64_t seed = 0;
    double grad_tol = 1e-6;
    std::optional<double> fixed_sigma_n;  // fix noise from a residual-variance estimate
};

/// Minimize the NLML over (sigma, beta, sigma_n) in log space by gradient
/// descent with backtracking line search, multi-start with deterministic seeds.
inline Hyperparams fit(const TrainingWindow& w, const FeatureWeights& weights, KernelKind kind,
                       const FitOptions& opts = {}) {
    w.validate();
    if (w.size() < 2) throw std::invalid_argument("fit: need at least 2 training points");

    const Eigen::MatrixXd d2 = squared_distances(w, weights, kind);
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = w.targets[i] - w.mean_value;

    // data-driven initialization center
    const double sy = std::max(1e-8, std::sqrt(r.squaredNorm() / static_cast<double>(n)));
    std::vector<double> offdiag;
    offdiag.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) offdiag.push_back(d2(i, j));
    double beta0 = 1.0;
    if (!offdiag.empty()) {
        std::nth_element(offdiag.begin(), offdiag.begin() + offdiag.size() / 2, offdiag.end());
        beta0 = std::max(1e-8, std::sqrt(offdiag[offdiag.size() / 2]));
    }
    const Eigen::Vector3d center(std::log(sy), std::log(beta0), std::log(0.3 * sy));

    auto unpack = [&](const Eigen::Vector3d& p) {
        Hyperparams h;
        h.sigma = std::exp(p[0]);
        h.beta = std::exp(p[1]);
        h.sigma_n = opts.fixed_sigma_n ? *opts.fixed_sigma_n : std::exp(p[2]);
        return h;
    };
    auto eval = [&](const Eigen::Vector3d& p) {
        detail::NlmlEval e = detail::nlml_with_grad(d2, r, unpack(p));
        if (opts.fixed_sigma_n) e.grad[2] = 0.0;
        return e;
    };

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);

    bool have_best = false;
    double best_val = 0.0;
    Eigen::Vector3d best_p = center;

    for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
        Eigen::Vector3d p = center;
        if (restart > 0)
            for (int k = 0; k < 3; ++k) p[k] += jitter(rng);
        try {
            detail::NlmlEval e = eval(p);
            double step = 1.0;
            for (int it = 0; it < opts.max_iters; ++it) {
                const double gnorm = e.grad.norm();
                if (gnorm < opts.grad_tol) break;
                const Eigen::Vector3d dir = -e.grad / gnorm;
                // Armijo backtracking
                double t = step;
                bool moved = false;
                for (int ls = 0; ls < 40; ++ls) {
                    const Eigen::Vector3d cand = p + t * dir;
                    detail::NlmlEval ce;
                    try {
                        ce = eval(cand);
                    } catch (const std::runtime_error&) {
                        t *= 0.5;
                        continue;
                    }
                    if (std::isfinite(ce.value) && ce.value <= e.value - 1e-4 * t * gnorm) {
                        p = cand;
                        e = ce;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if (!moved || t < 1e-12) break;
                step = std::min(1.0, t * 2.0);
            }
            if (!have_best || e.value < best_val) {
                have_best = true;
                best_val = e.value;
                best_p = p;
            }
        } catch (const std::runtime_error&) {
            continue;  // this restart failed to factorize anywhere useful
        }
    }
    if (!have_best) throw std::runtime_error("fit: all restarts failed");
    return unpack(best_p);
}

// ---------------------------------------------------------------------------
// training-window management

/// Size-capped retention: keep floor(extreme_keep_fraction * max_size)
/// most-recent extreme-tagged points, fill the rest with most-recent typical
/// points. Chronological order preserved; fraction 0 is plain truncation.
inline TrainingWindow prune(const TrainingWindow& w, const std::vector<CategoryTag>& tags,
                            const PrunePolicy& policy) {
    policy.validate();
    w.validate();
    if (w.size() <= policy.max_size) return w;

    std::unordered_set<std::int64_t> extreme;
    for (const auto& t : tags)
        if (t.category == Category::A_extreme) extreme.insert(static_cast<std::int64_t>(t.index));

    const std::size_t n = w.size();
    std::vector<std::size_t> a_pos, b_pos;  // positions within the window, ascending time
    for (std::size_t i = 0; i < n; ++i)
        (extreme.count(w.indices[i]) ? a_pos : b_pos).push_back(i);

    const std::size_t a_quota =
        static_cast<std::size_t>(std::floor(policy.extreme_keep_fraction *
                                            static_cast<double>(policy.max_size)));
    std::vector<bool> keep(n, false);
    std::size_t kept = 0;
    const std::size_t a_take = std::min(a_quota, a_pos.size());
    for (std::size_t k = 0; k < a_take; ++k) keep[a_pos[a_pos.size() - 1 - k]] = true;
    kept = a_take;
    for (auto it = b_pos.rbegin(); it != b_pos.rend() && kept < policy.max_size; ++it) {
        keep[*it] = true;
        ++kept;
    }
    // quota unfilled by B points: top up with older A points
    for (auto it = a_pos.rbegin(); it != a_pos.rend() && kept < policy.max_size; ++it) {
        if (!keep[*it]) {
            keep[*it] = true;
            ++kept;
        }
    }

    TrainingWindow out;
    out.mean_value = w.mean_value;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(w.indices[i], w.targets[i], w.features[i]);
    return out;
}

}  // namespace fegp
