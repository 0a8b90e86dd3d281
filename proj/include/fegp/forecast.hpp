#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fegp/gp.hpp"
#include "fegp/mathx.hpp"

namespace fegp {

struct PosteriorComponent {
    double mu = 0.0;
    double var = 0.0;
    std::int64_t source_index = 0;
};

/// Equal-weight Gaussian mixture over the forecast value.
struct MixturePosterior {
    std::vector<PosteriorComponent> components;

    double pdf(double x) const {
        double p = 0.0;
        for (const auto& c : components) p += normal_pdf(x, c.mu, c.var);
        return p / static_cast<double>(components.size());
    }
    double cdf(double x) const {
        double p = 0.0;
        for (const auto& c : components) p += normal_cdf(x, c.mu, std::sqrt(c.var));
        return p / static_cast<double>(components.size());
    }
    MixturePosterior shifted(double offset) const {
        MixturePosterior out = *this;
        for (auto& c : out.components) c.mu += offset;
        return out;
    }
};

struct GaussianPosterior {
    double mu = 0.0;
    double var = 0.0;
};

struct RiskReport {
    double low = 0.0, high = 0.0;
    double prob_below = 0.0, prob_within = 0.0, prob_above = 0.0;
};

// ---------------------------------------------------------------------------
// pairwise posterior (FE-GP)

/// Posterior component from conditioning the 2x2 joint of (y(t_i), y(t_f)):
///   mu  = M + k_fi/(k_ii + s_n^2) (y_i - M)
///   var = s_n^2 + k_ff - k_fi^2/(k_ii + s_n^2)
/// `f_features` must live in the same (standardized) space as the window.
inline PosteriorComponent component(const FegpModel& model, const FeatureVector& f_features,
                                    std::size_t i) {
    if (i >= model.window.size()) throw std::invalid_argument("component: index outside window");
    const Hyperparams& h = model.hyper;
    const double s2n = h.sigma_n * h.sigma_n;
    const double k_ff = h.sigma * h.sigma;  // RBF at zero distance
    const double k_ii = h.sigma * h.sigma;
    const double k_fi = kernel(f_features, model.window.features[i], model.weights, h);

    PosteriorComponent c;
    c.source_index = model.window.indices[i];
    const double denom = k_ii + s2n;
    c.mu = model.window.mean_value +
           k_fi / denom * (model.window.targets[i] - model.window.mean_value);
    c.var = std::max(s2n + k_ff - k_fi * k_fi / denom, 1e-12 * k_ff);
    return c;
}

/// One-step-ahead FE-GP posterior: one component per retained training point,
/// equal weights. `recent_history` supplies the forecast point's lags (raw
/// residual values, most recent last).
inline MixturePosterior predict_fegp(const FegpModel& model, std::span<const double> recent_history,
                                     const FeatureConfig& cfg = {}) {
    const auto l = static_cast<std::int64_t>(recent_history.size());
    if (l < cfg.lag_depth) throw std::invalid_argument("predict_fegp: insufficient history");
    const FeatureVector f = model.standardizer.apply(featurize(recent_history, l, cfg));

    MixturePosterior post;
    post.components.reserve(model.window.size());
    for (std::size_t i = 0; i < model.window.size(); ++i) post.components.push_back(component(model, f, i));
    return post;
}

// ---------------------------------------------------------------------------
// full-conditioning posterior (Naive-GP)

/// Standard GP regression posterior over the time axis:
///   mu  = M + k_*^T C^-1 (y - M),  var = k_ff + s_n^2 - k_*^T C^-1 k_*.
inline GaussianPosterior predict_naive(const FegpModel& model, std::int64_t t_f) {
    if (model.kind != KernelKind::naive_time)
        throw std::invalid_argument("predict_naive: model does not use the time kernel");
    const TrainingWindow& w = model.window;
    w.validate();
    const Hyperparams& h = model.hyper;

    const Eigen::MatrixXd c = build_covariance(w, model.weights, h, KernelKind::naive_time);
    const CholeskyResult ch = cholesky_with_jitter(c, h.sigma);

    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::VectorXd kstar(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        kstar[i] = naive_kernel(t_f, w.indices[i], h);
        r[i] = w.targets[i] - w.mean_value;
    }
    const Eigen::VectorXd v = ch.llt.solve(kstar);

    GaussianPosterior g;
    g.mu = w.mean_value + kstar.dot(ch.llt.solve(r));
    g.var = std::max(h.sigma * h.sigma + h.sigma_n * h.sigma_n - kstar.dot(v),
                     1e-12 * h.sigma * h.sigma);
    return g;
}

// ---------------------------------------------------------------------------
// MAP point forecast

namespace detail {

/// Golden-section maximization of f on [lo, hi]; ties resolve toward lo.
template <class F>
double golden_section_max(F&& f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Global maximizer of the mixture PDF: dense grid over
/// [min mu - 4 max sd, max mu + 4 max sd], then golden-section refinement
/// around the best grid point. Exact ties go to the lower value.
inline double map_point(const MixturePosterior& post, int grid_points = 4096) {
    if (post.components.empty()) throw std::invalid_argument("map_point: empty mixture");
    if (post.components.size() == 1) return post.components.front().mu;

    double mu_lo = std::numeric_limits<double>::infinity();
    double mu_hi = -std::numeric_limits<double>::infinity();
    double sd_max = 0.0;
    for (const auto& c : post.components) {
        mu_lo = std::min(mu_lo, c.mu);
        mu_hi = std::max(mu_hi, c.mu);
        sd_max = std::max(sd_max, std::sqrt(c.var));
    }
    const double lo = mu_lo - 4.0 * sd_max;
    const double hi = mu_hi + 4.0 * sd_max;
    if (hi <= lo) return mu_lo;

    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    int best = 0;
    double best_pdf = -1.0;
    for (int i = 0; i < grid_points; ++i) {
        const double p = post.pdf(lo + step * i);
        if (p > best_pdf) {  // strict: ties keep the lower x
            best_pdf = p;
            best = i;
        }
    }
    const double a = lo + step * std::max(0, best - 1);
    const double b = lo + step * std::min(grid_points - 1, best + 1);
    return detail::golden_section_max([&](double x) { return post.pdf(x); }, a, b,
                                      1e-10 * (hi - lo) + 1e-12);
}

inline double map_point(const GaussianPosterior& post) { return post.mu; }

// ---------------------------------------------------------------------------
// risk quantification

/// Probability mass below/within/above a demand interval, from the mixture CDF.
inline RiskReport risk(const MixturePosterior& post, double low, double high) {
    if (low > high) throw std::invalid_argument("risk: low > high");
    RiskReport r;
    r.low = low;
    r.high = high;
    r.prob_below = post.cdf(low);
    r.prob_above = 1.0 - post.cdf(high);
    r.prob_within = std::max(0.0, 1.0 - r.prob_below - r.prob_above);
    return r;
}

inline RiskReport risk(const GaussianPosterior& post, double low, double high) {
    if (low > high) throw std::invalid_argument("risk: low > high");
    RiskReport r;
    r.low = low;
    r.high = high;
    const double sd = std::sqrt(post.var);
    r.prob_below = normal_cdf(low, post.mu, sd);
    r.prob_above = 1.0 - normal_cdf(high, post.mu, sd);
    r.prob_within = std::max(0.0, 1.0 - r.prob_below - r.prob_above);
    return r;
}

}  // namespace fegp
