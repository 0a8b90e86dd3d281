#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fegp/features.hpp"
#include "fegp/mathx.hpp"

namespace fegp {

enum class Category { A_extreme, B_typical };

struct CategoryTag {
    std::size_t index = 0;  // time index into the residual series
    double delta_y = 0.0;
    Category category = Category::B_typical;
};

/// Gaussian threshold on first differences, fitted once so it can be applied
/// causally to points revealed later.
struct DeltaThreshold {
    double mu = 0.0;
    double sd = 0.0;
    double z = 0.0;
    double xi = 0.0;

    bool degenerate() const { return sd <= 0.0; }
    Category classify(double delta) const {
        if (degenerate()) return Category::B_typical;
        return std::abs(delta - mu) > z * sd ? Category::A_extreme : Category::B_typical;
    }
};

inline DeltaThreshold fit_delta_threshold(std::span<const double> residual, double xi) {
    if (residual.size() < 3) throw std::invalid_argument("fit_delta_threshold: need >= 3 points");
    if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("fit_delta_threshold: xi outside (0,1)");

    const std::size_t m = residual.size() - 1;
    double mean = 0.0;
    for (std::size_t i = 1; i < residual.size(); ++i) mean += residual[i] - residual[i - 1];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 1; i < residual.size(); ++i) {
        const double d = residual[i] - residual[i - 1] - mean;
        var += d * d;
    }
    var /= static_cast<double>(m);

    DeltaThreshold t;
    t.mu = mean;
    t.sd = std::sqrt(var);
    t.xi = xi;
    t.z = two_sided_quantile(xi);
    if (t.degenerate())
        std::cerr << "relief: degenerate delta distribution (zero variance); all points typical\n";
    return t;
}

/// Tag indices 1..length-1 as extreme (A) or typical (B) by whether their
/// first difference falls outside the central xi confidence interval.
inline std::vector<CategoryTag> tag_categories(std::span<const double> residual, double xi) {
    const DeltaThreshold t = fit_delta_threshold(residual, xi);
    std::vector<CategoryTag> tags;
    tags.reserve(residual.size() - 1);
    for (std::size_t i = 1; i < residual.size(); ++i) {
        CategoryTag tag;
        tag.index = i;
        tag.delta_y = residual[i] - residual[i - 1];
        tag.category = t.classify(tag.delta_y);
        tags.push_back(tag);
    }
    return tags;
}

struct ReliefResult {
    FeatureWeights weights;
    std::vector<double> margins;  // per-A-point weighted margin under the final weights
    double xi_used = 0.0;
    bool degenerate = false;      // fell back to uniform weights
};

namespace detail {
inline double l1_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().sum();
}
}  // namespace detail

/// Margin-maximizing feature weights: for each extreme point find its nearest
/// typical point under unweighted L1 distance, accumulate per-dimension gaps
/// z, and return z / ||z||. Tags must be aligned with the feature vectors.
inline ReliefResult optimize_weights(const std::vector<FeatureVector>& features,
                                     const std::vector<CategoryTag>& tags, double xi = 0.0) {
    if (features.size() != tags.size())
        throw std::invalid_argument("optimize_weights: features/tags length mismatch");
    if (features.empty()) throw std::invalid_argument("optimize_weights: empty input");

    std::vector<std::size_t> a_idx, b_idx;
    for (std::size_t i = 0; i < tags.size(); ++i)
        (tags[i].category == Category::A_extreme ? a_idx : b_idx).push_back(i);
    if (a_idx.empty() || b_idx.empty())
        throw std::invalid_argument("optimize_weights: a category is empty");

    const int dim = features.front().dim();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
    std::vector<Eigen::VectorXd> gaps;
    gaps.reserve(a_idx.size());
    for (std::size_t a : a_idx) {
        std::size_t best = b_idx.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t b : b_idx) {
            const double d = detail::l1_distance(features[a].values, features[b].values);
            // ties broken by lowest time index
            if (d < best_d ||
                (d == best_d && features[b].time_index < features[best].time_index)) {
                best_d = d;
                best = b;
            }
        }
        Eigen::VectorXd gap = (features[a].values - features[best].values).cwiseAbs();
        z += gap;
        gaps.push_back(std::move(gap));
    }

    ReliefResult res;
    res.xi_used = xi;
    const double zn = z.norm();
    if (zn <= 0.0) {
        std::cerr << "relief: zero margin in every dimension; falling back to uniform weights\n";
        res.weights = FeatureWeights::uniform(dim);
        res.degenerate = true;
    } else {
        res.weights.w = z / zn;
    }
    res.margins.reserve(gaps.size());
    for (const auto& gap : gaps) res.margins.push_back(res.weights.w.dot(gap));
    return res;
}

}  // namespace fegp
