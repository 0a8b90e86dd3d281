#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fegp {

inline constexpr int kFeatureDim = 9;

struct FeatureVector {
    Eigen::VectorXd values;
    std::int64_t time_index = 0;

    int dim() const { return static_cast<int>(values.size()); }
};

struct FeatureWeights {
    Eigen::VectorXd w;

    static FeatureWeights uniform(int dim) {
        FeatureWeights fw;
        fw.w = Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
        return fw;
    }
    void validate() const {
        if ((w.array() < 0).any()) throw std::invalid_argument("FeatureWeights: negative entry");
        if (std::abs(w.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("FeatureWeights: not unit L2 norm");
    }
};

enum class StdMode { population, sample };

struct FeatureConfig {
    int lag_depth = 5;
    double ratio_epsilon = 1e-6;
    StdMode std_mode = StdMode::population;

    void validate() const {
        if (lag_depth < 5) throw std::invalid_argument("FeatureConfig: lag_depth must be >= 5");
        if (ratio_epsilon <= 0) throw std::invalid_argument("FeatureConfig: ratio_epsilon must be > 0");
    }
};

namespace detail {
// sign(0) = +1, so a zero denominator clamps to +epsilon
inline double clamp_denominator(double d, double eps) {
    if (std::abs(d) >= eps) return d;
    return d < 0 ? -eps : eps;
}
}  // namespace detail

/// Nine features of a time point from its preceding lags: four raw lags, two
/// absolute-trend terms, two relative-trend ratios (epsilon-clamped
/// denominators), and the std of the last five lags.
inline FeatureVector featurize(std::span<const double> history, std::int64_t l,
                               const FeatureConfig& cfg = {}) {
    cfg.validate();
    if (l < cfg.lag_depth)
        throw std::invalid_argument("featurize: insufficient history at index " + std::to_string(l));
    if (static_cast<std::size_t>(l) > history.size())
        throw std::invalid_argument("featurize: index past end of history");

    auto y = [&](std::int64_t back) { return history[static_cast<std::size_t>(l - back)]; };
    const double y1 = y(1), y2 = y(2), y3 = y(3), y4 = y(4), y5 = y(5);

    FeatureVector fv;
    fv.time_index = l;
    fv.values.resize(kFeatureDim);
    fv.values[0] = y1;
    fv.values[1] = y2;
    fv.values[2] = y3;
    fv.values[3] = y4;
    fv.values[4] = y2 - y5;
    fv.values[5] = y3 + y4;
    fv.values[6] = (y2 - y1) / detail::clamp_denominator(y3 - y2, cfg.ratio_epsilon);
    fv.values[7] = (y2 - y3) / detail::clamp_denominator(y3 - y4, cfg.ratio_epsilon);

    const double mean = (y1 + y2 + y3 + y4 + y5) / 5.0;
    double ss = 0.0;
    for (double v : {y1, y2, y3, y4, y5}) ss += (v - mean) * (v - mean);
    fv.values[8] = std::sqrt(ss / (cfg.std_mode == StdMode::population ? 5.0 : 4.0));
    return fv;
}

/// One feature vector per index l in [lag_depth, length), in order.
inline std::vector<FeatureVector> featurize_series(std::span<const double> residual,
                                                   const FeatureConfig& cfg = {}) {
    cfg.validate();
    if (residual.size() <= static_cast<std::size_t>(cfg.lag_depth))
        throw std::invalid_argument("featurize_series: series too short");
    std::vector<FeatureVector> out;
    out.reserve(residual.size() - cfg.lag_depth);
    for (std::size_t l = static_cast<std::size_t>(cfg.lag_depth); l < residual.size(); ++l)
        out.push_back(featurize(residual, static_cast<std::int64_t>(l), cfg));
    return out;
}

/// L2 norm of the weighted feature difference.
inline double weighted_distance(const FeatureVector& a, const FeatureVector& b,
                                const FeatureWeights& w) {
    if (a.dim() != b.dim() || a.dim() != w.w.size())
        throw std::invalid_argument("weighted_distance: dimension mismatch");
    return (w.w.array() * (a.values - b.values).array()).matrix().norm();
}

/// Per-dimension z-score transform, fitted on a training window.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    static Standardizer fit(const std::vector<FeatureVector>& features) {
        if (features.empty()) throw std::invalid_argument("Standardizer: no features");
        const int dim = features.front().dim();
        Standardizer s;
        s.mean = Eigen::VectorXd::Zero(dim);
        for (const auto& f : features) s.mean += f.values;
        s.mean /= static_cast<double>(features.size());
        Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
        for (const auto& f : features) var += (f.values - s.mean).array().square().matrix();
        var /= static_cast<double>(features.size());
        s.std = var.array().sqrt().max(1e-12).matrix();
        return s;
    }
    static Standardizer identity(int dim) {
        Standardizer s;
        s.mean = Eigen::VectorXd::Zero(dim);
        s.std = Eigen::VectorXd::Ones(dim);
        return s;
    }
    FeatureVector apply(const FeatureVector& f) const {
        FeatureVector out;
        out.time_index = f.time_index;
        out.values = ((f.values - mean).array() / std.array()).matrix();
        return out;
    }
    std::vector<FeatureVector> apply(const std::vector<FeatureVector>& fs) const {
        std::vector<FeatureVector> out;
        out.reserve(fs.size());
        for (const auto& f : fs) out.push_back(apply(f));
        return out;
    }
};

}  // namespace fegp
