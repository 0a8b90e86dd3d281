#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fegp/forecast.hpp"
#include "fegp/gp.hpp"

namespace fegp {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

inline const char* kernel_kind_name(KernelKind k) {
    return k == KernelKind::feature_embedded ? "feature_embedded" : "naive_time";
}
inline KernelKind kernel_kind_from_name(const std::string& s) {
    if (s == "feature_embedded") return KernelKind::feature_embedded;
    if (s == "naive_time") return KernelKind::naive_time;
    throw std::invalid_argument("unknown kernel kind: " + s);
}

inline ordered_json model_to_json(const FegpModel& m, const FeatureConfig& cfg = {}) {
    ordered_json j;
    j["format_version"] = kModelFormatVersion;
    j["kernel_kind"] = kernel_kind_name(m.kind);
    j["hyper"] = {{"sigma", m.hyper.sigma}, {"beta", m.hyper.beta}, {"sigma_n", m.hyper.sigma_n}};
    j["weights"] = std::vector<double>(m.weights.w.data(), m.weights.w.data() + m.weights.w.size());
    j["standardizer"] = {
        {"mean", std::vector<double>(m.standardizer.mean.data(),
                                     m.standardizer.mean.data() + m.standardizer.mean.size())},
        {"std", std::vector<double>(m.standardizer.std.data(),
                                    m.standardizer.std.data() + m.standardizer.std.size())}};
    ordered_json win;
    win["mean_value"] = m.window.mean_value;
    win["indices"] = m.window.indices;
    win["targets"] = m.window.targets;
    std::vector<std::vector<double>> feats;
    feats.reserve(m.window.features.size());
    for (const auto& f : m.window.features)
        feats.emplace_back(f.values.data(), f.values.data() + f.values.size());
    win["features"] = feats;
    j["window"] = win;
    j["feature_config"] = {{"lag_depth", cfg.lag_depth},
                           {"ratio_epsilon", cfg.ratio_epsilon},
                           {"std_mode", cfg.std_mode == StdMode::population ? "population" : "sample"}};
    return j;
}

inline FegpModel model_from_json(const ordered_json& j, FeatureConfig* cfg_out = nullptr) {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw std::runtime_error("model_from_json: unsupported format version");
    FegpModel m;
    m.kind = kernel_kind_from_name(j.at("kernel_kind").get<std::string>());
    m.hyper.sigma = j.at("hyper").at("sigma").get<double>();
    m.hyper.beta = j.at("hyper").at("beta").get<double>();
    m.hyper.sigma_n = j.at("hyper").at("sigma_n").get<double>();

    const auto wv = j.at("weights").get<std::vector<double>>();
    m.weights.w = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(wv.size()));
    const auto sm = j.at("standardizer").at("mean").get<std::vector<double>>();
    const auto ss = j.at("standardizer").at("std").get<std::vector<double>>();
    m.standardizer.mean = Eigen::Map<const Eigen::VectorXd>(sm.data(), static_cast<Eigen::Index>(sm.size()));
    m.standardizer.std = Eigen::Map<const Eigen::VectorXd>(ss.data(), static_cast<Eigen::Index>(ss.size()));

    const auto& win = j.at("window");
    m.window.mean_value = win.at("mean_value").get<double>();
    m.window.indices = win.at("indices").get<std::vector<std::int64_t>>();
    m.window.targets = win.at("targets").get<std::vector<double>>();
    for (std::size_t i = 0; i < m.window.indices.size(); ++i) {
        const auto fv = win.at("features").at(i).get<std::vector<double>>();
        FeatureVector f;
        f.time_index = m.window.indices[i];
        f.values = Eigen::Map<const Eigen::VectorXd>(fv.data(), static_cast<Eigen::Index>(fv.size()));
        m.window.features.push_back(std::move(f));
    }
    if (cfg_out) {
        const auto& fc = j.at("feature_config");
        cfg_out->lag_depth = fc.at("lag_depth").get<int>();
        cfg_out->ratio_epsilon = fc.at("ratio_epsilon").get<double>();
        cfg_out->std_mode =
            fc.at("std_mode").get<std::string>() == "sample" ? StdMode::sample : StdMode::population;
    }
    return m;
}

inline void save_model(const FegpModel& m, const std::string& path, const FeatureConfig& cfg = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << model_to_json(m, cfg).dump(2) << '\n';
}

inline FegpModel load_model(const std::string& path, FeatureConfig* cfg_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    ordered_json j;
    in >> j;
    return model_from_json(j, cfg_out);
}

/// Audit dump of a Relief optimization.
inline ordered_json relief_to_json(const ReliefResult& r) {
    ordered_json j;
    j["xi"] = r.xi_used;
    j["degenerate"] = r.degenerate;
    j["weights"] = std::vector<double>(r.weights.w.data(), r.weights.w.data() + r.weights.w.size());
    j["margins"] = r.margins;
    return j;
}

/// Per-step forecast record: index, MAP value, component list (optionally the
/// top-k by PDF contribution at the MAP), and risk probabilities.
inline ordered_json forecast_record_json(std::int64_t index, const MixturePosterior& post,
                                         double map_value, const std::vector<RiskReport>& risks,
                                         int top_k = 0) {
    ordered_json j;
    j["index"] = index;
    j["map"] = map_value;
    std::vector<std::size_t> order(post.components.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (top_k > 0 && static_cast<std::size_t>(top_k) < order.size()) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return normal_pdf(map_value, post.components[a].mu, post.components[a].var) >
                   normal_pdf(map_value, post.components[b].mu, post.components[b].var);
        });
        order.resize(static_cast<std::size_t>(top_k));
        std::sort(order.begin(), order.end());
    }
    ordered_json comps = ordered_json::array();
    for (std::size_t i : order) {
        const auto& c = post.components[i];
        comps.push_back({{"mu", c.mu}, {"var", c.var}, {"source_index", c.source_index}});
    }
    j["components"] = comps;
    ordered_json rs = ordered_json::array();
    for (const auto& r : risks)
        rs.push_back({{"low", r.low},
                      {"high", r.high},
                      {"prob_below", r.prob_below},
                      {"prob_within", r.prob_within},
                      {"prob_above", r.prob_above}});
    j["risks"] = rs;
    return j;
}

}  // namespace fegp
