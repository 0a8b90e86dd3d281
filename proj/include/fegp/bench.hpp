#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fegp/forecast.hpp"
#include "fegp/gp.hpp"
#include "fegp/model_io.hpp"
#include "fegp/relief.hpp"
#include "fegp/sarima.hpp"
#include "fegp/series.hpp"

namespace fegp {

// ---------------------------------------------------------------------------
// ACE metric

/// Absolute cumulative error over the inclusive index range [from, to].
inline double ace(std::span<const double> forecasts, std::span<const double> actuals,
                  std::size_t from, std::size_t to) {
    if (forecasts.size() != actuals.size())
        throw std::invalid_argument("ace: length mismatch");
    if (from > to || to >= actuals.size()) throw std::invalid_argument("ace: bad range");
    double sum = 0.0;
    for (std::size_t n = from; n <= to; ++n) sum += std::abs(forecasts[n] - actuals[n]);
    return sum;
}

// ---------------------------------------------------------------------------
// spike segmentation

struct Segment {
    std::string label;       // "spike" or "average"
    std::size_t begin, end;  // half-open [begin, end)
};

/// Partition the evaluation span into spike and average segments: extreme-tagged
/// indices (category A under the xi threshold on first differences), padded by
/// `pad` slots on each side, merged into maximal runs.
inline std::vector<Segment> segment_spikes(std::span<const double> actuals, double xi, int pad = 2) {
    if (actuals.empty()) throw std::invalid_argument("segment_spikes: empty series");
    const std::size_t n = actuals.size();
    std::vector<bool> spike(n, false);
    if (n >= 3) {
        for (const auto& t : tag_categories(actuals, xi)) {
            if (t.category != Category::A_extreme) continue;
            const std::size_t lo = t.index > static_cast<std::size_t>(pad) ? t.index - pad : 0;
            const std::size_t hi = std::min(n - 1, t.index + static_cast<std::size_t>(pad));
            for (std::size_t i = lo; i <= hi; ++i) spike[i] = true;
        }
    }
    std::vector<Segment> segs;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && spike[j] == spike[i]) ++j;
        segs.push_back({spike[i] ? "spike" : "average", i, j});
        i = j;
    }
    return segs;
}

// ---------------------------------------------------------------------------
// evaluation report

struct StepRecord {
    std::size_t index = 0;  // global series index
    double actual = 0.0;
    double map_forecast = 0.0;
    double prob_below = 0.0;
    double prob_above = 0.0;
};

struct SegmentAce {
    std::string label;
    std::size_t begin = 0, end = 0;  // step offsets within the test span
    double ace = 0.0;
};

struct EvalReport {
    std::string method;
    double ace_total = 0.0;
    std::vector<double> ace_curve;  // cumulative |error| per step
    std::vector<SegmentAce> segments;
    double spike_ace = 0.0;
    double average_ace = 0.0;
    std::vector<StepRecord> forecasts;
    bool audit_ok = true;
    std::int64_t audit_max_read = -1;  // highest series index touched while forecasting
};

struct RunConfig {
    std::string csv_path;  // empty -> synthetic source
    SyntheticSpec synth;
    std::size_t train_len = 0;  // 0 -> first half
    std::vector<std::string> methods = {"fegp", "naive_gp", "sarima"};
    double xi = 0.9;
    int spike_pad = 2;
    FeatureConfig feature_cfg;
    PrunePolicy fegp_prune{672, 0.5};
    PrunePolicy naive_prune{672, 0.0};
    std::size_t fit_subset = 200;  // most-recent points used for hyper-parameter fitting
    FitOptions fit_options;
    SarimaOrder sarima_order{1, 0, 1, 0, 1, 1, 96};
    std::optional<std::pair<double, double>> risk_interval;
    std::size_t refit_every = 0;  // 0 -> fit once on the training span
    std::string out_dir;
    std::uint64_t seed = 0;

    void validate() const {
        if (methods.empty()) throw std::invalid_argument("RunConfig: at least one method");
        for (const auto& m : methods)
            if (m != "fegp" && m != "naive_gp" && m != "sarima")
                throw std::invalid_argument("RunConfig: unknown method " + m);
    }
};

// ---------------------------------------------------------------------------
// causality audit

/// Read accessor over the actuals that records the highest index touched,
/// so the harness can prove no forecast peeked at its own future.
class AuditedSeries {
public:
    explicit AuditedSeries(const std::vector<double>& v) : v_(&v) {}
    double at(std::size_t i) const {
        max_read_ = std::max(max_read_, static_cast<std::int64_t>(i));
        return (*v_)[i];
    }
    void reset() const { max_read_ = -1; }
    std::int64_t max_read() const { return max_read_; }

private:
    const std::vector<double>* v_;
    mutable std::int64_t max_read_ = -1;
};

// ---------------------------------------------------------------------------
// report writing

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void finalize_report(EvalReport& rep, double xi, int pad) {
    const std::size_t n = rep.forecasts.size();
    std::vector<double> fc(n), ac(n), err(n);
    for (std::size_t i = 0; i < n; ++i) {
        fc[i] = rep.forecasts[i].map_forecast;
        ac[i] = rep.forecasts[i].actual;
        err[i] = std::abs(fc[i] - ac[i]);
    }
    rep.ace_curve.resize(n);
    double run = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        run += err[i];
        rep.ace_curve[i] = run;
    }
    rep.ace_total = run;
    rep.segments.clear();
    rep.spike_ace = rep.average_ace = 0.0;
    for (const auto& s : segment_spikes(ac, xi, pad)) {
        SegmentAce sa;
        sa.label = s.label;
        sa.begin = s.begin;
        sa.end = s.end;
        sa.ace = ace(fc, ac, s.begin, s.end - 1);
        (s.label == "spike" ? rep.spike_ace : rep.average_ace) += sa.ace;
        rep.segments.push_back(std::move(sa));
    }
}

}  // namespace detail

inline void write_forecast_csv(const EvalReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_forecast_csv: cannot open " + path);
    out << "index,actual,map_forecast,prob_below,prob_above\n";
    for (const auto& r : rep.forecasts)
        out << r.index << ',' << detail::fmt_double(r.actual) << ','
            << detail::fmt_double(r.map_forecast) << ',' << detail::fmt_double(r.prob_below) << ','
            << detail::fmt_double(r.prob_above) << '\n';
}

inline ordered_json report_to_json(const EvalReport& rep) {
    ordered_json j;
    j["method"] = rep.method;
    j["ace_total"] = rep.ace_total;
    j["spike_ace"] = rep.spike_ace;
    j["average_ace"] = rep.average_ace;
    j["audit_ok"] = rep.audit_ok;
    j["audit_max_read"] = rep.audit_max_read;
    ordered_json segs = ordered_json::array();
    for (const auto& s : rep.segments)
        segs.push_back({{"label", s.label}, {"begin", s.begin}, {"end", s.end}, {"ace", s.ace}});
    j["segments"] = segs;
    j["ace_curve"] = rep.ace_curve;
    return j;
}

/// Plot-ready CSV of cumulative error curves, one column per method present.
inline void write_curves_csv(const std::vector<EvalReport>& reps, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_curves_csv: cannot open " + path);
    static const char* order[] = {"fegp", "naive_gp", "sarima"};
    std::vector<const EvalReport*> cols;
    out << "step";
    for (const char* name : order)
        for (const auto& r : reps)
            if (r.method == name) {
                out << ',' << name;
                cols.push_back(&r);
            }
    out << '\n';
    std::size_t n = 0;
    for (const auto* r : cols) n = std::max(n, r->ace_curve.size());
    for (std::size_t i = 0; i < n; ++i) {
        out << i;
        for (const auto* r : cols)
            out << ',' << (i < r->ace_curve.size() ? detail::fmt_double(r->ace_curve[i]) : "");
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// rolling evaluation

namespace detail {

struct PreparedData {
    TrafficSeries series;
    std::vector<double> baseline;        // fitted on the training span only
    std::vector<double> train_residual;  // residual over [0, train_len)
    std::size_t train_len = 0;
};

inline PreparedData prepare(const RunConfig& cfg) {
    PreparedData d;
    if (!cfg.csv_path.empty())
        d.series = ingest_csv(cfg.csv_path, cfg.synth.slot_seconds);
    else
        d.series = synthesize(cfg.synth);

    const std::size_t n = d.series.size();
    d.train_len = cfg.train_len > 0 ? cfg.train_len : n / 2;
    if (d.train_len < d.series.slots_per_day() || d.train_len >= n)
        throw std::invalid_argument("run: training span must cover >= 1 day and leave a test span");

    TrafficSeries train = d.series;
    train.values.assign(d.series.values.begin(),
                        d.series.values.begin() + static_cast<std::ptrdiff_t>(d.train_len));
    const Decomposition dec = decompose(train);
    d.baseline = dec.baseline;
    d.train_residual = dec.residual.values;
    return d;
}

inline EvalReport run_fegp(const RunConfig& cfg, const PreparedData& d) {
    const std::size_t S = d.baseline.size();
    const auto& raw = d.series.values;
    const std::size_t n = raw.size();
    const int L = cfg.feature_cfg.lag_depth;

    // training artifacts
    const DeltaThreshold thr = fit_delta_threshold(d.train_residual, cfg.xi);
    std::vector<CategoryTag> tags = tag_categories(d.train_residual, cfg.xi);
    std::vector<FeatureVector> raw_feats = featurize_series(d.train_residual, cfg.feature_cfg);

    std::vector<CategoryTag> aligned;
    aligned.reserve(raw_feats.size());
    for (const auto& f : raw_feats) aligned.push_back(tags[static_cast<std::size_t>(f.time_index) - 1]);

    // Relief runs on standardized features so its weights live on the same
    // scale the kernel distance uses.
    const Standardizer std_ = Standardizer::fit(raw_feats);
    std::vector<FeatureVector> feats;
    feats.reserve(raw_feats.size());
    for (const auto& f : raw_feats) feats.push_back(std_.apply(f));

    FeatureWeights weights = FeatureWeights::uniform(kFeatureDim);
    try {
        weights = optimize_weights(feats, aligned, cfg.xi).weights;
    } catch (const std::invalid_argument&) {
        // a category was empty; uniform weights stand
    }

    FegpModel model;
    model.kind = KernelKind::feature_embedded;
    model.weights = weights;
    model.standardizer = std_;
    for (std::size_t k = 0; k < feats.size(); ++k) {
        const auto l = static_cast<std::size_t>(feats[k].time_index);
        model.window.push_back(static_cast<std::int64_t>(l), d.train_residual[l], feats[k]);
    }
    model.window = prune(model.window, tags, cfg.fegp_prune);

    auto fit_on_recent = [&]() {
        TrainingWindow sub = model.window;
        if (sub.size() > cfg.fit_subset) {
            TrainingWindow tail;
            tail.mean_value = sub.mean_value;
            for (std::size_t i = sub.size() - cfg.fit_subset; i < sub.size(); ++i)
                tail.push_back(sub.indices[i], sub.targets[i], sub.features[i]);
            sub = std::move(tail);
        }
        FitOptions fo = cfg.fit_options;
        fo.seed = cfg.seed;
        model.hyper = fit(sub, model.weights, model.kind, fo);
    };
    fit_on_recent();

    AuditedSeries audit(raw);
    auto residual_at = [&](std::size_t i) { return audit.at(i) - d.baseline[i % S]; };
    // residual history kept alongside so new tags use the training-fitted threshold
    std::vector<double> res_hist = d.train_residual;

    EvalReport rep;
    rep.method = "fegp";
    for (std::size_t t = d.train_len; t < n; ++t) {
        if (cfg.refit_every > 0 && (t - d.train_len) % cfg.refit_every == 0 && t != d.train_len)
            fit_on_recent();

        audit.reset();
        std::vector<double> hist(static_cast<std::size_t>(L));
        for (int k = 0; k < L; ++k) hist[static_cast<std::size_t>(k)] = residual_at(t - L + k);
        const MixturePosterior post_res = predict_fegp(model, hist, cfg.feature_cfg);
        const MixturePosterior post = post_res.shifted(d.baseline[t % S]);
        const double map = map_point(post);
        if (audit.max_read() >= static_cast<std::int64_t>(t)) rep.audit_ok = false;
        rep.audit_max_read = std::max(rep.audit_max_read, audit.max_read());

        StepRecord r;
        r.index = t;
        r.actual = raw[t];
        r.map_forecast = map;
        if (cfg.risk_interval) {
            const RiskReport rk = risk(post, cfg.risk_interval->first, cfg.risk_interval->second);
            r.prob_below = rk.prob_below;
            r.prob_above = rk.prob_above;
        }
        rep.forecasts.push_back(r);

        // reveal the actual: extend window, tag, prune
        const double res_t = raw[t] - d.baseline[t % S];
        res_hist.push_back(res_t);
        CategoryTag tag;
        tag.index = t;
        tag.delta_y = res_hist[t] - res_hist[t - 1];
        tag.category = thr.classify(tag.delta_y);
        tags.push_back(tag);
        const FeatureVector fv = featurize(res_hist, static_cast<std::int64_t>(t), cfg.feature_cfg);
        model.window.push_back(static_cast<std::int64_t>(t), res_t, model.standardizer.apply(fv));
        model.window = prune(model.window, tags, cfg.fegp_prune);
    }
    finalize_report(rep, cfg.xi, cfg.spike_pad);
    return rep;
}

inline EvalReport run_naive(const RunConfig& cfg, const PreparedData& d) {
    const std::size_t S = d.baseline.size();
    const auto& raw = d.series.values;
    const std::size_t n = raw.size();

    const DeltaThreshold thr = fit_delta_threshold(d.train_residual, cfg.xi);
    std::vector<CategoryTag> tags = tag_categories(d.train_residual, cfg.xi);

    FegpModel model;
    model.kind = KernelKind::naive_time;
    model.weights = FeatureWeights::uniform(1);
    model.standardizer = Standardizer::identity(1);
    FeatureVector dummy;
    dummy.values = Eigen::VectorXd::Zero(0);
    for (std::size_t i = 0; i < d.train_len; ++i)
        model.window.push_back(static_cast<std::int64_t>(i), d.train_residual[i], dummy);
    model.window = prune(model.window, tags, cfg.naive_prune);

    auto fit_on_recent = [&]() {
        TrainingWindow sub = model.window;
        if (sub.size() > cfg.fit_subset) {
            TrainingWindow tail;
            tail.mean_value = sub.mean_value;
            for (std::size_t i = sub.size() - cfg.fit_subset; i < sub.size(); ++i)
                tail.push_back(sub.indices[i], sub.targets[i], sub.features[i]);
            sub = std::move(tail);
        }
        FitOptions fo = cfg.fit_options;
        fo.seed = cfg.seed;
        model.hyper = fit(sub, model.weights, model.kind, fo);
    };
    fit_on_recent();

    AuditedSeries audit(raw);
    std::vector<double> res_hist = d.train_residual;

    EvalReport rep;
    rep.method = "naive_gp";
    for (std::size_t t = d.train_len; t < n; ++t) {
        if (cfg.refit_every > 0 && (t - d.train_len) % cfg.refit_every == 0 && t != d.train_len)
            fit_on_recent();

        audit.reset();
        const GaussianPosterior g_res = predict_naive(model, static_cast<std::int64_t>(t));
        GaussianPosterior g{g_res.mu + d.baseline[t % S], g_res.var};
        if (audit.max_read() >= static_cast<std::int64_t>(t)) rep.audit_ok = false;
        rep.audit_max_read = std::max(rep.audit_max_read, audit.max_read());

        StepRecord r;
        r.index = t;
        r.actual = raw[t];
        r.map_forecast = g.mu;
        if (cfg.risk_interval) {
            const RiskReport rk = risk(g, cfg.risk_interval->first, cfg.risk_interval->second);
            r.prob_below = rk.prob_below;
            r.prob_above = rk.prob_above;
        }
        rep.forecasts.push_back(r);

        const double res_t = audit.at(t) - d.baseline[t % S];
        res_hist.push_back(res_t);
        CategoryTag tag;
        tag.index = t;
        tag.delta_y = res_hist[t] - res_hist[t - 1];
        tag.category = thr.classify(tag.delta_y);
        tags.push_back(tag);
        model.window.push_back(static_cast<std::int64_t>(t), res_t, dummy);
        model.window = prune(model.window, tags, cfg.naive_prune);
    }
    finalize_report(rep, cfg.xi, cfg.spike_pad);
    return rep;
}

inline EvalReport run_sarima(const RunConfig& cfg, const PreparedData& d) {
    const auto& raw = d.series.values;
    const std::size_t n = raw.size();

    std::span<const double> train(raw.data(), d.train_len);
    const SarimaModel model = fit_sarima(train, cfg.sarima_order);
    const double sd = std::sqrt(std::max(model.resid_var, 1e-12));

    AuditedSeries audit(raw);
    EvalReport rep;
    rep.method = "sarima";
    std::vector<double> hist;
    hist.reserve(n);
    for (std::size_t t = d.train_len; t < n; ++t) {
        audit.reset();
        hist.resize(t);
        for (std::size_t i = 0; i < t; ++i) hist[i] = audit.at(i);
        const double fc = forecast_one(model, hist);
        if (audit.max_read() >= static_cast<std::int64_t>(t)) rep.audit_ok = false;
        rep.audit_max_read = std::max(rep.audit_max_read, audit.max_read());

        StepRecord r;
        r.index = t;
        r.actual = raw[t];
        r.map_forecast = fc;
        if (cfg.risk_interval) {
            const GaussianPosterior g{fc, sd * sd};
            const RiskReport rk = risk(g, cfg.risk_interval->first, cfg.risk_interval->second);
            r.prob_below = rk.prob_below;
            r.prob_above = rk.prob_above;
        }
        rep.forecasts.push_back(r);
    }
    finalize_report(rep, cfg.xi, cfg.spike_pad);
    return rep;
}

}  // namespace detail

/// Full pipeline per configured method: decompose on the training span, tag,
/// Relief weights (FE-GP), fit, rolling one-step-ahead forecasts with the
/// baseline re-added before scoring. Reports are written to cfg.out_dir when set.
inline std::vector<EvalReport> run(const RunConfig& cfg) {
    cfg.validate();
    const detail::PreparedData d = detail::prepare(cfg);

    std::vector<EvalReport> reports;
    for (const auto& m : cfg.methods) {
        try {
            if (m == "fegp")
                reports.push_back(detail::run_fegp(cfg, d));
            else if (m == "naive_gp")
                reports.push_back(detail::run_naive(cfg, d));
            else
                reports.push_back(detail::run_sarima(cfg, d));
        } catch (const std::exception& e) {
            throw std::runtime_error("run: method " + m + " failed: " + e.what());
        }
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        for (const auto& rep : reports) {
            write_forecast_csv(rep, cfg.out_dir + "/forecast_" + rep.method + ".csv");
            std::ofstream out(cfg.out_dir + "/report_" + rep.method + ".json");
            out << report_to_json(rep).dump(2) << '\n';
        }
        write_curves_csv(reports, cfg.out_dir + "/curves.csv");
    }
    return reports;
}

/// Re-render reports and curves from stored per-method forecast CSVs.
inline std::vector<EvalReport> rerender_reports(const std::string& dir, double xi, int pad = 2) {
    std::vector<EvalReport> reports;
    for (const char* m : {"fegp", "naive_gp", "sarima"}) {
        const std::string path = dir + "/forecast_" + std::string(m) + ".csv";
        std::ifstream in(path);
        if (!in) continue;
        EvalReport rep;
        rep.method = m;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            StepRecord r;
            char* end = nullptr;
            r.index = std::strtoull(line.c_str(), &end, 10);
            r.actual = std::strtod(end + 1, &end);
            r.map_forecast = std::strtod(end + 1, &end);
            r.prob_below = std::strtod(end + 1, &end);
            r.prob_above = std::strtod(end + 1, &end);
            rep.forecasts.push_back(r);
        }
        if (rep.forecasts.empty()) continue;
        detail::finalize_report(rep, xi, pad);
        std::ofstream out(dir + "/report_" + rep.method + ".json");
        out << report_to_json(rep).dump(2) << '\n';
        reports.push_back(std::move(rep));
    }
    if (reports.empty()) throw std::runtime_error("rerender_reports: no forecast CSVs in " + dir);
    write_curves_csv(reports, dir + "/curves.csv");
    return reports;
}

}  // namespace fegp
