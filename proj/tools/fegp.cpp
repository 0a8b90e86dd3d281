// Command-line driver: synthetic data generation, decomposition, model
// training, single-step forecasting, and the full rolling evaluation pipeline.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fegp/bench.hpp"
#include "fegp/model_io.hpp"

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

/// key=value config file; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

struct KV {
    std::map<std::string, std::string> m;

    bool has(const std::string& k) const { return m.count(k) > 0; }
    std::string str(const std::string& k, const std::string& dflt) const {
        auto it = m.find(k);
        return it == m.end() ? dflt : it->second;
    }
    double num(const std::string& k, double dflt) const {
        auto it = m.find(k);
        return it == m.end() ? dflt : std::stod(it->second);
    }
    long long integer(const std::string& k, long long dflt) const {
        auto it = m.find(k);
        return it == m.end() ? dflt : std::stoll(it->second);
    }
};

fegp::SyntheticSpec synth_spec_from(const KV& kv) {
    fegp::SyntheticSpec s;
    s.seed = static_cast<std::uint64_t>(kv.integer("seed", 0));
    s.days = static_cast<int>(kv.integer("days", 14));
    s.base_level = kv.num("base_level", 100.0);
    s.base_amplitude = kv.num("base_amplitude", 40.0);
    s.base_phase = kv.num("base_phase", 0.0);
    s.noise_std = kv.num("noise_std", 0.0);
    s.smooth_std = kv.num("smooth_std", 0.0);
    s.smooth_rho = kv.num("smooth_rho", 0.97);
    s.spike_rate = kv.num("spike_rate", 0.0);
    s.trough_rate = kv.num("trough_rate", 0.0);
    s.event_scale = kv.num("event_scale", 60.0);
    s.amp_jitter = kv.num("amp_jitter", 0.3);
    s.slot_seconds = kv.integer("slot_seconds", 900);
    if (kv.has("spike_template")) {
        s.spike_template.clear();
        for (const auto& tok : split_csv_list(kv.str("spike_template", "")))
            s.spike_template.push_back(std::stod(tok));
    }
    return s;
}

fegp::RunConfig run_config_from(const KV& kv) {
    fegp::RunConfig cfg;
    cfg.csv_path = kv.str("data", "");
    cfg.synth = synth_spec_from(kv);
    cfg.train_len = static_cast<std::size_t>(kv.integer("train_len", 0));
    cfg.methods = split_csv_list(kv.str("methods", "fegp,naive_gp,sarima"));
    cfg.xi = kv.num("xi", 0.9);
    cfg.spike_pad = static_cast<int>(kv.integer("spike_pad", 2));
    cfg.feature_cfg.lag_depth = static_cast<int>(kv.integer("lag_depth", 5));
    cfg.feature_cfg.ratio_epsilon = kv.num("ratio_epsilon", 1e-6);
    cfg.fegp_prune.max_size = static_cast<std::size_t>(kv.integer("max_size", 672));
    cfg.fegp_prune.extreme_keep_fraction = kv.num("extreme_keep_fraction", 0.5);
    cfg.naive_prune.max_size = static_cast<std::size_t>(kv.integer("naive_max_size", 672));
    cfg.fit_subset = static_cast<std::size_t>(kv.integer("fit_subset", 200));
    cfg.fit_options.restarts = static_cast<int>(kv.integer("restarts", 5));
    cfg.fit_options.max_iters = static_cast<int>(kv.integer("max_iters", 300));
    cfg.sarima_order.p = static_cast<int>(kv.integer("sarima_p", 1));
    cfg.sarima_order.d = static_cast<int>(kv.integer("sarima_d", 0));
    cfg.sarima_order.q = static_cast<int>(kv.integer("sarima_q", 1));
    cfg.sarima_order.P = static_cast<int>(kv.integer("sarima_P", 0));
    cfg.sarima_order.D = static_cast<int>(kv.integer("sarima_D", 1));
    cfg.sarima_order.Q = static_cast<int>(kv.integer("sarima_Q", 1));
    cfg.sarima_order.s = static_cast<int>(kv.integer("sarima_s", 96));
    if (kv.has("risk_low") && kv.has("risk_high"))
        cfg.risk_interval = {kv.num("risk_low", 0.0), kv.num("risk_high", 0.0)};
    cfg.refit_every = static_cast<std::size_t>(kv.integer("refit_every", 0));
    cfg.out_dir = kv.str("out", "");
    cfg.seed = static_cast<std::uint64_t>(kv.integer("seed", 0));
    return cfg;
}

// keys shared by the config file and the flag overrides
const std::vector<std::string> kConfigKeys = {
    "data",        "seed",        "days",       "base_level",  "base_amplitude",
    "base_phase",  "noise_std",   "spike_rate", "trough_rate", "event_scale",
    "amp_jitter",  "smooth_std",  "smooth_rho",
    "slot_seconds", "spike_template", "train_len", "methods",   "xi",
    "spike_pad",   "lag_depth",   "ratio_epsilon", "max_size",  "extreme_keep_fraction",
    "naive_max_size", "fit_subset", "restarts",  "max_iters",   "sarima_p",
    "sarima_d",    "sarima_q",    "sarima_P",   "sarima_D",    "sarima_Q",
    "sarima_s",    "risk_low",    "risk_high",  "refit_every",  "out"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FE-GP traffic forecasting toolkit"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "emit a synthetic traffic CSV");
    std::map<std::string, std::string> synth_kv;
    for (const char* k : {"seed", "days", "base_level", "base_amplitude", "base_phase",
                          "noise_std", "spike_rate", "trough_rate", "event_scale",
                          "amp_jitter", "smooth_std", "smooth_rho", "slot_seconds",
                          "spike_template"})
        synth->add_option_function<std::string>(
            std::string("--") + k, [&synth_kv, k](const std::string& v) { synth_kv[k] = v; });
    std::string synth_out, synth_events;
    synth->add_option("--out", synth_out, "output CSV path")->required();
    synth->add_option("--events", synth_events, "optional CSV of injected events");

    // ---- decompose ----
    auto* dec = app.add_subcommand("decompose", "split a series into baseline + residual");
    std::string dec_in, dec_out;
    long long dec_slot = 900;
    dec->add_option("--in", dec_in, "input CSV")->required();
    dec->add_option("--out", dec_out, "output CSV (timestamp,raw,baseline,residual)")->required();
    dec->add_option("--slot_seconds", dec_slot);

    // ---- train ----
    auto* train = app.add_subcommand("train", "fit a model on a series and save it as JSON");
    std::string train_in, train_out, train_kernel = "fegp", train_relief_out, train_baseline_out;
    long long train_slot = 900, train_max_size = 672, train_restarts = 5, train_seed = 0;
    double train_xi = 0.9, train_keep = 0.5;
    long long train_lag = 5;
    train->add_option("--in", train_in)->required();
    train->add_option("--out", train_out, "model JSON path")->required();
    train->add_option("--kernel", train_kernel, "fegp | naive");
    train->add_option("--slot_seconds", train_slot);
    train->add_option("--xi", train_xi);
    train->add_option("--lag_depth", train_lag);
    train->add_option("--max_size", train_max_size);
    train->add_option("--extreme_keep_fraction", train_keep);
    train->add_option("--restarts", train_restarts);
    train->add_option("--seed", train_seed);
    train->add_option("--relief_out", train_relief_out, "JSON dump of the Relief result");
    train->add_option("--baseline_out", train_baseline_out, "CSV dump of the daily baseline");

    // ---- forecast ----
    auto* fc = app.add_subcommand("forecast", "one-step-ahead forecast record from a saved model");
    std::string fc_model, fc_in, fc_baseline, fc_out;
    long long fc_slot = 900, fc_topk = 0;
    std::vector<double> fc_risk;
    fc->add_option("--model", fc_model)->required();
    fc->add_option("--in", fc_in, "CSV providing the recent history")->required();
    fc->add_option("--baseline", fc_baseline, "baseline CSV from `train --baseline_out`");
    fc->add_option("--slot_seconds", fc_slot);
    fc->add_option("--risk", fc_risk, "low high demand bounds")->expected(2);
    fc->add_option("--top_k", fc_topk, "truncate the component list to the top k");
    fc->add_option("--out", fc_out, "output JSON path (default stdout)");

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "full rolling-evaluation pipeline");
    std::string ev_config;
    ev->add_option("--config", ev_config, "key=value config file");
    std::map<std::string, std::string> ev_kv;
    for (const auto& k : kConfigKeys)
        ev->add_option_function<std::string>(
            "--" + k, [&ev_kv, k](const std::string& v) { ev_kv[k] = v; });

    // ---- report ----
    auto* rep = app.add_subcommand("report", "re-render reports from stored forecast CSVs");
    std::string rep_dir;
    double rep_xi = 0.9;
    long long rep_pad = 2;
    rep->add_option("--dir", rep_dir)->required();
    rep->add_option("--xi", rep_xi);
    rep->add_option("--spike_pad", rep_pad);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const fegp::SyntheticSpec spec = synth_spec_from(KV{synth_kv});
            const fegp::SyntheticResult res = fegp::synthesize_with_log(spec);
            fegp::write_csv(res.series, synth_out);
            if (!synth_events.empty()) {
                std::ofstream out(synth_events);
                out << "onset,amplitude,trough\n";
                for (const auto& e : res.events)
                    out << e.onset << ',' << e.amplitude << ',' << (e.trough ? 1 : 0) << '\n';
            }
        } else if (*dec) {
            const fegp::TrafficSeries s = fegp::ingest_csv(dec_in, dec_slot);
            const fegp::Decomposition d = fegp::decompose(s);
            fegp::write_decomposition_csv(s, d, dec_out);
        } else if (*train) {
            const fegp::TrafficSeries s = fegp::ingest_csv(train_in, train_slot);
            const fegp::Decomposition d = fegp::decompose(s);
            const auto& res = d.residual.values;

            fegp::FeatureConfig fcfg;
            fcfg.lag_depth = static_cast<int>(train_lag);
            auto tags = fegp::tag_categories(res, train_xi);

            fegp::FegpModel model;
            if (train_kernel == "fegp") {
                model.kind = fegp::KernelKind::feature_embedded;
                auto feats = fegp::featurize_series(res, fcfg);
                model.standardizer = fegp::Standardizer::fit(feats);
                // Relief on standardized features, matching the kernel's scale
                for (auto& f : feats) f = model.standardizer.apply(f);
                std::vector<fegp::CategoryTag> aligned;
                for (const auto& f : feats)
                    aligned.push_back(tags[static_cast<std::size_t>(f.time_index) - 1]);
                fegp::ReliefResult rr;
                try {
                    rr = fegp::optimize_weights(feats, aligned, train_xi);
                } catch (const std::invalid_argument&) {
                    rr.weights = fegp::FeatureWeights::uniform(fegp::kFeatureDim);
                    rr.degenerate = true;
                    rr.xi_used = train_xi;
                }
                if (!train_relief_out.empty()) {
                    std::ofstream out(train_relief_out);
                    out << fegp::relief_to_json(rr).dump(2) << '\n';
                }
                model.weights = rr.weights;
                for (const auto& f : feats)
                    model.window.push_back(f.time_index, res[static_cast<std::size_t>(f.time_index)],
                                           f);
            } else if (train_kernel == "naive") {
                model.kind = fegp::KernelKind::naive_time;
                model.weights = fegp::FeatureWeights::uniform(1);
                model.standardizer = fegp::Standardizer::identity(1);
                fegp::FeatureVector dummy;
                dummy.values = Eigen::VectorXd::Zero(0);
                for (std::size_t i = 0; i < res.size(); ++i)
                    model.window.push_back(static_cast<std::int64_t>(i), res[i], dummy);
            } else {
                throw std::runtime_error("train: unknown kernel " + train_kernel);
            }
            fegp::PrunePolicy policy{static_cast<std::size_t>(train_max_size), train_keep};
            if (model.kind == fegp::KernelKind::naive_time) policy.extreme_keep_fraction = 0.0;
            model.window = fegp::prune(model.window, tags, policy);
            fegp::FitOptions fo;
            fo.restarts = static_cast<int>(train_restarts);
            fo.seed = static_cast<std::uint64_t>(train_seed);
            model.hyper = fegp::fit(model.window, model.weights, model.kind, fo);
            fegp::save_model(model, train_out, fcfg);
            if (!train_baseline_out.empty()) {
                std::ofstream out(train_baseline_out);
                out << "slot,baseline\n";
                for (std::size_t j = 0; j < d.baseline.size(); ++j)
                    out << j << ',' << d.baseline[j] << '\n';
            }
        } else if (*fc) {
            fegp::FeatureConfig fcfg;
            const fegp::FegpModel model = fegp::load_model(fc_model, &fcfg);
            const fegp::TrafficSeries s = fegp::ingest_csv(fc_in, fc_slot);

            std::vector<double> baseline;
            if (!fc_baseline.empty()) {
                std::ifstream in(fc_baseline);
                if (!in) throw std::runtime_error("cannot open baseline " + fc_baseline);
                std::string line;
                std::getline(in, line);
                while (std::getline(in, line)) {
                    const auto comma = line.find(',');
                    if (comma != std::string::npos) baseline.push_back(std::stod(line.substr(comma + 1)));
                }
            }
            std::vector<double> res = s.values;
            if (!baseline.empty())
                for (std::size_t i = 0; i < res.size(); ++i) res[i] -= baseline[i % baseline.size()];
            const double b_next = baseline.empty() ? 0.0 : baseline[res.size() % baseline.size()];

            fegp::MixturePosterior post;
            if (model.kind == fegp::KernelKind::feature_embedded) {
                post = fegp::predict_fegp(model, res, fcfg).shifted(b_next);
            } else {
                const fegp::GaussianPosterior g =
                    fegp::predict_naive(model, static_cast<std::int64_t>(res.size()));
                post.components.push_back({g.mu + b_next, g.var, -1});
            }
            const double map = fegp::map_point(post);
            std::vector<fegp::RiskReport> risks;
            if (fc_risk.size() == 2) risks.push_back(fegp::risk(post, fc_risk[0], fc_risk[1]));
            const auto rec = fegp::forecast_record_json(static_cast<std::int64_t>(s.size()), post,
                                                        map, risks, static_cast<int>(fc_topk));
            if (fc_out.empty())
                std::cout << rec.dump(2) << '\n';
            else {
                std::ofstream out(fc_out);
                out << rec.dump(2) << '\n';
            }
        } else if (*ev) {
            std::map<std::string, std::string> kv;
            if (!ev_config.empty()) kv = read_config(ev_config);
            for (const auto& [k, v] : kv)
                if (std::find(kConfigKeys.begin(), kConfigKeys.end(), k) == kConfigKeys.end())
                    throw std::runtime_error("unknown config key: " + k);
            for (const auto& [k, v] : ev_kv) kv[k] = v;  // flags override the file
            const fegp::RunConfig cfg = run_config_from(KV{kv});
            const auto reports = fegp::run(cfg);
            for (const auto& r : reports)
                std::printf("%-9s total_ace=%.4f spike_ace=%.4f average_ace=%.4f audit=%s\n",
                            r.method.c_str(), r.ace_total, r.spike_ace, r.average_ace,
                            r.audit_ok ? "ok" : "VIOLATION");
        } else if (*rep) {
            const auto reports =
                fegp::rerender_reports(rep_dir, rep_xi, static_cast<int>(rep_pad));
            for (const auto& r : reports)
                std::printf("%-9s total_ace=%.4f spike_ace=%.4f average_ace=%.4f\n",
                            r.method.c_str(), r.ace_total, r.spike_ace, r.average_ace);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
