#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fegp {

enum class Direction { downlink, uplink };

/// Uniformly sampled traffic volumes at a fixed slot width.
struct TrafficSeries {
    std::int64_t start_epoch = 0;   // seconds since Unix epoch
    std::int64_t slot_seconds = 900;
    std::vector<double> values;
    Direction direction = Direction::downlink;

    std::size_t size() const { return values.size(); }
    std::int64_t timestamp_at(std::size_t i) const {
        return start_epoch + static_cast<std::int64_t>(i) * slot_seconds;
    }
    std::size_t slots_per_day() const {
        return static_cast<std::size_t>(86400 / slot_seconds);
    }
};

/// Daily-periodic baseline plus aperiodic residual.
struct Decomposition {
    std::vector<double> baseline;  // length = slots per day
    TrafficSeries residual;        // same length as the input
};

struct SpikeEvent {
    std::size_t onset = 0;  // slot index of the first template sample
    double amplitude = 0.0;
    bool trough = false;
};

/// Deterministic generator spec for desk-scale experiments.
struct SyntheticSpec {
    std::uint64_t seed = 0;
    int days = 14;
    double base_level = 100.0;      // diurnal profile offset
    double base_amplitude = 40.0;   // diurnal swing
    double base_phase = 0.0;        // radians
    double noise_std = 0.0;
    double smooth_std = 0.0;  // marginal std of a slowly-varying aperiodic demand component
    double smooth_rho = 0.97;  // its AR(1) coefficient
    double spike_rate = 0.0;        // expected spikes per day
    double trough_rate = 0.0;       // expected troughs per day
    double event_scale = 60.0;      // mean event amplitude
    double amp_jitter = 0.3;        // event amplitude ~ U(1-j, 1+j) * event_scale
    std::vector<double> spike_template = {0.35, 1.0, 0.85, 0.55, 0.3, 0.12};
    std::int64_t slot_seconds = 900;
    std::int64_t start_epoch = 1704067200;  // 2024-01-01T00:00:00Z

    void validate() const {
        if (days <= 0) throw std::invalid_argument("SyntheticSpec: days must be positive");
        if (noise_std < 0) throw std::invalid_argument("SyntheticSpec: noise_std must be >= 0");
        if (spike_rate < 0 || trough_rate < 0)
            throw std::invalid_argument("SyntheticSpec: event rates must be >= 0");
        if (smooth_std < 0 || smooth_rho <= -1 || smooth_rho >= 1)
            throw std::invalid_argument("SyntheticSpec: smooth component is std >= 0, |rho| < 1");
        if (amp_jitter < 0 || amp_jitter >= 1)
            throw std::invalid_argument("SyntheticSpec: amp_jitter must be in [0, 1)");
        if (spike_template.empty())
            throw std::invalid_argument("SyntheticSpec: spike_template must be nonempty");
        if (slot_seconds <= 0 || 86400 % slot_seconds != 0)
            throw std::invalid_argument("SyntheticSpec: slot_seconds must divide a day");
    }
};

// ---------------------------------------------------------------------------
// calendar helpers (proleptic Gregorian, UTC)

namespace detail {

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline bool looks_numeric(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    bool dot = false;
    for (; i < s.size(); ++i) {
        if (s[i] == '.' && !dot) { dot = true; continue; }
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

}  // namespace detail

/// Parse an RFC-3339 timestamp ("2024-01-01T00:15:00Z" or with a numeric
/// offset) into epoch seconds. Throws on malformed input.
inline std::int64_t parse_rfc3339(const std::string& s) {
    int y, mo, d, h, mi;
    double sec;
    char tsep;
    int n = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf%n", &y, &mo, &d, &tsep, &h, &mi, &sec, &n) < 7 ||
        (tsep != 'T' && tsep != 't' && tsep != ' '))
        throw std::invalid_argument("bad RFC-3339 timestamp: " + s);
    std::int64_t off = 0;
    std::string rest = s.substr(static_cast<std::size_t>(n));
    if (!rest.empty() && rest != "Z" && rest != "z") {
        int oh, om;
        char sign;
        if (std::sscanf(rest.c_str(), "%c%d:%d", &sign, &oh, &om) != 3 || (sign != '+' && sign != '-'))
            throw std::invalid_argument("bad RFC-3339 offset: " + s);
        off = (sign == '-' ? -1 : 1) * (oh * 3600 + om * 60);
    }
    return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 +
           static_cast<std::int64_t>(sec) - off;
}

inline std::string format_rfc3339(std::int64_t epoch) {
    std::int64_t days = epoch / 86400;
    std::int64_t rem = epoch % 86400;
    if (rem < 0) { rem += 86400; --days; }
    int y, m, d;
    detail::civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                  static_cast<int>(rem % 60));
    return buf;
}

// ---------------------------------------------------------------------------
// ingestion

/// Read a `timestamp,value` CSV into a contiguous series. Timestamps may be
/// RFC-3339 or epoch seconds (detected once per file). Gaps and negative
/// values are rejected, with the offending row reported.
inline TrafficSeries ingest_csv(const std::string& path, std::int64_t slot_seconds = 900) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);

    TrafficSeries out;
    out.slot_seconds = slot_seconds;

    std::string line;
    std::size_t row = 0;
    bool have_header = false;
    bool epoch_mode = false, mode_known = false;
    std::int64_t prev_ts = 0;

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            have_header = true;
            if (line.rfind("timestamp", 0) == 0) continue;  // header row optional
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("ingest_csv: row " + std::to_string(row) + ": no comma");
        const std::string ts_str = line.substr(0, comma);
        const std::string val_str = line.substr(comma + 1);

        if (!mode_known) {
            epoch_mode = detail::looks_numeric(ts_str);
            mode_known = true;
        }
        std::int64_t ts;
        try {
            ts = epoch_mode ? static_cast<std::int64_t>(std::stoll(ts_str)) : parse_rfc3339(ts_str);
        } catch (const std::exception& e) {
            throw std::runtime_error("ingest_csv: row " + std::to_string(row) + ": " + e.what());
        }
        double v;
        try {
            std::size_t pos = 0;
            v = std::stod(val_str, &pos);
            if (pos != val_str.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw std::runtime_error("ingest_csv: row " + std::to_string(row) +
                                     ": bad value '" + val_str + "'");
        }
        if (!std::isfinite(v))
            throw std::runtime_error("ingest_csv: row " + std::to_string(row) + ": non-finite value");
        if (v < 0)
            throw std::runtime_error("ingest_csv: row " + std::to_string(row) + ": negative value");

        if (out.values.empty()) {
            out.start_epoch = ts;
        } else {
            const std::int64_t delta = ts - prev_ts;
            if (delta <= 0)
                throw std::runtime_error("ingest_csv: row " + std::to_string(row) +
                                         ": timestamps not strictly increasing");
            if (delta != slot_seconds)
                throw std::runtime_error("ingest_csv: gap before row " + std::to_string(row) +
                                         ": missing slot at " + format_rfc3339(prev_ts + slot_seconds));
        }
        prev_ts = ts;
        out.values.push_back(v);
    }
    if (out.values.empty()) throw std::runtime_error("ingest_csv: no data rows in " + path);
    return out;
}

inline void write_csv(const TrafficSeries& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "timestamp,value\n";
    char buf[64];
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g", s.values[i]);
        out << format_rfc3339(s.timestamp_at(i)) << ',' << buf << '\n';
    }
}

// ---------------------------------------------------------------------------
// decomposition

/// Per-slot-of-day mean over complete days; residual is the remainder.
/// An incomplete trailing day contributes to the residual but not the baseline.
inline Decomposition decompose(const TrafficSeries& s) {
    const std::size_t S = s.slots_per_day();
    if (s.size() < S)
        throw std::invalid_argument("decompose: series shorter than one day");

    const std::size_t full_days = s.size() / S;
    Decomposition d;
    d.baseline.assign(S, 0.0);
    for (std::size_t day = 0; day < full_days; ++day)
        for (std::size_t j = 0; j < S; ++j) d.baseline[j] += s.values[day * S + j];
    for (double& b : d.baseline) b /= static_cast<double>(full_days);

    d.residual = s;
    for (std::size_t i = 0; i < s.size(); ++i) d.residual.values[i] = s.values[i] - d.baseline[i % S];
    return d;
}

/// Residual of a series against an externally fixed baseline profile.
inline TrafficSeries residual_with_baseline(const TrafficSeries& s, const std::vector<double>& baseline) {
    if (baseline.size() != s.slots_per_day())
        throw std::invalid_argument("residual_with_baseline: baseline length != slots per day");
    TrafficSeries r = s;
    for (std::size_t i = 0; i < s.size(); ++i) r.values[i] = s.values[i] - baseline[i % baseline.size()];
    return r;
}

inline void write_decomposition_csv(const TrafficSeries& raw, const Decomposition& d,
                                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_decomposition_csv: cannot open " + path);
    out << "timestamp,raw,baseline,residual\n";
    const std::size_t S = d.baseline.size();
    char buf[192];
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g", raw.values[i], d.baseline[i % S],
                      d.residual.values[i]);
        out << format_rfc3339(raw.timestamp_at(i)) << ',' << buf << '\n';
    }
}

// ---------------------------------------------------------------------------
// synthesis

struct SyntheticResult {
    TrafficSeries series;
    std::vector<SpikeEvent> events;
};

/// Diurnal profile + Gaussian noise + Poisson-placed spike/trough events.
/// Pure function of the spec; values clamped at zero.
inline SyntheticResult synthesize_with_log(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t S = static_cast<std::size_t>(86400 / spec.slot_seconds);
    const std::size_t n = S * static_cast<std::size_t>(spec.days);

    SyntheticResult out;
    out.series.start_epoch = spec.start_epoch;
    out.series.slot_seconds = spec.slot_seconds;
    out.series.values.resize(n);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::poisson_distribution<int> spike_count(spec.spike_rate > 0 ? spec.spike_rate : 1e-12);
    std::poisson_distribution<int> trough_count(spec.trough_rate > 0 ? spec.trough_rate : 1e-12);
    std::uniform_int_distribution<std::size_t> slot_pick(0, S - 1);
    std::uniform_real_distribution<double> amp_jitter(1.0 - spec.amp_jitter,
                                                      1.0 + spec.amp_jitter);

    for (std::size_t i = 0; i < n; ++i) {
        const double phase = 2.0 * M_PI * static_cast<double>(i % S) / static_cast<double>(S);
        double v = spec.base_level + spec.base_amplitude * std::sin(phase - spec.base_phase);
        if (spec.noise_std > 0) v += spec.noise_std * noise(rng);
        out.series.values[i] = v;
    }

    // slowly-varying aperiodic demand (stationary AR(1), marginal std smooth_std)
    if (spec.smooth_std > 0) {
        const double innov = spec.smooth_std * std::sqrt(1.0 - spec.smooth_rho * spec.smooth_rho);
        double r = spec.smooth_std * noise(rng);
        for (std::size_t i = 0; i < n; ++i) {
            out.series.values[i] += r;
            r = spec.smooth_rho * r + innov * noise(rng);
        }
    }

    auto place = [&](bool trough, int count, std::size_t day) {
        for (int e = 0; e < count; ++e) {
            SpikeEvent ev;
            ev.onset = day * S + slot_pick(rng);
            ev.amplitude = spec.event_scale * amp_jitter(rng);
            ev.trough = trough;
            out.events.push_back(ev);
            const double sign = trough ? -1.0 : 1.0;
            for (std::size_t k = 0; k < spec.spike_template.size(); ++k) {
                const std::size_t idx = ev.onset + k;
                if (idx >= n) break;
                out.series.values[idx] += sign * ev.amplitude * spec.spike_template[k];
            }
        }
    };
    for (std::size_t day = 0; day < static_cast<std::size_t>(spec.days); ++day) {
        place(false, spec.spike_rate > 0 ? spike_count(rng) : 0, day);
        place(true, spec.trough_rate > 0 ? trough_count(rng) : 0, day);
    }

    for (double& v : out.series.values) v = std::max(0.0, v);
    std::sort(out.events.begin(), out.events.end(),
              [](const SpikeEvent& a, const SpikeEvent& b) { return a.onset < b.onset; });
    return out;
}

inline TrafficSeries synthesize(const SyntheticSpec& spec) {
    return synthesize_with_log(spec).series;
}

}  // namespace fegp
