#pragma once

// Time series: a finite list of (time, value) samples with strictly increasing
// times, interpreted as a left-continuous step signal (each sample's value
// holds until the next sample time).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "logidist/common.hpp"

namespace logidist {

struct Sample {
    double time = 0.0;
    double value = 0.0;
    bool operator==(const Sample&) const = default;
};

struct Trace {
    std::string id;
    std::vector<Sample> samples;
    bool operator==(const Trace&) const = default;
};

/// Affine unit change applied uniformly to a trace: time' = time_scale * time,
/// value' = value_scale * value. Scales must be positive.
struct Rescaling {
    double time_scale = 1.0;
    double value_scale = 1.0;
};

inline void validate_trace(const Trace& t) {
    if (t.samples.empty()) throw input_error("trace '" + t.id + "': no samples");
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        const Sample& s = t.samples[i];
        if (!std::isfinite(s.time) || !std::isfinite(s.value))
            throw input_error("trace '" + t.id + "': non-finite sample at index " +
                              std::to_string(i));
        if (i > 0 && !(t.samples[i - 1].time < s.time))
            throw input_error("trace '" + t.id + "': sample times not strictly increasing at index " +
                              std::to_string(i));
    }
}

/// Step-function lookup: value of the last sample at or before `time`.
/// `time` must lie within [first sample time, last sample time].
inline double value_at(const Trace& t, double time) {
    if (t.samples.empty()) throw input_error("value_at: trace '" + t.id + "' has no samples");
    if (time < t.samples.front().time || time > t.samples.back().time)
        throw input_error("value_at: time " + format_double(time) + " outside sampled span of trace '" +
                          t.id + "'");
    auto it = std::upper_bound(t.samples.begin(), t.samples.end(), time,
                               [](double lhs, const Sample& s) { return lhs < s.time; });
    return std::prev(it)->value;
}

/// Total variant: times before the first sample read the first value, times
/// after the last read the last value.
inline double value_at_clamped(const Trace& t, double time) {
    if (t.samples.empty()) throw input_error("value_at: trace '" + t.id + "' has no samples");
    if (time <= t.samples.front().time) return t.samples.front().value;
    if (time >= t.samples.back().time) return t.samples.back().value;
    return value_at(t, time);
}

inline Trace rescale(const Trace& t, const Rescaling& r) {
    if (!(r.time_scale > 0.0) || !(r.value_scale > 0.0))
        throw input_error("rescale: scales must be positive");
    Trace out;
    out.id = t.id;
    out.samples.reserve(t.samples.size());
    for (const Sample& s : t.samples)
        out.samples.push_back({s.time * r.time_scale, s.value * r.value_scale});
    return out;
}

// ---------------------------------------------------------------------------
// CSV round trip. Format: header line `time,value`, one `t,v` row per sample,
// `#`-prefixed comment lines skipped, LF or CRLF endings.
// ---------------------------------------------------------------------------

inline Trace parse_trace_csv(std::string_view content, const std::string& id) {
    Trace t;
    t.id = id;
    bool saw_header = false;
    std::size_t lineno = 0;
    for (const std::string& raw : split(content, '\n')) {
        ++lineno;
        std::string_view line = strip_cr(raw);
        if (line.empty()) continue;
        if (line.front() == '#') continue;
        if (!saw_header) {
            if (line != "time,value")
                throw input_error("trace '" + id + "' line " + std::to_string(lineno) +
                                  ": expected header 'time,value', got '" + std::string(line) + "'");
            saw_header = true;
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != 2)
            throw input_error("trace '" + id + "' line " + std::to_string(lineno) +
                              ": expected 2 fields, got " + std::to_string(cells.size()));
        Sample s;
        if (!parse_double(cells[0], s.time))
            throw input_error("trace '" + id + "' line " + std::to_string(lineno) +
                              ": bad time '" + cells[0] + "'");
        if (!parse_double(cells[1], s.value))
            throw input_error("trace '" + id + "' line " + std::to_string(lineno) +
                              ": bad value '" + cells[1] + "'");
        t.samples.push_back(s);
    }
    if (!saw_header) throw input_error("trace '" + id + "': missing 'time,value' header");
    validate_trace(t);
    return t;
}

inline Trace load_trace_csv(const std::filesystem::path& path) {
    std::string id = path.stem().string();
    return parse_trace_csv(read_file(path), id);
}

inline std::string trace_to_csv(const Trace& t) {
    std::string out = "time,value\n";
    for (const Sample& s : t.samples) {
        out += format_double(s.time);
        out += ',';
        out += format_double(s.value);
        out += '\n';
    }
    return out;
}

inline void save_trace_csv(const Trace& t, const std::filesystem::path& path) {
    write_file_atomic(path, trace_to_csv(t));
}

// ---------------------------------------------------------------------------
// Noise augmentation: multiplicative per-sample Gaussian factors.
// ---------------------------------------------------------------------------

/// Produces `count` noisy variants per input trace; sample values are
/// multiplied by independent N(mean, stddev^2) draws. Fully determined by
/// `seed` (single generator, traces processed in order).
inline std::vector<Trace> augment_noise(const std::vector<Trace>& traces, std::size_t count,
                                        double mean, double stddev, std::uint64_t seed) {
    if (!(stddev >= 0.0)) throw input_error("augment_noise: negative stddev");
    rng_t rng(seed);
    std::normal_distribution<double> factor(mean, stddev);
    std::vector<Trace> out;
    out.reserve(traces.size() * count);
    for (const Trace& base : traces) {
        for (std::size_t k = 0; k < count; ++k) {
            Trace v;
            v.id = base.id + "_n" + std::to_string(k);
            v.samples.reserve(base.samples.size());
            for (const Sample& s : base.samples) v.samples.push_back({s.time, s.value * factor(rng)});
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace logidist
