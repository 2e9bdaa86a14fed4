#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace bilstm_ae {

/// Multivariate series: one row per timestamp.
struct TimeSeriesFrame {
    std::vector<std::string> timestamps;
    std::vector<std::string> feature_names;
    Matrix features; // rows x feature count
    Vector response; // y
    std::vector<std::uint8_t> labels; // 1 = anomaly
    std::vector<std::size_t> row_index; // 0-based data-row index in the originating frame

    std::size_t rows() const noexcept { return labels.size(); }
    std::size_t feature_count() const noexcept { return features.cols(); }

    std::size_t anomaly_count() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    }

    /// Sub-frame of the given rows, in the given order. Row provenance is preserved.
    TimeSeriesFrame select(std::span<const std::size_t> rows) const {
        TimeSeriesFrame out;
        out.feature_names = feature_names;
        out.features = Matrix(rows.size(), feature_count());
        out.response.reserve(rows.size());
        out.labels.reserve(rows.size());
        out.timestamps.reserve(rows.size());
        out.row_index.reserve(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const std::size_t r = rows[k];
            auto src = features.row(r);
            std::copy(src.begin(), src.end(), out.features.row(k).begin());
            out.timestamps.push_back(timestamps[r]);
            out.response.push_back(response[r]);
            out.labels.push_back(labels[r]);
            out.row_index.push_back(row_index[r]);
        }
        return out;
    }

    TimeSeriesFrame slice(std::size_t begin, std::size_t end) const {
        std::vector<std::size_t> idx(end - begin);
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = begin + k;
        return select(idx);
    }

    friend bool operator==(const TimeSeriesFrame&, const TimeSeriesFrame&) = default;
};

struct FeatureRange {
    std::string column;
    double lo;
    double hi;
    bool hi_inclusive;
};

/// Column layout expected by load_csv. Defaults to `timestamp,V,Vs,D,T,y,label`.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::vector<std::string> features{"V", "Vs", "D", "T"};
    std::string response = "y";
    std::string label = "label";
    std::vector<FeatureRange> ranges{{"D", 0.0, 360.0, false}};
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline bool timestamp_less(const std::string& a, const std::string& b) {
    const auto na = parse_double(a);
    const auto nb = parse_double(b);
    if (na && nb) return *na < *nb;
    return a < b; // ISO-8601 strings of a fixed layout order lexicographically
}

} // namespace detail

inline void validate_frame(const TimeSeriesFrame& f, const CsvSchema& schema = {}) {
    const std::size_t n = f.rows();
    if (f.features.rows() != n || f.response.size() != n || f.timestamps.size() != n || f.row_index.size() != n) {
        throw ShapeError("TimeSeriesFrame: column lengths disagree");
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (r > 0 && !detail::timestamp_less(f.timestamps[r - 1], f.timestamps[r])) {
            throw IngestionError(r + 1, "timestamps are not strictly increasing ('" + f.timestamps[r - 1] +
                                            "' then '" + f.timestamps[r] + "')");
        }
        if (f.labels[r] > 1) throw IngestionError(r + 1, "label must be 0 or 1");
        if (!(f.response[r] >= 0.0 && f.response[r] <= 1.0)) throw IngestionError(r + 1, "y outside [0, 1]");
        for (const FeatureRange& range : schema.ranges) {
            auto it = std::find(f.feature_names.begin(), f.feature_names.end(), range.column);
            if (it == f.feature_names.end()) continue;
            const double v = f.features(r, static_cast<std::size_t>(it - f.feature_names.begin()));
            const bool ok = v >= range.lo && (range.hi_inclusive ? v <= range.hi : v < range.hi);
            if (!ok) {
                throw IngestionError(r + 1, range.column + " = " + detail::format_double(v) + " outside [" +
                                                detail::format_double(range.lo) + ", " +
                                                detail::format_double(range.hi) + (range.hi_inclusive ? "]" : ")"));
            }
        }
    }
}

/// Reads a comma-separated file with a header row. Rows are numbered from 1 (first data row) in errors.
inline TimeSeriesFrame load_csv(std::istream& in, const CsvSchema& schema = {}) {
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(0, "empty input: header row required");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // UTF-8 BOM
    const auto header = detail::split_commas(line);
    auto column_of = [&](const std::string& name) {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (detail::trim(header[k]) == name) return k;
        throw IngestionError(0, "missing column '" + name + "'");
    };
    const std::size_t ts_col = column_of(schema.timestamp);
    std::vector<std::size_t> feat_cols;
    for (const auto& name : schema.features) feat_cols.push_back(column_of(name));
    const std::size_t y_col = column_of(schema.response);
    const std::size_t label_col = column_of(schema.label);

    TimeSeriesFrame f;
    f.feature_names = schema.features;
    std::vector<double> feature_data;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_commas(line);
        if (cells.size() != header.size()) {
            throw IngestionError(row, "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(cells.size()));
        }
        auto number = [&](std::size_t col, const std::string& name) {
            const auto v = detail::parse_double(cells[col]);
            if (!v) throw IngestionError(row, "cannot parse " + name + " value '" + std::string(cells[col]) + "'");
            return *v;
        };
        const std::string_view ts = detail::trim(cells[ts_col]);
        if (ts.empty()) throw IngestionError(row, "missing timestamp");
        f.timestamps.emplace_back(ts);
        for (std::size_t k = 0; k < feat_cols.size(); ++k) feature_data.push_back(number(feat_cols[k], schema.features[k]));
        f.response.push_back(number(y_col, schema.response));
        const std::string_view lab = detail::trim(cells[label_col]);
        if (lab != "0" && lab != "1") throw IngestionError(row, "label must be 0 or 1, got '" + std::string(lab) + "'");
        f.labels.push_back(lab == "1" ? 1 : 0);
        f.row_index.push_back(row - 1);
    }
    f.features = Matrix(row, schema.features.size(), std::move(feature_data));
    validate_frame(f, schema);
    return f;
}

inline TimeSeriesFrame load_csv(const std::filesystem::path& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw IngestionError(0, "cannot open " + path.string());
    return load_csv(in, schema);
}

/// Writes `timestamp,<features...>,y,label` with round-trip-exact numbers.
inline void write_csv(const TimeSeriesFrame& f, std::ostream& out) {
    out << "timestamp";
    for (const auto& n : f.feature_names) out << ',' << n;
    out << ",y,label\n";
    for (std::size_t r = 0; r < f.rows(); ++r) {
        out << f.timestamps[r];
        for (double v : f.features.row(r)) out << ',' << detail::format_double(v);
        out << ',' << detail::format_double(f.response[r]) << ',' << int(f.labels[r]) << '\n';
    }
}

inline void write_csv(const TimeSeriesFrame& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_csv(f, out);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Scaling

enum class ScalerMode { min_max, z_score };

/// Per-feature affine scaling. `offset`/`spread` are min/(max-min) or mean/std depending on mode.
struct ScalerParams {
    ScalerMode mode = ScalerMode::min_max;
    Vector offset;
    Vector spread; // 0 marks a constant feature

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline ScalerParams fit_scaler(const TimeSeriesFrame& rows, ScalerMode mode = ScalerMode::min_max) {
    if (rows.rows() == 0) throw ArgumentError("fit_scaler: no rows to fit");
    const std::size_t nf = rows.feature_count();
    ScalerParams p;
    p.mode = mode;
    p.offset.assign(nf, 0.0);
    p.spread.assign(nf, 0.0);
    const double n = static_cast<double>(rows.rows());
    for (std::size_t j = 0; j < nf; ++j) {
        if (mode == ScalerMode::min_max) {
            double lo = rows.features(0, j), hi = lo;
            for (std::size_t r = 1; r < rows.rows(); ++r) {
                lo = std::min(lo, rows.features(r, j));
                hi = std::max(hi, rows.features(r, j));
            }
            p.offset[j] = lo;
            p.spread[j] = hi - lo;
        } else {
            double mean = 0.0;
            for (std::size_t r = 0; r < rows.rows(); ++r) mean += rows.features(r, j);
            mean /= n;
            double var = 0.0;
            for (std::size_t r = 0; r < rows.rows(); ++r) {
                const double d = rows.features(r, j) - mean;
                var += d * d;
            }
            p.offset[j] = mean;
            p.spread[j] = std::sqrt(var / n);
        }
    }
    return p;
}

/// Constant features (spread 0) map to 0.0. Values outside the fit range are kept, not clipped.
inline TimeSeriesFrame apply_scaler(const TimeSeriesFrame& f, const ScalerParams& p) {
    if (p.offset.size() != f.feature_count() || p.spread.size() != f.feature_count()) {
        throw ShapeError("apply_scaler: scaler fitted for a different feature count");
    }
    TimeSeriesFrame out = f;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.features.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = p.spread[j] > 0.0 ? (row[j] - p.offset[j]) / p.spread[j] : 0.0;
        }
    }
    return out;
}

inline TimeSeriesFrame inverse_scaler(const TimeSeriesFrame& f, const ScalerParams& p) {
    if (p.offset.size() != f.feature_count()) throw ShapeError("inverse_scaler: feature count mismatch");
    TimeSeriesFrame out = f;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.features.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = row[j] * p.spread[j] + p.offset[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Windowing

/// samples x lookback x features block plus per-window metadata.
struct WindowBatch {
    std::size_t lookback = 0;
    std::size_t features = 0;
    std::vector<Matrix> data; // each lookback x features
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> window_end_indices;

    std::size_t samples() const noexcept { return data.size(); }

    WindowBatch subset(std::size_t begin, std::size_t end) const {
        WindowBatch out;
        out.lookback = lookback;
        out.features = features;
        out.data.assign(data.begin() + static_cast<std::ptrdiff_t>(begin), data.begin() + static_cast<std::ptrdiff_t>(end));
        out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
        out.window_end_indices.assign(window_end_indices.begin() + static_cast<std::ptrdiff_t>(begin),
                                      window_end_indices.begin() + static_cast<std::ptrdiff_t>(end));
        return out;
    }

    friend bool operator==(const WindowBatch&, const WindowBatch&) = default;
};

/// Stride-1 sliding windows; each window takes the label of its last row.
inline WindowBatch make_windows(const TimeSeriesFrame& f, std::size_t lookback) {
    if (lookback == 0) throw ArgumentError("make_windows: lookback must be >= 1");
    if (f.rows() < lookback) {
        throw ArgumentError("make_windows: " + std::to_string(f.rows()) + " rows cannot fill a lookback of " +
                            std::to_string(lookback));
    }
    WindowBatch b;
    b.lookback = lookback;
    b.features = f.feature_count();
    const std::size_t count = f.rows() - lookback + 1;
    b.data.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Matrix w(lookback, b.features);
        for (std::size_t t = 0; t < lookback; ++t) {
            auto src = f.features.row(i + t);
            std::copy(src.begin(), src.end(), w.row(t).begin());
        }
        b.data.push_back(std::move(w));
        const std::size_t last = i + lookback - 1;
        b.labels.push_back(f.labels[last]);
        b.window_end_indices.push_back(f.row_index[last]);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Chronological split

struct SplitCounts {
    std::size_t total_rows = 0;
    std::size_t split_row = 0; // first test row
    std::size_t train_rows = 0;
    std::size_t train_anomalies_removed = 0;
    std::size_t train_rows_kept = 0;
    std::size_t test_rows = 0;
    std::size_t test_anomalies = 0;
};

struct SplitResult {
    TimeSeriesFrame train; // anomaly-free rows of the leading portion
    TimeSeriesFrame test;  // trailing portion, both classes
    SplitCounts counts;
};

/// Splits at floor(rows * train_ratio); drops anomalous rows from the training portion only.
inline SplitResult split_and_filter(const TimeSeriesFrame& f, double train_ratio, std::size_t lookback) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ArgumentError("split_and_filter: train_ratio must be in (0, 1)");
    SplitResult s;
    s.counts.total_rows = f.rows();
    s.counts.split_row = static_cast<std::size_t>(std::floor(static_cast<double>(f.rows()) * train_ratio));
    s.counts.train_rows = s.counts.split_row;
    s.counts.test_rows = f.rows() - s.counts.split_row;

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < s.counts.split_row; ++r)
        if (f.labels[r] == 0) keep.push_back(r);
    s.counts.train_rows_kept = keep.size();
    s.counts.train_anomalies_removed = s.counts.train_rows - keep.size();
    s.train = f.select(keep);
    s.test = f.slice(s.counts.split_row, f.rows());
    s.counts.test_anomalies = s.test.anomaly_count();

    if (s.train.rows() < lookback || s.test.rows() < lookback) {
        throw ArgumentError("split_and_filter: split leaves " + std::to_string(s.train.rows()) + " training and " +
                            std::to_string(s.test.rows()) + " test rows; lookback " + std::to_string(lookback) +
                            " needs at least that many on each side");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic series

enum class AnomalyKind { spike, level_shift, noise_burst };

inline std::string to_string(AnomalyKind k) {
    switch (k) {
    case AnomalyKind::spike: return "spike";
    case AnomalyKind::level_shift: return "level_shift";
    case AnomalyKind::noise_burst: return "noise_burst";
    }
    return "?";
}

inline AnomalyKind parse_anomaly_kind(std::string_view s) {
    if (s == "spike") return AnomalyKind::spike;
    if (s == "level_shift") return AnomalyKind::level_shift;
    if (s == "noise_burst") return AnomalyKind::noise_burst;
    throw ArgumentError("unknown anomaly kind '" + std::string(s) + "'");
}

/**
 * Synthetic wind-farm-like series. Features follow the wind data layout
 * (V, Vs, D, T) as sums of daily and slower sinusoids plus Gaussian noise;
 * y is a saturating cubic power curve of V.
 *
 * Anomalies are injected as contiguous events of `event_length` rows. Events
 * are spread over [anomaly_region_start * rows, rows) by stratification: the
 * region is cut into one stratum per event and each event is placed uniformly
 * inside its stratum. Every row of an event is distorted on
 * `features_per_event` randomly chosen features:
 *   spike        each row displaced by +-U[min_sigma, max_sigma] noise sigmas
 *   level_shift  one constant displacement of that size over the event
 *   noise_burst  extra Gaussian noise with sd = max_sigma noise sigmas
 */
struct SyntheticConfig {
    std::size_t rows = 5000;
    double anomaly_fraction = 0.02;
    std::vector<AnomalyKind> kinds{AnomalyKind::spike, AnomalyKind::level_shift};
    std::size_t event_length = 10;
    double anomaly_region_start = 0.0;
    std::size_t features_per_event = 4;
    double min_sigma = 6.0;
    double max_sigma = 10.0;
    double noise_scale = 1.0; // multiplies every feature's base noise sd
};

struct SyntheticNoise {
    static constexpr double V = 0.25;
    static constexpr double Vs = 0.04;
    static constexpr double D = 4.0;
    static constexpr double T = 0.3;
};

inline TimeSeriesFrame generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (!(cfg.anomaly_fraction >= 0.0 && cfg.anomaly_fraction <= 0.3)) {
        throw ArgumentError("generate_synthetic: anomaly_fraction must be in [0, 0.3]");
    }
    if (cfg.rows == 0) throw ArgumentError("generate_synthetic: rows must be >= 1");
    if (cfg.kinds.empty()) throw ArgumentError("generate_synthetic: at least one anomaly kind is required");
    if (cfg.event_length == 0) throw ArgumentError("generate_synthetic: event_length must be >= 1");
    if (!(cfg.anomaly_region_start >= 0.0 && cfg.anomaly_region_start < 1.0)) {
        throw ArgumentError("generate_synthetic: anomaly_region_start must be in [0, 1)");
    }
    if (cfg.features_per_event == 0 || cfg.features_per_event > 4) {
        throw ArgumentError("generate_synthetic: features_per_event must be in [1, 4]");
    }
    if (!(cfg.min_sigma >= 6.0 && cfg.max_sigma >= cfg.min_sigma)) {
        throw ArgumentError("generate_synthetic: need 6 <= min_sigma <= max_sigma");
    }

    Rng rng(seed);
    const std::size_t n = cfg.rows;
    const double two_pi = 2.0 * std::numbers::pi;
    const double sd[4] = {SyntheticNoise::V * cfg.noise_scale, SyntheticNoise::Vs * cfg.noise_scale,
                          SyntheticNoise::D * cfg.noise_scale, SyntheticNoise::T * cfg.noise_scale};
    const double phase_v = rng.uniform(0.0, two_pi);
    const double phase_d = rng.uniform(0.0, two_pi);
    const double phase_t = rng.uniform(0.0, two_pi);

    TimeSeriesFrame f;
    f.feature_names = {"V", "Vs", "D", "T"};
    f.features = Matrix(n, 4);
    f.response.resize(n);
    f.labels.assign(n, 0);
    f.row_index.resize(n);
    f.timestamps.resize(n);
    Vector clean_v(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double t = static_cast<double>(r);
        const double v = 7.5 + 2.5 * std::sin(two_pi * t / 144.0 + phase_v) + 1.5 * std::sin(two_pi * t / 1000.0 + 0.7);
        clean_v[r] = v;
        f.features(r, 0) = std::max(0.0, v + rng.normal(0.0, sd[0]));
        f.features(r, 1) = std::max(0.0, 0.6 + 0.08 * v + 0.15 * std::sin(two_pi * t / 72.0 + 1.3) + rng.normal(0.0, sd[1]));
        f.features(r, 2) = 200.0 + 40.0 * std::sin(two_pi * t / 600.0 + phase_d) + 15.0 * std::sin(two_pi * t / 144.0 + 2.0) +
                           rng.normal(0.0, sd[2]);
        f.features(r, 3) = 12.0 + 5.0 * std::sin(two_pi * t / 144.0 + phase_t) + 2.0 * std::sin(two_pi * t / 2000.0) +
                           rng.normal(0.0, sd[3]);
        f.row_index[r] = r;
        f.timestamps[r] = std::to_string(r);
    }

    // Anomaly events.
    const auto total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.anomaly_fraction));
    if (total > 0) {
        const auto region_begin = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.anomaly_region_start));
        const std::size_t region = n - region_begin;
        const std::size_t events = (total + cfg.event_length - 1) / cfg.event_length;
        const std::size_t stratum = region / events;
        if (stratum < cfg.event_length + 1) {
            throw ArgumentError("generate_synthetic: anomaly region too small for " + std::to_string(events) +
                                " events of " + std::to_string(cfg.event_length) + " rows");
        }
        std::size_t remaining = total;
        for (std::size_t e = 0; e < events; ++e) {
            const std::size_t len = std::min(cfg.event_length, remaining);
            remaining -= len;
            const std::size_t start = region_begin + e * stratum + static_cast<std::size_t>(rng.below(stratum - len + 1));
            const AnomalyKind kind = cfg.kinds[static_cast<std::size_t>(rng.below(cfg.kinds.size()))];

            std::size_t order[4] = {0, 1, 2, 3};
            rng.shuffle(std::span<std::size_t>(order));
            for (std::size_t q = 0; q < cfg.features_per_event; ++q) {
                const std::size_t j = order[q];
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                const double shift = sign * rng.uniform(cfg.min_sigma, cfg.max_sigma) * sd[j];
                for (std::size_t r = start; r < start + len; ++r) {
                    double delta = 0.0;
                    switch (kind) {
                    case AnomalyKind::spike:
                        delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(cfg.min_sigma, cfg.max_sigma) * sd[j];
                        break;
                    case AnomalyKind::level_shift: delta = shift; break;
                    case AnomalyKind::noise_burst: delta = rng.normal(0.0, cfg.max_sigma * sd[j]); break;
                    }
                    double& value = f.features(r, j);
                    // Speeds stay nonnegative: flip the displacement instead of clipping it away.
                    if (j <= 1 && value + delta < 0.0) delta = -delta;
                    value += delta;
                }
            }
            for (std::size_t r = start; r < start + len; ++r) f.labels[r] = 1;
        }
    }

    for (std::size_t r = 0; r < n; ++r) {
        double& d = f.features(r, 2);
        d = std::fmod(d, 360.0);
        if (d < 0.0) d += 360.0;
        const double v = clean_v[r];
        const double p = v <= 3.0 ? 0.0 : (v >= 12.0 ? 1.0 : std::pow((v - 3.0) / 9.0, 3.0));
        f.response[r] = std::clamp(p + rng.normal(0.0, 0.01), 0.0, 1.0);
    }
    return f;
}

} // namespace bilstm_ae
