#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace bilstm_ae {

struct QuantileThreshold {
    double q = 0.99;
};
struct MaxThreshold {};
struct MeanPlusKStdThreshold {
    double k = 3.0;
};
struct FixedThreshold {
    double eta = 0.0;
};

/// How the anomaly threshold is derived from anomaly-free training losses.
using ThresholdStrategy = std::variant<QuantileThreshold, MaxThreshold, MeanPlusKStdThreshold, FixedThreshold>;

inline void validate(const ThresholdStrategy& s) {
    if (auto* q = std::get_if<QuantileThreshold>(&s); q && !(q->q > 0.0 && q->q <= 1.0)) {
        throw ArgumentError("quantile threshold: q must be in (0, 1]");
    }
    if (auto* k = std::get_if<MeanPlusKStdThreshold>(&s); k && !(k->k >= 0.0)) {
        throw ArgumentError("mean_plus_k_std threshold: k must be >= 0");
    }
    if (auto* f = std::get_if<FixedThreshold>(&s); f && !std::isfinite(f->eta)) {
        throw ArgumentError("fixed threshold: eta must be finite");
    }
}

/// Accepts `quantile:Q`, `max`, `mean_plus_k_std:K` and `fixed:ETA`.
inline ThresholdStrategy parse_threshold_strategy(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    auto value = [&]() {
        if (colon == std::string_view::npos) throw ArgumentError("threshold '" + std::string(text) + "' needs a value");
        const auto v = detail::parse_double(text.substr(colon + 1));
        if (!v) throw ArgumentError("threshold '" + std::string(text) + "': cannot parse value");
        return *v;
    };
    ThresholdStrategy s;
    if (kind == "quantile") {
        s = QuantileThreshold{value()};
    } else if (kind == "max") {
        if (colon != std::string_view::npos) throw ArgumentError("threshold 'max' takes no value");
        s = MaxThreshold{};
    } else if (kind == "mean_plus_k_std") {
        s = MeanPlusKStdThreshold{value()};
    } else if (kind == "fixed") {
        s = FixedThreshold{value()};
    } else {
        throw ArgumentError("unknown threshold strategy '" + std::string(kind) + "'");
    }
    validate(s);
    return s;
}

inline std::string to_string(const ThresholdStrategy& s) {
    struct {
        std::string operator()(const QuantileThreshold& q) const { return "quantile:" + detail::format_double(q.q); }
        std::string operator()(const MaxThreshold&) const { return "max"; }
        std::string operator()(const MeanPlusKStdThreshold& k) const {
            return "mean_plus_k_std:" + detail::format_double(k.k);
        }
        std::string operator()(const FixedThreshold& f) const { return "fixed:" + detail::format_double(f.eta); }
    } visitor;
    return std::visit(visitor, s);
}

/// Reconstruction loss of every window, in order.
inline std::vector<double> score(const ModelParams& model, const WindowBatch& windows, std::size_t threads = 1) {
    if (windows.samples() > 0 && (windows.lookback != model.config.lookback || windows.features != model.config.features)) {
        throw ShapeError("score: windows are " + Matrix::shape_string(windows.lookback, windows.features) +
                         " but the model expects " + Matrix::shape_string(model.config.lookback, model.config.features));
    }
    return window_losses(model, windows, 0, windows.samples(), threads);
}

/// Quantile with linear interpolation between order statistics (position q * (n - 1)).
inline double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw ArgumentError("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile: q must be in [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double estimate_threshold(std::span<const double> train_losses, const ThresholdStrategy& strategy) {
    validate(strategy);
    if (train_losses.empty()) throw ArgumentError("estimate_threshold: no training losses");
    struct {
        std::span<const double> x;
        double operator()(const QuantileThreshold& q) const { return quantile(x, q.q); }
        double operator()(const MaxThreshold&) const { return *std::max_element(x.begin(), x.end()); }
        double operator()(const MeanPlusKStdThreshold& k) const {
            const double n = static_cast<double>(x.size());
            double mean = 0.0;
            for (double v : x) mean += v;
            mean /= n;
            double var = 0.0;
            for (double v : x) var += (v - mean) * (v - mean);
            return mean + k.k * std::sqrt(var / n);
        }
        double operator()(const FixedThreshold& f) const { return f.eta; }
    } visitor{train_losses};
    return std::visit(visitor, strategy);
}

/// Per-window losses with their anomaly decisions.
struct ReconstructionReport {
    std::vector<double> losses;
    double threshold = 0.0;
    std::vector<std::uint8_t> flags; // 1 = anomaly
    std::vector<std::size_t> window_end_indices;

    std::size_t anomaly_count() const {
        return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
    }

    friend bool operator==(const ReconstructionReport&, const ReconstructionReport&) = default;
};

/// A window is anomalous iff its loss is strictly greater than eta.
inline ReconstructionReport classify(std::span<const double> losses, double eta,
                                     std::span<const std::size_t> window_end_indices = {}) {
    if (std::isnan(eta)) throw ArgumentError("classify: threshold is NaN");
    if (!window_end_indices.empty() && window_end_indices.size() != losses.size()) {
        throw ArgumentError("classify: window index count does not match loss count");
    }
    ReconstructionReport r;
    r.losses.assign(losses.begin(), losses.end());
    r.threshold = eta;
    r.flags.reserve(losses.size());
    for (double l : losses) r.flags.push_back(l > eta ? 1 : 0);
    if (window_end_indices.empty()) {
        r.window_end_indices.resize(losses.size());
        for (std::size_t k = 0; k < losses.size(); ++k) r.window_end_indices[k] = k;
    } else {
        r.window_end_indices.assign(window_end_indices.begin(), window_end_indices.end());
    }
    return r;
}

inline void write_report_csv(const ReconstructionReport& r, std::ostream& out) {
    out << "window_end_index,loss,flag\n";
    for (std::size_t k = 0; k < r.losses.size(); ++k) {
        out << r.window_end_indices[k] << ',' << detail::format_double(r.losses[k]) << ',' << int(r.flags[k]) << '\n';
    }
}

/// Reads a report CSV. The threshold is not stored in the file and comes back as NaN.
inline ReconstructionReport read_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "window_end_index,loss,flag") {
        throw IngestionError(0, "report CSV must start with header 'window_end_index,loss,flag'");
    }
    ReconstructionReport r;
    r.threshold = std::numeric_limits<double>::quiet_NaN();
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_commas(line);
        if (cells.size() != 3) throw IngestionError(row, "expected 3 fields");
        const auto idx = detail::parse_double(cells[0]);
        const auto loss = detail::parse_double(cells[1]);
        const auto flag = detail::trim(cells[2]);
        if (!idx || *idx < 0 || std::floor(*idx) != *idx) throw IngestionError(row, "bad window_end_index");
        if (!loss || *loss < 0) throw IngestionError(row, "bad loss");
        if (flag != "0" && flag != "1") throw IngestionError(row, "flag must be 0 or 1");
        r.window_end_indices.push_back(static_cast<std::size_t>(*idx));
        r.losses.push_back(*loss);
        r.flags.push_back(flag == "1" ? 1 : 0);
    }
    return r;
}

inline ReconstructionReport read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError(0, "cannot open " + path.string());
    return read_report_csv(in);
}

} // namespace bilstm_ae
