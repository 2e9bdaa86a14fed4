#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "detector.hpp"
#include "errors.hpp"

namespace bilstm_ae {

/// Anomaly is the positive class.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricSet {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

inline ConfusionCounts confusion(std::span<const std::uint8_t> flags, std::span<const std::uint8_t> truth) {
    if (flags.size() != truth.size()) {
        throw ArgumentError("confusion: " + std::to_string(flags.size()) + " predictions vs " +
                            std::to_string(truth.size()) + " labels");
    }
    ConfusionCounts c;
    for (std::size_t k = 0; k < flags.size(); ++k) {
        const bool predicted = flags[k] != 0;
        const bool actual = truth[k] != 0;
        if (predicted && actual) ++c.tp;
        else if (predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Accuracy, precision, recall, F1. Zero denominators yield 0 for the affected metric.
inline MetricSet metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw ArgumentError("metrics: empty confusion matrix");
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    MetricSet m;
    m.accuracy = d(c.tp + c.tn) / d(c.total());
    m.precision = c.tp + c.fp == 0 ? 0.0 : d(c.tp) / d(c.tp + c.fp);
    m.recall = c.tp + c.fn == 0 ? 0.0 : d(c.tp) / d(c.tp + c.fn);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

struct RocPoint {
    double fpr;
    double tpr;
    double threshold; // windows with loss >= threshold are flagged at this point
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/**
 * Threshold sweep over the unique scores, highest first, starting from the
 * (0, 0) sentinel. Tied scores move the curve in a single diagonal step, so
 * the trapezoidal area equals the Mann-Whitney statistic with ties at 1/2.
 */
inline RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
    if (scores.size() != truth.size()) throw ArgumentError("roc_auc: score and label counts differ");
    const auto positives = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](auto v) { return v != 0; }));
    const std::size_t negatives = truth.size() - positives;
    if (positives == 0 || negatives == 0) throw ArgumentError("roc_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    const double P = static_cast<double>(positives);
    const double N = static_cast<double>(negatives);
    std::size_t tp = 0, fp = 0;
    double area = 0.0; // in units of (fp count) x (tp count)
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        const std::size_t tp_before = tp, fp_before = fp;
        while (k < order.size() && scores[order[k]] == s) {
            if (truth[order[k]] != 0) ++tp;
            else ++fp;
            ++k;
        }
        area += static_cast<double>(fp - fp_before) * static_cast<double>(tp + tp_before) / 2.0;
        roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, s});
    }
    roc.auc = area / (P * N);
    return roc;
}

struct EvaluationSummary {
    ConfusionCounts counts;
    MetricSet metrics;
    std::optional<double> auc; // absent when the truth holds a single class
};

inline EvaluationSummary evaluate(const ReconstructionReport& report, std::span<const std::uint8_t> truth) {
    EvaluationSummary s;
    s.counts = confusion(report.flags, truth);
    s.metrics = metrics(s.counts);
    const auto positives = std::count_if(truth.begin(), truth.end(), [](auto v) { return v != 0; });
    if (positives > 0 && static_cast<std::size_t>(positives) < truth.size()) s.auc = roc_auc(report.losses, truth).auc;
    return s;
}

struct ModelComparison {
    EvaluationSummary a;
    EvaluationSummary b;
    MetricSet delta; // a - b
    std::optional<double> delta_auc;
};

/// Side-by-side evaluation of two reports scored on the same windows.
inline ModelComparison compare_models(const ReconstructionReport& report_a, const ReconstructionReport& report_b,
                                      std::span<const std::uint8_t> truth) {
    if (report_a.window_end_indices != report_b.window_end_indices || report_a.losses.size() != truth.size()) {
        throw ArgumentError("compare_models: reports were not scored on the same windows");
    }
    ModelComparison c;
    c.a = evaluate(report_a, truth);
    c.b = evaluate(report_b, truth);
    c.delta = {c.a.metrics.accuracy - c.b.metrics.accuracy, c.a.metrics.precision - c.b.metrics.precision,
               c.a.metrics.recall - c.b.metrics.recall, c.a.metrics.f1 - c.b.metrics.f1};
    if (c.a.auc && c.b.auc) c.delta_auc = *c.a.auc - *c.b.auc;
    return c;
}

/// Truth labels for report windows, looked up by window end row.
inline std::vector<std::uint8_t> labels_for_windows(const TimeSeriesFrame& frame,
                                                    std::span<const std::size_t> window_end_indices) {
    std::vector<std::uint8_t> out;
    out.reserve(window_end_indices.size());
    for (std::size_t idx : window_end_indices) {
        if (idx >= frame.rows()) {
            throw ArgumentError("window end index " + std::to_string(idx) + " is beyond the " +
                                std::to_string(frame.rows()) + "-row data file");
        }
        out.push_back(frame.labels[idx]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output formats

inline void write_metrics_csv(const EvaluationSummary& s, std::ostream& out) {
    out << "accuracy,precision,recall,f1,auc\n"
        << detail::format_double(s.metrics.accuracy) << ',' << detail::format_double(s.metrics.precision) << ','
        << detail::format_double(s.metrics.recall) << ',' << detail::format_double(s.metrics.f1) << ','
        << (s.auc ? detail::format_double(*s.auc) : std::string()) << '\n';
}

inline void write_confusion_csv(const ConfusionCounts& c, std::ostream& out) {
    out << ",predicted_normal,predicted_anomaly\n"
        << "actual_normal," << c.tn << ',' << c.fp << '\n'
        << "actual_anomaly," << c.fn << ',' << c.tp << '\n';
}

inline void write_roc_csv(const RocCurve& roc, std::ostream& out) {
    out << "fpr,tpr\n";
    for (const auto& p : roc.points) out << detail::format_double(p.fpr) << ',' << detail::format_double(p.tpr) << '\n';
}

inline void write_comparison_csv(const ModelComparison& c, const std::string& name_a, const std::string& name_b,
                                 std::ostream& out) {
    auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
    auto row = [&](const std::string& name, const MetricSet& m, const std::optional<double>& auc) {
        out << name << ',' << detail::format_double(m.accuracy) << ',' << detail::format_double(m.precision) << ','
            << detail::format_double(m.recall) << ',' << detail::format_double(m.f1) << ',' << opt(auc) << '\n';
    };
    out << "model,accuracy,precision,recall,f1,auc\n";
    row(name_a, c.a.metrics, c.a.auc);
    row(name_b, c.b.metrics, c.b.auc);
    row("delta", c.delta, c.delta_auc);
}

inline std::string format_metric_table(const std::vector<std::pair<std::string, EvaluationSummary>>& rows) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %9s %9s %9s %9s %9s\n", "Model", "Accuracy", "Precision", "Recall", "F1",
                  "AUC");
    out += buf;
    for (const auto& [name, s] : rows) {
        const std::string auc = s.auc ? std::to_string(*s.auc).substr(0, 6) : "-";
        std::snprintf(buf, sizeof buf, "%-22s %9.4f %9.4f %9.4f %9.4f %9s\n", name.c_str(), s.metrics.accuracy,
                      s.metrics.precision, s.metrics.recall, s.metrics.f1, auc.c_str());
        out += buf;
    }
    return out;
}

} // namespace bilstm_ae
