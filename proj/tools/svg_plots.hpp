#pragma once

// Minimal hand-written SVG charts for the eval command.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <bilstm_ae/evaluation.hpp>

namespace bilstm_ae::plots {

struct Frame {
    double width = 640.0;
    double height = 420.0;
    double margin = 56.0;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;

    double px(double x) const {
        const double span = x_max > x_min ? x_max - x_min : 1.0;
        return margin + (x - x_min) / span * (width - 2 * margin);
    }
    double py(double y) const {
        const double span = y_max > y_min ? y_max - y_min : 1.0;
        return height - margin - (y - y_min) / span * (height - 2 * margin);
    }
};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline void open_svg(std::ostream& out, const Frame& f, const std::string& title, const std::string& x_label,
                     const std::string& y_label) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(f.width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
        << "</text>\n";
    const double x0 = f.px(f.x_min), x1 = f.px(f.x_max), y0 = f.py(f.y_min), y1 = f.py(f.y_max);
    out << "<path d=\"M" << num(x0) << ' ' << num(y1) << " V" << num(y0) << " H" << num(x1)
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = f.x_min + (f.x_max - f.x_min) * k / 4.0;
        const double yv = f.y_min + (f.y_max - f.y_min) * k / 4.0;
        out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">" << tick(xv)
            << "</text>\n";
        out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
            << "</text>\n";
    }
    out << "<text x=\"" << num(f.width / 2) << "\" y=\"" << num(f.height - 12) << "\" text-anchor=\"middle\">"
        << x_label << "</text>\n";
    out << "<text transform=\"translate(14 " << num(f.height / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << y_label << "</text>\n";
}

inline void close_svg(std::ostream& out) { out << "</svg>\n"; }

/// Histogram of window losses with the threshold marked.
inline void loss_histogram(std::ostream& out, std::span<const double> losses, double threshold, std::size_t bins = 40) {
    Frame f;
    if (!losses.empty()) {
        f.x_min = *std::min_element(losses.begin(), losses.end());
        f.x_max = *std::max_element(losses.begin(), losses.end());
    }
    if (std::isfinite(threshold)) f.x_max = std::max(f.x_max, threshold);
    if (f.x_max <= f.x_min) f.x_max = f.x_min + 1.0;
    std::vector<std::size_t> counts(bins, 0);
    for (double l : losses) {
        auto b = static_cast<std::size_t>((l - f.x_min) / (f.x_max - f.x_min) * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    f.y_max = static_cast<double>(std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end())));
    open_svg(out, f, "Reconstruction loss distribution", "loss", "windows");
    const double bw = (f.x_max - f.x_min) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        if (counts[b] == 0) continue;
        const double x = f.x_min + bw * static_cast<double>(b);
        const double top = f.py(static_cast<double>(counts[b]));
        out << "<rect x=\"" << num(f.px(x)) << "\" y=\"" << num(top) << "\" width=\""
            << num(f.px(x + bw) - f.px(x)) << "\" height=\"" << num(f.py(0) - top)
            << "\" fill=\"steelblue\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
    }
    if (std::isfinite(threshold)) {
        out << "<line x1=\"" << num(f.px(threshold)) << "\" y1=\"" << num(f.py(f.y_min)) << "\" x2=\""
            << num(f.px(threshold)) << "\" y2=\"" << num(f.py(f.y_max)) << "\" stroke=\"crimson\" stroke-dasharray=\"6 4\"/>\n";
    }
    close_svg(out);
}

/// Loss per window against its end index; anomalous windows in red.
inline void loss_scatter(std::ostream& out, const ReconstructionReport& report, std::span<const std::uint8_t> truth,
                         double threshold) {
    Frame f;
    if (!report.losses.empty()) {
        f.x_min = static_cast<double>(report.window_end_indices.front());
        f.x_max = static_cast<double>(report.window_end_indices.back());
        f.y_max = *std::max_element(report.losses.begin(), report.losses.end());
    }
    if (std::isfinite(threshold)) f.y_max = std::max(f.y_max, threshold);
    if (f.y_max <= 0.0) f.y_max = 1.0;
    open_svg(out, f, "Reconstruction loss by window", "window end index", "loss");
    for (std::size_t k = 0; k < report.losses.size(); ++k) {
        const bool anomalous = k < truth.size() && truth[k] != 0;
        out << "<circle cx=\"" << num(f.px(static_cast<double>(report.window_end_indices[k]))) << "\" cy=\""
            << num(f.py(report.losses[k])) << "\" r=\"1.6\" fill=\"" << (anomalous ? "crimson" : "steelblue")
            << "\"/>\n";
    }
    if (std::isfinite(threshold)) {
        out << "<line x1=\"" << num(f.px(f.x_min)) << "\" y1=\"" << num(f.py(threshold)) << "\" x2=\""
            << num(f.px(f.x_max)) << "\" y2=\"" << num(f.py(threshold)) << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
    }
    close_svg(out);
}

inline void roc_plot(std::ostream& out, const RocCurve& roc) {
    Frame f;
    f.width = 460.0;
    f.height = 460.0;
    open_svg(out, f, "ROC (AUC " + tick(roc.auc) + ")", "false positive rate", "true positive rate");
    out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(1)) << "\" y2=\""
        << num(f.py(1)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"darkorange\" stroke-width=\"2\" points=\"";
    for (const auto& p : roc.points) out << num(f.px(p.fpr)) << ',' << num(f.py(p.tpr)) << ' ';
    out << "\"/>\n";
    close_svg(out);
}

} // namespace bilstm_ae::plots
