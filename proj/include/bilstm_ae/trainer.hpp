#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "reference_forward.hpp"
#include "rng.hpp"

namespace bilstm_ae {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 50;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double clip_norm = 5.0; // global-norm clip, 0 disables
    std::size_t patience = 0; // early stop after this many epochs without validation improvement, 0 disables
    std::size_t threads = 1;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
        if (batch_size == 0) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw ConfigError("TrainConfig: validation_fraction must be in (0, 1)");
        }
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("TrainConfig: Adam betas must be in [0, 1)");
        }
        if (!(adam_epsilon > 0.0)) throw ConfigError("TrainConfig: adam_epsilon must be > 0");
        if (!(clip_norm >= 0.0)) throw ConfigError("TrainConfig: clip_norm must be >= 0");
        if (threads == 0) throw ConfigError("TrainConfig: threads must be >= 1");
    }
};

struct AdamState {
    ModelParams first_moment;
    ModelParams second_moment;
    std::uint64_t step = 0;

    static AdamState for_model(const ModelParams& m) { return {zeros_like(m), zeros_like(m), 0}; }
};

struct LearningCurves {
    std::vector<double> train_loss;
    std::vector<std::optional<double>> val_loss; // empty when no validation windows were carved out

    std::size_t epochs() const noexcept { return train_loss.size(); }

    friend bool operator==(const LearningCurves&, const LearningCurves&) = default;
};

inline void write_curves_csv(const LearningCurves& c, std::ostream& out) {
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < c.epochs(); ++e) {
        out << (e + 1) << ',' << detail::format_double(c.train_loss[e]) << ',';
        if (c.val_loss[e]) out << detail::format_double(*c.val_loss[e]);
        out << '\n';
    }
}

namespace detail {

template <typename Model>
auto tensor_spans(Model& m) {
    using Span = decltype(m.projection_w.data());
    std::vector<Span> out;
    for_each_tensor(m, [&out](Span s) { out.push_back(s); });
    return out;
}

/// Runs fn(k) for k in [0, n) over up to `threads` workers. fn must only write to slot k.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t k = w; k < n; k += threads) fn(k);
        });
    }
}

inline void add_into(ModelParams& dst, const ModelParams& src) {
    auto d = tensor_spans(dst);
    auto s = tensor_spans(src);
    for (std::size_t t = 0; t < d.size(); ++t)
        for (std::size_t k = 0; k < d[t].size(); ++k) d[t][k] += s[t][k];
}

inline void scale_into(ModelParams& m, double s) {
    for_each_tensor(m, [s](std::span<double> t) {
        for (double& v : t) v *= s;
    });
}

inline double global_norm(const ModelParams& m) {
    double sq = 0.0;
    for_each_tensor(m, [&sq](std::span<const double> t) {
        for (double v : t) sq += v * v;
    });
    return std::sqrt(sq);
}

// Windows are grouped into fixed-size chunks whose partial sums are added in
// chunk order, so the batch gradient does not depend on the thread count.
inline constexpr std::size_t kGradientChunk = 16;

} // namespace detail

/// Mean of per-window gradients over `indices`.
inline ModelParams batch_gradient(const ModelParams& model, const WindowBatch& windows,
                                  std::span<const std::size_t> indices, std::size_t threads = 1) {
    const std::size_t chunks = (indices.size() + detail::kGradientChunk - 1) / detail::kGradientChunk;
    std::vector<ModelParams> partial(chunks);
    detail::parallel_for(chunks, threads, [&](std::size_t c) {
        partial[c] = zeros_like(model);
        const std::size_t end = std::min(indices.size(), (c + 1) * detail::kGradientChunk);
        for (std::size_t k = c * detail::kGradientChunk; k < end; ++k) {
            const Matrix& w = windows.data[indices[k]];
            accumulate_gradients(model, w, forward(model, w), partial[c]);
        }
    });
    ModelParams total = zeros_like(model);
    for (const auto& p : partial) detail::add_into(total, p);
    detail::scale_into(total, 1.0 / static_cast<double>(indices.size()));
    return total;
}

/// Per-window reconstruction losses, in window order.
inline std::vector<double> window_losses(const ModelParams& model, const WindowBatch& windows, std::size_t begin,
                                         std::size_t end, std::size_t threads = 1) {
    std::vector<double> out(end - begin);
    detail::parallel_for(out.size(), threads, [&](std::size_t k) { out[k] = window_loss(model, windows.data[begin + k]); });
    return out;
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Bias-corrected Adam update in place. Throws TrainingError on non-finite gradients.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
    auto p = detail::tensor_spans(params);
    auto g = detail::tensor_spans(grads);
    auto m = detail::tensor_spans(state.first_moment);
    auto v = detail::tensor_spans(state.second_moment);
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
        throw ShapeError("adam_step: gradient/optimizer state does not mirror the model");
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (g[t].size() != p[t].size() || m[t].size() != p[t].size() || v[t].size() != p[t].size()) {
            throw ShapeError("adam_step: tensor size mismatch");
        }
        for (double x : g[t])
            if (!std::isfinite(x)) throw TrainingError("adam_step: non-finite gradient");
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t j = 0; j < p[k].size(); ++j) {
            const double gj = g[k][j];
            m[k][j] = cfg.beta1 * m[k][j] + (1.0 - cfg.beta1) * gj;
            v[k][j] = cfg.beta2 * v[k][j] + (1.0 - cfg.beta2) * gj * gj;
            const double m_hat = m[k][j] / c1;
            const double v_hat = v[k][j] / c2;
            p[k][j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns the norm before clipping.
inline double clip_global_norm(ModelParams& grads, double max_norm) {
    const double norm = detail::global_norm(grads);
    if (max_norm > 0.0 && norm > max_norm) detail::scale_into(grads, max_norm / norm);
    return norm;
}

/// Epoch batch order: a permutation that depends only on (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(std::span<std::size_t>(idx));
    return idx;
}

struct FitResult {
    ModelParams model;
    LearningCurves curves;
    std::size_t train_windows = 0;
    std::size_t validation_windows = 0;
    std::size_t epochs_run = 0;
};

/**
 * Mini-batch Adam on anomaly-free windows.
 *
 * The last `validation_fraction` of the windows (time order) are held out.
 * Recorded losses are recomputed over all training/validation windows with
 * the parameters at the end of each epoch.
 */
inline FitResult fit(ModelParams model, const WindowBatch& windows, const TrainConfig& cfg) {
    cfg.validate();
    if (windows.samples() == 0) throw ArgumentError("fit: no training windows");
    if (windows.lookback != model.config.lookback || windows.features != model.config.features) {
        throw ShapeError("fit: windows are " + Matrix::shape_string(windows.lookback, windows.features) +
                         " but the model expects " + Matrix::shape_string(model.config.lookback, model.config.features));
    }
    for (std::size_t k = 0; k < windows.samples(); ++k) {
        if (windows.labels[k] != 0) {
            throw ContractViolation("fit: window " + std::to_string(k) + " (ending at row " +
                                    std::to_string(windows.window_end_indices[k]) +
                                    ") is labelled anomalous; training requires normal windows only");
        }
    }

    FitResult result;
    const std::size_t n = windows.samples();
    result.validation_windows =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.validation_fraction));
    result.train_windows = n - result.validation_windows;
    const std::size_t n_train = result.train_windows;

    AdamState adam = AdamState::for_model(model);
    std::optional<double> best_val;
    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(n_train, cfg.seed, epoch);
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t end = std::min(n_train, start + cfg.batch_size);
            ModelParams g = batch_gradient(model, windows, std::span(order).subspan(start, end - start), cfg.threads);
            clip_global_norm(g, cfg.clip_norm);
            adam_step(model, g, adam, cfg);
        }

        const auto train_losses = window_losses(model, windows, 0, n_train, cfg.threads);
        const double train_loss = mean_of(train_losses);
        if (!std::isfinite(train_loss)) {
            throw TrainingError("fit: training loss became non-finite at epoch " + std::to_string(epoch + 1));
        }
        result.curves.train_loss.push_back(train_loss);
        if (result.validation_windows > 0) {
            const auto val_losses = window_losses(model, windows, n_train, n, cfg.threads);
            const double val_loss = mean_of(val_losses);
            result.curves.val_loss.push_back(val_loss);
            if (!best_val || val_loss < *best_val) {
                best_val = val_loss;
                since_best = 0;
            } else {
                ++since_best;
            }
        } else {
            result.curves.val_loss.push_back(std::nullopt);
        }
        result.epochs_run = epoch + 1;
        if (cfg.patience > 0 && since_best >= cfg.patience) break;
    }
    result.model = std::move(model);
    return result;
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0; // parameters whose perturbation crossed an absolute-value kink
};

/**
 * Compares analytic gradients against central differences on every scalar
 * parameter. Output coordinates with |x_hat - x| < 1e-6 are dropped from the
 * loss on both sides; a parameter is skipped if its perturbation flips the
 * sign of any remaining residual.
 *
 * The perturbed losses are evaluated by ReferenceModel in extended
 * precision. In doubles the difference quotient cannot resolve gradients much
 * below 1e-8 at epsilon = 1e-5, which the relative error would report as a
 * mismatch.
 */
inline GradCheckResult grad_check(const ModelParams& model, const Matrix& window, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-2)) throw ArgumentError("grad_check: epsilon must be in [1e-7, 1e-2]");
    constexpr double kink = 1e-6;
    using Real = ReferenceModel::Real;

    const Reconstruction base = forward(model, window);
    const std::size_t rows = window.rows(), cols = window.cols(), entries = window.size();
    std::vector<char> mask(entries);
    for (std::size_t k = 0; k < entries; ++k) mask[k] = std::abs(base.x_hat.data()[k] - window.data()[k]) >= kink;

    Matrix upstream = reconstruction_loss_gradient(window, base.x_hat);
    for (std::size_t k = 0; k < entries; ++k)
        if (!mask[k]) upstream.data()[k] = 0.0;
    ModelParams analytic = zeros_like(model);
    backward_from_output(model, base, upstream, analytic);
    const Vector grads = flatten(analytic);

    auto residual_signs = [&](const ReferenceModel::Rows& x_hat) {
        std::vector<int> s(entries);
        for (std::size_t k = 0; k < entries; ++k) {
            const Real d = x_hat[k / cols][k % cols] - static_cast<Real>(window.data()[k]);
            s[k] = mask[k] ? (d > 0) - (d < 0) : 0;
        }
        return s;
    };
    auto masked_loss = [&](const ReferenceModel::Rows& x_hat) {
        Real s = 0;
        for (std::size_t k = 0; k < entries; ++k)
            if (mask[k]) s += std::abs(x_hat[k / cols][k % cols] - static_cast<Real>(window.data()[k]));
        return s / static_cast<Real>(rows * cols);
    };

    GradCheckResult result;
    ReferenceModel probe(model);
    for (std::size_t j = 0; j < probe.parameter_count(); ++j) {
        Real& p = probe.parameter(j);
        const Real original = p;
        p = original + epsilon;
        const auto plus = probe.forward(window);
        p = original - epsilon;
        const auto minus = probe.forward(window);
        p = original;

        if (residual_signs(plus) != residual_signs(minus)) {
            ++result.skipped;
            continue;
        }
        const double numeric = static_cast<double>((masked_loss(plus) - masked_loss(minus)) / (2 * static_cast<Real>(epsilon)));
        const double a = grads[j];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
        ++result.checked;
    }
    return result;
}

} // namespace bilstm_ae
