#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lstm.hpp"
#include "rng.hpp"

namespace bilstm_ae {

/// Architecture of the recurrent autoencoder. Defaults are the wind-power configuration.
struct ModelConfig {
    std::size_t lookback = 10;
    std::size_t features = 4;
    std::vector<std::size_t> encoder_widths{64, 32};
    std::vector<std::size_t> decoder_widths{32, 64};
    std::uint64_t seed = 0;
    /// false builds the unidirectional LSTM autoencoder baseline with the same widths.
    bool bidirectional = true;

    void validate() const {
        if (lookback == 0) throw ConfigError("ModelConfig: lookback must be >= 1");
        if (features == 0) throw ConfigError("ModelConfig: features must be >= 1");
        if (encoder_widths.empty()) throw ConfigError("ModelConfig: at least one encoder layer is required");
        for (std::size_t w : encoder_widths)
            if (w == 0) throw ConfigError("ModelConfig: layer widths must be >= 1");
        if (decoder_widths != std::vector<std::size_t>(encoder_widths.rbegin(), encoder_widths.rend())) {
            throw ConfigError("ModelConfig: decoder widths must be the encoder widths in reverse order");
        }
    }

    std::size_t directions() const noexcept { return bidirectional ? 2 : 1; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
    ModelConfig config;
    std::vector<BiLstmLayerParams> encoder;
    std::vector<BiLstmLayerParams> decoder;
    Matrix projection_w; // features x last decoder output width
    Vector projection_b; // features

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

// Builds the layer skeleton; `init` fills each cell (zeros or random).
template <typename CellInit>
ModelParams assemble(const ModelConfig& config, CellInit&& init) {
    config.validate();
    ModelParams m;
    m.config = config;
    const std::size_t dirs = config.directions();

    auto make_layer = [&](std::size_t hidden, std::size_t input, bool return_sequences) {
        BiLstmLayerParams layer;
        layer.forward_cell = init(hidden, input);
        if (config.bidirectional) layer.backward_cell = init(hidden, input);
        layer.return_sequences = return_sequences;
        return layer;
    };

    std::size_t input = config.features;
    for (std::size_t k = 0; k < config.encoder_widths.size(); ++k) {
        const bool last = k + 1 == config.encoder_widths.size();
        m.encoder.push_back(make_layer(config.encoder_widths[k], input, !last));
        input = dirs * config.encoder_widths[k];
    }
    for (std::size_t w : config.decoder_widths) {
        m.decoder.push_back(make_layer(w, input, true));
        input = dirs * w;
    }
    m.projection_w = Matrix(config.features, input);
    m.projection_b = Vector(config.features, 0.0);
    return m;
}

} // namespace detail

/// Zero-valued parameters with the shape implied by `config` (also used as a gradient container).
inline ModelParams zero_model(const ModelConfig& config) {
    return detail::assemble(config, [](std::size_t h, std::size_t i) { return LstmCellParams::zeros(h, i); });
}

/**
 * Glorot-initialized model, deterministic in config.seed.
 *
 * Draw order: encoder layers then decoder layers; within a layer the forward
 * cell before the backward cell; within a cell gates f, i, c, o. The output
 * projection is drawn last.
 */
inline ModelParams build_model(const ModelConfig& config) {
    Rng rng(config.seed);
    ModelParams m =
        detail::assemble(config, [&rng](std::size_t h, std::size_t i) { return LstmCellParams::glorot(rng, h, i); });
    m.projection_w = glorot_uniform(rng, m.projection_w.cols(), m.projection_w.rows());
    return m;
}

inline ModelParams zeros_like(const ModelParams& m) { return zero_model(m.config); }

/**
 * Visits every parameter tensor as a flat span, in the canonical order used by
 * the optimizer, the gradient checker and the model file: encoder layers,
 * decoder layers (forward cell then backward cell; w_f, w_i, w_c, w_o,
 * b_f, b_i, b_c, b_o), projection weights, projection bias.
 */
template <typename Model, typename Fn>
    requires std::is_same_v<std::remove_const_t<Model>, ModelParams>
void for_each_tensor(Model& m, Fn&& fn) {
    auto visit_cell = [&](auto& cell) {
        fn(cell.w_f.data());
        fn(cell.w_i.data());
        fn(cell.w_c.data());
        fn(cell.w_o.data());
        fn(std::span(cell.b_f));
        fn(std::span(cell.b_i));
        fn(std::span(cell.b_c));
        fn(std::span(cell.b_o));
    };
    auto visit_layers = [&](auto& layers) {
        for (auto& layer : layers) {
            visit_cell(layer.forward_cell);
            if (layer.backward_cell) visit_cell(*layer.backward_cell);
        }
    };
    visit_layers(m.encoder);
    visit_layers(m.decoder);
    fn(m.projection_w.data());
    fn(std::span(m.projection_b));
}

inline std::size_t parameter_count(const ModelParams& m) {
    std::size_t n = 0;
    for_each_tensor(m, [&n](std::span<const double> t) { n += t.size(); });
    return n;
}

/// Closed form: 4h(h+i) + 4h per direction per layer, plus the projection.
inline std::size_t parameter_count(const ModelConfig& config) {
    config.validate();
    const std::size_t dirs = config.directions();
    std::size_t n = 0;
    std::size_t input = config.features;
    auto add_layer = [&](std::size_t h) {
        n += dirs * (4 * h * (h + input) + 4 * h);
        input = dirs * h;
    };
    for (std::size_t h : config.encoder_widths) add_layer(h);
    for (std::size_t h : config.decoder_widths) add_layer(h);
    return n + config.features * input + config.features;
}

/// Flat copy of all parameters in canonical order.
inline Vector flatten(const ModelParams& m) {
    Vector out;
    out.reserve(parameter_count(m));
    for_each_tensor(m, [&out](std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
    return out;
}

/// Everything the backward pass needs from a forward call.
struct ForwardCaches {
    Matrix input;
    std::vector<LayerCache> encoder;
    std::vector<LayerCache> decoder;
    Matrix bottleneck;     // 1 x encoded width
    Matrix decoder_output; // lookback x last decoder width
};

struct Reconstruction {
    Matrix x_hat;
    ForwardCaches caches;
};

/// encoder stack -> bottleneck vector -> repeat -> decoder stack -> linear projection.
inline Reconstruction forward(const ModelParams& model, const Matrix& window) {
    const ModelConfig& cfg = model.config;
    if (window.rows() != cfg.lookback || window.cols() != cfg.features) {
        throw ShapeError("forward: window " + window.shape() + " does not match model input " +
                         Matrix::shape_string(cfg.lookback, cfg.features));
    }
    Reconstruction r;
    r.caches.input = window;
    Matrix act = window;
    for (const auto& layer : model.encoder) {
        LayerOutput out = recurrent_layer_forward(act, layer);
        act = std::move(out.output);
        r.caches.encoder.push_back(std::move(out.cache));
    }
    r.caches.bottleneck = act;
    act = repeat_vector(r.caches.bottleneck.row(0), cfg.lookback);
    for (const auto& layer : model.decoder) {
        LayerOutput out = recurrent_layer_forward(act, layer);
        act = std::move(out.output);
        r.caches.decoder.push_back(std::move(out.cache));
    }
    r.caches.decoder_output = act;
    r.x_hat = time_distributed_dense(act, model.projection_w, model.projection_b);
    return r;
}

/// Mean absolute error over every entry of the window.
inline double reconstruction_loss(const Matrix& x, const Matrix& x_hat) {
    require_same_shape(x, x_hat, "reconstruction_loss");
    if (x.empty()) throw ShapeError("reconstruction_loss: empty window");
    auto a = x.data();
    auto b = x_hat.data();
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(b[k] - a[k]);
    return s / static_cast<double>(a.size());
}

/// d loss / d x_hat with sign(0) = 0.
inline Matrix reconstruction_loss_gradient(const Matrix& x, const Matrix& x_hat) {
    require_same_shape(x, x_hat, "reconstruction_loss_gradient");
    Matrix g(x.rows(), x.cols());
    const double inv_n = 1.0 / static_cast<double>(x.size());
    auto a = x.data();
    auto b = x_hat.data();
    auto out = g.data();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = b[k] - a[k];
        out[k] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return g;
}

/// Backpropagates an arbitrary gradient on x_hat through the whole stack, adding into `grads`.
inline void backward_from_output(const ModelParams& model, const Reconstruction& recon, const Matrix& grad_x_hat,
                                 ModelParams& grads) {
    const ForwardCaches& c = recon.caches;
    if (c.encoder.size() != model.encoder.size() || c.decoder.size() != model.decoder.size() ||
        recon.x_hat.rows() != model.config.lookback || recon.x_hat.cols() != model.config.features) {
        throw InternalError("backward: caches do not belong to this model");
    }
    if (grads.encoder.size() != model.encoder.size() || grads.decoder.size() != model.decoder.size()) {
        throw InternalError("backward: gradient container does not match model");
    }
    require_same_shape(grad_x_hat, recon.x_hat, "backward_from_output");

    Matrix g = time_distributed_dense_backward(grad_x_hat, c.decoder_output, model.projection_w, grads.projection_w,
                                        grads.projection_b);
    for (std::size_t k = model.decoder.size(); k-- > 0;) {
        g = recurrent_layer_backward(g, c.decoder[k], model.decoder[k], grads.decoder[k]);
    }
    g = as_row(repeat_vector_backward(g));
    for (std::size_t k = model.encoder.size(); k-- > 0;) {
        g = recurrent_layer_backward(g, c.encoder[k], model.encoder[k], grads.encoder[k]);
    }
}

/// Adds d loss / d theta for one window into `grads` (which must be shaped like `model`).
inline void accumulate_gradients(const ModelParams& model, const Matrix& window, const Reconstruction& recon,
                                 ModelParams& grads) {
    if (!(recon.caches.input == window)) throw InternalError("backward: caches were produced for a different window");
    backward_from_output(model, recon, reconstruction_loss_gradient(window, recon.x_hat), grads);
}

inline ModelParams backward(const ModelParams& model, const Matrix& window, const Reconstruction& recon) {
    ModelParams grads = zeros_like(model);
    accumulate_gradients(model, window, recon, grads);
    return grads;
}

inline double window_loss(const ModelParams& model, const Matrix& window) {
    return reconstruction_loss(window, forward(model, window).x_hat);
}

} // namespace bilstm_ae
