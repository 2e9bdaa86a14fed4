#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace bilstm_ae {

/**
 * Weights and biases of one LSTM cell.
 *
 * Each gate acts on the concatenation [h_prev, x_t], so every weight matrix is
 * hidden x (hidden + input) with the recurrent block in the leading columns.
 */
struct LstmCellParams {
    Matrix w_f, w_i, w_c, w_o;
    Vector b_f, b_i, b_c, b_o;

    static LstmCellParams zeros(std::size_t hidden, std::size_t input) {
        if (hidden == 0 || input == 0) throw ArgumentError("LstmCellParams: hidden and input must be >= 1");
        LstmCellParams p;
        p.w_f = p.w_i = p.w_c = p.w_o = Matrix(hidden, hidden + input);
        p.b_f = p.b_i = p.b_c = p.b_o = Vector(hidden, 0.0);
        return p;
    }

    /// Glorot-uniform weights drawn in gate order f, i, c, o. Biases zero except b_f = 1.
    static LstmCellParams glorot(Rng& rng, std::size_t hidden, std::size_t input) {
        LstmCellParams p = zeros(hidden, input);
        for (Matrix* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) *w = glorot_uniform(rng, hidden + input, hidden);
        std::fill(p.b_f.begin(), p.b_f.end(), 1.0);
        return p;
    }

    std::size_t hidden() const noexcept { return w_f.rows(); }
    std::size_t input() const noexcept { return w_f.cols() - w_f.rows(); }

    void validate() const {
        const std::size_t h = w_f.rows();
        const std::size_t cols = w_f.cols();
        if (h == 0 || cols <= h) throw ShapeError("LstmCellParams: weights must be hidden x (hidden + input), input >= 1");
        for (const Matrix* w : {&w_i, &w_c, &w_o}) {
            if (w->rows() != h || w->cols() != cols) {
                throw ShapeError("LstmCellParams: gate weights disagree in shape " + w_f.shape() + " vs " + w->shape());
            }
        }
        for (const Vector* b : {&b_f, &b_i, &b_c, &b_o}) {
            if (b->size() != h) throw ShapeError("LstmCellParams: bias length must equal hidden size");
        }
    }

    friend bool operator==(const LstmCellParams&, const LstmCellParams&) = default;
};

struct LstmState {
    Vector h;
    Vector c;

    static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

/// Activations of one forward step, kept for the backward pass.
struct CellCache {
    Vector concat_input; // [h_prev, x_t]
    Vector f, i, c_tilde, o;
    Vector c;
    Vector tanh_c;
};

struct CellStep {
    LstmState next;
    CellCache cache;
};

struct CellGradients {
    Vector grad_x;
    Vector grad_h_prev;
    Vector grad_c_prev;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Output slots of one forward step. All have length hidden except z (hidden + input).
struct CellSlots {
    std::span<double> z, f, i, c_tilde, o, c, tanh_c, h;
};

inline void cell_forward_kernel(const LstmCellParams& p, std::span<const double> x, std::span<const double> h_prev,
                                std::span<const double> c_prev, const CellSlots& out) {
    const std::size_t hidden = p.hidden();
    std::copy(h_prev.begin(), h_prev.end(), out.z.begin());
    std::copy(x.begin(), x.end(), out.z.begin() + static_cast<std::ptrdiff_t>(hidden));
    for (std::size_t j = 0; j < hidden; ++j) {
        const double f = sigmoid(dot(p.w_f.row(j), out.z) + p.b_f[j]);
        const double i = sigmoid(dot(p.w_i.row(j), out.z) + p.b_i[j]);
        const double g = tanh_act(dot(p.w_c.row(j), out.z) + p.b_c[j]);
        const double o = sigmoid(dot(p.w_o.row(j), out.z) + p.b_o[j]);
        const double c = f * c_prev[j] + i * g;
        const double tc = tanh_act(c);
        out.f[j] = f;
        out.i[j] = i;
        out.c_tilde[j] = g;
        out.o[j] = o;
        out.c[j] = c;
        out.tanh_c[j] = tc;
        out.h[j] = o * tc;
    }
}

struct CellView {
    std::span<const double> z, f, i, c_tilde, o, tanh_c;
};

// Writes d/d[h_prev, x] into grad_z (overwritten) and d/dc_prev into grad_c_prev;
// adds parameter gradients into g. `gates` is scratch of length 4 * hidden.
inline void cell_backward_kernel(const LstmCellParams& p, std::span<const double> grad_h,
                                 std::span<const double> grad_c, const CellView& k, std::span<const double> c_prev,
                                 LstmCellParams& g, std::span<double> grad_z, std::span<double> grad_c_prev,
                                 std::span<double> gates) {
    const std::size_t hidden = p.hidden();
    auto da_f = gates.subspan(0, hidden);
    auto da_i = gates.subspan(hidden, hidden);
    auto da_c = gates.subspan(2 * hidden, hidden);
    auto da_o = gates.subspan(3 * hidden, hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        const double o = k.o[j];
        const double tc = k.tanh_c[j];
        const double dc = grad_c[j] + grad_h[j] * o * (1.0 - tc * tc);
        grad_c_prev[j] = dc * k.f[j];
        da_f[j] = dc * c_prev[j] * k.f[j] * (1.0 - k.f[j]);
        da_i[j] = dc * k.c_tilde[j] * k.i[j] * (1.0 - k.i[j]);
        da_c[j] = dc * k.i[j] * (1.0 - k.c_tilde[j] * k.c_tilde[j]);
        da_o[j] = grad_h[j] * tc * o * (1.0 - o);
    }
    std::fill(grad_z.begin(), grad_z.end(), 0.0);
    const Matrix* weights[] = {&p.w_f, &p.w_i, &p.w_c, &p.w_o};
    Matrix* grad_weights[] = {&g.w_f, &g.w_i, &g.w_c, &g.w_o};
    Vector* grad_biases[] = {&g.b_f, &g.b_i, &g.b_c, &g.b_o};
    for (std::size_t gate = 0; gate < 4; ++gate) {
        auto da = gates.subspan(gate * hidden, hidden);
        for (std::size_t j = 0; j < hidden; ++j) {
            const double d = da[j];
            (*grad_biases[gate])[j] += d;
            if (d == 0.0) continue;
            auto gw = grad_weights[gate]->row(j);
            auto w = weights[gate]->row(j);
            for (std::size_t q = 0; q < gw.size(); ++q) {
                gw[q] += d * k.z[q];
                grad_z[q] += d * w[q];
            }
        }
    }
}

} // namespace detail

inline CellStep lstm_cell_forward(std::span<const double> x_t, const LstmState& prev, const LstmCellParams& params) {
    const std::size_t hidden = params.hidden();
    require_length(x_t, params.input(), "lstm_cell_forward input");
    require_length(prev.h, hidden, "lstm_cell_forward h_prev");
    require_length(prev.c, hidden, "lstm_cell_forward c_prev");

    CellStep step;
    CellCache& k = step.cache;
    k.concat_input.resize(hidden + params.input());
    for (Vector* v : {&k.f, &k.i, &k.c_tilde, &k.o, &k.c, &k.tanh_c, &step.next.h}) v->resize(hidden);
    detail::cell_forward_kernel(params, x_t, prev.h, prev.c,
                                {k.concat_input, k.f, k.i, k.c_tilde, k.o, k.c, k.tanh_c, step.next.h});
    step.next.c = k.c;
    return step;
}

/**
 * Reverse-mode step through one cell.
 *
 * `grad_h` and `grad_c` are the total upstream gradients reaching H_t and C_t.
 * Parameter gradients are added into `grad_params`, which must have the shape
 * of `params`.
 */
inline CellGradients lstm_cell_backward(std::span<const double> grad_h, std::span<const double> grad_c,
                                        const CellCache& cache, const LstmState& prev, const LstmCellParams& params,
                                        LstmCellParams& grad_params) {
    const std::size_t hidden = params.hidden();
    require_length(grad_h, hidden, "lstm_cell_backward grad_h");
    require_length(grad_c, hidden, "lstm_cell_backward grad_c");
    require_length(prev.c, hidden, "lstm_cell_backward c_prev");
    if (cache.f.size() != hidden || cache.concat_input.size() != params.w_f.cols()) {
        throw ShapeError("lstm_cell_backward: cache does not match params");
    }
    if (grad_params.w_f.rows() != hidden || grad_params.w_f.cols() != params.w_f.cols()) {
        throw ShapeError("lstm_cell_backward: gradient accumulator does not match params");
    }
    Vector grad_z(params.w_f.cols());
    Vector scratch(4 * hidden);
    CellGradients out;
    out.grad_c_prev.resize(hidden);
    detail::cell_backward_kernel(params, grad_h, grad_c,
                                 {cache.concat_input, cache.f, cache.i, cache.c_tilde, cache.o, cache.tanh_c}, prev.c,
                                 grad_params, grad_z, out.grad_c_prev, scratch);
    out.grad_h_prev.assign(grad_z.begin(), grad_z.begin() + static_cast<std::ptrdiff_t>(hidden));
    out.grad_x.assign(grad_z.begin() + static_cast<std::ptrdiff_t>(hidden), grad_z.end());
    return out;
}

/// Convenience form returning freshly allocated parameter gradients.
struct CellBackwardResult {
    CellGradients grads;
    LstmCellParams grad_params;
};

inline CellBackwardResult lstm_cell_backward(std::span<const double> grad_h, std::span<const double> grad_c,
                                             const CellCache& cache, const LstmState& prev,
                                             const LstmCellParams& params) {
    CellBackwardResult r;
    r.grad_params = LstmCellParams::zeros(params.hidden(), params.input());
    r.grads = lstm_cell_backward(grad_h, grad_c, cache, prev, params, r.grad_params);
    return r;
}

/// Unrolled pass over a whole sequence. Row t of every matrix belongs to timestep t.
struct SequenceResult {
    Matrix hidden_states; // lookback x hidden
    LstmState initial;
    LstmState final_state;
    Matrix concat_inputs; // lookback x (hidden + input)
    Matrix f, i, c_tilde, o, c, tanh_c;

    std::size_t steps() const noexcept { return hidden_states.rows(); }

    /// Copy of the cached activations of step t.
    CellCache cache(std::size_t t) const {
        auto v = [t](const Matrix& m) { return Vector(m.row(t).begin(), m.row(t).end()); };
        return {v(concat_inputs), v(f), v(i), v(c_tilde), v(o), v(c), v(tanh_c)};
    }
};

inline SequenceResult lstm_sequence_forward(const Matrix& seq, const LstmCellParams& params, const LstmState& init) {
    if (seq.rows() == 0) throw ArgumentError("lstm_sequence_forward: empty sequence");
    if (seq.cols() != params.input()) {
        throw ShapeError("lstm_sequence_forward: sequence " + seq.shape() + " does not match cell input " +
                         std::to_string(params.input()));
    }
    const std::size_t steps = seq.rows();
    const std::size_t hidden = params.hidden();
    require_length(init.h, hidden, "lstm_sequence_forward initial h");
    require_length(init.c, hidden, "lstm_sequence_forward initial c");
    SequenceResult r;
    r.initial = init;
    r.hidden_states = r.f = r.i = r.c_tilde = r.o = r.c = r.tanh_c = Matrix(steps, hidden);
    r.concat_inputs = Matrix(steps, hidden + params.input());
    for (std::size_t t = 0; t < steps; ++t) {
        std::span<const double> h_prev = t == 0 ? std::span<const double>(init.h) : r.hidden_states.row(t - 1);
        std::span<const double> c_prev = t == 0 ? std::span<const double>(init.c) : r.c.row(t - 1);
        detail::cell_forward_kernel(params, seq.row(t), h_prev, c_prev,
                                    {r.concat_inputs.row(t), r.f.row(t), r.i.row(t), r.c_tilde.row(t), r.o.row(t),
                                     r.c.row(t), r.tanh_c.row(t), r.hidden_states.row(t)});
    }
    auto last_h = r.hidden_states.row(steps - 1);
    auto last_c = r.c.row(steps - 1);
    r.final_state = {Vector(last_h.begin(), last_h.end()), Vector(last_c.begin(), last_c.end())};
    return r;
}

inline SequenceResult lstm_sequence_forward(const Matrix& seq, const LstmCellParams& params) {
    return lstm_sequence_forward(seq, params, LstmState::zeros(params.hidden()));
}

/**
 * BPTT over a sequence. `grad_hidden` holds the upstream gradient for every
 * emitted hidden state (lookback x hidden). Returns the gradient with respect
 * to the input sequence; parameter gradients accumulate into `grad_params`.
 */
inline Matrix lstm_sequence_backward(const Matrix& grad_hidden, const SequenceResult& fwd, const LstmCellParams& params,
                                     LstmCellParams& grad_params) {
    const std::size_t steps = fwd.steps();
    const std::size_t hidden = params.hidden();
    if (grad_hidden.rows() != steps || grad_hidden.cols() != hidden || fwd.f.cols() != hidden ||
        fwd.concat_inputs.cols() != params.w_f.cols()) {
        throw InternalError("lstm_sequence_backward: upstream gradient " + grad_hidden.shape() +
                            " does not match cached sequence of " + std::to_string(steps) + " steps");
    }
    if (grad_params.w_f.rows() != hidden || grad_params.w_f.cols() != params.w_f.cols()) {
        throw ShapeError("lstm_sequence_backward: gradient accumulator does not match params");
    }
    Matrix grad_seq(steps, params.input());
    Vector dh(hidden);
    Vector dc(hidden, 0.0);
    Vector dc_prev(hidden);
    Vector grad_z(hidden + params.input(), 0.0);
    Vector scratch(4 * hidden);
    for (std::size_t t = steps; t-- > 0;) {
        auto up = grad_hidden.row(t);
        for (std::size_t j = 0; j < hidden; ++j) dh[j] = up[j] + grad_z[j]; // grad_z still holds step t+1's dh_prev
        std::span<const double> c_prev = t == 0 ? std::span<const double>(fwd.initial.c) : fwd.c.row(t - 1);
        detail::cell_backward_kernel(params, dh, dc,
                                     {fwd.concat_inputs.row(t), fwd.f.row(t), fwd.i.row(t), fwd.c_tilde.row(t),
                                      fwd.o.row(t), fwd.tanh_c.row(t)},
                                     c_prev, grad_params, grad_z, dc_prev, scratch);
        std::copy(grad_z.begin() + static_cast<std::ptrdiff_t>(hidden), grad_z.end(), grad_seq.row(t).begin());
        std::swap(dc, dc_prev);
    }
    return grad_seq;
}

inline Matrix reverse_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t t = 0; t < m.rows(); ++t) {
        auto src = m.row(m.rows() - 1 - t);
        std::copy(src.begin(), src.end(), out.row(t).begin());
    }
    return out;
}

/**
 * One recurrent layer of the autoencoder.
 *
 * With `backward_cell` present this is a Bi-LSTM layer: the backward cell runs
 * over the time-reversed sequence and its outputs are re-aligned to forward
 * time before concatenation. Without it the layer is a plain LSTM, used for
 * the unidirectional baseline.
 */
struct BiLstmLayerParams {
    LstmCellParams forward_cell;
    std::optional<LstmCellParams> backward_cell;
    bool return_sequences = true;

    bool bidirectional() const noexcept { return backward_cell.has_value(); }
    std::size_t hidden() const noexcept { return forward_cell.hidden(); }
    std::size_t input() const noexcept { return forward_cell.input(); }
    std::size_t output_width() const noexcept { return bidirectional() ? 2 * hidden() : hidden(); }

    void validate() const {
        forward_cell.validate();
        if (backward_cell) {
            backward_cell->validate();
            if (backward_cell->hidden() != forward_cell.hidden() || backward_cell->input() != forward_cell.input()) {
                throw ShapeError("BiLstmLayerParams: forward and backward cells differ in size");
            }
        }
    }

    friend bool operator==(const BiLstmLayerParams&, const BiLstmLayerParams&) = default;
};

struct LayerCache {
    SequenceResult forward_pass;
    std::optional<SequenceResult> backward_pass; // over the reversed sequence
    bool return_sequences = true;
};

struct LayerOutput {
    Matrix output; // lookback x width when return_sequences, else 1 x width
    LayerCache cache;
};

inline LayerOutput recurrent_layer_forward(const Matrix& seq, const BiLstmLayerParams& layer) {
    const std::size_t steps = seq.rows();
    const std::size_t hidden = layer.hidden();
    LayerOutput out;
    out.cache.return_sequences = layer.return_sequences;
    out.cache.forward_pass = lstm_sequence_forward(seq, layer.forward_cell);
    if (layer.backward_cell) out.cache.backward_pass = lstm_sequence_forward(reverse_rows(seq), *layer.backward_cell);

    const SequenceResult& f = out.cache.forward_pass;
    const std::size_t width = layer.output_width();
    if (layer.return_sequences) {
        out.output = Matrix(steps, width);
        for (std::size_t t = 0; t < steps; ++t) {
            auto dst = out.output.row(t);
            auto fh = f.hidden_states.row(t);
            std::copy(fh.begin(), fh.end(), dst.begin());
            if (out.cache.backward_pass) {
                auto bh = out.cache.backward_pass->hidden_states.row(steps - 1 - t);
                std::copy(bh.begin(), bh.end(), dst.begin() + static_cast<std::ptrdiff_t>(hidden));
            }
        }
    } else {
        out.output = Matrix(1, width);
        auto dst = out.output.row(0);
        std::copy(f.final_state.h.begin(), f.final_state.h.end(), dst.begin());
        if (out.cache.backward_pass) {
            const Vector& bh = out.cache.backward_pass->final_state.h;
            std::copy(bh.begin(), bh.end(), dst.begin() + static_cast<std::ptrdiff_t>(hidden));
        }
    }
    return out;
}

/// Bidirectional layer forward. Requires a backward cell.
inline LayerOutput bilstm_forward(const Matrix& seq, const BiLstmLayerParams& layer) {
    if (!layer.bidirectional()) throw ArgumentError("bilstm_forward: layer has no backward cell");
    return recurrent_layer_forward(seq, layer);
}

/**
 * Backward through a recurrent layer. `grad_output` has the shape of the
 * forward output. Returns the gradient with respect to the layer input, which
 * is the sum of both directions' input gradients at each timestep.
 */
inline Matrix recurrent_layer_backward(const Matrix& grad_output, const LayerCache& cache,
                                       const BiLstmLayerParams& layer, BiLstmLayerParams& grads) {
    const std::size_t steps = cache.forward_pass.steps();
    const std::size_t hidden = layer.hidden();
    if (cache.backward_pass.has_value() != layer.bidirectional() ||
        grads.backward_cell.has_value() != layer.bidirectional()) {
        throw InternalError("recurrent_layer_backward: cache/gradient directions do not match layer");
    }
    if (grad_output.cols() != layer.output_width() ||
        grad_output.rows() != (cache.return_sequences ? steps : std::size_t{1})) {
        throw InternalError("recurrent_layer_backward: upstream gradient " + grad_output.shape() +
                            " does not match layer output");
    }

    Matrix grad_fwd(steps, hidden);
    Matrix grad_bwd(layer.bidirectional() ? steps : 0, hidden);
    if (cache.return_sequences) {
        for (std::size_t t = 0; t < steps; ++t) {
            auto g = grad_output.row(t);
            std::copy(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(hidden), grad_fwd.row(t).begin());
            if (layer.bidirectional()) {
                std::copy(g.begin() + static_cast<std::ptrdiff_t>(hidden), g.end(),
                          grad_bwd.row(steps - 1 - t).begin());
            }
        }
    } else {
        auto g = grad_output.row(0);
        std::copy(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(hidden), grad_fwd.row(steps - 1).begin());
        if (layer.bidirectional()) {
            std::copy(g.begin() + static_cast<std::ptrdiff_t>(hidden), g.end(), grad_bwd.row(steps - 1).begin());
        }
    }

    Matrix grad_input = lstm_sequence_backward(grad_fwd, cache.forward_pass, layer.forward_cell, grads.forward_cell);
    if (layer.bidirectional()) {
        Matrix grad_rev =
            lstm_sequence_backward(grad_bwd, *cache.backward_pass, *layer.backward_cell, *grads.backward_cell);
        for (std::size_t t = 0; t < steps; ++t) {
            auto dst = grad_input.row(t);
            auto src = grad_rev.row(steps - 1 - t);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
    return grad_input;
}

inline Matrix bilstm_backward(const Matrix& grad_output, const LayerCache& cache, const BiLstmLayerParams& layer,
                              BiLstmLayerParams& grads) {
    if (!layer.bidirectional()) throw ArgumentError("bilstm_backward: layer has no backward cell");
    return recurrent_layer_backward(grad_output, cache, layer, grads);
}

inline BiLstmLayerParams zeros_like(const BiLstmLayerParams& layer) {
    BiLstmLayerParams z;
    z.forward_cell = LstmCellParams::zeros(layer.hidden(), layer.input());
    if (layer.backward_cell) z.backward_cell = LstmCellParams::zeros(layer.hidden(), layer.input());
    z.return_sequences = layer.return_sequences;
    return z;
}

/// Stacks `t` copies of `v` as rows.
inline Matrix repeat_vector(std::span<const double> v, std::size_t t) {
    if (t == 0) throw ArgumentError("repeat_vector: t must be >= 1");
    Matrix out(t, v.size());
    for (std::size_t r = 0; r < t; ++r) std::copy(v.begin(), v.end(), out.row(r).begin());
    return out;
}

/// Gradient of repeat_vector: sum over the copies.
inline Vector repeat_vector_backward(const Matrix& grad) {
    Vector out(grad.cols(), 0.0);
    for (std::size_t r = 0; r < grad.rows(); ++r) {
        auto g = grad.row(r);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += g[j];
    }
    return out;
}

/// Same affine map y_t = W h_t + b at every timestep; W is features x width. No activation.
inline Matrix time_distributed_dense(const Matrix& seq, const Matrix& w, std::span<const double> b) {
    if (seq.cols() != w.cols()) {
        throw ShapeError("time_distributed_dense: sequence " + seq.shape() + " does not match weights " + w.shape());
    }
    require_length(b, w.rows(), "time_distributed_dense bias");
    Matrix out(seq.rows(), w.rows());
    for (std::size_t t = 0; t < seq.rows(); ++t) {
        Vector y = matvec(w, seq.row(t));
        auto dst = out.row(t);
        for (std::size_t k = 0; k < y.size(); ++k) dst[k] = y[k] + b[k];
    }
    return out;
}

/// Returns the gradient with respect to `seq`; accumulates weight and bias gradients.
inline Matrix time_distributed_dense_backward(const Matrix& grad_out, const Matrix& seq, const Matrix& w,
                                              Matrix& grad_w, Vector& grad_b) {
    if (grad_out.rows() != seq.rows() || grad_out.cols() != w.rows()) {
        throw ShapeError("time_distributed_dense_backward: upstream " + grad_out.shape() + " does not match output");
    }
    Matrix grad_seq(seq.rows(), seq.cols());
    for (std::size_t t = 0; t < seq.rows(); ++t) {
        auto g = grad_out.row(t);
        outer_accumulate(grad_w, g, seq.row(t));
        for (std::size_t k = 0; k < g.size(); ++k) grad_b[k] += g[k];
        matvec_transpose_accumulate(w, g, grad_seq.row(t));
    }
    return grad_seq;
}

} // namespace bilstm_ae
