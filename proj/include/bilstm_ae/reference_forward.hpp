#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "model.hpp"

namespace bilstm_ae {

/**
 * Extended-precision mirror of a model with a scalar-loop forward pass.
 *
 * Written independently of the library kernels. The gradient checker
 * perturbs parameters here, so finite differences are not limited by double
 * round-off on tiny gradients.
 */
class ReferenceModel {
public:
    using Real = long double;
    using Rows = std::vector<std::vector<Real>>;

    explicit ReferenceModel(const ModelParams& m) : lookback_(m.config.lookback), features_(m.config.features) {
        for (const auto& l : m.encoder) encoder_.push_back(mirror(l));
        for (const auto& l : m.decoder) decoder_.push_back(mirror(l));
        proj_w_.assign(m.projection_w.data().begin(), m.projection_w.data().end());
        proj_b_.assign(m.projection_b.begin(), m.projection_b.end());
        proj_in_ = m.projection_w.cols();
        for (auto* layers : {&encoder_, &decoder_}) {
            for (auto& l : *layers) {
                add_slots(l.fwd);
                if (l.bwd) add_slots(*l.bwd);
            }
        }
        for (Real& v : proj_w_) slots_.push_back(&v);
        for (Real& v : proj_b_) slots_.push_back(&v);
    }

    ReferenceModel(const ReferenceModel&) = delete;
    ReferenceModel& operator=(const ReferenceModel&) = delete;

    /// Parameter k in canonical tensor order.
    Real& parameter(std::size_t k) { return *slots_.at(k); }
    std::size_t parameter_count() const noexcept { return slots_.size(); }

    /// Reconstruction of `window`, lookback x features.
    Rows forward(const Matrix& window) const {
        Rows act(lookback_, std::vector<Real>(features_));
        for (std::size_t t = 0; t < lookback_; ++t)
            for (std::size_t f = 0; f < features_; ++f) act[t][f] = window(t, f);
        for (const auto& l : encoder_) act = run_layer(l, act);
        const std::vector<Real> code = act.front();
        act.assign(lookback_, code);
        for (const auto& l : decoder_) act = run_layer(l, act);
        Rows out(lookback_, std::vector<Real>(features_));
        for (std::size_t t = 0; t < lookback_; ++t) {
            for (std::size_t f = 0; f < features_; ++f) {
                Real s = proj_b_[f];
                for (std::size_t k = 0; k < proj_in_; ++k) s += proj_w_[f * proj_in_ + k] * act[t][k];
                out[t][f] = s;
            }
        }
        return out;
    }

private:
    struct Cell {
        std::size_t hidden = 0, input = 0;
        std::vector<Real> w[4]; // f, i, c, o; hidden x (hidden + input)
        std::vector<Real> b[4];
    };
    struct Layer {
        Cell fwd;
        std::optional<Cell> bwd;
        bool return_sequences = true;
    };

    static Cell mirror(const LstmCellParams& p) {
        Cell c;
        c.hidden = p.hidden();
        c.input = p.input();
        const Matrix* w[4] = {&p.w_f, &p.w_i, &p.w_c, &p.w_o};
        const Vector* b[4] = {&p.b_f, &p.b_i, &p.b_c, &p.b_o};
        for (int g = 0; g < 4; ++g) {
            c.w[g].assign(w[g]->data().begin(), w[g]->data().end());
            c.b[g].assign(b[g]->begin(), b[g]->end());
        }
        return c;
    }

    static Layer mirror(const BiLstmLayerParams& l) {
        Layer out;
        out.fwd = mirror(l.forward_cell);
        if (l.backward_cell) out.bwd = mirror(*l.backward_cell);
        out.return_sequences = l.return_sequences;
        return out;
    }

    void add_slots(Cell& c) {
        for (auto& w : c.w)
            for (Real& v : w) slots_.push_back(&v);
        for (auto& b : c.b)
            for (Real& v : b) slots_.push_back(&v);
    }

    static Real sigmoid(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

    // Hidden states for every step of `seq`.
    static Rows run_cell(const Cell& c, const Rows& seq) {
        const std::size_t H = c.hidden, I = c.input, cols = H + I;
        std::vector<Real> h(H, 0.0L), cs(H, 0.0L), z(cols);
        Rows out;
        for (const auto& x : seq) {
            for (std::size_t k = 0; k < H; ++k) z[k] = h[k];
            for (std::size_t k = 0; k < I; ++k) z[H + k] = x[k];
            for (std::size_t j = 0; j < H; ++j) {
                Real pre[4];
                for (int g = 0; g < 4; ++g) {
                    pre[g] = c.b[g][j];
                    for (std::size_t k = 0; k < cols; ++k) pre[g] += c.w[g][j * cols + k] * z[k];
                }
                cs[j] = sigmoid(pre[0]) * cs[j] + sigmoid(pre[1]) * std::tanh(pre[2]);
                h[j] = sigmoid(pre[3]) * std::tanh(cs[j]);
            }
            out.push_back(h);
        }
        return out;
    }

    static Rows run_layer(const Layer& l, const Rows& seq) {
        const Rows f = run_cell(l.fwd, seq);
        std::optional<Rows> b;
        if (l.bwd) b = run_cell(*l.bwd, Rows(seq.rbegin(), seq.rend()));
        const std::size_t T = seq.size();
        auto join = [&](std::size_t tf, std::size_t tb) {
            std::vector<Real> row = f[tf];
            if (b) row.insert(row.end(), (*b)[tb].begin(), (*b)[tb].end());
            return row;
        };
        Rows out;
        if (l.return_sequences) {
            for (std::size_t t = 0; t < T; ++t) out.push_back(join(t, T - 1 - t));
        } else {
            out.push_back(join(T - 1, T - 1));
        }
        return out;
    }

    std::size_t lookback_, features_, proj_in_ = 0;
    std::vector<Layer> encoder_, decoder_;
    std::vector<Real> proj_w_, proj_b_;
    std::vector<Real*> slots_;
};

} // namespace bilstm_ae
