#include <bilstm_ae/lstm.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

using namespace bilstm_ae;

namespace {

Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
    return m;
}

LstmCellParams random_cell(Rng& rng, std::size_t hidden, std::size_t input) {
    LstmCellParams p = LstmCellParams::zeros(hidden, input);
    for (Matrix* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) *w = random_matrix(rng, hidden, hidden + input);
    for (Vector* b : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) *b = random_vector(rng, hidden);
    return p;
}

std::vector<std::span<double>> tensors(LstmCellParams& p) {
    return {p.w_f.data(), p.w_i.data(), p.w_c.data(), p.w_o.data(), p.b_f, p.b_i, p.b_c, p.b_o};
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-12}); }

// Scalar loop evaluation of the gate equations, term by term, without the library kernels.
struct ScalarCell {
    std::vector<double> h, c;
};

ScalarCell scalar_cell(const LstmCellParams& p, const Vector& x, const Vector& h_prev, const Vector& c_prev) {
    const std::size_t H = h_prev.size(), I = x.size();
    auto gate = [&](const Matrix& w, const Vector& b, std::size_t j) {
        double a = b[j];
        for (std::size_t k = 0; k < H; ++k) a += w(j, k) * h_prev[k];
        for (std::size_t k = 0; k < I; ++k) a += w(j, H + k) * x[k];
        return a;
    };
    ScalarCell out{std::vector<double>(H), std::vector<double>(H)};
    for (std::size_t j = 0; j < H; ++j) {
        const double f = 1.0 / (1.0 + std::exp(-gate(p.w_f, p.b_f, j)));
        const double g = std::tanh(gate(p.w_c, p.b_c, j));
        const double i = 1.0 / (1.0 + std::exp(-gate(p.w_i, p.b_i, j)));
        const double c = f * c_prev[j] + i * g;
        const double o = 1.0 / (1.0 + std::exp(-gate(p.w_o, p.b_o, j)));
        out.c[j] = c;
        out.h[j] = o * std::tanh(c);
    }
    return out;
}

} // namespace

TEST(LstmCell, ZeroParametersGiveZeroState) {
    const auto p = LstmCellParams::zeros(3, 2);
    const auto step = lstm_cell_forward(Vector{0.7, -2.0}, LstmState::zeros(3), p);
    for (double v : step.next.h) EXPECT_EQ(v, 0.0);
    for (double v : step.next.c) EXPECT_EQ(v, 0.0);
    for (double v : step.cache.f) EXPECT_EQ(v, 0.5);
    for (double v : step.cache.c_tilde) EXPECT_EQ(v, 0.0);
}

TEST(LstmCell, SaturatedForgetGateCarriesCellState) {
    auto p = LstmCellParams::zeros(2, 1);
    std::fill(p.b_f.begin(), p.b_f.end(), 100.0);
    const LstmState prev{Vector{0.0, 0.0}, Vector{0.8, -1.5}};
    const auto step = lstm_cell_forward(Vector{3.0}, prev, p);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_DOUBLE_EQ(step.next.c[j], prev.c[j]);
        EXPECT_DOUBLE_EQ(step.next.h[j], 0.5 * std::tanh(prev.c[j]));
    }
}

TEST(LstmCell, MatchesScalarOracle) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t H = 1 + rng.below(4), I = 1 + rng.below(4);
        const auto p = random_cell(rng, H, I);
        const Vector x = random_vector(rng, I, -2, 2);
        const LstmState prev{random_vector(rng, H), random_vector(rng, H, -2, 2)};
        const auto step = lstm_cell_forward(x, prev, p);
        const auto ref = scalar_cell(p, x, prev.h, prev.c);
        for (std::size_t j = 0; j < H; ++j) {
            EXPECT_NEAR(step.next.h[j], ref.h[j], 1e-12);
            EXPECT_NEAR(step.next.c[j], ref.c[j], 1e-12);
        }
    }
}

TEST(LstmCell, CacheHoldsIntermediates) {
    Rng rng(2);
    const auto p = random_cell(rng, 2, 3);
    const LstmState prev{random_vector(rng, 2), random_vector(rng, 2)};
    const Vector x = random_vector(rng, 3);
    const auto step = lstm_cell_forward(x, prev, p);
    EXPECT_EQ(step.cache.concat_input, concat(prev.h, x));
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_DOUBLE_EQ(step.cache.tanh_c[j], std::tanh(step.cache.c[j]));
        EXPECT_DOUBLE_EQ(step.next.h[j], step.cache.o[j] * step.cache.tanh_c[j]);
    }
}

TEST(LstmCell, ShapeMismatchRejected) {
    const auto p = LstmCellParams::zeros(2, 2);
    EXPECT_THROW(lstm_cell_forward(Vector{1.0}, LstmState::zeros(2), p), ShapeError);
    EXPECT_THROW(lstm_cell_forward(Vector{1.0, 2.0}, LstmState::zeros(3), p), ShapeError);
    EXPECT_THROW(LstmCellParams::zeros(0, 2), ArgumentError);
}

TEST(LstmCellBackward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(4);
    const auto p = random_cell(rng, 3, 2);
    const LstmState prev{random_vector(rng, 3), random_vector(rng, 3)};
    const auto step = lstm_cell_forward(random_vector(rng, 2), prev, p);
    const auto r = lstm_cell_backward(Vector(3, 0.0), Vector(3, 0.0), step.cache, prev, p);
    for (double v : r.grads.grad_x) EXPECT_EQ(v, 0.0);
    for (double v : r.grads.grad_h_prev) EXPECT_EQ(v, 0.0);
    for (double v : r.grads.grad_c_prev) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(r.grad_params, LstmCellParams::zeros(3, 2));
}

TEST(LstmCellBackward, LinearInUpstreamGradient) {
    Rng rng(5);
    auto p = random_cell(rng, 3, 2);
    const LstmState prev{random_vector(rng, 3), random_vector(rng, 3)};
    const auto step = lstm_cell_forward(random_vector(rng, 2), prev, p);
    const Vector gh = random_vector(rng, 3), gc = random_vector(rng, 3);
    const double alpha = -2.5;
    Vector gh2 = gh, gc2 = gc;
    for (auto& v : gh2) v *= alpha;
    for (auto& v : gc2) v *= alpha;
    auto r1 = lstm_cell_backward(gh, gc, step.cache, prev, p);
    auto r2 = lstm_cell_backward(gh2, gc2, step.cache, prev, p);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(r2.grads.grad_x[k], alpha * r1.grads.grad_x[k], 1e-12);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(r2.grads.grad_h_prev[k], alpha * r1.grads.grad_h_prev[k], 1e-12);
        EXPECT_NEAR(r2.grads.grad_c_prev[k], alpha * r1.grads.grad_c_prev[k], 1e-12);
    }
    auto t1 = tensors(r1.grad_params), t2 = tensors(r2.grad_params);
    for (std::size_t t = 0; t < t1.size(); ++t)
        for (std::size_t k = 0; k < t1[t].size(); ++k) EXPECT_NEAR(t2[t][k], alpha * t1[t][k], 1e-12);
}

TEST(LstmCellBackward, MatchesFiniteDifferences) {
    Rng rng(6);
    const std::size_t H = 3, I = 2;
    auto p = random_cell(rng, H, I);
    Vector x = random_vector(rng, I);
    LstmState prev{random_vector(rng, H), random_vector(rng, H)};
    const Vector a_h = random_vector(rng, H), a_c = random_vector(rng, H);
    auto objective = [&]() {
        const auto s = lstm_cell_forward(x, prev, p);
        double L = 0.0;
        for (std::size_t j = 0; j < H; ++j) L += a_h[j] * s.next.h[j] + a_c[j] * s.next.c[j];
        return L;
    };
    const auto step = lstm_cell_forward(x, prev, p);
    auto r = lstm_cell_backward(a_h, a_c, step.cache, prev, p);

    const double eps = 1e-5;
    double worst = 0.0;
    auto check = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + eps;
        const double up = objective();
        slot = saved - eps;
        const double down = objective();
        slot = saved;
        worst = std::max(worst, rel_err(analytic, (up - down) / (2 * eps)));
    };
    auto pt = tensors(p), gt = tensors(r.grad_params);
    for (std::size_t t = 0; t < pt.size(); ++t)
        for (std::size_t k = 0; k < pt[t].size(); ++k) check(pt[t][k], gt[t][k]);
    for (std::size_t k = 0; k < I; ++k) check(x[k], r.grads.grad_x[k]);
    for (std::size_t k = 0; k < H; ++k) check(prev.h[k], r.grads.grad_h_prev[k]);
    for (std::size_t k = 0; k < H; ++k) check(prev.c[k], r.grads.grad_c_prev[k]);
    EXPECT_LT(worst, 1e-4);
}

TEST(LstmCellBackward, AccumulatesIntoExistingGradients) {
    Rng rng(7);
    const auto p = random_cell(rng, 2, 2);
    const LstmState prev{random_vector(rng, 2), random_vector(rng, 2)};
    const auto step = lstm_cell_forward(random_vector(rng, 2), prev, p);
    const Vector gh = random_vector(rng, 2), gc = random_vector(rng, 2);
    auto once = lstm_cell_backward(gh, gc, step.cache, prev, p).grad_params;
    auto twice = LstmCellParams::zeros(2, 2);
    lstm_cell_backward(gh, gc, step.cache, prev, p, twice);
    lstm_cell_backward(gh, gc, step.cache, prev, p, twice);
    auto a = tensors(once), b = tensors(twice);
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t k = 0; k < a[t].size(); ++k) EXPECT_DOUBLE_EQ(b[t][k], 2 * a[t][k]);
    auto wrong = LstmCellParams::zeros(3, 2);
    EXPECT_THROW(lstm_cell_backward(gh, gc, step.cache, prev, p, wrong), ShapeError);
}

TEST(LstmSequence, SingleStepEqualsCell) {
    Rng rng(8);
    const auto p = random_cell(rng, 3, 2);
    const Matrix seq = random_matrix(rng, 1, 2);
    const auto r = lstm_sequence_forward(seq, p);
    const auto step = lstm_cell_forward(seq.row(0), LstmState::zeros(3), p);
    EXPECT_EQ(r.final_state.h, step.next.h);
    EXPECT_EQ(r.final_state.c, step.next.c);
}

TEST(LstmSequence, EqualsChainedCells) {
    Rng rng(9);
    const auto p = random_cell(rng, 3, 2);
    const Matrix seq = random_matrix(rng, 4, 2);
    const auto r = lstm_sequence_forward(seq, p);
    LstmState s = LstmState::zeros(3);
    for (std::size_t t = 0; t < 4; ++t) {
        s = lstm_cell_forward(seq.row(t), s, p).next;
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.hidden_states(t, j), s.h[j]);
        const CellCache k = r.cache(t);
        EXPECT_EQ(k.c, s.c);
    }
    EXPECT_EQ(r.final_state.h, s.h);
    EXPECT_EQ(r.final_state.c, s.c);
}

TEST(LstmSequence, ZeroParamsGiveZeroHiddenStates) {
    Rng rng(10);
    const auto r = lstm_sequence_forward(random_matrix(rng, 6, 3), LstmCellParams::zeros(2, 3));
    for (double v : r.hidden_states.data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmSequence, HiddenStatesBounded) {
    Rng rng(11);
    auto p = random_cell(rng, 4, 2);
    for (Matrix* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) *w = scale(*w, 20.0);
    const auto r = lstm_sequence_forward(scale(random_matrix(rng, 20, 2), 50.0), p);
    for (double v : r.hidden_states.data()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(LstmSequence, SaturatedForgetCarriesInitialCell) {
    auto p = LstmCellParams::zeros(2, 1);
    std::fill(p.b_f.begin(), p.b_f.end(), 100.0);
    const LstmState init{Vector{0, 0}, Vector{0.3, -0.9}};
    const auto r = lstm_sequence_forward(Matrix(5, 1, 1.0), p, init);
    for (std::size_t t = 0; t < 5; ++t) {
        EXPECT_DOUBLE_EQ(r.c(t, 0), 0.3);
        EXPECT_DOUBLE_EQ(r.c(t, 1), -0.9);
    }
}

TEST(LstmSequence, EmptyOrMismatchedSequenceRejected) {
    const auto p = LstmCellParams::zeros(2, 2);
    EXPECT_THROW(lstm_sequence_forward(Matrix(0, 2), p), ArgumentError);
    EXPECT_THROW(lstm_sequence_forward(Matrix(3, 1), p), ShapeError);
}

TEST(LstmSequenceBackward, MatchesFiniteDifferences) {
    for (std::size_t H : {1u, 2u, 3u}) {
        for (std::size_t T : {1u, 2u, 5u}) {
            Rng rng(100 + 10 * H + T);
            auto p = random_cell(rng, H, 2);
            Matrix seq = random_matrix(rng, T, 2);
            const Matrix G = random_matrix(rng, T, H);
            auto objective = [&]() {
                const auto r = lstm_sequence_forward(seq, p);
                double L = 0.0;
                for (std::size_t k = 0; k < G.size(); ++k) L += G.data()[k] * r.hidden_states.data()[k];
                return L;
            };
            const auto fwd = lstm_sequence_forward(seq, p);
            auto grads = LstmCellParams::zeros(H, 2);
            const Matrix grad_seq = lstm_sequence_backward(G, fwd, p, grads);
            const double eps = 1e-5;
            double worst = 0.0;
            auto check = [&](double& slot, double analytic) {
                const double saved = slot;
                slot = saved + eps;
                const double up = objective();
                slot = saved - eps;
                const double down = objective();
                slot = saved;
                worst = std::max(worst, rel_err(analytic, (up - down) / (2 * eps)));
            };
            auto pt = tensors(p), gt = tensors(grads);
            for (std::size_t t = 0; t < pt.size(); ++t)
                for (std::size_t k = 0; k < pt[t].size(); ++k) check(pt[t][k], gt[t][k]);
            for (std::size_t k = 0; k < seq.size(); ++k) check(seq.data()[k], grad_seq.data()[k]);
            EXPECT_LT(worst, 1e-4) << "hidden " << H << " lookback " << T;
        }
    }
}

TEST(LstmSequenceBackward, MismatchedGradientIsInternalError) {
    Rng rng(12);
    const auto p = random_cell(rng, 2, 2);
    const auto fwd = lstm_sequence_forward(random_matrix(rng, 3, 2), p);
    auto grads = LstmCellParams::zeros(2, 2);
    EXPECT_THROW(lstm_sequence_backward(Matrix(4, 2), fwd, p, grads), InternalError);
}

namespace {

BiLstmLayerParams random_layer(Rng& rng, std::size_t hidden, std::size_t input, bool return_sequences) {
    BiLstmLayerParams layer;
    layer.forward_cell = random_cell(rng, hidden, input);
    layer.backward_cell = random_cell(rng, hidden, input);
    layer.return_sequences = return_sequences;
    return layer;
}

} // namespace

TEST(BiLstm, OutputWidthIsTwiceHidden) {
    Rng rng(13);
    const auto layer = random_layer(rng, 3, 2, true);
    const auto out = bilstm_forward(random_matrix(rng, 5, 2), layer);
    EXPECT_EQ(out.output.rows(), 5u);
    EXPECT_EQ(out.output.cols(), 6u);
}

TEST(BiLstm, MatchesTwoIndependentPasses) {
    Rng rng(14);
    for (bool seqs : {true, false}) {
        const auto layer = random_layer(rng, 2, 3, seqs);
        const Matrix seq = random_matrix(rng, 3, 3);
        const auto out = bilstm_forward(seq, layer);

        // Oracle: run each direction through chained cells and concatenate.
        std::vector<Vector> fwd_h, bwd_h(3);
        LstmState s = LstmState::zeros(2);
        for (std::size_t t = 0; t < 3; ++t) {
            s = lstm_cell_forward(seq.row(t), s, layer.forward_cell).next;
            fwd_h.push_back(s.h);
        }
        s = LstmState::zeros(2);
        for (std::size_t t = 3; t-- > 0;) {
            s = lstm_cell_forward(seq.row(t), s, *layer.backward_cell).next;
            bwd_h[t] = s.h;
        }
        if (seqs) {
            for (std::size_t t = 0; t < 3; ++t) {
                const Vector expected = concat(fwd_h[t], bwd_h[t]);
                for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out.output(t, j), expected[j]);
            }
        } else {
            // Final states: the forward pass ends at t = T-1, the backward pass at t = 0.
            const Vector expected = concat(fwd_h[2], bwd_h[0]);
            ASSERT_EQ(out.output.rows(), 1u);
            for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out.output(0, j), expected[j]);
        }
    }
}

TEST(BiLstm, BackwardHalfIsUnidirectionalPassOnReversedSequence) {
    Rng rng(15);
    const auto layer = random_layer(rng, 3, 2, true);
    const Matrix seq = random_matrix(rng, 6, 2);
    const auto out = bilstm_forward(seq, layer);
    const auto rev = lstm_sequence_forward(reverse_rows(seq), *layer.backward_cell);
    const Matrix realigned = reverse_rows(rev.hidden_states);
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.output(t, 3 + j), realigned(t, j));
}

TEST(BiLstm, RequiresBackwardCell) {
    Rng rng(16);
    BiLstmLayerParams layer;
    layer.forward_cell = random_cell(rng, 2, 2);
    EXPECT_THROW(bilstm_forward(Matrix(3, 2), layer), ArgumentError);
    EXPECT_NO_THROW(recurrent_layer_forward(Matrix(3, 2), layer));
    EXPECT_EQ(recurrent_layer_forward(Matrix(3, 2), layer).output.cols(), 2u);
}

TEST(BiLstmBackward, ZeroUpstreamGivesZero) {
    Rng rng(18);
    const auto layer = random_layer(rng, 2, 2, true);
    const auto out = bilstm_forward(random_matrix(rng, 3, 2), layer);
    auto grads = zeros_like(layer);
    const Matrix gin = bilstm_backward(Matrix(3, 4), out.cache, layer, grads);
    for (double v : gin.data()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(grads, zeros_like(layer));
}

TEST(BiLstmBackward, MatchesFiniteDifferences) {
    for (bool seqs : {true, false}) {
        Rng rng(seqs ? 19 : 20);
        auto layer = random_layer(rng, 2, 2, seqs);
        Matrix seq = random_matrix(rng, 3, 2);
        const Matrix G = random_matrix(rng, seqs ? 3 : 1, 4);
        auto objective = [&]() {
            const auto out = bilstm_forward(seq, layer);
            double L = 0.0;
            for (std::size_t k = 0; k < G.size(); ++k) L += G.data()[k] * out.output.data()[k];
            return L;
        };
        const auto out = bilstm_forward(seq, layer);
        auto grads = zeros_like(layer);
        const Matrix gin = bilstm_backward(G, out.cache, layer, grads);
        const double eps = 1e-5;
        double worst = 0.0;
        auto check = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + eps;
            const double up = objective();
            slot = saved - eps;
            const double down = objective();
            slot = saved;
            worst = std::max(worst, rel_err(analytic, (up - down) / (2 * eps)));
        };
        for (auto [cell, gcell] : {std::pair{&layer.forward_cell, &grads.forward_cell},
                                   std::pair{&*layer.backward_cell, &*grads.backward_cell}}) {
            auto pt = tensors(*cell), gt = tensors(*gcell);
            for (std::size_t t = 0; t < pt.size(); ++t)
                for (std::size_t k = 0; k < pt[t].size(); ++k) check(pt[t][k], gt[t][k]);
        }
        for (std::size_t k = 0; k < seq.size(); ++k) check(seq.data()[k], gin.data()[k]);
        EXPECT_LT(worst, 1e-4) << "return_sequences " << seqs;
    }
}

TEST(BiLstmBackward, InputGradientIsSumOfDirections) {
    Rng rng(22);
    const auto layer = random_layer(rng, 2, 3, true);
    const Matrix seq = random_matrix(rng, 4, 3);
    const Matrix G = random_matrix(rng, 4, 4);
    const auto out = bilstm_forward(seq, layer);
    auto grads = zeros_like(layer);
    const Matrix gin = bilstm_backward(G, out.cache, layer, grads);

    Matrix g_fwd(4, 2), g_bwd(4, 2);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t j = 0; j < 2; ++j) {
            g_fwd(t, j) = G(t, j);
            g_bwd(3 - t, j) = G(t, 2 + j);
        }
    auto gf = LstmCellParams::zeros(2, 3), gb = LstmCellParams::zeros(2, 3);
    const Matrix a = lstm_sequence_backward(g_fwd, out.cache.forward_pass, layer.forward_cell, gf);
    const Matrix b = reverse_rows(lstm_sequence_backward(g_bwd, *out.cache.backward_pass, *layer.backward_cell, gb));
    for (std::size_t k = 0; k < gin.size(); ++k) EXPECT_DOUBLE_EQ(gin.data()[k], a.data()[k] + b.data()[k]);
}

TEST(BiLstmBackward, MismatchedCacheIsInternalError) {
    Rng rng(23);
    const auto layer = random_layer(rng, 2, 2, true);
    const auto out = bilstm_forward(random_matrix(rng, 3, 2), layer);
    auto grads = zeros_like(layer);
    EXPECT_THROW(bilstm_backward(Matrix(2, 4), out.cache, layer, grads), InternalError);
}

TEST(RepeatVector, CopiesAndSumsBack) {
    const Vector v{1.5, -2.0, 0.25};
    EXPECT_EQ(repeat_vector(v, 1), as_row(v));
    const Matrix r = repeat_vector(v, 10);
    ASSERT_EQ(r.rows(), 10u);
    for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r(t, j), v[j]);
    EXPECT_EQ(repeat_vector_backward(Matrix(10, 3, 1.0)), Vector(3, 10.0));
    EXPECT_THROW(repeat_vector(v, 0), ArgumentError);
}

TEST(TimeDistributedDense, IdentityAndBiasOnly) {
    Rng rng(24);
    const Matrix seq = random_matrix(rng, 4, 3);
    EXPECT_EQ(time_distributed_dense(seq, Matrix::identity(3), Vector(3, 0.0)), seq);
    const Vector b{0.1, 0.2};
    const Matrix out = time_distributed_dense(seq, Matrix(2, 3), b);
    for (std::size_t t = 0; t < 4; ++t) {
        EXPECT_EQ(out(t, 0), 0.1);
        EXPECT_EQ(out(t, 1), 0.2);
    }
    EXPECT_THROW(time_distributed_dense(seq, Matrix(2, 4), b), ShapeError);
}

TEST(TimeDistributedDense, MatchesPerStepLoop) {
    Rng rng(25);
    const Matrix seq = random_matrix(rng, 3, 4), w = random_matrix(rng, 2, 4);
    const Vector b = random_vector(rng, 2);
    const Matrix out = time_distributed_dense(seq, w, b);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t k = 0; k < 2; ++k) {
            double y = b[k];
            for (std::size_t j = 0; j < 4; ++j) y += w(k, j) * seq(t, j);
            EXPECT_NEAR(out(t, k), y, 1e-15);
        }
}

TEST(TimeDistributedDense, BackwardMatchesFiniteDifferences) {
    Rng rng(26);
    Matrix seq = random_matrix(rng, 3, 4), w = random_matrix(rng, 2, 4);
    Vector b = random_vector(rng, 2);
    const Matrix G = random_matrix(rng, 3, 2);
    auto objective = [&]() {
        const Matrix out = time_distributed_dense(seq, w, b);
        double L = 0.0;
        for (std::size_t k = 0; k < G.size(); ++k) L += G.data()[k] * out.data()[k];
        return L;
    };
    Matrix gw(2, 4);
    Vector gb(2, 0.0);
    const Matrix gseq = time_distributed_dense_backward(G, seq, w, gw, gb);
    const double eps = 1e-5;
    auto numeric = [&](double& slot) {
        const double saved = slot;
        slot = saved + eps;
        const double up = objective();
        slot = saved - eps;
        const double down = objective();
        slot = saved;
        return (up - down) / (2 * eps);
    };
    for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(gw.data()[k], numeric(w.data()[k]), 1e-8);
    for (std::size_t k = 0; k < b.size(); ++k) EXPECT_NEAR(gb[k], numeric(b[k]), 1e-8);
    for (std::size_t k = 0; k < seq.size(); ++k) EXPECT_NEAR(gseq.data()[k], numeric(seq.data()[k]), 1e-8);
}
