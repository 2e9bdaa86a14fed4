#include <bilstm_ae/detector.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace bilstm_ae;

TEST(ThresholdStrategy, ParseAndFormat) {
    EXPECT_EQ(to_string(parse_threshold_strategy("quantile:0.99")), "quantile:0.99");
    EXPECT_EQ(to_string(parse_threshold_strategy("max")), "max");
    EXPECT_EQ(to_string(parse_threshold_strategy("mean_plus_k_std:3")), "mean_plus_k_std:3");
    EXPECT_EQ(to_string(parse_threshold_strategy("fixed:0.5")), "fixed:0.5");
    EXPECT_THROW(parse_threshold_strategy("quantile:0"), ArgumentError);
    EXPECT_THROW(parse_threshold_strategy("quantile:1.5"), ArgumentError);
    EXPECT_THROW(parse_threshold_strategy("mean_plus_k_std:-1"), ArgumentError);
    EXPECT_THROW(parse_threshold_strategy("median"), ArgumentError);
    EXPECT_THROW(parse_threshold_strategy("fixed"), ArgumentError);
    EXPECT_THROW(parse_threshold_strategy("max:3"), ArgumentError);
}

TEST(EstimateThreshold, Examples) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(estimate_threshold(a, QuantileThreshold{1.0}), 3.0);
    EXPECT_EQ(estimate_threshold(a, MaxThreshold{}), 3.0);
    EXPECT_EQ(estimate_threshold(std::vector<double>{2, 4, 6}, MeanPlusKStdThreshold{0.0}), 4.0);
    EXPECT_EQ(estimate_threshold(std::vector<double>{1, 2, 3, 4}, QuantileThreshold{0.5}), 2.5);
    EXPECT_EQ(estimate_threshold(a, FixedThreshold{0.5}), 0.5);
    // Population standard deviation of {2, 4, 6} is sqrt(8/3).
    EXPECT_DOUBLE_EQ(estimate_threshold(std::vector<double>{2, 4, 6}, MeanPlusKStdThreshold{1.0}),
                     4.0 + std::sqrt(8.0 / 3.0));
    EXPECT_THROW(estimate_threshold(std::vector<double>{}, MaxThreshold{}), ArgumentError);
}

TEST(Quantile, MatchesSortBasedOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(0, 10);
        const double q = rng.uniform();
        std::vector<double> s = v;
        std::sort(s.begin(), s.end());
        const double pos = q * double(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double expected = lo + 1 < n ? s[lo] + (pos - double(lo)) * (s[lo + 1] - s[lo]) : s[lo];
        EXPECT_NEAR(quantile(v, q), expected, 1e-12);
    }
}

TEST(Classify, StrictInequality) {
    const std::vector<double> losses{0.1, 0.9};
    EXPECT_EQ(classify(losses, 0.5).flags, (std::vector<std::uint8_t>{0, 1}));
    EXPECT_EQ(classify(std::vector<double>{0.5}, 0.5).flags, (std::vector<std::uint8_t>{0}));
    const auto all = classify(losses, std::numeric_limits<double>::max());
    EXPECT_EQ(all.anomaly_count(), 0u);
    EXPECT_THROW(classify(losses, std::nan("")), ArgumentError);
}

TEST(Classify, MonotoneInThreshold) {
    Rng rng(4);
    std::vector<double> losses(200);
    for (double& l : losses) l = rng.uniform();
    std::size_t prev = losses.size() + 1;
    for (double eta = -0.1; eta <= 1.1; eta += 0.01) {
        const auto r = classify(losses, eta);
        EXPECT_LE(r.anomaly_count(), prev);
        prev = r.anomaly_count();
        for (std::size_t k = 0; k < losses.size(); ++k) EXPECT_EQ(r.flags[k], losses[k] > eta ? 1 : 0);
    }
}

TEST(Classify, QuantileFlagFractionBound) {
    Rng rng(5);
    std::vector<double> losses(300);
    for (double& l : losses) l = rng.uniform();
    for (double q : {0.5, 0.9, 0.99, 1.0}) {
        const auto r = classify(losses, estimate_threshold(losses, QuantileThreshold{q}));
        EXPECT_LE(double(r.anomaly_count()) / 300.0, 1.0 - q + 1.0 / 300.0);
    }
    EXPECT_EQ(classify(losses, estimate_threshold(losses, QuantileThreshold{1.0})).anomaly_count(), 0u);
}

TEST(Score, MatchesOneByOne) {
    ModelConfig c;
    c.lookback = 4;
    c.features = 3;
    c.encoder_widths = {3};
    c.decoder_widths = {3};
    const ModelParams m = build_model(c);
    Rng rng(6);
    WindowBatch b;
    b.lookback = 4;
    b.features = 3;
    for (int k = 0; k < 20; ++k) {
        Matrix w(4, 3);
        for (double& v : w.data()) v = rng.uniform();
        b.data.push_back(w);
        b.labels.push_back(0);
        b.window_end_indices.push_back(k);
    }
    b.data[7] = b.data[3];
    const auto losses = score(m, b);
    for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(losses[k], reconstruction_loss(b.data[k], forward(m, b.data[k]).x_hat));
    EXPECT_EQ(losses[7], losses[3]);
    EXPECT_EQ(score(m, b, 4), losses);

    WindowBatch wrong = b;
    wrong.features = 2;
    EXPECT_THROW(score(m, wrong), ShapeError);
}

TEST(Score, ExactReconstructionScoresZero) {
    ModelConfig c;
    c.lookback = 2;
    c.features = 2;
    c.encoder_widths = {2};
    c.decoder_widths = {2};
    ModelParams m = zero_model(c);
    m.projection_b = {0.3, 0.7};
    WindowBatch b;
    b.lookback = 2;
    b.features = 2;
    b.data.push_back(Matrix{{0.3, 0.7}, {0.3, 0.7}});
    b.labels.push_back(0);
    b.window_end_indices.push_back(1);
    EXPECT_EQ(score(m, b)[0], 0.0);
}

TEST(ReportCsv, RoundTrip) {
    const auto r = classify(std::vector<double>{0.125, 0.75, 0.3}, 0.5, std::vector<std::size_t>{9, 10, 11});
    std::stringstream s;
    write_report_csv(r, s);
    EXPECT_EQ(s.str(), "window_end_index,loss,flag\n9,0.125,0\n10,0.75,1\n11,0.3,0\n");
    const auto back = read_report_csv(s);
    EXPECT_EQ(back.losses, r.losses);
    EXPECT_EQ(back.flags, r.flags);
    EXPECT_EQ(back.window_end_indices, r.window_end_indices);
    EXPECT_TRUE(std::isnan(back.threshold));

    std::istringstream bad("window_end_index,loss,flag\n1,0.5,2\n");
    EXPECT_THROW(read_report_csv(bad), IngestionError);
}
