#include <bilstm_ae/pipeline.hpp>

#include <gtest/gtest.h>

using namespace bilstm_ae;

namespace {

TimeSeriesFrame series(std::size_t rows, double fraction, double region_start, std::uint64_t seed) {
    SyntheticConfig g;
    g.rows = rows;
    g.anomaly_fraction = fraction;
    g.event_length = 20;
    g.anomaly_region_start = region_start;
    return generate_synthetic(g, seed);
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.model.encoder_widths = {3};
    cfg.model.decoder_widths = {3};
    cfg.train.epochs = 2;
    cfg.train.batch_size = 32;
    return cfg;
}

} // namespace

TEST(PrepareData, ScalesOnTrainingRowsAndIndexesOriginalRows) {
    const auto frame = series(1000, 0.04, 0.0, 1);
    const auto p = prepare_data(frame, 0.7, 10);
    EXPECT_EQ(p.split.counts.split_row, 700u);
    EXPECT_EQ(p.split.train.anomaly_count(), 0u);
    EXPECT_EQ(p.train_windows.samples(), p.split.train.rows() - 9);
    EXPECT_EQ(p.test_windows.samples(), 300u - 9);
    for (std::size_t k = 0; k < p.test_windows.samples(); ++k) {
        const std::size_t row = p.test_windows.window_end_indices[k];
        EXPECT_GE(row, 709u);
        EXPECT_EQ(p.test_windows.labels[k], frame.labels[row]);
    }
    for (std::size_t j = 0; j < 4; ++j) {
        double lo = 1e9, hi = -1e9;
        for (const auto& w : p.train_windows.data)
            for (std::size_t t = 0; t < w.rows(); ++t) {
                lo = std::min(lo, w(t, j));
                hi = std::max(hi, w(t, j));
            }
        EXPECT_NEAR(lo, 0.0, 1e-12);
        EXPECT_NEAR(hi, 1.0, 1e-12);
    }
}

TEST(RunPipeline, ProducesConsistentReport) {
    const auto frame = series(800, 0.05, 0.7, 2);
    const auto cfg = small_config();
    const auto run = run_pipeline(frame, cfg);
    EXPECT_EQ(run.fit.epochs_run, 2u);
    EXPECT_EQ(run.train_losses.size(), run.data.train_windows.samples());
    EXPECT_EQ(run.report.losses.size(), run.data.test_windows.samples());
    EXPECT_EQ(run.report.threshold, estimate_threshold(run.train_losses, cfg.threshold));
    EXPECT_EQ(run.evaluation.counts, confusion(run.report.flags, run.data.test_windows.labels));
    EXPECT_EQ(run.evaluation.counts.total(), run.report.losses.size());
    ASSERT_TRUE(run.evaluation.auc.has_value());
}

TEST(RunPipeline, DeterministicAndFeatureCountFromData) {
    const auto frame = series(600, 0.05, 0.7, 3);
    auto cfg = small_config();
    cfg.model.features = 99; // overridden by the data
    const auto a = run_pipeline(frame, cfg);
    const auto b = run_pipeline(frame, cfg);
    EXPECT_EQ(a.fit.model.config.features, 4u);
    EXPECT_EQ(a.fit.model, b.fit.model);
    EXPECT_EQ(a.report, b.report);
}

TEST(RunPipeline, QuantileOneFlagsNoTrainingWindow) {
    const auto frame = series(600, 0.05, 0.7, 4);
    auto cfg = small_config();
    cfg.threshold = QuantileThreshold{1.0};
    const auto run = run_pipeline(frame, cfg);
    EXPECT_EQ(classify(run.train_losses, run.report.threshold).anomaly_count(), 0u);
}
