#pragma once

#include <cstddef>
#include <vector>

#include "data.hpp"
#include "detector.hpp"
#include "evaluation.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace bilstm_ae {

struct PipelineConfig {
    double train_ratio = 0.7;
    ScalerMode scaler = ScalerMode::min_max;
    ModelConfig model;
    TrainConfig train;
    ThresholdStrategy threshold = QuantileThreshold{0.99};
};

/// Split, scale (fitted on the anomaly-free training rows) and window a frame.
struct PreparedData {
    SplitResult split;
    ScalerParams scaler;
    WindowBatch train_windows;
    WindowBatch test_windows;
};

inline PreparedData prepare_data(const TimeSeriesFrame& frame, double train_ratio, std::size_t lookback,
                                 ScalerMode mode = ScalerMode::min_max) {
    PreparedData p;
    p.split = split_and_filter(frame, train_ratio, lookback);
    p.scaler = fit_scaler(p.split.train, mode);
    p.train_windows = make_windows(apply_scaler(p.split.train, p.scaler), lookback);
    p.test_windows = make_windows(apply_scaler(p.split.test, p.scaler), lookback);
    return p;
}

struct PipelineRun {
    PreparedData data;
    FitResult fit;
    std::vector<double> train_losses;
    ReconstructionReport report;
    EvaluationSummary evaluation;
};

/// Train on the normal windows, threshold on their losses, flag the test windows and evaluate.
inline PipelineRun run_pipeline(const TimeSeriesFrame& frame, const PipelineConfig& cfg) {
    PipelineRun run;
    run.data = prepare_data(frame, cfg.train_ratio, cfg.model.lookback, cfg.scaler);
    ModelConfig mc = cfg.model;
    mc.features = frame.feature_count();
    run.fit = fit(build_model(mc), run.data.train_windows, cfg.train);
    run.train_losses = score(run.fit.model, run.data.train_windows, cfg.train.threads);
    const double eta = estimate_threshold(run.train_losses, cfg.threshold);
    run.report = classify(score(run.fit.model, run.data.test_windows, cfg.train.threads), eta,
                          run.data.test_windows.window_end_indices);
    run.evaluation = evaluate(run.report, run.data.test_windows.labels);
    return run;
}

} // namespace bilstm_ae
