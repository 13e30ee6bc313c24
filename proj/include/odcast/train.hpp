#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odcast/model.hpp"
#include "odcast/params.hpp"

namespace odcast {

double smooth_l1(double x, double y);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 2;  // target slots per optimizer step
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
    bool adam = true;  // plain gradient descent when false

    void validate() const;
};

// Chronological day split: floor(0.8 d) train, floor(0.1 d) validation,
// remainder test.
struct SplitPlan {
    int train_begin = 0, train_end = 0;
    int val_begin = 0, val_end = 0;
    int test_begin = 0, test_end = 0;
};

SplitPlan split(int days);  // fatal below 10 days

struct TrainResult {
    std::vector<double> train_loss;  // per-epoch means
    std::vector<double> val_loss;    // empty entries mirror train loss when no val targets
    ModelParams best;                // best-on-validation (last epoch without validation)
    int best_epoch = 0;
};

// Shuffles targets each epoch (seeded), accumulates batch-mean gradients and
// steps the optimizer. Aborts with a diagnostic on non-finite loss.
TrainResult train(const ForecastEngine& engine, ModelParams params, std::span<const SlotIndex> train_targets,
                  std::span<const SlotIndex> val_targets, const TrainConfig& config);

void write_loss_trace(const TrainResult& result, const std::string& path);

}  // namespace odcast
