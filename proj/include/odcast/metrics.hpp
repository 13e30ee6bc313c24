#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "odcast/ingest.hpp"
#include "odcast/model.hpp"

namespace odcast {

inline constexpr std::array<int, 3> kThresholds{0, 3, 5};

// Mean of |y - yhat| / (y + 1) over entries with actual >= k, accumulated
// left to right. Returns 0 and sets *flagged when nothing qualifies.
double mape_k(std::span<const double> actual, std::span<const double> predicted, int k,
              bool* flagged = nullptr);

// Mean absolute error over entries with actual >= k.
double mae_k(std::span<const double> actual, std::span<const double> predicted, int k,
             bool* flagged = nullptr);

struct MetricBlock {
    std::array<double, 3> mape{};
    std::array<double, 3> mae{};
    std::array<long, 3> count{};
    std::array<bool, 3> empty{};
};

struct MetricReport {
    std::string task;  // "demand" | "od"
    MetricBlock raw;
    MetricBlock blended;
    std::string config_fingerprint;

    std::string to_json() const;  // stable key order
};

// Raw per-slot predictions for one target: demand vector and OD matrix.
struct SlotPrediction {
    std::vector<double> demand;
    Tensor2 od;
};

using Predictor = std::function<SlotPrediction(const SlotIndex&)>;

struct EvaluationResult {
    MetricReport demand;
    MetricReport od;
};

// Pools per-node demand entries and OD entries over all targets; blended
// numbers apply lambda-weighted history blending to the raw predictions.
EvaluationResult evaluate(const Corpus& corpus, const Predictor& predictor,
                          std::span<const SlotIndex> targets, const HistoryStats& history, double lambda,
                          const std::string& config_fingerprint);

// CSV: day,slot,total_actual,total_predicted (citywide demand, raw).
void emit_series(const Corpus& corpus, const Predictor& predictor, std::span<const SlotIndex> targets,
                 const std::string& path);

Predictor model_predictor(const ForecastEngine& engine, const ModelParams& params);

}  // namespace odcast
