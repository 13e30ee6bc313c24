#pragma once

#include <span>
#include <vector>

#include "odcast/ingest.hpp"
#include "odcast/metrics.hpp"

namespace odcast {

// Training mean demand vector and OD matrix for the target's slot-of-day.
SlotPrediction historical_average_predict(const HistoryStats& history, const SlotIndex& target);

// Per-series least-squares autoregression with intercept.
struct ARModel {
    int p = 0;
    std::vector<double> coeffs;  // lag 1..p
    double intercept = 0.0;
    bool ridge_fallback = false;  // normal equations were singular
};

ARModel ar_fit(std::span<const double> series, int p);

// intercept + coeffs . window (window[0] is the most recent lag), clamped at 0.
double ar_predict(const ARModel& model, std::span<const double> window);

// One AR model per node over the chronological demand series of
// [day_begin, day_end); OD falls back to the historical average.
struct ARBaseline {
    int p = 0;
    std::vector<ARModel> per_node;
};

ARBaseline fit_ar_baseline(const Corpus& corpus, int day_begin, int day_end, int p);
Predictor ar_predictor(const Corpus& corpus, const ARBaseline& baseline, const HistoryStats& history);
Predictor havg_predictor(const HistoryStats& history);

}  // namespace odcast
