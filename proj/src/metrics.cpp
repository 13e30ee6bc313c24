#include "odcast/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "odcast/errors.hpp"

namespace odcast {

double mape_k(std::span<const double> actual, std::span<const double> predicted, int k, bool* flagged) {
    if (actual.size() != predicted.size()) throw InternalError("mape_k: length mismatch");
    double sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] < k) continue;
        sum += std::abs(actual[i] - predicted[i]) / (actual[i] + 1.0);
        ++count;
    }
    if (count == 0) {
        if (flagged) *flagged = true;
        return 0.0;
    }
    if (flagged) *flagged = false;
    return sum / static_cast<double>(count);
}

double mae_k(std::span<const double> actual, std::span<const double> predicted, int k, bool* flagged) {
    if (actual.size() != predicted.size()) throw InternalError("mae_k: length mismatch");
    double sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] < k) continue;
        sum += std::abs(actual[i] - predicted[i]);
        ++count;
    }
    if (count == 0) {
        if (flagged) *flagged = true;
        return 0.0;
    }
    if (flagged) *flagged = false;
    return sum / static_cast<double>(count);
}

namespace {

MetricBlock block_of(const std::vector<double>& actual, const std::vector<double>& predicted) {
    MetricBlock b;
    for (std::size_t t = 0; t < kThresholds.size(); ++t) {
        const int k = kThresholds[t];
        bool flagged = false;
        b.mape[t] = mape_k(actual, predicted, k, &flagged);
        b.mae[t] = mae_k(actual, predicted, k);
        b.empty[t] = flagged;
        long count = 0;
        for (double a : actual)
            if (a >= k) ++count;
        b.count[t] = count;
    }
    return b;
}

void block_to_json(nlohmann::ordered_json& j, const MetricBlock& b) {
    for (std::size_t t = 0; t < kThresholds.size(); ++t) {
        const std::string k = std::to_string(kThresholds[t]);
        j["mape_" + k] = b.mape[t];
        j["mae_" + k] = b.mae[t];
        j["count_" + k] = b.count[t];
        if (b.empty[t]) j["empty_" + k] = true;
    }
}

}  // namespace

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    block_to_json(j["raw"], raw);
    block_to_json(j["blended"], blended);
    j["config_fingerprint"] = config_fingerprint;
    return j.dump(2);
}

EvaluationResult evaluate(const Corpus& corpus, const Predictor& predictor,
                          std::span<const SlotIndex> targets, const HistoryStats& history, double lambda,
                          const std::string& config_fingerprint) {
    if (targets.empty()) throw UserError("evaluate: empty test set");
    const int n = corpus.n();
    std::vector<double> d_actual, d_raw, d_blend;
    std::vector<double> od_actual, od_raw, od_blend;
    for (const SlotIndex& t : targets) {
        const SlotPrediction pred = predictor(t);
        if (static_cast<int>(pred.demand.size()) != n || pred.od.rows() != n || pred.od.cols() != n)
            throw InternalError("evaluate: predictor output shape mismatch");
        const auto actual_demand = corpus.at(t.day, t.slot).demand();
        const Tensor2 actual_od = corpus.at(t.day, t.slot).dense();
        const auto& h_demand = history.demand[static_cast<std::size_t>(t.slot)];
        const Tensor2& h_od = history.od[static_cast<std::size_t>(t.slot)];
        for (int i = 0; i < n; ++i) {
            d_actual.push_back(actual_demand[static_cast<std::size_t>(i)]);
            d_raw.push_back(pred.demand[static_cast<std::size_t>(i)]);
            d_blend.push_back(lambda * pred.demand[static_cast<std::size_t>(i)] +
                              (1.0 - lambda) * h_demand[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                od_actual.push_back(actual_od.at(i, j));
                od_raw.push_back(pred.od.at(i, j));
                od_blend.push_back(lambda * pred.od.at(i, j) + (1.0 - lambda) * h_od.at(i, j));
            }
        }
    }
    EvaluationResult result;
    result.demand.task = "demand";
    result.demand.raw = block_of(d_actual, d_raw);
    result.demand.blended = block_of(d_actual, d_blend);
    result.demand.config_fingerprint = config_fingerprint;
    result.od.task = "od";
    result.od.raw = block_of(od_actual, od_raw);
    result.od.blended = block_of(od_actual, od_blend);
    result.od.config_fingerprint = config_fingerprint;
    return result;
}

void emit_series(const Corpus& corpus, const Predictor& predictor, std::span<const SlotIndex> targets,
                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write series file: " + path);
    out << "day,slot,total_actual,total_predicted\n";
    char buf[96];
    for (const SlotIndex& t : targets) {
        const SlotPrediction pred = predictor(t);
        double actual = 0.0, predicted = 0.0;
        for (double v : corpus.at(t.day, t.slot).demand()) actual += v;
        for (double v : pred.demand) predicted += v;
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", t.day, t.slot, actual, predicted);
        out << buf;
    }
}

Predictor model_predictor(const ForecastEngine& engine, const ModelParams& params) {
    return [&engine, params](const SlotIndex& target) {
        Tape tape;
        const BoundParams bound = bind_params(tape, params);
        auto cache = engine.make_cache();
        const auto fw = engine.forward(tape, bound, target, cache);
        SlotPrediction pred;
        const Tensor2& demand = tape.value(fw.demand);
        pred.demand.resize(static_cast<std::size_t>(demand.rows()));
        for (int i = 0; i < demand.rows(); ++i) pred.demand[static_cast<std::size_t>(i)] = demand.at(i, 0);
        pred.od = tape.value(fw.od);
        return pred;
    };
}

}  // namespace odcast
