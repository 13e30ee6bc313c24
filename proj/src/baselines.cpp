#include "odcast/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "odcast/errors.hpp"

namespace odcast {

SlotPrediction historical_average_predict(const HistoryStats& history, const SlotIndex& target) {
    SlotPrediction pred;
    pred.demand = history.demand[static_cast<std::size_t>(target.slot)];
    pred.od = history.od[static_cast<std::size_t>(target.slot)];
    return pred;
}

ARModel ar_fit(std::span<const double> series, int p) {
    if (p < 1) throw InternalError("ar_fit: lag order must be >= 1");
    const int len = static_cast<int>(series.size());
    if (len <= p + 1) throw InternalError("ar_fit: series shorter than p + 2");
    const int m = len - p;
    Eigen::MatrixXd x(m, p + 1);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        y(i) = series[static_cast<std::size_t>(p + i)];
        x(i, 0) = 1.0;
        for (int j = 1; j <= p; ++j) x(i, j) = series[static_cast<std::size_t>(p + i - j)];
    }
    ARModel model;
    model.p = p;
    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == p + 1) {
        beta = qr.solve(y);
    } else {
        // ridge fallback on singular normal equations
        Eigen::MatrixXd xtx = x.transpose() * x;
        xtx.diagonal().array() += 1e-6;
        beta = xtx.ldlt().solve(x.transpose() * y);
        model.ridge_fallback = true;
    }
    model.intercept = beta(0);
    model.coeffs.resize(static_cast<std::size_t>(p));
    for (int j = 1; j <= p; ++j) model.coeffs[static_cast<std::size_t>(j - 1)] = beta(j);
    return model;
}

double ar_predict(const ARModel& model, std::span<const double> window) {
    if (static_cast<int>(window.size()) != model.p) throw InternalError("ar_predict: window length != p");
    double value = model.intercept;
    for (int j = 0; j < model.p; ++j) value += model.coeffs[static_cast<std::size_t>(j)] * window[static_cast<std::size_t>(j)];
    return std::max(0.0, value);
}

ARBaseline fit_ar_baseline(const Corpus& corpus, int day_begin, int day_end, int p) {
    const int n = corpus.n();
    const int spd = corpus.slots_per_day();
    ARBaseline baseline;
    baseline.p = p;
    std::vector<std::vector<double>> series(static_cast<std::size_t>(n));
    for (auto& s : series) s.reserve(static_cast<std::size_t>((day_end - day_begin) * spd));
    for (int d = day_begin; d < day_end; ++d) {
        for (int s = 0; s < spd; ++s) {
            const auto demand = corpus.at(d, s).demand();
            for (int i = 0; i < n; ++i) series[static_cast<std::size_t>(i)].push_back(demand[static_cast<std::size_t>(i)]);
        }
    }
    baseline.per_node.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) baseline.per_node.push_back(ar_fit(series[static_cast<std::size_t>(i)], p));
    return baseline;
}

Predictor ar_predictor(const Corpus& corpus, const ARBaseline& baseline, const HistoryStats& history) {
    const int n = corpus.n();
    const int spd = corpus.slots_per_day();
    return [&corpus, &baseline, &history, n, spd](const SlotIndex& target) {
        SlotPrediction pred;
        pred.demand.assign(static_cast<std::size_t>(n), 0.0);
        const int flat = target.day * spd + target.slot;
        std::vector<std::vector<double>> lag_demand(static_cast<std::size_t>(baseline.p));
        for (int lag = 1; lag <= baseline.p; ++lag) {
            const int prev = flat - lag;
            lag_demand[static_cast<std::size_t>(lag - 1)] =
                prev >= 0 ? corpus.at(prev / spd, prev % spd).demand() : std::vector<double>(static_cast<std::size_t>(n), 0.0);
        }
        std::vector<double> window(static_cast<std::size_t>(baseline.p));
        for (int i = 0; i < n; ++i) {
            for (int lag = 1; lag <= baseline.p; ++lag)
                window[static_cast<std::size_t>(lag - 1)] = lag_demand[static_cast<std::size_t>(lag - 1)][static_cast<std::size_t>(i)];
            pred.demand[static_cast<std::size_t>(i)] = ar_predict(baseline.per_node[static_cast<std::size_t>(i)], window);
        }
        pred.od = history.od[static_cast<std::size_t>(target.slot)];
        return pred;
    };
}

Predictor havg_predictor(const HistoryStats& history) {
    return [&history](const SlotIndex& target) { return historical_average_predict(history, target); };
}

}  // namespace odcast
