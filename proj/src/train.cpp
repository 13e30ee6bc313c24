#include "odcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "odcast/errors.hpp"
#include "odcast/rng.hpp"

namespace odcast {

double smooth_l1(double x, double y) {
    const double d = x - y;
    return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw UserError("train: epochs must be >= 1");
    if (batch_size < 1) throw UserError("train: batch_size must be >= 1");
    if (learning_rate < 0.0) throw UserError("train: learning_rate must not be negative");
}

SplitPlan split(int days) {
    if (days < 10) throw UserError("split: need at least 10 days of data");
    SplitPlan plan;
    const int train_days = static_cast<int>(std::floor(0.8 * days));
    const int val_days = static_cast<int>(std::floor(0.1 * days));
    plan.train_begin = 0;
    plan.train_end = train_days;
    plan.val_begin = train_days;
    plan.val_end = train_days + val_days;
    plan.test_begin = train_days + val_days;
    plan.test_end = days;
    return plan;
}

namespace {

double mean_loss(const ForecastEngine& engine, const ModelParams& params,
                 std::span<const SlotIndex> targets) {
    if (targets.empty()) return 0.0;
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    auto cache = engine.make_cache();
    double total = 0.0;
    for (const SlotIndex& t : targets) {
        const auto fw = engine.forward(tape, bound, t, cache);
        total += tape.value(engine.loss_node(tape, fw, t)).at(0, 0);
    }
    return total / static_cast<double>(targets.size());
}

struct Adam {
    GradientSet m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;

    explicit Adam(const ModelParams& params)
        : m(GradientSet::zeros_like(params)), v(GradientSet::zeros_like(params)) {}

    void step(ModelParams& params, const GradientSet& g, double lr) {
        ++t;
        auto tensors = params.tensors();
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            Tensor2& p = *tensors[i].second;
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double gk = g.g[i].data()[k];
                double& mk = m.g[i].data()[k];
                double& vk = v.g[i].data()[k];
                mk = beta1 * mk + (1.0 - beta1) * gk;
                vk = beta2 * vk + (1.0 - beta2) * gk * gk;
                p.data()[k] -= lr * (mk / bc1) / (std::sqrt(vk / bc2) + eps);
            }
        }
    }
};

void sgd_step(ModelParams& params, const GradientSet& g, double lr) {
    auto tensors = params.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        Tensor2& p = *tensors[i].second;
        for (std::size_t k = 0; k < p.size(); ++k) p.data()[k] -= lr * g.g[i].data()[k];
    }
}

}  // namespace

TrainResult train(const ForecastEngine& engine, ModelParams params, std::span<const SlotIndex> train_targets,
                  std::span<const SlotIndex> val_targets, const TrainConfig& config) {
    config.validate();
    if (train_targets.empty()) throw UserError("train: no training targets");

    TrainResult result;
    Adam adam(params);
    Rng shuffle_rng(derive_seed(config.seed, "train.shuffle"));
    std::vector<SlotIndex> order(train_targets.begin(), train_targets.end());
    GradientSet grads = GradientSet::zeros_like(params);

    double best_val = std::numeric_limits<double>::infinity();
    result.best = params;
    result.best_epoch = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with our seeded generator
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end = std::min(pos + static_cast<std::size_t>(config.batch_size), order.size());
            const double batch_n = static_cast<double>(batch_end - pos);

            Tape tape;
            const BoundParams bound = bind_params(tape, params);
            auto cache = engine.make_cache();
            int batch_loss = -1;
            for (std::size_t k = pos; k < batch_end; ++k) {
                const auto fw = engine.forward(tape, bound, order[k], cache);
                const int l = engine.loss_node(tape, fw, order[k]);
                batch_loss = batch_loss < 0 ? l : tape.add(batch_loss, l);
            }
            batch_loss = tape.scale(batch_loss, 1.0 / batch_n);
            const double loss_value = tape.value(batch_loss).at(0, 0);
            if (!std::isfinite(loss_value)) {
                std::ostringstream msg;
                msg << "train: non-finite loss in epoch " << epoch + 1 << " at batch starting (day "
                    << order[pos].day << ", slot " << order[pos].slot << ")";
                throw InternalError(msg.str());
            }
            epoch_loss += loss_value * batch_n;

            tape.backward(batch_loss);
            for (auto& g : grads.g) std::fill(g.data(), g.data() + g.size(), 0.0);
            accumulate_grads(tape, bound, grads);
            if (config.adam)
                adam.step(params, grads, config.learning_rate);
            else
                sgd_step(params, grads, config.learning_rate);
            pos = batch_end;
        }
        epoch_loss /= static_cast<double>(order.size());
        result.train_loss.push_back(epoch_loss);

        if (!val_targets.empty()) {
            const double vl = mean_loss(engine, params, val_targets);
            result.val_loss.push_back(vl);
            if (vl < best_val) {
                best_val = vl;
                result.best = params;
                result.best_epoch = epoch + 1;
            }
        } else {
            result.val_loss.push_back(epoch_loss);
            result.best = params;
            result.best_epoch = epoch + 1;
        }
    }
    return result;
}

void write_loss_trace(const TrainResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write loss trace: " + path);
    out << "epoch,train_loss,val_loss\n";
    char buf[80];
    for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, result.train_loss[e], result.val_loss[e]);
        out << buf;
    }
}

}  // namespace odcast
