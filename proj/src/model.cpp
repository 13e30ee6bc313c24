#include "odcast/model.hpp"

#include <cmath>

#include "odcast/errors.hpp"

namespace odcast {

void ModelConfig::validate() const {
    dims.validate();
    temporal.validate();
    if (eps_h <= 0.0) throw UserError("model: eps_h must be positive");
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) throw UserError("model: leaky_slope must be in (0, 1)");
    if (lambda_blend < 0.0 || lambda_blend > 1.0) throw UserError("model: lambda must be in [0, 1]");
    if (w_demand + w_od <= 0.0) throw UserError("model: loss weights must not both be zero");
}

ForecastEngine::ForecastEngine(const Corpus& corpus, const ModelConfig& config, int train_day_end)
    : corpus_(corpus), config_(config) {
    config_.validate();
    if (config_.temporal.granularity_min != corpus.granularity_min)
        throw InternalError("ForecastEngine: temporal granularity disagrees with corpus");
    dist_ = DistanceGraph(build_grid(corpus.grid));
    emb_ctx_ = EmbeddingContext::from_corpus(corpus, config.dims.z, train_day_end);
    const std::size_t total = corpus.slots.size();
    ctx_cache_.resize(total);
    emb_cache_.resize(total);
    snap_cache_.resize(total);
}

void ForecastEngine::set_embedding_override(std::function<Tensor2(const SlotIndex&)> fn) {
    embedding_override_ = std::move(fn);
    for (auto& e : emb_cache_) e.reset();
}

const SpatialContext& ForecastEngine::spatial_context(const SlotIndex& slot) const {
    const int key = slot_key(slot);
    auto& entry = ctx_cache_[static_cast<std::size_t>(key)];
    if (!entry)
        entry = std::make_unique<SpatialContext>(build_spatial_context(
            corpus_.at(slot.day, slot.slot), dist_, corpus_.grid.threshold_km(), config_.eps_h));
    return *entry;
}

const Tensor2& ForecastEngine::embeddings(const SlotIndex& slot) const {
    const int key = slot_key(slot);
    auto& entry = emb_cache_[static_cast<std::size_t>(key)];
    if (!entry) {
        if (embedding_override_) {
            entry = std::make_unique<Tensor2>(embedding_override_(slot));
        } else {
            auto& snap = snap_cache_[static_cast<std::size_t>(key)];
            if (!snap) snap = std::make_unique<GraphSnapshot>(GraphSnapshot::from_od(corpus_.at(slot.day, slot.slot)));
            entry = std::make_unique<Tensor2>(init_embeddings(*snap, emb_ctx_));
        }
    }
    return *entry;
}

ForecastEngine::TapeSlotCache ForecastEngine::make_cache() const {
    TapeSlotCache cache;
    cache.spatial_ids.assign(corpus_.slots.size(), -1);
    return cache;
}

int ForecastEngine::spatial_node(Tape& tape, const BoundParams& bound, const SlotIndex& slot,
                                 TapeSlotCache& cache) const {
    int& id = cache.spatial_ids[static_cast<std::size_t>(slot_key(slot))];
    if (id < 0) {
        const int emb = tape.constant(embeddings(slot));
        id = spatial_forward(tape, emb, spatial_context(slot), bound, config_.dims, config_.leaky_slope);
    }
    return id;
}

ForecastEngine::Forward ForecastEngine::forward(Tape& tape, const BoundParams& bound, const SlotIndex& target,
                                                TapeSlotCache& cache) const {
    if (target.day < 0 || target.day >= corpus_.days || target.slot < 0 ||
        target.slot >= corpus_.slots_per_day())
        throw InternalError("forward: target slot outside corpus");
    const int n = corpus_.n();
    const int zp = config_.dims.z_prime;
    const int query = spatial_node(tape, bound, target, cache);

    std::vector<int> channel_ids;
    for (int c = 0; c < kChannelCount; ++c) {
        const Channel channel = static_cast<Channel>(c);
        if (!config_.temporal.enabled(channel)) continue;
        std::vector<int> gathered;
        for (const SlotIndex& past : gather_channel_slots(target, config_.temporal, channel))
            gathered.push_back(spatial_node(tape, bound, past, cache));
        channel_ids.push_back(
            channel_embed_t(tape, query, gathered, bound.channels[static_cast<std::size_t>(c)], n, zp));
    }

    Forward fw;
    fw.fused = fuse_channels_t(tape, channel_ids, bound.fusion, zp);
    fw.demand = demand_head_t(tape, fw.fused, bound, config_.leaky_slope);
    fw.probs = transfer_probs_t(tape, fw.fused, bound, zp, config_.leaky_slope);
    fw.od = od_from_demand_t(tape, fw.demand, fw.probs, n);
    return fw;
}

int ForecastEngine::loss_node(Tape& tape, const Forward& fw, const SlotIndex& target) const {
    const SlotODMatrix& actual = corpus_.at(target.day, target.slot);
    const int n = corpus_.n();
    Tensor2 demand_target(n, 1);
    const auto demand = actual.demand();
    for (int i = 0; i < n; ++i) demand_target.at(i, 0) = demand[static_cast<std::size_t>(i)];
    const int d_target = tape.constant(std::move(demand_target));
    const int od_target = tape.constant(actual.dense());

    const int demand_loss = tape.sum_all(tape.smooth_l1_vs(fw.demand, d_target));
    const int od_loss = tape.sum_all(tape.smooth_l1_vs(fw.od, od_target));
    const int weighted = tape.add(tape.scale(demand_loss, config_.w_demand / n),
                                  tape.scale(od_loss, config_.w_od / (static_cast<double>(n) * n)));
    return weighted;
}

ForecastResult ForecastEngine::predict(const ModelParams& params, const SlotIndex& target,
                                       const HistoryStats& history) const {
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    TapeSlotCache cache = make_cache();
    const Forward fw = forward(tape, bound, target, cache);

    ForecastResult result;
    result.target = target;
    result.raw_demand = tape.value(fw.demand);
    result.transfer = tape.value(fw.probs);
    result.raw_od = tape.value(fw.od);

    const int n = corpus_.n();
    Tensor2 hist_demand(n, 1);
    for (int i = 0; i < n; ++i)
        hist_demand.at(i, 0) = history.demand[static_cast<std::size_t>(target.slot)][static_cast<std::size_t>(i)];
    result.blended_demand = blend_with_history(result.raw_demand, hist_demand, config_.lambda_blend);
    result.blended_od =
        blend_with_history(result.raw_od, history.od[static_cast<std::size_t>(target.slot)], config_.lambda_blend);
    return result;
}

std::vector<SlotIndex> ForecastEngine::targets_in_days(int day_begin, int day_end) const {
    std::vector<SlotIndex> out;
    const int spd = corpus_.slots_per_day();
    const int first = std::max(day_begin, config_.temporal.n_days);
    for (int d = first; d < day_end; ++d)
        for (int s = 0; s < spd; ++s) out.push_back({d, s});
    return out;
}

}  // namespace odcast
