#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "odcast/geo.hpp"
#include "odcast/ingest.hpp"
#include "odcast/params.hpp"
#include "odcast/spatial.hpp"
#include "odcast/tape.hpp"
#include "odcast/temporal.hpp"
#include "odcast/transfer.hpp"

namespace odcast {

struct ModelConfig {
    ModelDims dims;
    TemporalWindowSpec temporal;
    double eps_h = 1e-6;
    double leaky_slope = 0.2;
    double lambda_blend = 0.9;
    double w_demand = 1.0;
    double w_od = 1.0;

    void validate() const;
};

// Owns the per-slot caches (initial embeddings, spatial contexts) for one
// corpus and drives full forward passes on a tape. Parameter-independent
// state only; safe to reuse across training steps.
class ForecastEngine {
  public:
    ForecastEngine(const Corpus& corpus, const ModelConfig& config, int train_day_end);

    struct Forward {
        int fused = -1;
        int demand = -1;  // n x 1
        int probs = -1;   // n x n
        int od = -1;      // n x n
    };

    // Shares per-slot tape nodes across calls on the same tape via `cache`.
    struct TapeSlotCache {
        std::vector<int> spatial_ids;  // -1 until built
    };

    TapeSlotCache make_cache() const;
    Forward forward(Tape& tape, const BoundParams& bound, const SlotIndex& target, TapeSlotCache& cache) const;
    int loss_node(Tape& tape, const Forward& fw, const SlotIndex& target) const;

    ForecastResult predict(const ModelParams& params, const SlotIndex& target, const HistoryStats& history) const;

    const Corpus& corpus() const { return corpus_; }
    const ModelConfig& config() const { return config_; }
    const DistanceGraph& distances() const { return dist_; }
    const SpatialContext& spatial_context(const SlotIndex& slot) const;
    const Tensor2& embeddings(const SlotIndex& slot) const;

    // Replaces init_embeddings (used by gradient gates that run below the
    // 13-feature minimum width).
    void set_embedding_override(std::function<Tensor2(const SlotIndex&)> fn);

    // Targets with full day-channel history inside [day_begin, day_end).
    std::vector<SlotIndex> targets_in_days(int day_begin, int day_end) const;

  private:
    int slot_key(const SlotIndex& s) const { return s.day * corpus_.slots_per_day() + s.slot; }
    int spatial_node(Tape& tape, const BoundParams& bound, const SlotIndex& slot, TapeSlotCache& cache) const;

    const Corpus& corpus_;
    ModelConfig config_;
    DistanceGraph dist_;
    EmbeddingContext emb_ctx_;
    std::function<Tensor2(const SlotIndex&)> embedding_override_;
    mutable std::vector<std::unique_ptr<SpatialContext>> ctx_cache_;
    mutable std::vector<std::unique_ptr<Tensor2>> emb_cache_;
    mutable std::vector<std::unique_ptr<GraphSnapshot>> snap_cache_;
};

}  // namespace odcast
