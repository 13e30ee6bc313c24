#pragma once

#include <vector>

#include "odcast/ingest.hpp"
#include "odcast/params.hpp"
#include "odcast/tape.hpp"

namespace odcast {

struct TemporalWindowSpec {
    int n_days = 5;
    int h_hours = 6;
    int granularity_min = 15;
    bool linear = true;
    bool stpp = true;
    bool stpm = true;
    bool nonlinear = true;

    int slots_per_day() const { return odcast::slots_per_day(granularity_min); }
    // An "hour" never collapses below one slot at coarse granularities.
    int hour_offset_slots() const { return std::max(1, 60 / granularity_min); }
    int nonlinear_window_slots() const { return std::max(1, h_hours * 60 / granularity_min); }
    bool enabled(Channel c) const;
    int enabled_count() const;
    void validate() const;
};

// Past slots feeding one channel for a target slot; truncated at data
// boundaries, never failing. Most recent first.
std::vector<SlotIndex> gather_channel_slots(const SlotIndex& target, const TemporalWindowSpec& spec,
                                            Channel channel);

// softmax(Q K^T / sqrt(z')) V with rows of the inputs as node embeddings.
Tensor2 scaled_dot_attention(const Tensor2& e_query, const Tensor2& e_key_value, const AttentionTriple& w);

// Mean of the per-slot attention outputs; zero matrix when nothing gathered.
Tensor2 channel_embed(const Tensor2& e_query, const std::vector<Tensor2>& gathered, const AttentionTriple& w);

// Self-attention over the <=4 channel vectors of each node, mean-pooled.
Tensor2 fuse_channels(const std::vector<Tensor2>& channel_embeddings, const AttentionTriple& fusion);

int scaled_dot_attention_t(Tape& tape, int e_query, int e_key_value, const std::array<int, 3>& w);
int channel_embed_t(Tape& tape, int e_query, const std::vector<int>& gathered, const std::array<int, 3>& w,
                    int n, int z_prime);
int fuse_channels_t(Tape& tape, const std::vector<int>& channel_embeddings, const std::array<int, 3>& fusion,
                    int z_prime);

}  // namespace odcast
