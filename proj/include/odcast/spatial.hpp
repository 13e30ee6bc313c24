#pragma once

#include <vector>

#include "odcast/geo.hpp"
#include "odcast/ingest.hpp"
#include "odcast/params.hpp"
#include "odcast/tape.hpp"
#include "odcast/tensor.hpp"

namespace odcast {

// Forward (outflow), backward (inflow) and geographical neighbors per node.
struct NeighborSets {
    std::vector<std::vector<int>> fwd;
    std::vector<std::vector<int>> bwd;
    std::vector<std::vector<int>> geo;
};

NeighborSets neighbor_sets(const SlotODMatrix& od, const DistanceGraph& dist, double threshold_km);

// Prior weights aligned with the node's neighbor lists: request-intensity
// shares for forward/backward, inverse-distance shares for geographical.
struct PreWeights {
    std::vector<double> fwd;
    std::vector<double> bwd;
    std::vector<double> geo;
};

PreWeights pre_weights(int node, const NeighborSets& sets, const SlotODMatrix& od, const DistanceGraph& dist,
                       double eps_h);

// LeakyReLU(a^T (W_c e_i (+) w_prior * W_c e_j)); the prior scales the
// transformed neighbor embedding.
double attention_score(std::span<const double> e_i, std::span<const double> e_j, double w_prior,
                       const Tensor2& W_c, const Tensor2& a, double slope);

// Softmax within one neighbor type; empty stays empty.
std::vector<double> normalize_scores(const std::vector<double>& scores);

// One node's Eq.-11 concatenation: own block then weighted forward, backward
// and geographical sums. Empty types contribute zero blocks. Returns 1 x 4z'.
Tensor2 aggregate(const Tensor2& embeddings, int node, const NeighborSets& sets,
                  const std::vector<double>& w_fwd, const std::vector<double>& w_bwd,
                  const std::vector<double>& w_geo, const Tensor2& W_s);

// Everything the spatial layer derives from one snapshot (no parameters):
// neighbor sets, per-node priors, and their dense mask/prior matrices.
struct SpatialContext {
    int n = 0;
    NeighborSets sets;
    std::vector<PreWeights> pre;
    Tensor2 mask_fwd, mask_bwd, mask_geo;    // n x n, 1 where j is a neighbor of i
    Tensor2 prior_fwd, prior_bwd, prior_geo; // n x n, pre-weight at neighbor slots
};

SpatialContext build_spatial_context(const SlotODMatrix& od, const DistanceGraph& dist, double threshold_km,
                                     double eps_h);

// Full multi-head spatial layer for all nodes: per-head Eq. 4-11 attention,
// sigmoid head gating on the mean-pooled head outputs, then projection back
// to z'. Plain reference implementation.
Tensor2 multi_head_spatial(const Tensor2& embeddings, const SpatialContext& ctx, const ModelParams& params,
                           double slope);

// Tape twin of multi_head_spatial; returns the n x z' output node.
int spatial_forward(Tape& tape, int embeddings, const SpatialContext& ctx, const BoundParams& bound,
                    const ModelDims& dims, double slope);

}  // namespace odcast
