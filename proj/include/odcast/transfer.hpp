#pragma once

#include <string>

#include "odcast/ingest.hpp"
#include "odcast/params.hpp"
#include "odcast/tape.hpp"

namespace odcast {

// Two-layer feed-forward per node (z' -> z' -> 1), LeakyReLU hidden layer,
// softplus output so demand stays strictly positive. Returns n x 1.
Tensor2 demand_head(const Tensor2& fused, const ModelParams& params, double slope);

// Row-stochastic transfer probabilities: softmax over destinations of the
// pairwise LeakyReLU(a^T (e_i (+) e_j)) scores.
Tensor2 transfer_probs(const Tensor2& fused, const Tensor2& transfer_a, double slope);

// od[i][j] = demand[i] * p[i][j]; row sums reproduce the demand exactly.
Tensor2 od_from_demand(const Tensor2& demand, const Tensor2& probs);

// lambda * raw + (1 - lambda) * history, elementwise.
Tensor2 blend_with_history(const Tensor2& raw, const Tensor2& history, double lambda);

struct ForecastResult {
    SlotIndex target;
    Tensor2 raw_demand;      // n x 1
    Tensor2 transfer;        // n x n, row-stochastic
    Tensor2 raw_od;          // n x n
    Tensor2 blended_demand;  // n x 1
    Tensor2 blended_od;      // n x n
};

// demand_<day>_<slot>.csv plus sparse od_<day>_<slot>.txt (raw and blended).
void write_forecast(const ForecastResult& result, const std::string& dir);

int demand_head_t(Tape& tape, int fused, const BoundParams& bound, double slope);
int transfer_probs_t(Tape& tape, int fused, const BoundParams& bound, int z_prime, double slope);
int od_from_demand_t(Tape& tape, int demand, int probs, int n);

}  // namespace odcast
