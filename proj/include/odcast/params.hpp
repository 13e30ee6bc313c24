#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "odcast/tape.hpp"
#include "odcast/tensor.hpp"

namespace odcast {

struct ModelDims {
    int z = 16;        // initial embedding width
    int z_prime = 32;  // hidden width
    int heads = 4;

    void validate() const;
};

enum class Channel { Linear = 0, Stpp = 1, Stpm = 2, Nonlinear = 3 };
inline constexpr int kChannelCount = 4;
const char* channel_name(Channel c);

// Query/key/value projections for one attention block.
struct AttentionTriple {
    Tensor2 W_q, W_k, W_v;
};

struct SpatialHeadParams {
    Tensor2 W_c;    // z' x z
    Tensor2 W_s;    // z' x z
    Tensor2 a_fwd;  // 2z' x 1
    Tensor2 a_bwd;
    Tensor2 a_geo;
};

// Every trainable tensor of the model. tensors() exposes them in a fixed
// order that checkpoints, gradients and the optimizer all share.
struct ModelParams {
    ModelDims dims;
    std::vector<SpatialHeadParams> spatial;
    Tensor2 gate_w;    // heads x 4z'
    Tensor2 gate_b;    // heads x 1
    Tensor2 out_proj;  // z' x 4z'
    std::array<AttentionTriple, kChannelCount> channels;  // z' x z' each
    AttentionTriple fusion;
    Tensor2 ff_w1;       // z' x z'
    Tensor2 ff_b1;       // z' x 1
    Tensor2 ff_w2;       // 1 x z'
    Tensor2 ff_b2;       // 1 x 1
    Tensor2 transfer_a;  // 2z' x 1

    static ModelParams init(const ModelDims& dims, std::uint64_t seed);

    std::vector<std::pair<std::string, Tensor2*>> tensors();
    std::vector<std::pair<std::string, const Tensor2*>> tensors() const;
};

// Gradients (or optimizer moments) aligned with ModelParams::tensors().
struct GradientSet {
    std::vector<Tensor2> g;

    static GradientSet zeros_like(const ModelParams& params);
    void accumulate(const GradientSet& other);
    void scale_all(double s);
    bool all_finite() const;
};

// Tape leaf ids for one bound copy of the parameters.
struct BoundParams {
    struct Head {
        int W_c, W_s, a_fwd, a_bwd, a_geo;
    };
    std::vector<Head> spatial;
    int gate_w = -1, gate_b = -1, out_proj = -1;
    std::array<std::array<int, 3>, kChannelCount> channels{};  // [channel]{q,k,v}
    std::array<int, 3> fusion{};
    int ff_w1 = -1, ff_b1 = -1, ff_w2 = -1, ff_b2 = -1;
    int transfer_a = -1;
    std::vector<int> flat;  // same order as ModelParams::tensors()
};

BoundParams bind_params(Tape& tape, const ModelParams& params);

// grads += leaf adjoints recorded on the tape.
void accumulate_grads(const Tape& tape, const BoundParams& bound, GradientSet& grads);

// Exact (hexfloat) text checkpoints.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace odcast
