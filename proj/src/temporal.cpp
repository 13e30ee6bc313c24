#include "odcast/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "odcast/errors.hpp"

namespace odcast {

bool TemporalWindowSpec::enabled(Channel c) const {
    switch (c) {
        case Channel::Linear: return linear;
        case Channel::Stpp: return stpp;
        case Channel::Stpm: return stpm;
        case Channel::Nonlinear: return nonlinear;
    }
    return false;
}

int TemporalWindowSpec::enabled_count() const {
    return (linear ? 1 : 0) + (stpp ? 1 : 0) + (stpm ? 1 : 0) + (nonlinear ? 1 : 0);
}

void TemporalWindowSpec::validate() const {
    if (n_days < 1) throw UserError("temporal: n_days must be >= 1");
    if (h_hours < 1) throw UserError("temporal: h_hours must be >= 1");
    if (enabled_count() == 0) throw UserError("temporal: at least one channel must be enabled");
    slots_per_day();  // validates granularity
}

std::vector<SlotIndex> gather_channel_slots(const SlotIndex& target, const TemporalWindowSpec& spec,
                                            Channel channel) {
    std::vector<SlotIndex> out;
    const int spd = spec.slots_per_day();
    const int hour = spec.hour_offset_slots();
    switch (channel) {
        case Channel::Linear:
            for (int d = target.day - 1; d >= target.day - spec.n_days; --d)
                if (d >= 0) out.push_back({d, target.slot});
            break;
        case Channel::Stpp: {
            const int slot = target.slot - hour;
            if (slot >= 0)
                for (int d = target.day - 1; d >= target.day - spec.n_days; --d)
                    if (d >= 0) out.push_back({d, slot});
            break;
        }
        case Channel::Stpm: {
            const int slot = target.slot + hour;
            if (slot < spd)
                for (int d = target.day - 1; d >= target.day - spec.n_days; --d)
                    if (d >= 0) out.push_back({d, slot});
            break;
        }
        case Channel::Nonlinear: {
            const int lo = target.slot - spec.nonlinear_window_slots();
            for (int s = target.slot - 1; s >= lo; --s)
                if (s >= 0) out.push_back({target.day, s});
            break;
        }
    }
    return out;
}

Tensor2 scaled_dot_attention(const Tensor2& e_query, const Tensor2& e_key_value, const AttentionTriple& w) {
    if (e_query.rows() != e_key_value.rows() || e_query.cols() != e_key_value.cols())
        throw InternalError("scaled_dot_attention: embedding shapes disagree");
    const Tensor2 q = matmul(e_query, transpose(w.W_q));
    const Tensor2 k = matmul(e_key_value, transpose(w.W_k));
    const Tensor2 v = matmul(e_key_value, transpose(w.W_v));
    const int n = q.rows();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(w.W_q.rows()));
    Tensor2 out(n, v.cols());
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int c = 0; c < q.cols(); ++c) s += q.at(i, c) * k.at(j, c);
            row[static_cast<std::size_t>(j)] = s * inv_scale;
        }
        const auto weights = softmax(row);
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < v.cols(); ++c) out.at(i, c) += weights[static_cast<std::size_t>(j)] * v.at(j, c);
    }
    return out;
}

Tensor2 channel_embed(const Tensor2& e_query, const std::vector<Tensor2>& gathered, const AttentionTriple& w) {
    if (gathered.empty()) return Tensor2(e_query.rows(), w.W_v.rows());
    Tensor2 sum(e_query.rows(), w.W_v.rows());
    for (const auto& past : gathered) sum = add(sum, scaled_dot_attention(e_query, past, w));
    return scale(sum, 1.0 / static_cast<double>(gathered.size()));
}

Tensor2 fuse_channels(const std::vector<Tensor2>& channel_embeddings, const AttentionTriple& fusion) {
    if (channel_embeddings.empty()) throw InternalError("fuse_channels: no channels");
    const int n = channel_embeddings[0].rows();
    const int zp = fusion.W_v.rows();
    const int c = static_cast<int>(channel_embeddings.size());
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(fusion.W_q.rows()));
    std::vector<Tensor2> q, k, v;
    for (const auto& e : channel_embeddings) {
        q.push_back(matmul(e, transpose(fusion.W_q)));
        k.push_back(matmul(e, transpose(fusion.W_k)));
        v.push_back(matmul(e, transpose(fusion.W_v)));
    }
    Tensor2 fused(n, zp);
    std::vector<double> scores(static_cast<std::size_t>(c));
    for (int i = 0; i < n; ++i) {
        for (int a = 0; a < c; ++a) {
            for (int b = 0; b < c; ++b) {
                double s = 0.0;
                for (int x = 0; x < zp; ++x)
                    s += q[static_cast<std::size_t>(a)].at(i, x) * k[static_cast<std::size_t>(b)].at(i, x);
                scores[static_cast<std::size_t>(b)] = s * inv_scale;
            }
            const auto weights = softmax(scores);
            for (int b = 0; b < c; ++b)
                for (int x = 0; x < zp; ++x)
                    fused.at(i, x) += weights[static_cast<std::size_t>(b)] *
                                      v[static_cast<std::size_t>(b)].at(i, x) / static_cast<double>(c);
        }
    }
    return fused;
}

int scaled_dot_attention_t(Tape& tape, int e_query, int e_key_value, const std::array<int, 3>& w) {
    const int q = tape.matmul(e_query, tape.transpose(w[0]));
    const int k = tape.matmul(e_key_value, tape.transpose(w[1]));
    const int v = tape.matmul(e_key_value, tape.transpose(w[2]));
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(tape.value(w[0]).rows()));
    const int scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_scale);
    return tape.matmul(tape.row_softmax(scores), v);
}

int channel_embed_t(Tape& tape, int e_query, const std::vector<int>& gathered, const std::array<int, 3>& w,
                    int n, int z_prime) {
    if (gathered.empty()) return tape.constant(Tensor2(n, z_prime));
    int sum = -1;
    for (int past : gathered) {
        const int attended = scaled_dot_attention_t(tape, e_query, past, w);
        sum = sum < 0 ? attended : tape.add(sum, attended);
    }
    return tape.scale(sum, 1.0 / static_cast<double>(gathered.size()));
}

int fuse_channels_t(Tape& tape, const std::vector<int>& channel_embeddings, const std::array<int, 3>& fusion,
                    int z_prime) {
    if (channel_embeddings.empty()) throw InternalError("fuse_channels: no channels");
    const int c = static_cast<int>(channel_embeddings.size());
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(z_prime));
    std::vector<int> q, k, v;
    for (int e : channel_embeddings) {
        q.push_back(tape.matmul(e, tape.transpose(fusion[0])));
        k.push_back(tape.matmul(e, tape.transpose(fusion[1])));
        v.push_back(tape.matmul(e, tape.transpose(fusion[2])));
    }
    int fused = -1;
    for (int a = 0; a < c; ++a) {
        // per-node softmax over the c channel scores for query channel a
        std::vector<int> score_cols;
        for (int b = 0; b < c; ++b)
            score_cols.push_back(tape.scale(
                tape.row_sum(tape.hadamard(q[static_cast<std::size_t>(a)], k[static_cast<std::size_t>(b)])),
                inv_scale));
        const int weights = tape.row_softmax(tape.concat_cols(score_cols));  // n x c
        int attended = -1;
        for (int b = 0; b < c; ++b) {
            const int wcol = tape.slice_cols(weights, b, b + 1);  // n x 1
            const int scaled =
                tape.hadamard(tape.matmul(wcol, tape.ones(1, z_prime)), v[static_cast<std::size_t>(b)]);
            attended = attended < 0 ? scaled : tape.add(attended, scaled);
        }
        fused = fused < 0 ? attended : tape.add(fused, attended);
    }
    return tape.scale(fused, 1.0 / static_cast<double>(c));
}

}  // namespace odcast
