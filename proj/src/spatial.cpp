#include "odcast/spatial.hpp"

#include <algorithm>
#include <cmath>

#include "odcast/errors.hpp"

namespace odcast {

NeighborSets neighbor_sets(const SlotODMatrix& od, const DistanceGraph& dist, double threshold_km) {
    if (od.n != dist.size()) throw InternalError("neighbor_sets: OD and distance graph sizes disagree");
    NeighborSets sets;
    const std::size_t n = static_cast<std::size_t>(od.n);
    sets.fwd.assign(n, {});
    sets.bwd.assign(n, {});
    sets.geo.assign(n, {});
    for (const auto& e : od.entries) {
        sets.fwd[static_cast<std::size_t>(e[0])].push_back(e[1]);
        sets.bwd[static_cast<std::size_t>(e[1])].push_back(e[0]);
    }
    for (auto& v : sets.bwd) std::sort(v.begin(), v.end());
    for (int i = 0; i < od.n; ++i) sets.geo[static_cast<std::size_t>(i)] = geo_neighbors(i, dist, threshold_km);
    return sets;
}

PreWeights pre_weights(int node, const NeighborSets& sets, const SlotODMatrix& od, const DistanceGraph& dist,
                       double eps_h) {
    if (eps_h <= 0.0) throw InternalError("pre_weights: eps_h must be positive");
    const Tensor2 dense = od.dense();
    PreWeights w;

    const auto& fwd = sets.fwd[static_cast<std::size_t>(node)];
    double fwd_total = 0.0;
    for (int j : fwd) fwd_total += dense.at(node, j);
    for (int j : fwd) w.fwd.push_back(dense.at(node, j) / (fwd_total + eps_h));

    const auto& bwd = sets.bwd[static_cast<std::size_t>(node)];
    double bwd_total = 0.0;
    for (int j : bwd) bwd_total += dense.at(j, node);
    for (int j : bwd) w.bwd.push_back(dense.at(j, node) / (bwd_total + eps_h));

    const auto& geo = sets.geo[static_cast<std::size_t>(node)];
    double inv_total = 0.0;
    for (int j : geo) {
        const double d = dist.at(node, j);
        if (d <= 0.0) throw InternalError("pre_weights: geographic neighbor at zero distance");
        inv_total += 1.0 / d;
    }
    for (int j : geo) w.geo.push_back((1.0 / dist.at(node, j)) / inv_total);
    return w;
}

double attention_score(std::span<const double> e_i, std::span<const double> e_j, double w_prior,
                       const Tensor2& W_c, const Tensor2& a, double slope) {
    const int zp = W_c.rows();
    if (W_c.cols() != static_cast<int>(e_i.size()) || e_i.size() != e_j.size())
        throw InternalError("attention_score: embedding width mismatch");
    if (a.rows() != 2 * zp || a.cols() != 1) throw InternalError("attention_score: attention vector shape");
    double s = 0.0;
    for (int r = 0; r < zp; ++r) {
        double ui = 0.0, uj = 0.0;
        for (int c = 0; c < W_c.cols(); ++c) {
            ui += W_c.at(r, c) * e_i[static_cast<std::size_t>(c)];
            uj += W_c.at(r, c) * e_j[static_cast<std::size_t>(c)];
        }
        s += a.at(r, 0) * ui + a.at(zp + r, 0) * w_prior * uj;
    }
    return leaky_relu(s, slope);
}

std::vector<double> normalize_scores(const std::vector<double>& scores) { return softmax(scores); }

Tensor2 aggregate(const Tensor2& embeddings, int node, const NeighborSets& sets,
                  const std::vector<double>& w_fwd, const std::vector<double>& w_bwd,
                  const std::vector<double>& w_geo, const Tensor2& W_s) {
    const int zp = W_s.rows();
    if (W_s.cols() != embeddings.cols()) throw InternalError("aggregate: W_s width mismatch");
    auto transform = [&](int j) {
        std::vector<double> out(static_cast<std::size_t>(zp), 0.0);
        for (int r = 0; r < zp; ++r)
            for (int c = 0; c < W_s.cols(); ++c) out[static_cast<std::size_t>(r)] += W_s.at(r, c) * embeddings.at(j, c);
        return out;
    };
    Tensor2 result(1, 4 * zp);
    const auto own = transform(node);
    for (int r = 0; r < zp; ++r) result.at(0, r) = own[static_cast<std::size_t>(r)];

    auto add_block = [&](int block, const std::vector<int>& neighbors, const std::vector<double>& weights) {
        if (neighbors.size() != weights.size()) throw InternalError("aggregate: weight list mismatch");
        for (std::size_t k = 0; k < neighbors.size(); ++k) {
            const auto tj = transform(neighbors[k]);
            for (int r = 0; r < zp; ++r) result.at(0, block * zp + r) += weights[k] * tj[static_cast<std::size_t>(r)];
        }
    };
    add_block(1, sets.fwd[static_cast<std::size_t>(node)], w_fwd);
    add_block(2, sets.bwd[static_cast<std::size_t>(node)], w_bwd);
    add_block(3, sets.geo[static_cast<std::size_t>(node)], w_geo);
    return result;
}

SpatialContext build_spatial_context(const SlotODMatrix& od, const DistanceGraph& dist, double threshold_km,
                                     double eps_h) {
    SpatialContext ctx;
    ctx.n = od.n;
    ctx.sets = neighbor_sets(od, dist, threshold_km);
    ctx.pre.reserve(static_cast<std::size_t>(od.n));
    ctx.mask_fwd = Tensor2(od.n, od.n);
    ctx.mask_bwd = Tensor2(od.n, od.n);
    ctx.mask_geo = Tensor2(od.n, od.n);
    ctx.prior_fwd = Tensor2(od.n, od.n);
    ctx.prior_bwd = Tensor2(od.n, od.n);
    ctx.prior_geo = Tensor2(od.n, od.n);
    for (int i = 0; i < od.n; ++i) {
        PreWeights w = pre_weights(i, ctx.sets, od, dist, eps_h);
        const auto& fwd = ctx.sets.fwd[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < fwd.size(); ++k) {
            ctx.mask_fwd.at(i, fwd[k]) = 1.0;
            ctx.prior_fwd.at(i, fwd[k]) = w.fwd[k];
        }
        const auto& bwd = ctx.sets.bwd[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < bwd.size(); ++k) {
            ctx.mask_bwd.at(i, bwd[k]) = 1.0;
            ctx.prior_bwd.at(i, bwd[k]) = w.bwd[k];
        }
        const auto& geo = ctx.sets.geo[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < geo.size(); ++k) {
            ctx.mask_geo.at(i, geo[k]) = 1.0;
            ctx.prior_geo.at(i, geo[k]) = w.geo[k];
        }
        ctx.pre.push_back(std::move(w));
    }
    return ctx;
}

Tensor2 multi_head_spatial(const Tensor2& embeddings, const SpatialContext& ctx, const ModelParams& params,
                           double slope) {
    const int n = ctx.n;
    const int zp = params.dims.z_prime;
    const int heads = params.dims.heads;
    std::vector<Tensor2> head_out;
    head_out.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const auto& hp = params.spatial[static_cast<std::size_t>(h)];
        Tensor2 out(n, 4 * zp);
        for (int i = 0; i < n; ++i) {
            auto scores_of = [&](const std::vector<int>& neighbors, const std::vector<double>& priors,
                                 const Tensor2& a) {
                std::vector<double> scores;
                scores.reserve(neighbors.size());
                for (std::size_t k = 0; k < neighbors.size(); ++k)
                    scores.push_back(attention_score(embeddings.row(i), embeddings.row(neighbors[k]), priors[k],
                                                     hp.W_c, a, slope));
                return normalize_scores(scores);
            };
            const auto& sets = ctx.sets;
            const auto& pre = ctx.pre[static_cast<std::size_t>(i)];
            const auto w_fwd = scores_of(sets.fwd[static_cast<std::size_t>(i)], pre.fwd, hp.a_fwd);
            const auto w_bwd = scores_of(sets.bwd[static_cast<std::size_t>(i)], pre.bwd, hp.a_bwd);
            const auto w_geo = scores_of(sets.geo[static_cast<std::size_t>(i)], pre.geo, hp.a_geo);
            const Tensor2 agg = aggregate(embeddings, i, sets, w_fwd, w_bwd, w_geo, hp.W_s);
            for (int c = 0; c < 4 * zp; ++c) out.at(i, c) = agg.at(0, c);
        }
        head_out.push_back(std::move(out));
    }

    // mean-pool heads, per-head sigmoid gates, then project 4z' -> z'
    Tensor2 pooled(n, 4 * zp);
    for (const auto& h : head_out)
        for (std::size_t i = 0; i < pooled.size(); ++i) pooled.data()[i] += h.data()[i] / heads;
    Tensor2 combined(n, 4 * zp);
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < n; ++i) {
            double lin = params.gate_b.at(h, 0);
            for (int c = 0; c < 4 * zp; ++c) lin += params.gate_w.at(h, c) * pooled.at(i, c);
            const double gate = sigmoid(lin);
            for (int c = 0; c < 4 * zp; ++c)
                combined.at(i, c) += gate * head_out[static_cast<std::size_t>(h)].at(i, c);
        }
    }
    Tensor2 projected(n, zp);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < zp; ++r) {
            double s = 0.0;
            for (int c = 0; c < 4 * zp; ++c) s += params.out_proj.at(r, c) * combined.at(i, c);
            projected.at(i, r) = s;
        }
    return projected;
}

int spatial_forward(Tape& tape, int embeddings, const SpatialContext& ctx, const BoundParams& bound,
                    const ModelDims& dims, double slope) {
    const int n = ctx.n;
    const int zp = dims.z_prime;
    const int ones_n1 = tape.ones(n, 1);
    const int ones_1n = tape.ones(1, n);

    const int mask_f = tape.constant(ctx.mask_fwd);
    const int mask_b = tape.constant(ctx.mask_bwd);
    const int mask_q = tape.constant(ctx.mask_geo);
    const int prior_f = tape.constant(ctx.prior_fwd);
    const int prior_b = tape.constant(ctx.prior_bwd);
    const int prior_q = tape.constant(ctx.prior_geo);

    std::vector<int> head_ids;
    head_ids.reserve(bound.spatial.size());
    for (const auto& head : bound.spatial) {
        const int u = tape.matmul(embeddings, tape.transpose(head.W_c));  // n x z'
        const int v = tape.matmul(embeddings, tape.transpose(head.W_s));  // n x z'

        auto attended = [&](int a_vec, int prior, int mask) {
            const int a_self = tape.slice_rows(a_vec, 0, zp);
            const int a_neigh = tape.slice_rows(a_vec, zp, 2 * zp);
            const int s_self = tape.matmul(u, a_self);    // n x 1
            const int s_neigh = tape.matmul(u, a_neigh);  // n x 1
            // score_ij = LeakyReLU(s_self_i + prior_ij * s_neigh_j)
            const int broadcast_self = tape.matmul(s_self, ones_1n);
            const int broadcast_neigh = tape.matmul(ones_n1, tape.transpose(s_neigh));
            const int raw = tape.add(broadcast_self, tape.hadamard(prior, broadcast_neigh));
            const int scores = tape.leaky_relu(raw, slope);
            const int weights = tape.row_softmax_masked(scores, mask);
            return tape.matmul(weights, v);  // n x z'
        };

        const int block_f = attended(head.a_fwd, prior_f, mask_f);
        const int block_b = attended(head.a_bwd, prior_b, mask_b);
        const int block_q = attended(head.a_geo, prior_q, mask_q);
        head_ids.push_back(tape.concat_cols({v, block_f, block_b, block_q}));  // n x 4z'
    }

    int pooled = head_ids[0];
    for (std::size_t h = 1; h < head_ids.size(); ++h) pooled = tape.add(pooled, head_ids[h]);
    pooled = tape.scale(pooled, 1.0 / static_cast<double>(head_ids.size()));

    int combined = -1;
    for (std::size_t h = 0; h < head_ids.size(); ++h) {
        const int hh = static_cast<int>(h);
        const int u_h = tape.slice_rows(bound.gate_w, hh, hh + 1);  // 1 x 4z'
        const int b_h = tape.slice_rows(bound.gate_b, hh, hh + 1);  // 1 x 1
        const int lin = tape.add(tape.matmul(pooled, tape.transpose(u_h)), tape.matmul(ones_n1, b_h));
        const int gate = tape.sigmoid(lin);  // n x 1
        const int scaled = tape.hadamard(tape.matmul(gate, tape.ones(1, 4 * zp)), head_ids[h]);
        combined = combined < 0 ? scaled : tape.add(combined, scaled);
    }
    return tape.matmul(combined, tape.transpose(bound.out_proj));  // n x z'
}

}  // namespace odcast
