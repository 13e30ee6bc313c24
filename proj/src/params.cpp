#include "odcast/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "odcast/errors.hpp"
#include "odcast/rng.hpp"

namespace odcast {

void ModelDims::validate() const {
    if (z < 1 || z_prime < 1 || heads < 1) throw UserError("model dims must be positive");
}

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::Linear: return "linear";
        case Channel::Stpp: return "stpp";
        case Channel::Stpm: return "stpm";
        case Channel::Nonlinear: return "nonlinear";
    }
    return "?";
}

namespace {

void fill_glorot(Tensor2& t, Rng& rng) {
    const double r = std::sqrt(6.0 / (t.rows() + t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-r, r);
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
    dims.validate();
    const int z = dims.z, zp = dims.z_prime, k = dims.heads;
    ModelParams p;
    p.dims = dims;
    p.spatial.resize(static_cast<std::size_t>(k));
    for (auto& h : p.spatial) {
        h.W_c = Tensor2(zp, z);
        h.W_s = Tensor2(zp, z);
        h.a_fwd = Tensor2(2 * zp, 1);
        h.a_bwd = Tensor2(2 * zp, 1);
        h.a_geo = Tensor2(2 * zp, 1);
    }
    p.gate_w = Tensor2(k, 4 * zp);
    p.gate_b = Tensor2(k, 1);
    p.out_proj = Tensor2(zp, 4 * zp);
    for (auto& c : p.channels) {
        c.W_q = Tensor2(zp, zp);
        c.W_k = Tensor2(zp, zp);
        c.W_v = Tensor2(zp, zp);
    }
    p.fusion.W_q = Tensor2(zp, zp);
    p.fusion.W_k = Tensor2(zp, zp);
    p.fusion.W_v = Tensor2(zp, zp);
    p.ff_w1 = Tensor2(zp, zp);
    p.ff_b1 = Tensor2(zp, 1);
    p.ff_w2 = Tensor2(1, zp);
    p.ff_b2 = Tensor2(1, 1);
    p.transfer_a = Tensor2(2 * zp, 1);

    Rng rng(derive_seed(seed, "params"));
    for (auto& [name, t] : p.tensors()) {
        if (name == "gate_b" || name == "head.ff_b1" || name == "head.ff_b2") continue;  // biases start at zero
        fill_glorot(*t, rng);
    }
    return p;
}

std::vector<std::pair<std::string, Tensor2*>> ModelParams::tensors() {
    std::vector<std::pair<std::string, Tensor2*>> out;
    for (std::size_t h = 0; h < spatial.size(); ++h) {
        const std::string prefix = "spatial.h" + std::to_string(h) + ".";
        out.emplace_back(prefix + "W_c", &spatial[h].W_c);
        out.emplace_back(prefix + "W_s", &spatial[h].W_s);
        out.emplace_back(prefix + "a_fwd", &spatial[h].a_fwd);
        out.emplace_back(prefix + "a_bwd", &spatial[h].a_bwd);
        out.emplace_back(prefix + "a_geo", &spatial[h].a_geo);
    }
    out.emplace_back("gate_w", &gate_w);
    out.emplace_back("gate_b", &gate_b);
    out.emplace_back("out_proj", &out_proj);
    for (int c = 0; c < kChannelCount; ++c) {
        const std::string prefix = std::string("temporal.") + channel_name(static_cast<Channel>(c)) + ".";
        out.emplace_back(prefix + "W_q", &channels[static_cast<std::size_t>(c)].W_q);
        out.emplace_back(prefix + "W_k", &channels[static_cast<std::size_t>(c)].W_k);
        out.emplace_back(prefix + "W_v", &channels[static_cast<std::size_t>(c)].W_v);
    }
    out.emplace_back("fusion.W_q", &fusion.W_q);
    out.emplace_back("fusion.W_k", &fusion.W_k);
    out.emplace_back("fusion.W_v", &fusion.W_v);
    out.emplace_back("head.ff_w1", &ff_w1);
    out.emplace_back("head.ff_b1", &ff_b1);
    out.emplace_back("head.ff_w2", &ff_w2);
    out.emplace_back("head.ff_b2", &ff_b2);
    out.emplace_back("transfer_a", &transfer_a);
    return out;
}

std::vector<std::pair<std::string, const Tensor2*>> ModelParams::tensors() const {
    auto mut = const_cast<ModelParams*>(this)->tensors();
    std::vector<std::pair<std::string, const Tensor2*>> out;
    out.reserve(mut.size());
    for (auto& [name, t] : mut) out.emplace_back(name, t);
    return out;
}

GradientSet GradientSet::zeros_like(const ModelParams& params) {
    GradientSet gs;
    for (const auto& [name, t] : params.tensors()) gs.g.emplace_back(t->rows(), t->cols());
    return gs;
}

void GradientSet::accumulate(const GradientSet& other) {
    if (g.size() != other.g.size()) throw InternalError("GradientSet: size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g[i].size(); ++j) g[i].data()[j] += other.g[i].data()[j];
    }
}

void GradientSet::scale_all(double s) {
    for (auto& t : g)
        for (std::size_t j = 0; j < t.size(); ++j) t.data()[j] *= s;
}

bool GradientSet::all_finite() const {
    for (const auto& t : g)
        if (!t.all_finite()) return false;
    return true;
}

BoundParams bind_params(Tape& tape, const ModelParams& params) {
    BoundParams b;
    for (const auto& h : params.spatial) {
        BoundParams::Head bh;
        bh.W_c = tape.leaf(h.W_c);
        bh.W_s = tape.leaf(h.W_s);
        bh.a_fwd = tape.leaf(h.a_fwd);
        bh.a_bwd = tape.leaf(h.a_bwd);
        bh.a_geo = tape.leaf(h.a_geo);
        b.spatial.push_back(bh);
        b.flat.insert(b.flat.end(), {bh.W_c, bh.W_s, bh.a_fwd, bh.a_bwd, bh.a_geo});
    }
    b.gate_w = tape.leaf(params.gate_w);
    b.gate_b = tape.leaf(params.gate_b);
    b.out_proj = tape.leaf(params.out_proj);
    b.flat.insert(b.flat.end(), {b.gate_w, b.gate_b, b.out_proj});
    for (int c = 0; c < kChannelCount; ++c) {
        const auto& ch = params.channels[static_cast<std::size_t>(c)];
        auto& bc = b.channels[static_cast<std::size_t>(c)];
        bc = {tape.leaf(ch.W_q), tape.leaf(ch.W_k), tape.leaf(ch.W_v)};
        b.flat.insert(b.flat.end(), {bc[0], bc[1], bc[2]});
    }
    b.fusion = {tape.leaf(params.fusion.W_q), tape.leaf(params.fusion.W_k), tape.leaf(params.fusion.W_v)};
    b.flat.insert(b.flat.end(), {b.fusion[0], b.fusion[1], b.fusion[2]});
    b.ff_w1 = tape.leaf(params.ff_w1);
    b.ff_b1 = tape.leaf(params.ff_b1);
    b.ff_w2 = tape.leaf(params.ff_w2);
    b.ff_b2 = tape.leaf(params.ff_b2);
    b.transfer_a = tape.leaf(params.transfer_a);
    b.flat.insert(b.flat.end(), {b.ff_w1, b.ff_b1, b.ff_w2, b.ff_b2, b.transfer_a});
    return b;
}

void accumulate_grads(const Tape& tape, const BoundParams& bound, GradientSet& grads) {
    if (grads.g.size() != bound.flat.size()) throw InternalError("accumulate_grads: size mismatch");
    for (std::size_t i = 0; i < bound.flat.size(); ++i) {
        const Tensor2& leaf_grad = tape.grad(bound.flat[i]);
        if (leaf_grad.empty()) continue;  // leaf not reached by backward
        Tensor2& dst = grads.g[i];
        for (std::size_t j = 0; j < dst.size(); ++j) dst.data()[j] += leaf_grad.data()[j];
    }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write checkpoint: " + path);
    out << "odcast-checkpoint 1\n";
    out << "dims " << params.dims.z << ' ' << params.dims.z_prime << ' ' << params.dims.heads << '\n';
    char buf[40];
    for (const auto& [name, t] : params.tensors()) {
        out << "tensor " << name << ' ' << t->rows() << ' ' << t->cols() << '\n';
        for (int r = 0; r < t->rows(); ++r) {
            for (int c = 0; c < t->cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%a", t->at(r, c));
                out << buf << (c + 1 == t->cols() ? '\n' : ' ');
            }
        }
    }
    out << "end\n";
    if (!out) throw UserError("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open checkpoint: " + path);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "odcast-checkpoint" || version != 1) throw UserError("not an odcast checkpoint: " + path);
    ModelDims dims;
    in >> tag >> dims.z >> dims.z_prime >> dims.heads;
    if (tag != "dims") throw UserError("malformed checkpoint (dims): " + path);
    ModelParams params = ModelParams::init(dims, 0);
    auto tensors = params.tensors();
    for (auto& [name, t] : tensors) {
        std::string label, tname;
        int rows = 0, cols = 0;
        in >> label >> tname >> rows >> cols;
        if (label != "tensor" || tname != name || rows != t->rows() || cols != t->cols())
            throw UserError("checkpoint tensor mismatch at " + name + ": " + path);
        std::string tok;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (!(in >> tok)) throw UserError("checkpoint truncated at " + name);
                char* end = nullptr;
                t->at(r, c) = std::strtod(tok.c_str(), &end);
                if (end != tok.c_str() + tok.size()) throw UserError("checkpoint value malformed at " + name);
            }
        }
    }
    in >> tag;
    if (tag != "end") throw UserError("checkpoint missing end marker: " + path);
    return params;
}

}  // namespace odcast
