#include "odcast/transfer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "odcast/errors.hpp"

namespace odcast {

Tensor2 demand_head(const Tensor2& fused, const ModelParams& params, double slope) {
    const int n = fused.rows();
    const int zp = params.dims.z_prime;
    if (fused.cols() != zp) throw InternalError("demand_head: embedding width mismatch");
    Tensor2 out(n, 1);
    std::vector<double> hidden(static_cast<std::size_t>(zp));
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < zp; ++r) {
            double s = params.ff_b1.at(r, 0);
            for (int c = 0; c < zp; ++c) s += params.ff_w1.at(r, c) * fused.at(i, c);
            hidden[static_cast<std::size_t>(r)] = leaky_relu(s, slope);
        }
        double s = params.ff_b2.at(0, 0);
        for (int c = 0; c < zp; ++c) s += params.ff_w2.at(0, c) * hidden[static_cast<std::size_t>(c)];
        out.at(i, 0) = softplus(s);
    }
    return out;
}

Tensor2 transfer_probs(const Tensor2& fused, const Tensor2& transfer_a, double slope) {
    const int n = fused.rows();
    const int zp = fused.cols();
    if (transfer_a.rows() != 2 * zp || transfer_a.cols() != 1)
        throw InternalError("transfer_probs: attention vector shape");
    std::vector<double> s_self(static_cast<std::size_t>(n), 0.0), s_other(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < zp; ++c) {
            s_self[static_cast<std::size_t>(i)] += transfer_a.at(c, 0) * fused.at(i, c);
            s_other[static_cast<std::size_t>(i)] += transfer_a.at(zp + c, 0) * fused.at(i, c);
        }
    }
    Tensor2 probs(n, n);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            row[static_cast<std::size_t>(j)] =
                leaky_relu(s_self[static_cast<std::size_t>(i)] + s_other[static_cast<std::size_t>(j)], slope);
        const auto w = softmax(row);
        for (int j = 0; j < n; ++j) probs.at(i, j) = w[static_cast<std::size_t>(j)];
    }
    return probs;
}

Tensor2 od_from_demand(const Tensor2& demand, const Tensor2& probs) {
    const int n = probs.rows();
    if (demand.rows() != n || demand.cols() != 1 || probs.cols() != n)
        throw InternalError("od_from_demand: shape mismatch");
    Tensor2 od(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) od.at(i, j) = demand.at(i, 0) * probs.at(i, j);
    return od;
}

Tensor2 blend_with_history(const Tensor2& raw, const Tensor2& history, double lambda) {
    if (!raw.same_shape(history)) throw InternalError("blend_with_history: shape mismatch");
    if (lambda < 0.0 || lambda > 1.0) throw InternalError("blend_with_history: lambda outside [0, 1]");
    Tensor2 out = raw;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = lambda * raw.data()[i] + (1.0 - lambda) * history.data()[i];
    return out;
}

void write_forecast(const ForecastResult& result, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char name[64];
    std::snprintf(name, sizeof name, "demand_%04d_%04d.csv", result.target.day, result.target.slot);
    {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw UserError("cannot write forecast demand file in " + dir);
        out << "cell,raw_demand,blended_demand\n";
        char buf[64];
        for (int i = 0; i < result.raw_demand.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", i, result.raw_demand.at(i, 0),
                          result.blended_demand.at(i, 0));
            out << buf;
        }
    }
    std::snprintf(name, sizeof name, "od_%04d_%04d.txt", result.target.day, result.target.slot);
    {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw UserError("cannot write forecast od file in " + dir);
        char buf[96];
        for (int i = 0; i < result.raw_od.rows(); ++i) {
            for (int j = 0; j < result.raw_od.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", i, j, result.raw_od.at(i, j),
                              result.blended_od.at(i, j));
                out << buf;
            }
        }
    }
}

int demand_head_t(Tape& tape, int fused, const BoundParams& bound, double slope) {
    const int n = tape.value(fused).rows();
    const int ones_n1 = tape.ones(n, 1);
    const int lin1 = tape.add(tape.matmul(fused, tape.transpose(bound.ff_w1)),
                              tape.matmul(ones_n1, tape.transpose(bound.ff_b1)));
    const int hidden = tape.leaky_relu(lin1, slope);
    const int lin2 = tape.add(tape.matmul(hidden, tape.transpose(bound.ff_w2)),
                              tape.matmul(ones_n1, bound.ff_b2));
    return tape.softplus(lin2);
}

int transfer_probs_t(Tape& tape, int fused, const BoundParams& bound, int z_prime, double slope) {
    const int n = tape.value(fused).rows();
    const int a_self = tape.slice_rows(bound.transfer_a, 0, z_prime);
    const int a_other = tape.slice_rows(bound.transfer_a, z_prime, 2 * z_prime);
    const int s_self = tape.matmul(fused, a_self);
    const int s_other = tape.matmul(fused, a_other);
    const int raw = tape.add(tape.matmul(s_self, tape.ones(1, n)),
                             tape.matmul(tape.ones(n, 1), tape.transpose(s_other)));
    return tape.row_softmax(tape.leaky_relu(raw, slope));
}

int od_from_demand_t(Tape& tape, int demand, int probs, int n) {
    return tape.hadamard(tape.matmul(demand, tape.ones(1, n)), probs);
}

}  // namespace odcast
