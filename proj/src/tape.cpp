#include "odcast/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odcast/errors.hpp"

namespace odcast {

namespace {

// out += a * b^T  (a: m x k, b: n x k, out: m x n)
void acc_matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    const int m = a.rows(), k = a.cols(), n = b.rows();
    for (int i = 0; i < m; ++i) {
        const double* arow = a.data() + static_cast<std::size_t>(i) * k;
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b.data() + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            orow[j] += s;
        }
    }
}

// out += a^T * b  (a: k x m, b: k x n, out: m x n)
void acc_matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    const int k = a.rows(), m = a.cols(), n = b.cols();
    for (int p = 0; p < k; ++p) {
        const double* arow = a.data() + static_cast<std::size_t>(p) * m;
        const double* brow = b.data() + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Tensor2 v) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(v);
    return push(std::move(n));
}

int Tape::leaf(const Tensor2& v) {
    Node n;
    n.op = Op::Leaf;
    n.value = v;
    n.needs_grad = true;
    return push(std::move(n));
}

int Tape::ones(int rows, int cols) {
    auto key = std::make_pair(rows, cols);
    auto it = ones_cache_.find(key);
    if (it != ones_cache_.end()) return it->second;
    int id = constant(Tensor2::full(rows, cols, 1.0));
    ones_cache_.emplace(key, id);
    return id;
}

int Tape::add(int a, int b) {
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = odcast::add(nodes_[a].value, nodes_[b].value);
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = odcast::sub(nodes_[a].value, nodes_[b].value);
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.value = odcast::matmul(nodes_[a].value, nodes_[b].value);
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

int Tape::transpose(int a) {
    Node n;
    n.op = Op::Transpose;
    n.a = a;
    n.value = odcast::transpose(nodes_[a].value);
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::hadamard(int a, int b) {
    Node n;
    n.op = Op::Hadamard;
    n.a = a;
    n.b = b;
    n.value = odcast::hadamard(nodes_[a].value, nodes_[b].value);
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

int Tape::scale(int a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = s;
    n.value = odcast::scale(nodes_[a].value, s);
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::leaky_relu(int a, double slope) {
    Node n;
    n.op = Op::LeakyRelu;
    n.a = a;
    n.scalar = slope;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        double& v = n.value.data()[i];
        if (v < 0.0) v *= slope;
    }
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::sigmoid(int a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data()[i] = odcast::sigmoid(n.value.data()[i]);
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::softplus(int a) {
    Node n;
    n.op = Op::Softplus;
    n.a = a;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data()[i] = odcast::softplus(n.value.data()[i]);
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::row_softmax(int scores) { return row_softmax_masked(scores, -1); }

int Tape::row_softmax_masked(int scores, int mask) {
    const Tensor2& s = nodes_[scores].value;
    const Tensor2* m = mask >= 0 ? &nodes_[mask].value : nullptr;
    if (m && !m->same_shape(s)) throw InternalError("row_softmax: mask shape mismatch");
    Node n;
    n.op = Op::RowSoftmax;
    n.a = scores;
    n.b = mask;
    n.value = Tensor2(s.rows(), s.cols());
    for (int i = 0; i < s.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < s.cols(); ++j)
            if (!m || m->at(i, j) != 0.0) mx = std::max(mx, s.at(i, j));
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        double sum = 0.0;
        for (int j = 0; j < s.cols(); ++j) {
            if (m && m->at(i, j) == 0.0) continue;
            const double e = std::exp(s.at(i, j) - mx);
            n.value.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < s.cols(); ++j) n.value.at(i, j) /= sum;
    }
    n.needs_grad = nodes_[scores].needs_grad;
    return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw InternalError("concat_cols: no parts");
    const int rows = nodes_[parts[0]].value.rows();
    int cols = 0;
    bool needs = false;
    for (int p : parts) {
        if (nodes_[p].value.rows() != rows) throw InternalError("concat_cols: row mismatch");
        cols += nodes_[p].value.cols();
        needs = needs || nodes_[p].needs_grad;
    }
    Node n;
    n.op = Op::ConcatCols;
    n.srcs = parts;
    n.needs_grad = needs;
    n.value = Tensor2(rows, cols);
    int off = 0;
    for (int p : parts) {
        const Tensor2& v = nodes_[p].value;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < v.cols(); ++j) n.value.at(i, off + j) = v.at(i, j);
        off += v.cols();
    }
    return push(std::move(n));
}

int Tape::slice_cols(int a, int c0, int c1) {
    const Tensor2& v = nodes_[a].value;
    if (c0 < 0 || c1 > v.cols() || c0 >= c1) throw InternalError("slice_cols: bad range");
    Node n;
    n.op = Op::SliceCols;
    n.a = a;
    n.c0 = c0;
    n.c1 = c1;
    n.value = Tensor2(v.rows(), c1 - c0);
    for (int i = 0; i < v.rows(); ++i)
        for (int j = c0; j < c1; ++j) n.value.at(i, j - c0) = v.at(i, j);
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::slice_rows(int a, int r0, int r1) {
    const Tensor2& v = nodes_[a].value;
    if (r0 < 0 || r1 > v.rows() || r0 >= r1) throw InternalError("slice_rows: bad range");
    Node n;
    n.op = Op::SliceRows;
    n.a = a;
    n.c0 = r0;
    n.c1 = r1;
    n.value = Tensor2(r1 - r0, v.cols());
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < v.cols(); ++j) n.value.at(i - r0, j) = v.at(i, j);
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::row_sum(int a) {
    const Tensor2& v = nodes_[a].value;
    Node n;
    n.op = Op::RowSum;
    n.a = a;
    n.value = Tensor2(v.rows(), 1);
    for (int i = 0; i < v.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < v.cols(); ++j) s += v.at(i, j);
        n.value.at(i, 0) = s;
    }
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::sum_all(int a) {
    const Tensor2& v = nodes_[a].value;
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.value = Tensor2(1, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v.data()[i];
    n.value.at(0, 0) = s;
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

int Tape::smooth_l1_vs(int pred, int target) {
    const Tensor2& p = nodes_[pred].value;
    const Tensor2& t = nodes_[target].value;
    if (!p.same_shape(t)) throw InternalError("smooth_l1: shape mismatch");
    Node n;
    n.op = Op::SmoothL1;
    n.a = pred;
    n.b = target;
    n.value = Tensor2(p.rows(), p.cols());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p.data()[i] - t.data()[i];
        n.value.data()[i] = std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
    }
    n.needs_grad = nodes_[pred].needs_grad;
    return push(std::move(n));
}

Tensor2& Tape::grad_of(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor2(n.value.rows(), n.value.cols());
    n.touched = true;
    return n.grad;
}

void Tape::backward(int root) {
    if (nodes_[root].value.rows() != 1 || nodes_[root].value.cols() != 1)
        throw InternalError("backward: root is not scalar");
    grad_of(root).at(0, 0) = 1.0;
    for (int id = root; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.touched || !n.needs_grad) continue;
        backprop_node(id);
    }
}

void Tape::backprop_node(int id) {
    Node& n = nodes_[id];
    const Tensor2& g = n.grad;
    auto parent_needs = [&](int p) { return p >= 0 && nodes_[p].needs_grad; };

    switch (n.op) {
        case Op::Const:
        case Op::Leaf:
            break;
        case Op::Add: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
            }
            if (parent_needs(n.b)) {
                Tensor2& gb = grad_of(n.b);
                for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i];
            }
            break;
        }
        case Op::Sub: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
            }
            if (parent_needs(n.b)) {
                Tensor2& gb = grad_of(n.b);
                for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
            }
            break;
        }
        case Op::Matmul: {
            if (parent_needs(n.a)) acc_matmul_nt(g, nodes_[n.b].value, grad_of(n.a));
            if (parent_needs(n.b)) acc_matmul_tn(nodes_[n.a].value, g, grad_of(n.b));
            break;
        }
        case Op::Transpose: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
            }
            break;
        }
        case Op::Hadamard: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const Tensor2& bv = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
            }
            if (parent_needs(n.b)) {
                Tensor2& gb = grad_of(n.b);
                const Tensor2& av = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
            }
            break;
        }
        case Op::Scale: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += n.scalar * g.data()[i];
            }
            break;
        }
        case Op::LeakyRelu: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const Tensor2& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga.data()[i] += g.data()[i] * (x.data()[i] >= 0.0 ? 1.0 : n.scalar);
            }
            break;
        }
        case Op::Sigmoid: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const Tensor2& y = n.value;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double s = y.data()[i];
                    ga.data()[i] += g.data()[i] * s * (1.0 - s);
                }
            }
            break;
        }
        case Op::Softplus: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const Tensor2& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga.data()[i] += g.data()[i] * odcast::sigmoid(x.data()[i]);
            }
            break;
        }
        case Op::RowSoftmax: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const Tensor2& p = n.value;
                for (int i = 0; i < p.rows(); ++i) {
                    double dotgp = 0.0;
                    for (int j = 0; j < p.cols(); ++j) dotgp += g.at(i, j) * p.at(i, j);
                    for (int j = 0; j < p.cols(); ++j) {
                        const double pij = p.at(i, j);
                        if (pij != 0.0) ga.at(i, j) += pij * (g.at(i, j) - dotgp);
                    }
                }
            }
            break;
        }
        case Op::ConcatCols: {
            int off = 0;
            for (int p : n.srcs) {
                const int pc = nodes_[p].value.cols();
                if (parent_needs(p)) {
                    Tensor2& gp = grad_of(p);
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < pc; ++j) gp.at(i, j) += g.at(i, off + j);
                }
                off += pc;
            }
            break;
        }
        case Op::SliceCols: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga.at(i, n.c0 + j) += g.at(i, j);
            }
            break;
        }
        case Op::SliceRows: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga.at(n.c0 + i, j) += g.at(i, j);
            }
            break;
        }
        case Op::RowSum: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                for (int i = 0; i < ga.rows(); ++i) {
                    const double gi = g.at(i, 0);
                    for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += gi;
                }
            }
            break;
        }
        case Op::SumAll: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const double gs = g.at(0, 0);
                for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += gs;
            }
            break;
        }
        case Op::SmoothL1: {
            if (parent_needs(n.a)) {
                Tensor2& ga = grad_of(n.a);
                const Tensor2& p = nodes_[n.a].value;
                const Tensor2& t = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double d = p.data()[i] - t.data()[i];
                    ga.data()[i] += g.data()[i] * std::clamp(d, -1.0, 1.0);
                }
            }
            break;
        }
    }
}

}  // namespace odcast
