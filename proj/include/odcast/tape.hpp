#pragma once

#include <map>
#include <utility>
#include <vector>

#include "odcast/tensor.hpp"

namespace odcast {

// Reverse-mode tape over Tensor2 values. Nodes are created in topological
// order by the factory methods; backward() walks them in reverse and
// accumulates adjoints into every leaf. One tape per forward pass.
class Tape {
  public:
    int constant(Tensor2 v);
    int leaf(const Tensor2& v);  // differentiable input (parameter)

    int add(int a, int b);
    int sub(int a, int b);
    int matmul(int a, int b);
    int transpose(int a);
    int hadamard(int a, int b);
    int scale(int a, double s);
    int leaky_relu(int a, double slope);
    int sigmoid(int a);
    int softplus(int a);

    // Softmax across each row; with a 0/1 mask, entries outside the mask get
    // weight 0 and an all-masked row comes back as zeros.
    int row_softmax(int scores);
    int row_softmax_masked(int scores, int mask);

    int concat_cols(const std::vector<int>& parts);
    int slice_cols(int a, int c0, int c1);  // [c0, c1)
    int slice_rows(int a, int r0, int r1);
    int row_sum(int a);  // n x m -> n x 1
    int sum_all(int a);  // -> 1 x 1

    // Elementwise smooth-L1 of pred against a non-differentiable target.
    int smooth_l1_vs(int pred, int target);

    // Constant matrix of ones, cached per shape.
    int ones(int rows, int cols);

    const Tensor2& value(int id) const { return nodes_[id].value; }
    const Tensor2& grad(int id) const { return nodes_[id].grad; }

    // root must be a 1x1 scalar node.
    void backward(int root);

    int size() const { return static_cast<int>(nodes_.size()); }

  private:
    enum class Op : unsigned char {
        Const,
        Leaf,
        Add,
        Sub,
        Matmul,
        Transpose,
        Hadamard,
        Scale,
        LeakyRelu,
        Sigmoid,
        Softplus,
        RowSoftmax,
        ConcatCols,
        SliceCols,
        SliceRows,
        RowSum,
        SumAll,
        SmoothL1,
    };

    struct Node {
        Tensor2 value;
        Tensor2 grad;  // allocated during backward only for touched nodes
        Op op = Op::Const;
        bool needs_grad = false;
        bool touched = false;
        int a = -1;
        int b = -1;           // second parent, or softmax mask
        double scalar = 0.0;  // Scale factor / LeakyRelu slope
        int c0 = 0, c1 = 0;   // slice bounds
        std::vector<int> srcs;  // ConcatCols parents
    };

    int push(Node n);
    Tensor2& grad_of(int id);
    void backprop_node(int id);

    std::vector<Node> nodes_;
    std::map<std::pair<int, int>, int> ones_cache_;
};

}  // namespace odcast
