#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "riskmin/tensor.hpp"

namespace riskmin::num {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

enum class Op {
    Input,
    Param,
    Add,
    Sub,
    Mul,
    Scale,        // x * constant
    Matmul,       // [M,K] x [K,N]
    AddRowvec,    // [B,K] + [K], row broadcast
    MulColvec,    // [B,K] * [B], per-row scalar weights
    Relu,
    SoftmaxRows,  // per row for rank 2, whole vector for rank 1
    Log,
    Square,
    MeanAll,
    SumAll,
    ConcatCols,   // rank 2 along axis 1, rank 1 end-to-end
    GatherRows,   // rows of a [R,K] table selected by stored indices
    MaxPool2,     // 2x2 window, stride 2, NCHW
    Conv2d,       // valid padding, NCHW input, [F,C,kh,kw] weight, [F] bias
    FlattenRows,  // [B, ...] -> [B, prod(...)], same storage order
};

// Reverse-mode tape. Nodes are appended in construction order, which is also a
// topological order (an op can only consume already-created ids), so backward
// is a single reverse sweep. Kernels are plain deterministic loops: replaying
// a recording with identical inputs is bit-identical.
class Graph {
public:
    NodeId input(Tensor value);
    NodeId param(Tensor value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId matmul(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId x, NodeId bias);
    NodeId mul_colvec(NodeId x, NodeId weights);
    NodeId relu(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId log(NodeId a);
    NodeId square(NodeId a);
    NodeId mean_all(NodeId a);
    NodeId sum_all(NodeId a);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId gather_rows(NodeId table, std::vector<std::size_t> rows);
    NodeId max_pool2(NodeId a);
    NodeId conv2d(NodeId x, NodeId w, NodeId bias, std::size_t stride);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. The loss node
    // must hold a scalar. Every Param node ends up with a gradient tensor;
    // params the loss never touched keep zeros.
    void backward(NodeId loss);

private:
    struct Node {
        Op op;
        std::array<NodeId, 3> in{kNoNode, kNoNode, kNoNode};
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> aux;  // pool argmaxes, gather rows, conv stride
        double scalar = 0.0;
    };

    NodeId push(Node node);
    Node& node(NodeId id) { return nodes_[id]; }

    std::vector<Node> nodes_;
};

}  // namespace riskmin::num
