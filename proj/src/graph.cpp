#include "riskmin/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "riskmin/error.hpp"

namespace riskmin::num {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        fail(ErrorCode::ShapeMismatch,
             std::string(op) + ": expected rank " + std::to_string(rank) + " operand, got shape " +
                 t.shape_str());
    }
}

}  // namespace

NodeId Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

NodeId Graph::input(Tensor value) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::param(Tensor value) {
    Node n;
    n.op = Op::Param;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_same_shape(va, vb, "add");
    Node n;
    n.op = Op::Add;
    n.in = {a, b, kNoNode};
    n.value = va;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) += vb.at(i);
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_same_shape(va, vb, "sub");
    Node n;
    n.op = Op::Sub;
    n.in = {a, b, kNoNode};
    n.value = va;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) -= vb.at(i);
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_same_shape(va, vb, "mul");
    Node n;
    n.op = Op::Mul;
    n.in = {a, b, kNoNode};
    n.value = va;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) *= vb.at(i);
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.in = {a, kNoNode, kNoNode};
    n.scalar = c;
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) *= c;
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_rank(va, 2, "matmul");
    require_rank(vb, 2, "matmul");
    if (va.dim(1) != vb.dim(0)) {
        fail(ErrorCode::ShapeMismatch,
             "matmul: inner dims of " + va.shape_str() + " and " + vb.shape_str() + " differ");
    }
    const std::size_t m = va.dim(0), k = va.dim(1), p = vb.dim(1);
    Node n;
    n.op = Op::Matmul;
    n.in = {a, b, kNoNode};
    n.value = Tensor({m, p});
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < m; ++i) {
        double* out = n.value.data() + i * p;
        const double* arow = va.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = vb.data() + kk * p;
            for (std::size_t j = 0; j < p; ++j) out[j] += av * brow[j];
        }
    }
    return push(std::move(n));
}

NodeId Graph::add_rowvec(NodeId x, NodeId bias) {
    const Tensor& vx = value(x);
    const Tensor& vb = value(bias);
    require_rank(vx, 2, "add_rowvec");
    require_rank(vb, 1, "add_rowvec");
    if (vx.dim(1) != vb.dim(0)) {
        fail(ErrorCode::ShapeMismatch,
             "add_rowvec: " + vx.shape_str() + " rows incompatible with bias " + vb.shape_str());
    }
    Node n;
    n.op = Op::AddRowvec;
    n.in = {x, bias, kNoNode};
    n.value = vx;
    const std::size_t rows = vx.dim(0), cols = vx.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) n.value.at(i * cols + j) += vb.at(j);
    return push(std::move(n));
}

NodeId Graph::mul_colvec(NodeId x, NodeId weights) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(weights);
    require_rank(vx, 2, "mul_colvec");
    require_rank(vw, 1, "mul_colvec");
    if (vx.dim(0) != vw.dim(0)) {
        fail(ErrorCode::ShapeMismatch,
             "mul_colvec: " + vx.shape_str() + " rows incompatible with weights " + vw.shape_str());
    }
    Node n;
    n.op = Op::MulColvec;
    n.in = {x, weights, kNoNode};
    n.value = vx;
    const std::size_t rows = vx.dim(0), cols = vx.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) n.value.at(i * cols + j) *= vw.at(i);
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.in = {a, kNoNode, kNoNode};
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) = std::max(0.0, n.value.at(i));
    return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
    const Tensor& va = value(a);
    if (va.rank() != 1 && va.rank() != 2) {
        fail(ErrorCode::ShapeMismatch, "softmax: expected rank 1 or 2, got " + va.shape_str());
    }
    const std::size_t rows = va.rank() == 2 ? va.dim(0) : 1;
    const std::size_t cols = va.rank() == 2 ? va.dim(1) : va.dim(0);
    Node n;
    n.op = Op::SoftmaxRows;
    n.in = {a, kNoNode, kNoNode};
    n.value = va;
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = n.value.data() + i * cols;
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
    }
    return push(std::move(n));
}

NodeId Graph::log(NodeId a) {
    Node n;
    n.op = Op::Log;
    n.in = {a, kNoNode, kNoNode};
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) = std::log(n.value.at(i));
    return push(std::move(n));
}

NodeId Graph::square(NodeId a) {
    Node n;
    n.op = Op::Square;
    n.in = {a, kNoNode, kNoNode};
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) *= n.value.at(i);
    return push(std::move(n));
}

NodeId Graph::mean_all(NodeId a) {
    const Tensor& va = value(a);
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) sum += va.at(i);
    Node n;
    n.op = Op::MeanAll;
    n.in = {a, kNoNode, kNoNode};
    n.value = Tensor::scalar(sum / static_cast<double>(va.size()));
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    const Tensor& va = value(a);
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) sum += va.at(i);
    Node n;
    n.op = Op::SumAll;
    n.in = {a, kNoNode, kNoNode};
    n.value = Tensor::scalar(sum);
    return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rank() != vb.rank() || (va.rank() != 1 && va.rank() != 2)) {
        fail(ErrorCode::ShapeMismatch,
             "concat: ranks of " + va.shape_str() + " and " + vb.shape_str() + " unsupported");
    }
    Node n;
    n.op = Op::ConcatCols;
    n.in = {a, b, kNoNode};
    if (va.rank() == 1) {
        std::vector<double> out(va.values());
        out.insert(out.end(), vb.values().begin(), vb.values().end());
        n.value = Tensor::vec(std::move(out));
        n.aux = {va.dim(0)};
    } else {
        if (va.dim(0) != vb.dim(0)) {
            fail(ErrorCode::ShapeMismatch,
                 "concat: row counts of " + va.shape_str() + " and " + vb.shape_str() + " differ");
        }
        const std::size_t rows = va.dim(0), ca = va.dim(1), cb = vb.dim(1);
        n.value = Tensor({rows, ca + cb});
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < ca; ++j) n.value.at(i * (ca + cb) + j) = va.at(i * ca + j);
            for (std::size_t j = 0; j < cb; ++j)
                n.value.at(i * (ca + cb) + ca + j) = vb.at(i * cb + j);
        }
        n.aux = {ca};
    }
    return push(std::move(n));
}

NodeId Graph::gather_rows(NodeId table, std::vector<std::size_t> rows) {
    const Tensor& vt = value(table);
    require_rank(vt, 2, "gather_rows");
    const std::size_t r = vt.dim(0), k = vt.dim(1);
    for (std::size_t idx : rows) {
        if (idx >= r) {
            fail(ErrorCode::ShapeMismatch, "gather_rows: row " + std::to_string(idx) +
                                               " out of range for table " + vt.shape_str());
        }
    }
    Node n;
    n.op = Op::GatherRows;
    n.in = {table, kNoNode, kNoNode};
    n.value = Tensor({rows.size(), k});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) n.value.at(i * k + j) = vt.at(rows[i] * k + j);
    n.aux = std::move(rows);
    return push(std::move(n));
}

NodeId Graph::max_pool2(NodeId a) {
    const Tensor& va = value(a);
    require_rank(va, 4, "max_pool2");
    const std::size_t b = va.dim(0), c = va.dim(1), h = va.dim(2), w = va.dim(3);
    if (h < 2 || w < 2) {
        fail(ErrorCode::ShapeMismatch, "max_pool2: spatial dims of " + va.shape_str() + " below 2x2");
    }
    const std::size_t oh = h / 2, ow = w / 2;
    Node n;
    n.op = Op::MaxPool2;
    n.in = {a, kNoNode, kNoNode};
    n.value = Tensor({b, c, oh, ow});
    n.aux.resize(b * c * oh * ow);
    std::size_t o = 0;
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j, ++o) {
                    std::size_t base = ((bi * c + ci) * h + 2 * i) * w + 2 * j;
                    std::size_t best = base;
                    double bv = va.at(base);
                    const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
                    for (std::size_t cc : cand) {
                        if (va.at(cc) > bv) {
                            bv = va.at(cc);
                            best = cc;
                        }
                    }
                    n.value.at(o) = bv;
                    n.aux[o] = best;
                }
    return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId w, NodeId bias, std::size_t stride) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    const Tensor& vb = value(bias);
    require_rank(vx, 4, "conv2d");
    require_rank(vw, 4, "conv2d");
    require_rank(vb, 1, "conv2d");
    const std::size_t b = vx.dim(0), c = vx.dim(1), h = vx.dim(2), ww = vx.dim(3);
    const std::size_t f = vw.dim(0), kc = vw.dim(1), kh = vw.dim(2), kw = vw.dim(3);
    if (kc != c || vb.dim(0) != f) {
        fail(ErrorCode::ShapeMismatch, "conv2d: weight " + vw.shape_str() + " / bias " +
                                           vb.shape_str() + " incompatible with input " +
                                           vx.shape_str());
    }
    if (stride == 0 || h < kh || ww < kw) {
        fail(ErrorCode::ShapeMismatch, "conv2d: kernel " + vw.shape_str() +
                                           " does not fit input " + vx.shape_str() +
                                           " (valid padding, stride " + std::to_string(stride) + ")");
    }
    const std::size_t oh = (h - kh) / stride + 1, ow = (ww - kw) / stride + 1;
    Node n;
    n.op = Op::Conv2d;
    n.in = {x, w, bias};
    n.aux = {stride};
    n.value = Tensor({b, f, oh, ow});
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t fi = 0; fi < f; ++fi)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double acc = vb.at(fi);
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t u = 0; u < kh; ++u) {
                            const double* in_row =
                                vx.data() + ((bi * c + ci) * h + i * stride + u) * ww + j * stride;
                            const double* w_row = vw.data() + ((fi * c + ci) * kh + u) * kw;
                            for (std::size_t v = 0; v < kw; ++v) acc += in_row[v] * w_row[v];
                        }
                    n.value.at(((bi * f + fi) * oh + i) * ow + j) = acc;
                }
    return push(std::move(n));
}

void Graph::backward(NodeId loss) {
    if (loss >= nodes_.size()) fail(ErrorCode::Precondition, "backward: unknown loss node");
    if (value(loss).size() != 1) {
        fail(ErrorCode::Precondition,
             "backward: loss node must be scalar, got shape " + value(loss).shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor(n.value.shape());
    nodes_[loss].grad.at(0) = 1.0;

    for (std::size_t idx = loss + 1; idx-- > 0;) {
        Node& n = nodes_[idx];
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Input:
            case Op::Param:
                break;
            case Op::Add: {
                Tensor& ga = nodes_[n.in[0]].grad;
                Tensor& gb = nodes_[n.in[1]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga.at(i) += g.at(i);
                    gb.at(i) += g.at(i);
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = nodes_[n.in[0]].grad;
                Tensor& gb = nodes_[n.in[1]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga.at(i) += g.at(i);
                    gb.at(i) -= g.at(i);
                }
                break;
            }
            case Op::Mul: {
                const Tensor& va = nodes_[n.in[0]].value;
                const Tensor& vb = nodes_[n.in[1]].value;
                Tensor& ga = nodes_[n.in[0]].grad;
                Tensor& gb = nodes_[n.in[1]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga.at(i) += g.at(i) * vb.at(i);
                    gb.at(i) += g.at(i) * va.at(i);
                }
                break;
            }
            case Op::Scale: {
                Tensor& ga = nodes_[n.in[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i) * n.scalar;
                break;
            }
            case Op::Matmul: {
                const Tensor& va = nodes_[n.in[0]].value;
                const Tensor& vb = nodes_[n.in[1]].value;
                Tensor& ga = nodes_[n.in[0]].grad;
                Tensor& gb = nodes_[n.in[1]].grad;
                const std::size_t m = va.dim(0), k = va.dim(1), p = vb.dim(1);
                // dA = dY B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* gy = g.data() + i * p;
                        const double* brow = vb.data() + kk * p;
                        for (std::size_t j = 0; j < p; ++j) acc += gy[j] * brow[j];
                        ga.at(i * k + kk) += acc;
                    }
                // dB = A^T dY
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double av = va.at(i * k + kk);
                        const double* gy = g.data() + i * p;
                        double* gbrow = gb.data() + kk * p;
                        for (std::size_t j = 0; j < p; ++j) gbrow[j] += av * gy[j];
                    }
                break;
            }
            case Op::AddRowvec: {
                Tensor& gx = nodes_[n.in[0]].grad;
                Tensor& gbias = nodes_[n.in[1]].grad;
                const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j) {
                        gx.at(i * cols + j) += g.at(i * cols + j);
                        gbias.at(j) += g.at(i * cols + j);
                    }
                break;
            }
            case Op::MulColvec: {
                const Tensor& vx = nodes_[n.in[0]].value;
                const Tensor& vw = nodes_[n.in[1]].value;
                Tensor& gx = nodes_[n.in[0]].grad;
                Tensor& gw = nodes_[n.in[1]].grad;
                const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j) {
                        gx.at(i * cols + j) += g.at(i * cols + j) * vw.at(i);
                        gw.at(i) += g.at(i * cols + j) * vx.at(i * cols + j);
                    }
                break;
            }
            case Op::Relu: {
                const Tensor& vx = nodes_[n.in[0]].value;
                Tensor& gx = nodes_[n.in[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (vx.at(i) > 0.0) gx.at(i) += g.at(i);
                break;
            }
            case Op::SoftmaxRows: {
                Tensor& gx = nodes_[n.in[0]].grad;
                const std::size_t rows = n.value.rank() == 2 ? n.value.dim(0) : 1;
                const std::size_t cols =
                    n.value.rank() == 2 ? n.value.dim(1) : n.value.dim(0);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* y = n.value.data() + i * cols;
                    const double* gy = g.data() + i * cols;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
                    for (std::size_t j = 0; j < cols; ++j)
                        gx.at(i * cols + j) += y[j] * (gy[j] - dot);
                }
                break;
            }
            case Op::Log: {
                const Tensor& vx = nodes_[n.in[0]].value;
                Tensor& gx = nodes_[n.in[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) += g.at(i) / vx.at(i);
                break;
            }
            case Op::Square: {
                const Tensor& vx = nodes_[n.in[0]].value;
                Tensor& gx = nodes_[n.in[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) += 2.0 * vx.at(i) * g.at(i);
                break;
            }
            case Op::MeanAll: {
                Tensor& gx = nodes_[n.in[0]].grad;
                const double gv = g.at(0) / static_cast<double>(gx.size());
                for (std::size_t i = 0; i < gx.size(); ++i) gx.at(i) += gv;
                break;
            }
            case Op::SumAll: {
                Tensor& gx = nodes_[n.in[0]].grad;
                for (std::size_t i = 0; i < gx.size(); ++i) gx.at(i) += g.at(0);
                break;
            }
            case Op::ConcatCols: {
                Tensor& ga = nodes_[n.in[0]].grad;
                Tensor& gb = nodes_[n.in[1]].grad;
                if (n.value.rank() == 1) {
                    const std::size_t ca = n.aux[0];
                    for (std::size_t i = 0; i < ca; ++i) ga.at(i) += g.at(i);
                    for (std::size_t i = 0; i < gb.size(); ++i) gb.at(i) += g.at(ca + i);
                } else {
                    const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
                    const std::size_t ca = n.aux[0], cb = cols - ca;
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < ca; ++j)
                            ga.at(i * ca + j) += g.at(i * cols + j);
                        for (std::size_t j = 0; j < cb; ++j)
                            gb.at(i * cb + j) += g.at(i * cols + ca + j);
                    }
                }
                break;
            }
            case Op::GatherRows: {
                Tensor& gt = nodes_[n.in[0]].grad;
                const std::size_t k = n.value.dim(1);
                for (std::size_t i = 0; i < n.aux.size(); ++i)
                    for (std::size_t j = 0; j < k; ++j)
                        gt.at(n.aux[i] * k + j) += g.at(i * k + j);
                break;
            }
            case Op::MaxPool2: {
                Tensor& gx = nodes_[n.in[0]].grad;
                for (std::size_t o = 0; o < n.aux.size(); ++o) gx.at(n.aux[o]) += g.at(o);
                break;
            }
            case Op::Conv2d: {
                const Tensor& vx = nodes_[n.in[0]].value;
                const Tensor& vw = nodes_[n.in[1]].value;
                Tensor& gx = nodes_[n.in[0]].grad;
                Tensor& gw = nodes_[n.in[1]].grad;
                Tensor& gbias = nodes_[n.in[2]].grad;
                const std::size_t stride = n.aux[0];
                const std::size_t b = vx.dim(0), c = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
                const std::size_t f = vw.dim(0), kh = vw.dim(2), kw = vw.dim(3);
                const std::size_t oh = n.value.dim(2), ow = n.value.dim(3);
                for (std::size_t bi = 0; bi < b; ++bi)
                    for (std::size_t fi = 0; fi < f; ++fi)
                        for (std::size_t i = 0; i < oh; ++i)
                            for (std::size_t j = 0; j < ow; ++j) {
                                const double gv = g.at(((bi * f + fi) * oh + i) * ow + j);
                                gbias.at(fi) += gv;
                                for (std::size_t ci = 0; ci < c; ++ci)
                                    for (std::size_t u = 0; u < kh; ++u)
                                        for (std::size_t v = 0; v < kw; ++v) {
                                            const std::size_t xi =
                                                ((bi * c + ci) * h + i * stride + u) * w +
                                                j * stride + v;
                                            const std::size_t wi =
                                                ((fi * c + ci) * kh + u) * kw + v;
                                            gx.at(xi) += gv * vw.at(wi);
                                            gw.at(wi) += gv * vx.at(xi);
                                        }
                            }
                break;
            }
        }
    }
}

}  // namespace riskmin::num
