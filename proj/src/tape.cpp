#include "og/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "og/errors.hpp"

namespace og {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

// Views a rank-1 tensor as a single row, rank-2 as-is.
CMapM as_rows(const Tensor& t) {
    if (t.rank() == 1) return CMapM(t.data.data(), 1, static_cast<Eigen::Index>(t.shape[0]));
    return CMapM(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                 static_cast<Eigen::Index>(t.shape[1]));
}

MapM as_rows_mut(Tensor& t) {
    if (t.rank() == 1) return MapM(t.data.data(), 1, static_cast<Eigen::Index>(t.shape[0]));
    return MapM(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                static_cast<Eigen::Index>(t.shape[1]));
}

std::string dims(const Tensor& t) { return t.shape_string(); }

}  // namespace

void Tape::check_id(Id id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw InvariantError("tape node id " + std::to_string(id) + " out of range");
    }
}

Tape::Id Tape::leaf(const Tensor* external, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.external = external;
    n.requires_grad = requires_grad;
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::linear(Id x, Id w, Id b) {
    check_id(x);
    check_id(w);
    if (b >= 0) check_id(b);
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    if (xv.rank() < 1 || xv.rank() > 2 || wv.rank() != 2) {
        throw DimensionError("linear expects input rank 1 or 2 and weight rank 2, got " +
                             dims(xv) + " and " + dims(wv));
    }
    const std::size_t in_dim = xv.rank() == 1 ? xv.shape[0] : xv.shape[1];
    const std::size_t out_dim = wv.shape[0];
    if (wv.shape[1] != in_dim) {
        throw DimensionError("linear weight " + dims(wv) + " does not accept input " + dims(xv));
    }
    if (b >= 0) {
        const Tensor& bv = val(b);
        if (bv.rank() != 1 || bv.shape[0] != out_dim) {
            throw DimensionError("linear bias " + dims(bv) + " does not match weight " + dims(wv));
        }
    }

    Node n;
    n.op = Op::Linear;
    n.inputs = {x, w, b};
    n.value = xv.rank() == 1 ? Tensor::zeros({out_dim}) : Tensor::zeros({xv.shape[0], out_dim});
    {
        CMapM xm = as_rows(xv);
        CMapM wm = as_rows(wv);
        MapM ym = as_rows_mut(n.value);
        ym.noalias() = xm * wm.transpose();
        if (b >= 0) {
            CMapM bm = as_rows(val(b));
            ym.rowwise() += bm.row(0);
        }
    }
    n.needs_grad = node(x).needs_grad || node(w).needs_grad || (b >= 0 && node(b).needs_grad);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::relu(Id x) {
    check_id(x);
    const Tensor& xv = val(x);
    Node n;
    n.op = Op::Relu;
    n.inputs = {x};
    n.value = Tensor(xv.shape, xv.data);
    for (double& v : n.value.data) v = std::max(0.0, v);
    n.needs_grad = node(x).needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::concat_cols(const std::vector<Id>& xs) {
    if (xs.empty()) throw DimensionError("concat_cols needs at least one input");
    std::size_t rows = 0;
    std::size_t total_cols = 0;
    bool needs = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        check_id(xs[i]);
        const Tensor& t = val(xs[i]);
        if (t.rank() != 2) {
            throw DimensionError("concat_cols input " + std::to_string(i) + " has shape " +
                                 dims(t) + ", expected rank 2");
        }
        if (i == 0) {
            rows = t.shape[0];
        } else if (t.shape[0] != rows) {
            throw DimensionError("concat_cols row mismatch: input 0 has " + std::to_string(rows) +
                                 " rows, input " + std::to_string(i) + " has " +
                                 std::to_string(t.shape[0]));
        }
        total_cols += t.shape[1];
        needs = needs || node(xs[i]).needs_grad;
    }

    Node n;
    n.op = Op::ConcatCols;
    n.inputs = xs;
    n.value = Tensor::zeros({rows, total_cols});
    std::size_t col = 0;
    for (Id id : xs) {
        const Tensor& t = val(id);
        const std::size_t c = t.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(t.data.data() + r * c, c, n.value.data.data() + r * total_cols + col);
        }
        col += c;
    }
    n.needs_grad = needs;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::row_mask(Id x, std::vector<std::uint8_t> keep) {
    check_id(x);
    const Tensor& xv = val(x);
    if (xv.rank() != 2) {
        throw DimensionError("row_mask expects rank 2, got " + dims(xv));
    }
    if (keep.size() != xv.shape[0]) {
        throw DimensionError("row_mask keep length " + std::to_string(keep.size()) +
                             " does not match " + std::to_string(xv.shape[0]) + " rows");
    }
    Node n;
    n.op = Op::RowMask;
    n.inputs = {x};
    n.value = Tensor(xv.shape, xv.data);
    const std::size_t c = xv.shape[1];
    for (std::size_t r = 0; r < keep.size(); ++r) {
        if (!keep[r]) std::fill_n(n.value.data.data() + r * c, c, 0.0);
    }
    n.keep = std::move(keep);
    n.needs_grad = node(x).needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::batchnorm(Id x, Id gamma, Id beta, Tensor* running_mean, Tensor* running_var,
                         bool training, double momentum, double eps) {
    check_id(x);
    check_id(gamma);
    check_id(beta);
    const Tensor& xv = val(x);
    if (xv.rank() != 2) throw DimensionError("batchnorm expects rank 2, got " + dims(xv));
    const std::size_t b = xv.shape[0];
    const std::size_t d = xv.shape[1];
    const Tensor& gv = val(gamma);
    const Tensor& bv = val(beta);
    if (gv.shape != std::vector<std::size_t>{d} || bv.shape != std::vector<std::size_t>{d}) {
        throw DimensionError("batchnorm scale/shift shapes " + dims(gv) + "/" + dims(bv) +
                             " do not match feature width " + std::to_string(d));
    }
    if (!running_mean || !running_var || running_mean->shape != std::vector<std::size_t>{d} ||
        running_var->shape != std::vector<std::size_t>{d}) {
        throw DimensionError("batchnorm running buffers missing or not length " + std::to_string(d));
    }
    if (training && b < 2) {
        throw InvariantError("batchnorm in training mode needs batch size >= 2, got " +
                             std::to_string(b));
    }

    Node n;
    n.op = Op::BatchNorm;
    n.inputs = {x, gamma, beta};
    n.bn_training = training;
    n.value = Tensor::zeros({b, d});
    n.bn_xhat = Tensor::zeros({b, d});
    n.bn_inv_std = Tensor::zeros({d});

    for (std::size_t j = 0; j < d; ++j) {
        double mu, var;
        if (training) {
            double s = 0;
            for (std::size_t r = 0; r < b; ++r) s += xv.at(r, j);
            mu = s / static_cast<double>(b);
            double sq = 0;
            for (std::size_t r = 0; r < b; ++r) {
                const double c = xv.at(r, j) - mu;
                sq += c * c;
            }
            var = sq / static_cast<double>(b);
            // running variance tracked with the unbiased estimate, as is usual
            const double unbiased = sq / static_cast<double>(b - 1);
            running_mean->data[j] = (1.0 - momentum) * running_mean->data[j] + momentum * mu;
            running_var->data[j] = (1.0 - momentum) * running_var->data[j] + momentum * unbiased;
        } else {
            mu = running_mean->data[j];
            var = running_var->data[j];
        }
        const double inv_std = 1.0 / std::sqrt(var + eps);
        n.bn_inv_std.data[j] = inv_std;
        for (std::size_t r = 0; r < b; ++r) {
            const double xh = (xv.at(r, j) - mu) * inv_std;
            n.bn_xhat.at(r, j) = xh;
            n.value.at(r, j) = gv.data[j] * xh + bv.data[j];
        }
    }
    n.needs_grad = node(x).needs_grad || node(gamma).needs_grad || node(beta).needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::softmax_xent(Id logits, std::vector<std::size_t> labels) {
    check_id(logits);
    const Tensor& lv = val(logits);
    if (lv.rank() != 2) throw DimensionError("softmax_xent expects rank 2 logits, got " + dims(lv));
    const std::size_t b = lv.shape[0];
    const std::size_t c = lv.shape[1];
    if (labels.size() != b) {
        throw DimensionError("softmax_xent got " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(b) + " rows");
    }
    for (std::size_t lab : labels) {
        if (lab >= c) {
            throw DimensionError("softmax_xent label " + std::to_string(lab) +
                                 " out of range for " + std::to_string(c) + " classes");
        }
    }

    Node n;
    n.op = Op::SoftmaxXent;
    n.inputs = {logits};
    n.probs = Tensor::zeros({b, c});
    double loss = 0;
    for (std::size_t r = 0; r < b; ++r) {
        double m = lv.at(r, 0);
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, lv.at(r, j));
        double z = 0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(lv.at(r, j) - m);
            n.probs.at(r, j) = e;
            z += e;
        }
        for (std::size_t j = 0; j < c; ++j) n.probs.at(r, j) /= z;
        loss += -std::log(std::max(n.probs.at(r, labels[r]), 1e-12));
    }
    n.value = Tensor::scalar(loss / static_cast<double>(b));
    n.labels = std::move(labels);
    n.needs_grad = node(logits).needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

const Tensor& Tape::value(Id id) const {
    check_id(id);
    return val(id);
}

void Tape::ensure_grad(Node& n) {
    if (n.grad.size() == 0 && n.grad.rank() == 0) {
        const Tensor& v = n.external ? *n.external : n.value;
        if (!(v.rank() == 0 && v.size() == 0)) n.grad = Tensor::zeros(v.shape);
    }
}

const Tensor& Tape::grad(Id id) {
    check_id(id);
    Node& n = node(id);
    ensure_grad(n);
    return n.grad;
}

bool Tape::grad_reached(Id id) const {
    check_id(id);
    return nodes_[static_cast<std::size_t>(id)].reached;
}

const Tensor& Tape::saved_probs(Id xent_id) const {
    check_id(xent_id);
    const Node& n = nodes_[static_cast<std::size_t>(xent_id)];
    if (n.op != Op::SoftmaxXent) {
        throw InvariantError("saved_probs queried on a node that is not a softmax cross-entropy");
    }
    return n.probs;
}

void Tape::backward(Id seed_id, Tensor seed) {
    check_id(seed_id);
    for (Node& n : nodes_) {
        n.grad = Tensor{};
        n.reached = false;
    }
    Node& s = node(seed_id);
    const Tensor& sv = s.external ? *s.external : s.value;
    if (seed.shape != sv.shape) {
        throw DimensionError("backward seed shape " + seed.shape_string() +
                             " does not match node value " + sv.shape_string());
    }
    s.grad = std::move(seed);
    s.reached = true;
    for (Id id = seed_id; id >= 0; --id) {
        Node& n = node(id);
        if (!n.reached || n.op == Op::Leaf) continue;
        backward_node(id);
    }
}

void Tape::backward_node(Id id) {
    Node& n = node(id);
    const Tensor& dy = n.grad;

    auto deposit_ready = [&](Id in) -> Tensor* {
        if (in < 0) return nullptr;
        Node& m = node(in);
        if (!m.needs_grad) return nullptr;
        ensure_grad(m);
        m.reached = true;
        return &m.grad;
    };

    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Linear: {
            const Id xi = n.inputs[0], wi = n.inputs[1], bi = n.inputs[2];
            const Tensor& xv = val(xi);
            const Tensor& wv = val(wi);
            CMapM dym = as_rows(dy);
            if (Tensor* dx = deposit_ready(xi)) {
                as_rows_mut(*dx).noalias() += dym * as_rows(wv);
            }
            if (Tensor* dw = deposit_ready(wi)) {
                as_rows_mut(*dw).noalias() += dym.transpose() * as_rows(xv);
            }
            if (Tensor* db = deposit_ready(bi)) {
                // summed by hand in a fixed order: Eigen's partial redux may
                // tree-reduce or run scalar per column depending on where the
                // destination happens to sit in memory, which breaks bitwise
                // run-to-run reproducibility
                const std::size_t rows = static_cast<std::size_t>(dym.rows());
                const std::size_t cols = static_cast<std::size_t>(dym.cols());
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        db->data[c] += dy.data[r * cols + c];
                    }
                }
            }
            break;
        }
        case Op::Relu: {
            if (Tensor* dx = deposit_ready(n.inputs[0])) {
                const Tensor& xv = val(n.inputs[0]);
                for (std::size_t k = 0; k < xv.size(); ++k) {
                    if (xv.data[k] > 0.0) dx->data[k] += dy.data[k];
                }
            }
            break;
        }
        case Op::ConcatCols: {
            const std::size_t rows = n.value.shape[0];
            const std::size_t total = n.value.shape[1];
            std::size_t col = 0;
            for (Id in : n.inputs) {
                const std::size_t c = val(in).shape[1];
                if (Tensor* dx = deposit_ready(in)) {
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double* src = dy.data.data() + r * total + col;
                        double* dst = dx->data.data() + r * c;
                        for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
                    }
                }
                col += c;
            }
            break;
        }
        case Op::RowMask: {
            if (Tensor* dx = deposit_ready(n.inputs[0])) {
                const std::size_t c = n.value.shape[1];
                for (std::size_t r = 0; r < n.keep.size(); ++r) {
                    if (!n.keep[r]) continue;
                    const double* src = dy.data.data() + r * c;
                    double* dst = dx->data.data() + r * c;
                    for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
                }
            }
            break;
        }
        case Op::BatchNorm: {
            const Id xi = n.inputs[0], gi = n.inputs[1], bi = n.inputs[2];
            const Tensor& gv = val(gi);
            const std::size_t b = n.value.shape[0];
            const std::size_t d = n.value.shape[1];
            if (Tensor* dg = deposit_ready(gi)) {
                for (std::size_t j = 0; j < d; ++j) {
                    double s = 0;
                    for (std::size_t r = 0; r < b; ++r) s += dy.at(r, j) * n.bn_xhat.at(r, j);
                    dg->data[j] += s;
                }
            }
            if (Tensor* db = deposit_ready(bi)) {
                for (std::size_t j = 0; j < d; ++j) {
                    double s = 0;
                    for (std::size_t r = 0; r < b; ++r) s += dy.at(r, j);
                    db->data[j] += s;
                }
            }
            if (Tensor* dx = deposit_ready(xi)) {
                if (n.bn_training) {
                    for (std::size_t j = 0; j < d; ++j) {
                        double sum_dy = 0, sum_dy_xhat = 0;
                        for (std::size_t r = 0; r < b; ++r) {
                            sum_dy += dy.at(r, j);
                            sum_dy_xhat += dy.at(r, j) * n.bn_xhat.at(r, j);
                        }
                        const double scale = gv.data[j] * n.bn_inv_std.data[j] / static_cast<double>(b);
                        for (std::size_t r = 0; r < b; ++r) {
                            dx->at(r, j) += scale * (static_cast<double>(b) * dy.at(r, j) - sum_dy -
                                                     n.bn_xhat.at(r, j) * sum_dy_xhat);
                        }
                    }
                } else {
                    for (std::size_t j = 0; j < d; ++j) {
                        const double scale = gv.data[j] * n.bn_inv_std.data[j];
                        for (std::size_t r = 0; r < b; ++r) dx->at(r, j) += scale * dy.at(r, j);
                    }
                }
            }
            break;
        }
        case Op::SoftmaxXent: {
            if (Tensor* dl = deposit_ready(n.inputs[0])) {
                const std::size_t b = n.probs.shape[0];
                const std::size_t c = n.probs.shape[1];
                const double g = dy.data[0] / static_cast<double>(b);
                for (std::size_t r = 0; r < b; ++r) {
                    for (std::size_t j = 0; j < c; ++j) {
                        const double onehot = (j == n.labels[r]) ? 1.0 : 0.0;
                        dl->at(r, j) += g * (n.probs.at(r, j) - onehot);
                    }
                }
            }
            break;
        }
    }
}

}  // namespace og
