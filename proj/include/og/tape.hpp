#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "og/tensor.hpp"

namespace og {

// Reverse-mode autodiff tape. The graph is built by running the forward pass;
// backward() then replays the recorded nodes in strict reverse creation order.
// Nodes whose gradient was never reached stay untouched and their backward is
// skipped entirely, which is how inference and attribution passes avoid paying
// for parameter gradients.
class Tape {
public:
    using Id = int;

    // Leaf over caller-owned storage. The tensor must outlive the tape.
    Id leaf(const Tensor* external, bool requires_grad);
    // Leaf that the tape owns.
    Id leaf(Tensor value, bool requires_grad);

    // y = x W^T + b. x is [n] or [B,n], W is [m,n], b is [m] (pass -1 to skip).
    Id linear(Id x, Id w, Id b);
    Id relu(Id x);
    // Column-wise concatenation of tensors with equal row counts.
    Id concat_cols(const std::vector<Id>& xs);
    // Zeroes whole rows: keep[r] == 0 clears row r in value and gradient.
    Id row_mask(Id x, std::vector<std::uint8_t> keep);
    // Standard batch normalization over the batch dimension. Training mode
    // normalizes with batch statistics and updates the caller's running
    // buffers in place; eval mode normalizes with the running buffers.
    Id batchnorm(Id x, Id gamma, Id beta, Tensor* running_mean, Tensor* running_var,
                 bool training, double momentum, double eps);
    // Mean softmax cross-entropy over rows of logits [B,C]; labels are class
    // indices. Produces a scalar and saves the row-wise probabilities.
    Id softmax_xent(Id logits, std::vector<std::size_t> labels);

    const Tensor& value(Id id) const;
    // Gradient accumulated at a node; exactly zero if backward never reached it.
    const Tensor& grad(Id id);
    bool grad_reached(Id id) const;
    const Tensor& saved_probs(Id xent_id) const;

    // Seeds grad(seed_id) = seed and propagates back through the tape.
    // Clears all previously accumulated gradients first.
    void backward(Id seed_id, Tensor seed);

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t { Leaf, Linear, Relu, ConcatCols, RowMask, BatchNorm, SoftmaxXent };

    struct Node {
        Op op;
        bool requires_grad = false;  // leaves only
        bool needs_grad = false;     // this node or anything upstream wants gradients
        bool reached = false;        // backward deposited into this node
        std::vector<Id> inputs;
        const Tensor* external = nullptr;
        Tensor value;
        Tensor grad;

        // op-specific payloads
        std::vector<std::uint8_t> keep;       // RowMask
        std::vector<std::size_t> labels;      // SoftmaxXent
        Tensor probs;                         // SoftmaxXent
        Tensor bn_xhat;                       // BatchNorm (train)
        Tensor bn_inv_std;                    // BatchNorm (per-feature scale actually applied)
        bool bn_training = false;
    };

    const Tensor& val(Id id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.external ? *n.external : n.value;
    }
    Node& node(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
    void ensure_grad(Node& n);
    void check_id(Id id) const;
    void backward_node(Id id);

    std::deque<Node> nodes_;
};

}  // namespace og
