#pragma once

#include "dar/autodiff/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dar::ad {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::uint32_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    std::size_t rows() const;
    std::size_t cols() const;
    Shape shape() const { return {rows(), cols()}; }
    std::span<const double> value() const;
    double item() const;
    double at(std::size_t r, std::size_t c) const { return value()[r * cols() + c]; }

    /// Gradient after Tape::backward; empty when nothing flowed into this node.
    std::span<const double> grad() const;

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

enum class Aggregation { max, mean, sum };

/// Records operations in creation order; backward walks them in reverse.
///
/// Parents always precede children because a node can only reference nodes
/// that already exist. A tape is single-owner; use one tape per episode.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::uint32_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf bound to a parameter. Gradients land in `t.grad()` after backward
    /// when `t.requires_grad()`. Repeated calls return the same node.
    Var param(Tensor& t);
    Var constant(Tensor t);
    Var constant(std::size_t rows, std::size_t cols, std::vector<double> data);
    Var zeros(std::size_t rows, std::size_t cols);

    /// Populates gradients of every node reachable from `loss` (must be 1x1).
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // Node internals used by the op implementations.
    struct Node {
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        Tensor* leaf = nullptr;
        Backward backward;
    };

    Node& node(std::uint32_t id) { return nodes_[id]; }
    const Node& node(std::uint32_t id) const { return nodes_[id]; }

    Var push(std::size_t rows, std::size_t cols, std::vector<double> value,
             std::initializer_list<Var> parents, Backward backward);
    Var push(std::size_t rows, std::size_t cols, std::vector<double> value,
             std::span<const Var> parents, Backward backward);

    /// Gradient buffer of node `id`, zero-allocated on first use.
    std::span<double> grad_of(std::uint32_t id);
    bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

private:
    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::uint32_t> param_ids_;
};

// ---------------------------------------------------------------------------
// Core ops. Shapes are checked eagerly; mismatches raise ShapeError naming
// both operands.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a (m x c) + row (1 x c) broadcast over rows.
Var add_row(Var a, Var row);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var transpose(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// x w + b broadcast over rows, optionally followed by relu.
Var linear(Var x, Var w, Var b, bool relu_out = false);

/// One summand of gather_sum: rows of `value` picked by `index`, or all rows
/// in order when `index` is null.
struct GatherTerm {
    Var value;
    const std::vector<std::uint32_t>* index = nullptr;
};
/// Sum of the terms (all m x c), plus an optional bias row, optionally
/// followed by relu. Terms are added in the order given.
Var gather_sum(std::span<const GatherTerm> terms, Var bias = {}, bool relu_out = false);

/// Stops gradient flow; the result is a constant copy.
Var detach(Var a);

/// out[k] = a[index[k]] (row gather).
Var gather_rows(Var a, std::span<const std::uint32_t> index);
/// out[k] = a(r_k, c_k) as a column vector.
Var gather_entries(Var a, std::span<const std::pair<std::uint32_t, std::uint32_t>> at);
/// n x n matrix with out(r_k, c_k) = v[k], zero elsewhere. Pairs must be distinct.
Var scatter_entries(Var v, std::span<const std::pair<std::uint32_t, std::uint32_t>> at,
                    std::size_t n);
/// (n*m) x d with row i*m + j = u[i] + v[j] + bias, optionally followed by relu.
Var outer_add(Var u, Var v, Var bias = {}, bool relu_out = false);

/// Per-row sums as an n x 1 column.
Var row_sum(Var a);
Var sum(Var a);
Var mean(Var a);

/// Reduces message rows into n segments. Max routes the gradient to the
/// first maximal message; empty segments produce zeros for every op.
Var segment_aggregate(Var messages, std::span<const std::uint32_t> targets, std::size_t n,
                      Aggregation op);

/// Dense counterpart of segment_aggregate: `messages` holds n*n rows where
/// row i*n + j is the message from j to i; only mask(i, j) != 0 contributes.
/// Sources are visited in ascending j.
Var masked_aggregate(Var messages, std::span<const std::uint8_t> mask, std::size_t n,
                     Aggregation op);

/// Entries where mask == 0 are replaced by `fill` and receive no gradient.
Var mask_fill(Var a, std::span<const std::uint8_t> mask, double fill);

/// flow = tanh(raw - raw^T) scaled by the capacity bound for the direction of
/// the net flow: envelope(i, j) when positive, envelope(j, i) when negative.
Var antisymmetric_tanh_scale(Var raw, std::span<const double> envelope);

// ---------------------------------------------------------------------------
// Losses (all return 1x1).

/// Mean over rows of -log softmax(logits[i])[target[i]]. Entries equal to
/// -inf are excluded from the normaliser.
Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> target);
/// Mean binary cross-entropy of sigmoid(logits) against targets in {0, 1}.
Var bce_with_logits(Var logits, std::span<const double> target);
/// Mean of (a(r_k, c_k) - target(r_k, c_k))^2 over the listed entries.
Var mse_entries(Var a, std::span<const double> target,
                std::span<const std::pair<std::uint32_t, std::uint32_t>> at);

} // namespace dar::ad
