#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dannkit/error.hpp"

namespace dannkit {

using Shape = std::vector<std::size_t>;

// Product of extents; empty shape denotes a scalar. Zero extents are invalid.
std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of 64-bit floats. `node` identifies the tape node
// that produced it (-1 for plain values and constants); `grad`, when
// non-empty, holds a same-size gradient buffer.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    long node = -1;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v);
    Tensor(Shape s, double fill);

    static Tensor scalar(double v);

    std::size_t size() const { return values.size(); }
    bool is_scalar() const { return values.size() == 1; }
    double item() const;
};

struct InitScheme {
    enum class Kind { Zeros, UniformHe, Constant };
    Kind kind = Kind::Zeros;
    double value = 0.0;

    static InitScheme zeros() { return {Kind::Zeros, 0.0}; }
    static InitScheme uniform_he() { return {Kind::UniformHe, 0.0}; }
    static InitScheme constant(double c) { return {Kind::Constant, c}; }
};

// Deterministic per (shape, scheme, seed). uniform-he draws from
// [-sqrt(6/fan_in), sqrt(6/fan_in)); fan_in is shape[0] for rank <= 2 tensors
// used as x*W weights and size/shape[0] for conv kernels (OIHW).
Tensor init_tensor(const Shape& shape, const InitScheme& scheme, std::uint64_t seed);

// Backward multiplier holder for the gradient reversal layer: the effective
// factor applied to upstream gradients is exactly -(lambda * tau).
struct ReversalScale {
    double lambda = 1.0;
    double tau = 0.0;
};

// Append-only define-by-run tape. Node ids are append order, so every node's
// inputs have smaller ids and a single reverse sweep visits each node once.
class Tape {
public:
    using Accumulate = std::function<void(long node_id, const double* g, std::size_t n)>;
    using BackwardFn = std::function<void(const std::vector<double>& upstream, const Accumulate& accum)>;

    struct Node {
        const char* op = "";
        std::vector<long> inputs;
        Shape shape;
        BackwardFn backward; // empty for leaves
    };

    long append(Node node);

    // Registers a plain value as a leaf; the returned tensor carries the node id.
    Tensor leaf(const Tensor& value);

    std::size_t size() const { return nodes_.size(); }
    const Node& node(long id) const;
    void clear() { nodes_.clear(); }

private:
    std::vector<Node> nodes_;
};

// Gradient map produced by backward(): one same-shape buffer per node id.
// Nodes the loss never touched read back as zero tensors.
class Gradients {
public:
    explicit Gradients(const Tape& tape);

    const std::vector<double>& at(long node_id) const;
    Tensor tensor(long node_id) const;
    void add(long node_id, const double* g, std::size_t n);

private:
    const Tape* tape_;
    mutable std::vector<std::vector<double>> buffers_;
};

// Reverse-topological accumulation from a scalar loss living on `tape`.
Gradients backward(const Tensor& loss, const Tape& tape);

// --- Operator set ---------------------------------------------------------
// Binary elementwise ops require equal shapes or a scalar right operand;
// add() additionally accepts a row vector [M] against [N, M] for bias terms.

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor relu(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double c);
Tensor reduce_sum(Tape& tape, const Tensor& x);

// a: [N, K], b: [K, M] -> [N, M].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// input: [B, C, H, W], kernel: [F, C, kh, kw], bias: [F] (may be empty).
// Cross-correlation (no kernel flip); H' = (H + 2*padding - kh)/stride + 1.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding);

enum class PoolKind { Max, Avg };

// Max backward routes to the first (row-major) maximal element of the window.
Tensor pool2d(Tape& tape, PoolKind kind, const Tensor& input, std::size_t window, std::size_t stride);

// [B, C, H, W] -> [B, C]; backward spreads by 1/(H*W).
Tensor global_avg_pool(Tape& tape, const Tensor& input);

struct SoftmaxLoss {
    Tensor loss;  // scalar, on tape
    Tensor probs; // [B, K], plain value; rows sum to 1
};

// Mean over the batch of -log softmax(logits)[label]; max-stabilized.
// Backward through `loss` is (probs - onehot)/B.
SoftmaxLoss softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// Forward identity (bitwise); backward multiplies upstream by -(lambda*tau).
Tensor grad_reversal(Tape& tape, const Tensor& x, const ReversalScale& scale);

} // namespace dannkit
