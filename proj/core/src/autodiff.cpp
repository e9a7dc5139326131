#include "dannkit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dannkit/rng.hpp"

namespace dannkit {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (const std::size_t extent : shape) {
        if (extent == 0) {
            throw ShapeError("zero extent in shape " + shape_str(shape));
        }
        n *= extent;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_size(shape) != values.size()) {
        throw ShapeError("tensor data size does not match shape " + shape_str(shape));
    }
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(shape_size(shape), fill) {}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

double Tensor::item() const {
    if (!is_scalar()) {
        throw ShapeError("item() requires a scalar tensor, got " + shape_str(shape));
    }
    return values[0];
}

Tensor init_tensor(const Shape& shape, const InitScheme& scheme, std::uint64_t seed) {
    const std::size_t n = shape_size(shape); // throws on zero extents
    Tensor out(shape, 0.0);
    switch (scheme.kind) {
    case InitScheme::Kind::Zeros:
        break;
    case InitScheme::Kind::Constant:
        std::fill(out.values.begin(), out.values.end(), scheme.value);
        break;
    case InitScheme::Kind::UniformHe: {
        std::size_t fan_in = 1;
        if (shape.size() >= 3) {
            fan_in = n / shape[0]; // conv kernels: in_channels * kh * kw
        } else if (!shape.empty()) {
            fan_in = shape[0];
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Rng rng(seed);
        for (double& v : out.values) {
            v = rng.uniform(-limit, limit);
        }
        break;
    }
    }
    return out;
}

// --- Tape ------------------------------------------------------------------

long Tape::append(Node node) {
    const long id = static_cast<long>(nodes_.size());
    for (const long in : node.inputs) {
        if (in < 0 || in >= id) {
            throw ShapeError("tape node input id out of order");
        }
    }
    nodes_.push_back(std::move(node));
    return id;
}

Tensor Tape::leaf(const Tensor& value) {
    Tensor out;
    out.shape = value.shape;
    out.values = value.values;
    out.node = append(Node{"leaf", {}, value.shape, nullptr});
    return out;
}

const Tape::Node& Tape::node(long id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw ShapeError("tape node id out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

Gradients::Gradients(const Tape& tape) : tape_(&tape), buffers_(tape.size()) {}

const std::vector<double>& Gradients::at(long node_id) const {
    if (node_id < 0 || static_cast<std::size_t>(node_id) >= buffers_.size()) {
        throw ShapeError("gradient requested for id not on this tape");
    }
    auto& buf = buffers_[static_cast<std::size_t>(node_id)];
    if (buf.empty()) {
        buf.assign(shape_size(tape_->node(node_id).shape), 0.0);
    }
    return buf;
}

Tensor Gradients::tensor(long node_id) const {
    return Tensor(tape_->node(node_id).shape, at(node_id));
}

void Gradients::add(long node_id, const double* g, std::size_t n) {
    if (node_id < 0 || static_cast<std::size_t>(node_id) >= buffers_.size()) {
        throw ShapeError("gradient accumulation for id not on this tape");
    }
    auto& buf = buffers_[static_cast<std::size_t>(node_id)];
    if (buf.empty()) {
        buf.assign(shape_size(tape_->node(node_id).shape), 0.0);
    }
    if (buf.size() != n) {
        throw ShapeError("gradient accumulation size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        buf[i] += g[i];
    }
}

Gradients backward(const Tensor& loss, const Tape& tape) {
    if (!loss.is_scalar()) {
        throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.shape));
    }
    if (loss.node < 0 || static_cast<std::size_t>(loss.node) >= tape.size()) {
        throw ShapeError("backward: loss is not on this tape");
    }
    Gradients grads(tape);
    const double one = 1.0;
    grads.add(loss.node, &one, 1);

    Tape::Accumulate accum = [&grads](long id, const double* g, std::size_t n) {
        grads.add(id, g, n);
    };

    for (long id = loss.node; id >= 0; --id) {
        const Tape::Node& node = tape.node(id);
        if (!node.backward) {
            continue;
        }
        const std::vector<double>& upstream = grads.at(id);
        node.backward(upstream, accum);
    }
    return grads;
}

// --- Elementwise ops --------------------------------------------------------

namespace {

enum class BinaryKind { Add, Sub, Mul };

// Broadcast classes accepted by binary ops: equal shapes, scalar right
// operand, or (add only) a row vector [M] against [N, M].
enum class Broadcast { None, ScalarRight, RowRight };

Broadcast classify_broadcast(const Tensor& a, const Tensor& b, bool allow_row) {
    if (a.shape == b.shape) {
        return Broadcast::None;
    }
    if (b.is_scalar()) {
        return Broadcast::ScalarRight;
    }
    if (allow_row && a.shape.size() == 2 && b.shape.size() == 1 && b.shape[0] == a.shape[1]) {
        return Broadcast::RowRight;
    }
    throw ShapeError("elementwise shape mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

Tensor binary_op(Tape& tape, BinaryKind kind, const char* name, const Tensor& a, const Tensor& b) {
    const Broadcast bc = classify_broadcast(a, b, kind == BinaryKind::Add);
    const std::size_t n = a.size();
    const std::size_t cols = a.shape.size() == 2 ? a.shape[1] : n;
    Tensor out(a.shape, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double bv = bc == Broadcast::None ? b.values[i]
                        : bc == Broadcast::ScalarRight ? b.values[0]
                                                       : b.values[i % cols];
        switch (kind) {
        case BinaryKind::Add: out.values[i] = a.values[i] + bv; break;
        case BinaryKind::Sub: out.values[i] = a.values[i] - bv; break;
        case BinaryKind::Mul: out.values[i] = a.values[i] * bv; break;
        }
    }

    Tape::Node node;
    node.op = name;
    node.shape = out.shape;
    if (a.node >= 0) {
        node.inputs.push_back(a.node);
    }
    if (b.node >= 0) {
        node.inputs.push_back(b.node);
    }
    const long a_id = a.node;
    const long b_id = b.node;
    std::vector<double> a_vals;
    std::vector<double> b_vals;
    if (kind == BinaryKind::Mul) {
        if (a_id >= 0) {
            b_vals = b.values;
        }
        if (b_id >= 0) {
            a_vals = a.values;
        }
    }
    const std::size_t b_size = b.size();
    node.backward = [=](const std::vector<double>& g, const Tape::Accumulate& accum) {
        if (a_id >= 0) {
            switch (kind) {
            case BinaryKind::Add:
            case BinaryKind::Sub:
                accum(a_id, g.data(), g.size());
                break;
            case BinaryKind::Mul: {
                std::vector<double> ga(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const double bv = bc == Broadcast::None ? b_vals[i]
                                    : bc == Broadcast::ScalarRight ? b_vals[0]
                                                                   : b_vals[i % cols];
                    ga[i] = g[i] * bv;
                }
                accum(a_id, ga.data(), ga.size());
                break;
            }
            }
        }
        if (b_id >= 0) {
            std::vector<double> gb(b_size, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t bi = bc == Broadcast::None ? i
                                     : bc == Broadcast::ScalarRight ? 0
                                                                    : i % cols;
                double contrib = g[i];
                if (kind == BinaryKind::Sub) {
                    contrib = -contrib;
                } else if (kind == BinaryKind::Mul) {
                    contrib *= a_vals[i];
                }
                gb[bi] += contrib;
            }
            accum(b_id, gb.data(), gb.size());
        }
    };
    out.node = tape.append(std::move(node));
    return out;
}

} // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, BinaryKind::Add, "add", a, b); }
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, BinaryKind::Sub, "sub", a, b); }
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, BinaryKind::Mul, "mul", a, b); }

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out(x.shape, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.values[i] = x.values[i] > 0.0 ? x.values[i] : 0.0;
    }
    Tape::Node node;
    node.op = "relu";
    node.shape = x.shape;
    if (x.node >= 0) {
        node.inputs.push_back(x.node);
        const long x_id = x.node;
        std::vector<double> x_vals = x.values;
        node.backward = [x_id, x_vals = std::move(x_vals)](const std::vector<double>& g,
                                                           const Tape::Accumulate& accum) {
            std::vector<double> gx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] = x_vals[i] > 0.0 ? g[i] : 0.0;
            }
            accum(x_id, gx.data(), gx.size());
        };
    }
    out.node = tape.append(std::move(node));
    return out;
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
    Tensor out(x.shape, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.values[i] = c * x.values[i];
    }
    Tape::Node node;
    node.op = "scale";
    node.shape = x.shape;
    if (x.node >= 0) {
        node.inputs.push_back(x.node);
        const long x_id = x.node;
        node.backward = [x_id, c](const std::vector<double>& g, const Tape::Accumulate& accum) {
            std::vector<double> gx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] = c * g[i];
            }
            accum(x_id, gx.data(), gx.size());
        };
    }
    out.node = tape.append(std::move(node));
    return out;
}

Tensor reduce_sum(Tape& tape, const Tensor& x) {
    double total = 0.0;
    for (const double v : x.values) {
        total += v;
    }
    Tensor out = Tensor::scalar(total);
    Tape::Node node;
    node.op = "sum";
    node.shape = {};
    if (x.node >= 0) {
        node.inputs.push_back(x.node);
        const long x_id = x.node;
        const std::size_t n = x.size();
        node.backward = [x_id, n](const std::vector<double>& g, const Tape::Accumulate& accum) {
            std::vector<double> gx(n, g[0]);
            accum(x_id, gx.data(), gx.size());
        };
    }
    out.node = tape.append(std::move(node));
    return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2) {
        throw ShapeError("matmul expects rank-2 operands, got " + shape_str(a.shape) + " and " +
                         shape_str(b.shape));
    }
    const std::size_t n = a.shape[0];
    const std::size_t k = a.shape[1];
    const std::size_t m = b.shape[1];
    if (b.shape[0] != k) {
        throw ShapeError("matmul inner extents disagree: " + shape_str(a.shape) + " x " +
                         shape_str(b.shape));
    }
    Tensor out(Shape{n, m}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.values.data() + i * k;
        double* orow = out.values.data() + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b.values.data() + kk * m;
            for (std::size_t j = 0; j < m; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }

    Tape::Node node;
    node.op = "matmul";
    node.shape = out.shape;
    if (a.node >= 0) {
        node.inputs.push_back(a.node);
    }
    if (b.node >= 0) {
        node.inputs.push_back(b.node);
    }
    const long a_id = a.node;
    const long b_id = b.node;
    std::vector<double> a_vals = b_id >= 0 ? a.values : std::vector<double>{};
    std::vector<double> b_vals = a_id >= 0 ? b.values : std::vector<double>{};
    node.backward = [=, a_vals = std::move(a_vals), b_vals = std::move(b_vals)](
                        const std::vector<double>& g, const Tape::Accumulate& accum) {
        if (a_id >= 0) { // grad_a = g * b^T
            std::vector<double> ga(n * k, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* grow = g.data() + i * m;
                double* garow = ga.data() + i * k;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double* brow = b_vals.data() + kk * m;
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        s += grow[j] * brow[j];
                    }
                    garow[kk] = s;
                }
            }
            accum(a_id, ga.data(), ga.size());
        }
        if (b_id >= 0) { // grad_b = a^T * g
            std::vector<double> gb(k * m, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* arow = a_vals.data() + i * k;
                const double* grow = g.data() + i * m;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double av = arow[kk];
                    double* gbrow = gb.data() + kk * m;
                    for (std::size_t j = 0; j < m; ++j) {
                        gbrow[j] += av * grow[j];
                    }
                }
            }
            accum(b_id, gb.data(), gb.size());
        }
    };
    out.node = tape.append(std::move(node));
    return out;
}

// --- conv2d -----------------------------------------------------------------

namespace {

struct ConvDims {
    std::size_t batch, in_ch, h, w;
    std::size_t filters, kh, kw;
    std::size_t stride, padding;
    std::size_t out_h, out_w;
    std::size_t hp, wp; // padded spatial extents
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                   std::size_t stride, std::size_t padding) {
    if (input.shape.size() != 4 || kernel.shape.size() != 4) {
        throw ShapeError("conv2d expects input [B,C,H,W] and kernel [F,C,kh,kw]");
    }
    if (stride == 0) {
        throw ConfigError("conv2d: stride must be positive");
    }
    ConvDims d{};
    d.batch = input.shape[0];
    d.in_ch = input.shape[1];
    d.h = input.shape[2];
    d.w = input.shape[3];
    d.filters = kernel.shape[0];
    d.kh = kernel.shape[2];
    d.kw = kernel.shape[3];
    d.stride = stride;
    d.padding = padding;
    if (kernel.shape[1] != d.in_ch) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape) + " kernel " +
                         shape_str(kernel.shape));
    }
    if (!bias.values.empty() && bias.shape != Shape{d.filters}) {
        throw ShapeError("conv2d bias must have shape [F]");
    }
    d.hp = d.h + 2 * padding;
    d.wp = d.w + 2 * padding;
    if (d.kh > d.hp || d.kw > d.wp) {
        throw ShapeError("conv2d kernel exceeds padded input");
    }
    d.out_h = (d.hp - d.kh) / stride + 1;
    d.out_w = (d.wp - d.kw) / stride + 1;
    return d;
}

// Zero-padded copy of one image [C, hp, wp].
void pad_image(const double* src, const ConvDims& d, std::vector<double>& dst) {
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t c = 0; c < d.in_ch; ++c) {
        for (std::size_t y = 0; y < d.h; ++y) {
            const double* srow = src + (c * d.h + y) * d.w;
            double* drow = dst.data() + (c * d.hp + y + d.padding) * d.wp + d.padding;
            std::copy(srow, srow + d.w, drow);
        }
    }
}

} // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
    const ConvDims d = conv_dims(input, kernel, bias, stride, padding);
    Tensor out(Shape{d.batch, d.filters, d.out_h, d.out_w}, 0.0);

    std::vector<double> padded(d.in_ch * d.hp * d.wp);
    for (std::size_t b = 0; b < d.batch; ++b) {
        pad_image(input.values.data() + b * d.in_ch * d.h * d.w, d, padded);
        for (std::size_t f = 0; f < d.filters; ++f) {
            double* oplane = out.values.data() + (b * d.filters + f) * d.out_h * d.out_w;
            if (!bias.values.empty()) {
                std::fill(oplane, oplane + d.out_h * d.out_w, bias.values[f]);
            }
            for (std::size_t c = 0; c < d.in_ch; ++c) {
                const double* kplane = kernel.values.data() + (f * d.in_ch + c) * d.kh * d.kw;
                const double* xplane = padded.data() + c * d.hp * d.wp;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        const double kv = kplane[ky * d.kw + kx];
                        if (kv == 0.0) {
                            continue;
                        }
                        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                            const double* xrow = xplane + (oy * d.stride + ky) * d.wp + kx;
                            double* orow = oplane + oy * d.out_w;
                            if (d.stride == 1) {
                                for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                                    orow[ox] += kv * xrow[ox];
                                }
                            } else {
                                for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                                    orow[ox] += kv * xrow[ox * d.stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Tape::Node node;
    node.op = "conv2d";
    node.shape = out.shape;
    const long x_id = input.node;
    const long k_id = kernel.node;
    const long b_id = bias.values.empty() ? -1 : bias.node;
    for (const long id : {x_id, k_id, b_id}) {
        if (id >= 0) {
            node.inputs.push_back(id);
        }
    }
    std::vector<double> x_vals = k_id >= 0 ? input.values : std::vector<double>{};
    std::vector<double> k_vals = x_id >= 0 ? kernel.values : std::vector<double>{};
    node.backward = [=, x_vals = std::move(x_vals), k_vals = std::move(k_vals)](
                        const std::vector<double>& g, const Tape::Accumulate& accum) {
        const std::size_t out_plane = d.out_h * d.out_w;
        if (b_id >= 0) {
            std::vector<double> gb(d.filters, 0.0);
            for (std::size_t b = 0; b < d.batch; ++b) {
                for (std::size_t f = 0; f < d.filters; ++f) {
                    const double* gplane = g.data() + (b * d.filters + f) * out_plane;
                    double s = 0.0;
                    for (std::size_t i = 0; i < out_plane; ++i) {
                        s += gplane[i];
                    }
                    gb[f] += s;
                }
            }
            accum(b_id, gb.data(), gb.size());
        }
        std::vector<double> padded_x;
        std::vector<double> gk;
        if (k_id >= 0) {
            padded_x.resize(d.in_ch * d.hp * d.wp);
            gk.assign(d.filters * d.in_ch * d.kh * d.kw, 0.0);
        }
        std::vector<double> gx_padded;
        std::vector<double> gx;
        if (x_id >= 0) {
            gx.assign(d.batch * d.in_ch * d.h * d.w, 0.0);
            gx_padded.resize(d.in_ch * d.hp * d.wp);
        }
        for (std::size_t b = 0; b < d.batch; ++b) {
            if (k_id >= 0) {
                pad_image(x_vals.data() + b * d.in_ch * d.h * d.w, d, padded_x);
            }
            if (x_id >= 0) {
                std::fill(gx_padded.begin(), gx_padded.end(), 0.0);
            }
            for (std::size_t f = 0; f < d.filters; ++f) {
                const double* gplane = g.data() + (b * d.filters + f) * out_plane;
                for (std::size_t c = 0; c < d.in_ch; ++c) {
                    for (std::size_t ky = 0; ky < d.kh; ++ky) {
                        for (std::size_t kx = 0; kx < d.kw; ++kx) {
                            // d kernel: correlate upstream grad with the input window
                            if (k_id >= 0) {
                                const double* xplane = padded_x.data() + c * d.hp * d.wp;
                                double s = 0.0;
                                for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                                    const double* xrow = xplane + (oy * d.stride + ky) * d.wp + kx;
                                    const double* grow = gplane + oy * d.out_w;
                                    if (d.stride == 1) {
                                        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                                            s += xrow[ox] * grow[ox];
                                        }
                                    } else {
                                        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                                            s += xrow[ox * d.stride] * grow[ox];
                                        }
                                    }
                                }
                                gk[((f * d.in_ch + c) * d.kh + ky) * d.kw + kx] += s;
                            }
                            // d input: scatter kernel-weighted upstream grad
                            if (x_id >= 0) {
                                const double kv = k_vals[((f * d.in_ch + c) * d.kh + ky) * d.kw + kx];
                                if (kv == 0.0) {
                                    continue;
                                }
                                double* xgplane = gx_padded.data() + c * d.hp * d.wp;
                                for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                                    double* xgrow = xgplane + (oy * d.stride + ky) * d.wp + kx;
                                    const double* grow = gplane + oy * d.out_w;
                                    if (d.stride == 1) {
                                        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                                            xgrow[ox] += kv * grow[ox];
                                        }
                                    } else {
                                        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                                            xgrow[ox * d.stride] += kv * grow[ox];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (x_id >= 0) { // strip padding
                for (std::size_t c = 0; c < d.in_ch; ++c) {
                    for (std::size_t y = 0; y < d.h; ++y) {
                        const double* srow =
                            gx_padded.data() + (c * d.hp + y + d.padding) * d.wp + d.padding;
                        double* drow = gx.data() + ((b * d.in_ch + c) * d.h + y) * d.w;
                        for (std::size_t x = 0; x < d.w; ++x) {
                            drow[x] += srow[x];
                        }
                    }
                }
            }
        }
        if (k_id >= 0) {
            accum(k_id, gk.data(), gk.size());
        }
        if (x_id >= 0) {
            accum(x_id, gx.data(), gx.size());
        }
    };
    out.node = tape.append(std::move(node));
    return out;
}

Tensor pool2d(Tape& tape, PoolKind kind, const Tensor& input, std::size_t window, std::size_t stride) {
    if (input.shape.size() != 4) {
        throw ShapeError("pool2d expects input [B,C,H,W]");
    }
    if (window == 0 || stride == 0) {
        throw ConfigError("pool2d: window and stride must be positive");
    }
    const std::size_t batch = input.shape[0];
    const std::size_t ch = input.shape[1];
    const std::size_t h = input.shape[2];
    const std::size_t w = input.shape[3];
    if (window > h || window > w) {
        throw ShapeError("pool2d window exceeds input " + shape_str(input.shape));
    }
    const std::size_t out_h = (h - window) / stride + 1;
    const std::size_t out_w = (w - window) / stride + 1;
    Tensor out(Shape{batch, ch, out_h, out_w}, 0.0);
    std::vector<std::size_t> argmax;
    if (kind == PoolKind::Max) {
        argmax.resize(out.size());
    }
    const double inv_area = 1.0 / static_cast<double>(window * window);
    for (std::size_t bc = 0; bc < batch * ch; ++bc) {
        const double* plane = input.values.data() + bc * h * w;
        double* oplane = out.values.data() + bc * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const std::size_t y0 = oy * stride;
                const std::size_t x0 = ox * stride;
                if (kind == PoolKind::Max) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t dy = 0; dy < window; ++dy) {
                        for (std::size_t dx = 0; dx < window; ++dx) {
                            const std::size_t idx = (y0 + dy) * w + x0 + dx;
                            if (plane[idx] > best) { // strict: first max wins ties
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    oplane[oy * out_w + ox] = best;
                    argmax[bc * out_h * out_w + oy * out_w + ox] = best_idx;
                } else {
                    double s = 0.0;
                    for (std::size_t dy = 0; dy < window; ++dy) {
                        for (std::size_t dx = 0; dx < window; ++dx) {
                            s += plane[(y0 + dy) * w + x0 + dx];
                        }
                    }
                    oplane[oy * out_w + ox] = s * inv_area;
                }
            }
        }
    }

    Tape::Node node;
    node.op = kind == PoolKind::Max ? "maxpool" : "avgpool";
    node.shape = out.shape;
    if (input.node >= 0) {
        node.inputs.push_back(input.node);
        const long x_id = input.node;
        node.backward = [=, argmax = std::move(argmax)](const std::vector<double>& g,
                                                        const Tape::Accumulate& accum) {
            std::vector<double> gx(batch * ch * h * w, 0.0);
            const std::size_t out_plane = out_h * out_w;
            for (std::size_t bc = 0; bc < batch * ch; ++bc) {
                double* gplane = gx.data() + bc * h * w;
                const double* grow = g.data() + bc * out_plane;
                if (kind == PoolKind::Max) {
                    const std::size_t* amax = argmax.data() + bc * out_plane;
                    for (std::size_t i = 0; i < out_plane; ++i) {
                        gplane[amax[i]] += grow[i];
                    }
                } else {
                    for (std::size_t oy = 0; oy < out_h; ++oy) {
                        for (std::size_t ox = 0; ox < out_w; ++ox) {
                            const double gv = grow[oy * out_w + ox] * inv_area;
                            for (std::size_t dy = 0; dy < window; ++dy) {
                                for (std::size_t dx = 0; dx < window; ++dx) {
                                    gplane[(oy * stride + dy) * w + ox * stride + dx] += gv;
                                }
                            }
                        }
                    }
                }
            }
            accum(x_id, gx.data(), gx.size());
        };
    }
    out.node = tape.append(std::move(node));
    return out;
}

Tensor global_avg_pool(Tape& tape, const Tensor& input) {
    if (input.shape.size() != 4) {
        throw ShapeError("global_avg_pool expects input [B,C,H,W]");
    }
    const std::size_t batch = input.shape[0];
    const std::size_t ch = input.shape[1];
    const std::size_t plane = input.shape[2] * input.shape[3];
    Tensor out(Shape{batch, ch}, 0.0);
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t bc = 0; bc < batch * ch; ++bc) {
        const double* p = input.values.data() + bc * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            s += p[i];
        }
        out.values[bc] = s * inv;
    }
    Tape::Node node;
    node.op = "gap";
    node.shape = out.shape;
    if (input.node >= 0) {
        node.inputs.push_back(input.node);
        const long x_id = input.node;
        node.backward = [=](const std::vector<double>& g, const Tape::Accumulate& accum) {
            std::vector<double> gx(batch * ch * plane);
            for (std::size_t bc = 0; bc < batch * ch; ++bc) {
                const double gv = g[bc] * inv;
                double* p = gx.data() + bc * plane;
                std::fill(p, p + plane, gv);
            }
            accum(x_id, gx.data(), gx.size());
        };
    }
    out.node = tape.append(std::move(node));
    return out;
}

SoftmaxLoss softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape.size() != 2) {
        throw ShapeError("softmax_cross_entropy expects logits [B,K]");
    }
    const std::size_t batch = logits.shape[0];
    const std::size_t classes = logits.shape[1];
    if (labels.size() != batch) {
        throw LabelError("softmax_cross_entropy: label count does not match batch");
    }
    for (const int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw LabelError("softmax_cross_entropy: label " + std::to_string(label) +
                             " outside [0," + std::to_string(classes) + ")");
        }
    }
    Tensor probs(logits.shape, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.values.data() + b * classes;
        double* prow = probs.values.data() + b * classes;
        double mx = row[0];
        for (std::size_t k = 1; k < classes; ++k) {
            mx = std::max(mx, row[k]);
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            prow[k] = std::exp(row[k] - mx);
            denom += prow[k];
        }
        const double inv = 1.0 / denom;
        for (std::size_t k = 0; k < classes; ++k) {
            prow[k] *= inv;
        }
        total += -(row[static_cast<std::size_t>(labels[b])] - mx - std::log(denom));
    }
    const double inv_batch = 1.0 / static_cast<double>(batch);
    Tensor loss = Tensor::scalar(total * inv_batch);

    Tape::Node node;
    node.op = "softmax_xent";
    node.shape = {};
    if (logits.node >= 0) {
        node.inputs.push_back(logits.node);
        const long x_id = logits.node;
        std::vector<double> p_vals = probs.values;
        std::vector<int> label_copy = labels;
        node.backward = [=, p_vals = std::move(p_vals), label_copy = std::move(label_copy)](
                            const std::vector<double>& g, const Tape::Accumulate& accum) {
            std::vector<double> gx(batch * classes);
            const double s = g[0] * inv_batch;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* prow = p_vals.data() + b * classes;
                double* grow = gx.data() + b * classes;
                for (std::size_t k = 0; k < classes; ++k) {
                    grow[k] = s * prow[k];
                }
                grow[static_cast<std::size_t>(label_copy[b])] -= s;
            }
            accum(x_id, gx.data(), gx.size());
        };
    }
    loss.node = tape.append(std::move(node));
    return SoftmaxLoss{std::move(loss), std::move(probs)};
}

Tensor grad_reversal(Tape& tape, const Tensor& x, const ReversalScale& scale) {
    if (scale.lambda < 0.0) {
        throw ConfigError("grad_reversal: lambda must be nonnegative");
    }
    if (!(scale.tau >= 0.0 && scale.tau < 1.0)) {
        throw ConfigError("grad_reversal: tau must lie in [0,1)");
    }
    Tensor out;
    out.shape = x.shape;
    out.values = x.values; // forward is the exact identity
    Tape::Node node;
    node.op = "grad_reversal";
    node.shape = x.shape;
    if (x.node >= 0) {
        node.inputs.push_back(x.node);
        const long x_id = x.node;
        const double factor = -(scale.lambda * scale.tau);
        node.backward = [x_id, factor](const std::vector<double>& g, const Tape::Accumulate& accum) {
            std::vector<double> gx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] = factor * g[i];
            }
            accum(x_id, gx.data(), gx.size());
        };
    }
    out.node = tape.append(std::move(node));
    return out;
}

} // namespace dannkit
