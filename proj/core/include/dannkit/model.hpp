#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dannkit/autodiff.hpp"

namespace dannkit {

// Stand-in convolutional backbone plus the two heads. Each conv stage is
// conv(kernel, pad kernel/2, stride 1) -> ReLU -> max-pool 2x2, halving
// resolution, followed by global average pooling and an affine projection
// to the embedding dimension.
struct BackboneConfig {
    std::size_t input_size = 32;
    std::size_t input_channels = 1;
    std::vector<std::size_t> stage_channels = {16, 32, 64};
    std::size_t kernel = 3;
    std::size_t embedding_dim = 128;
    std::size_t num_classes = 6;
    std::size_t num_domains = 2;
    std::size_t discriminator_hidden = 64;

    void validate() const; // throws ConfigError
};

struct Param {
    std::string name;
    Tensor value;
};

struct ParamGroup {
    std::vector<Param> params;

    Param& find(const std::string& name);
    const Param& find(const std::string& name) const;
    std::size_t total_size() const;
};

// theta_f (extractor), theta_c (classifier head), theta_d (domain head).
// The groups are disjoint by construction; no tensor is shared.
struct ModelParams {
    BackboneConfig config;
    ParamGroup extractor;
    ParamGroup classifier;
    ParamGroup discriminator;

    std::size_t total_size() const;
};

// Deterministic initialization: weights uniform-he, biases zero, with one
// derived seed per parameter.
ModelParams build_model(const BackboneConfig& config, std::uint64_t seed);

// Per-stage activations captured during a forward pass, for Grad-CAM.
struct ForwardTrace {
    std::vector<Tensor> stage_outputs; // post-pool stage outputs, on tape
};

// One forward context: places every parameter on the tape as a leaf and
// exposes the three model functions over those tracked copies.
class ModelPass {
public:
    ModelPass(Tape& tape, const ModelParams& params);

    // x: [B, C, H, W] with H = W = config.input_size -> embedding [B, E].
    Tensor extract_features(const Tensor& x, ForwardTrace* trace = nullptr);

    // embedding [B, E] -> class logits [B, K].
    Tensor classify(const Tensor& embedding);

    // embedding [B, E] -> domain logits [B, m], behind the reversal layer.
    Tensor discriminate(const Tensor& embedding, const ReversalScale& scale);

    const std::vector<Tensor>& extractor_nodes() const { return extractor_; }
    const std::vector<Tensor>& classifier_nodes() const { return classifier_; }
    const std::vector<Tensor>& discriminator_nodes() const { return discriminator_; }

private:
    Tensor tracked(const std::vector<Tensor>& group, std::size_t i) const;

    Tape* tape_;
    const ModelParams* params_;
    std::vector<Tensor> extractor_;
    std::vector<Tensor> classifier_;
    std::vector<Tensor> discriminator_;
};

// Convenience single-shot helpers over a caller-provided tape.
Tensor extract_features(Tape& tape, const ModelParams& params, const Tensor& x,
                        ForwardTrace* trace = nullptr);
Tensor classify(Tape& tape, const ModelParams& params, const Tensor& embedding);
Tensor discriminate(Tape& tape, const ModelParams& params, const Tensor& embedding,
                    const ReversalScale& scale);

// Batch of samples -> logits, without gradient bookkeeping beyond the tape.
Tensor forward_class_logits(const ModelParams& params, const Tensor& x);

} // namespace dannkit
