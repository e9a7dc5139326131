#include "dannkit/model.hpp"

#include <algorithm>

#include "dannkit/rng.hpp"

namespace dannkit {

void BackboneConfig::validate() const {
    if (input_size == 0 || input_channels == 0 || kernel == 0) {
        throw ConfigError("backbone: input_size, input_channels and kernel must be positive");
    }
    if (stage_channels.empty()) {
        throw ConfigError("backbone: at least one conv stage required");
    }
    if (embedding_dim < 1) {
        throw ConfigError("backbone: embedding_dim must be >= 1");
    }
    if (num_classes < 2) {
        throw ConfigError("backbone: num_classes must be >= 2");
    }
    if (num_domains < 2) {
        throw ConfigError("backbone: num_domains must be >= 2");
    }
    if (kernel % 2 == 0) {
        throw ConfigError("backbone: kernel must be odd (same-padding stages)");
    }
    std::size_t size = input_size;
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
        if (stage_channels[i] == 0) {
            throw ConfigError("backbone: stage channel counts must be positive");
        }
        if (size % 2 != 0) {
            throw ConfigError("backbone: input_size must be divisible by 2^stages");
        }
        size /= 2;
    }
    if (size == 0) {
        throw ConfigError("backbone: too many stages for input_size");
    }
}

Param& ParamGroup::find(const std::string& name) {
    for (Param& p : params) {
        if (p.name == name) {
            return p;
        }
    }
    throw ConfigError("unknown parameter: " + name);
}

const Param& ParamGroup::find(const std::string& name) const {
    for (const Param& p : params) {
        if (p.name == name) {
            return p;
        }
    }
    throw ConfigError("unknown parameter: " + name);
}

std::size_t ParamGroup::total_size() const {
    std::size_t n = 0;
    for (const Param& p : params) {
        n += p.value.size();
    }
    return n;
}

std::size_t ModelParams::total_size() const {
    return extractor.total_size() + classifier.total_size() + discriminator.total_size();
}

ModelParams build_model(const BackboneConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams model;
    model.config = config;

    std::uint64_t stream = 0;
    auto make = [&](ParamGroup& group, const std::string& name, const Shape& shape,
                    const InitScheme& scheme) {
        group.params.push_back({name, init_tensor(shape, scheme, derive_seed(seed, stream))});
        ++stream;
    };

    std::size_t in_ch = config.input_channels;
    for (std::size_t s = 0; s < config.stage_channels.size(); ++s) {
        const std::size_t out_ch = config.stage_channels[s];
        const std::string stage = "f.conv" + std::to_string(s);
        make(model.extractor, stage + ".weight", {out_ch, in_ch, config.kernel, config.kernel},
             InitScheme::uniform_he());
        make(model.extractor, stage + ".bias", {out_ch}, InitScheme::zeros());
        in_ch = out_ch;
    }
    make(model.extractor, "f.proj.weight", {in_ch, config.embedding_dim}, InitScheme::uniform_he());
    make(model.extractor, "f.proj.bias", {config.embedding_dim}, InitScheme::zeros());

    make(model.classifier, "c.weight", {config.embedding_dim, config.num_classes},
         InitScheme::uniform_he());
    make(model.classifier, "c.bias", {config.num_classes}, InitScheme::zeros());

    if (config.discriminator_hidden > 0) {
        make(model.discriminator, "d.fc0.weight", {config.embedding_dim, config.discriminator_hidden},
             InitScheme::uniform_he());
        make(model.discriminator, "d.fc0.bias", {config.discriminator_hidden}, InitScheme::zeros());
        make(model.discriminator, "d.fc1.weight", {config.discriminator_hidden, config.num_domains},
             InitScheme::uniform_he());
        make(model.discriminator, "d.fc1.bias", {config.num_domains}, InitScheme::zeros());
    } else {
        make(model.discriminator, "d.fc0.weight", {config.embedding_dim, config.num_domains},
             InitScheme::uniform_he());
        make(model.discriminator, "d.fc0.bias", {config.num_domains}, InitScheme::zeros());
    }
    return model;
}

ModelPass::ModelPass(Tape& tape, const ModelParams& params) : tape_(&tape), params_(&params) {
    params.config.validate();
    auto track_group = [&](const ParamGroup& group, std::vector<Tensor>& out) {
        out.reserve(group.params.size());
        for (const Param& p : group.params) {
            out.push_back(tape.leaf(p.value));
        }
    };
    track_group(params.extractor, extractor_);
    track_group(params.classifier, classifier_);
    track_group(params.discriminator, discriminator_);
}

Tensor ModelPass::extract_features(const Tensor& x, ForwardTrace* trace) {
    const BackboneConfig& cfg = params_->config;
    if (x.shape.size() != 4 || x.shape[1] != cfg.input_channels ||
        x.shape[2] != cfg.input_size || x.shape[3] != cfg.input_size) {
        throw ShapeError("extract_features: expected [B," + std::to_string(cfg.input_channels) +
                         "," + std::to_string(cfg.input_size) + "," + std::to_string(cfg.input_size) +
                         "], got " + shape_str(x.shape));
    }
    const std::size_t pad = cfg.kernel / 2;
    Tensor h = x;
    for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
        const Tensor& weight = extractor_[2 * s];
        const Tensor& bias = extractor_[2 * s + 1];
        h = conv2d(*tape_, h, weight, bias, 1, pad);
        h = relu(*tape_, h);
        h = pool2d(*tape_, PoolKind::Max, h, 2, 2);
        if (trace) {
            trace->stage_outputs.push_back(h);
        }
    }
    h = global_avg_pool(*tape_, h);
    const Tensor& proj_w = extractor_[extractor_.size() - 2];
    const Tensor& proj_b = extractor_[extractor_.size() - 1];
    return add(*tape_, matmul(*tape_, h, proj_w), proj_b);
}

Tensor ModelPass::classify(const Tensor& embedding) {
    const BackboneConfig& cfg = params_->config;
    if (embedding.shape.size() != 2 || embedding.shape[1] != cfg.embedding_dim) {
        throw ShapeError("classify: embedding dimension mismatch, got " + shape_str(embedding.shape));
    }
    return add(*tape_, matmul(*tape_, embedding, classifier_[0]), classifier_[1]);
}

Tensor ModelPass::discriminate(const Tensor& embedding, const ReversalScale& reversal) {
    const BackboneConfig& cfg = params_->config;
    if (embedding.shape.size() != 2 || embedding.shape[1] != cfg.embedding_dim) {
        throw ShapeError("discriminate: embedding dimension mismatch, got " +
                         shape_str(embedding.shape));
    }
    Tensor h = grad_reversal(*tape_, embedding, reversal);
    if (cfg.discriminator_hidden > 0) {
        h = add(*tape_, matmul(*tape_, h, discriminator_[0]), discriminator_[1]);
        h = relu(*tape_, h);
        return add(*tape_, matmul(*tape_, h, discriminator_[2]), discriminator_[3]);
    }
    return add(*tape_, matmul(*tape_, h, discriminator_[0]), discriminator_[1]);
}

Tensor extract_features(Tape& tape, const ModelParams& params, const Tensor& x, ForwardTrace* trace) {
    return ModelPass(tape, params).extract_features(x, trace);
}

Tensor classify(Tape& tape, const ModelParams& params, const Tensor& embedding) {
    return ModelPass(tape, params).classify(embedding);
}

Tensor discriminate(Tape& tape, const ModelParams& params, const Tensor& embedding,
                    const ReversalScale& scale) {
    return ModelPass(tape, params).discriminate(embedding, scale);
}

Tensor forward_class_logits(const ModelParams& params, const Tensor& x) {
    Tape tape;
    ModelPass pass(tape, params);
    return pass.classify(pass.extract_features(x));
}

} // namespace dannkit
