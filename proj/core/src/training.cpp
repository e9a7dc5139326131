#include "dannkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "dannkit/rng.hpp"

namespace dannkit {

const char* train_mode_name(TrainMode mode) {
    switch (mode) {
    case TrainMode::SourceOnly: return "source_only";
    case TrainMode::Dann: return "dann";
    case TrainMode::Mdann: return "mdann";
    }
    return "source_only";
}

TrainMode train_mode_from_name(const std::string& name) {
    if (name == "source_only") {
        return TrainMode::SourceOnly;
    }
    if (name == "dann") {
        return TrainMode::Dann;
    }
    if (name == "mdann") {
        return TrainMode::Mdann;
    }
    throw ConfigError("unknown training mode: " + name);
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ConfigError("train: epochs must be >= 1");
    }
    if (batch_size < 2) {
        throw ConfigError("train: batch_size must be >= 2");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("train: learning_rate must be positive");
    }
    if (weight_decay < 0.0) {
        throw ConfigError("train: weight_decay must be nonnegative");
    }
    if (lambda < 0.0) {
        throw ConfigError("train: lambda must be nonnegative");
    }
}

double tau(std::size_t current_epoch, std::size_t total_epochs) {
    if (total_epochs == 0) {
        throw ConfigError("tau: total epochs must be >= 1");
    }
    const double ratio = static_cast<double>(current_epoch) / static_cast<double>(total_epochs);
    return 2.0 / (1.0 + std::exp(-10.0 * ratio)) - 1.0;
}

AdamWState::AdamWState(const ParamGroup& group, AdamWConfig config) : config_(config) {
    moments_.reserve(group.params.size());
    for (const Param& p : group.params) {
        moments_.push_back({std::vector<double>(p.value.size(), 0.0),
                            std::vector<double>(p.value.size(), 0.0)});
    }
}

void AdamWState::step(ParamGroup& group, const std::vector<std::vector<double>>& grads, double lr,
                      double weight_decay) {
    if (grads.size() != group.params.size() || moments_.size() != group.params.size()) {
        throw ShapeError("adamw_step: gradient list does not match parameter group");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < group.params.size(); ++i) {
        Param& p = group.params[i];
        const std::vector<double>& g = grads[i];
        if (g.size() != p.value.size()) {
            throw ShapeError("adamw_step: gradient shape mismatch for " + p.name);
        }
        Moments& mom = moments_[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double gv = g[j];
            if (std::isnan(gv)) {
                throw Error("adamw_step: NaN gradient in parameter " + p.name);
            }
            mom.m[j] = config_.beta1 * mom.m[j] + (1.0 - config_.beta1) * gv;
            mom.v[j] = config_.beta2 * mom.v[j] + (1.0 - config_.beta2) * gv * gv;
            const double mhat = mom.m[j] / bc1;
            const double vhat = mom.v[j] / bc2;
            p.value.values[j] =
                p.value.values[j] * decay - lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

LossBreakdown compute_losses(Tape& tape, ModelPass& pass, const Batch& batch,
                             const TauSchedule& schedule, const TrainConfig& config,
                             Tensor* total_out) {
    const Tensor embedding = pass.extract_features(batch.images);
    const Tensor class_logits = pass.classify(embedding);
    SoftmaxLoss class_loss = softmax_cross_entropy(tape, class_logits, batch.class_labels);

    LossBreakdown out;
    out.loss_c = class_loss.loss.item();
    Tensor total = class_loss.loss;
    if (config.mode != TrainMode::SourceOnly) {
        const ReversalScale reversal{config.lambda, schedule.value()};
        const Tensor domain_logits = pass.discriminate(embedding, reversal);
        SoftmaxLoss domain_loss = softmax_cross_entropy(tape, domain_logits, batch.domain_labels);
        out.loss_d = domain_loss.loss.item();
        total = add(tape, total, domain_loss.loss);
    }
    out.total = total.item();
    if (total_out) {
        *total_out = total;
    }
    return out;
}

namespace {

std::vector<std::vector<double>> collect_grads(const Gradients& grads,
                                               const std::vector<Tensor>& tracked) {
    std::vector<std::vector<double>> out;
    out.reserve(tracked.size());
    for (const Tensor& t : tracked) {
        out.push_back(grads.at(t.node));
    }
    return out;
}

void stash_grads(ParamGroup& group, const std::vector<std::vector<double>>& grads) {
    for (std::size_t i = 0; i < group.params.size(); ++i) {
        group.params[i].value.grad = grads[i];
    }
}

} // namespace

LossBreakdown train_step(ModelParams& params, const Batch& batch, const TauSchedule& schedule,
                         const TrainConfig& config, OptimizerState& opt) {
    config.validate();
    Tape tape;
    ModelPass pass(tape, params);
    Tensor total;
    const LossBreakdown losses = compute_losses(tape, pass, batch, schedule, config, &total);
    const Gradients grads = backward(total, tape);

    std::vector<std::vector<double>> gf = collect_grads(grads, pass.extractor_nodes());
    std::vector<std::vector<double>> gc = collect_grads(grads, pass.classifier_nodes());
    stash_grads(params.extractor, gf);
    stash_grads(params.classifier, gc);
    opt.extractor.step(params.extractor, gf, config.learning_rate, config.weight_decay);
    opt.classifier.step(params.classifier, gc, config.learning_rate, config.weight_decay);

    if (config.mode != TrainMode::SourceOnly) {
        // theta_d consumes lambda * dCE_D/dtheta_d; the GRL already handed
        // theta_f its -(lambda*tau)-scaled share.
        std::vector<std::vector<double>> gd = collect_grads(grads, pass.discriminator_nodes());
        for (auto& g : gd) {
            for (double& v : g) {
                v *= config.lambda;
            }
        }
        stash_grads(params.discriminator, gd);
        opt.discriminator.step(params.discriminator, gd, config.learning_rate, config.weight_decay);
    }
    return losses;
}

EvalLoss evaluate_classification(const ModelParams& params, const std::vector<ImageSample>& samples) {
    if (samples.empty()) {
        throw DataError("evaluate_classification: no samples");
    }
    constexpr std::size_t kChunk = 64;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        const std::size_t end = std::min(start + kChunk, samples.size());
        std::vector<const ImageSample*> chunk;
        chunk.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
            chunk.push_back(&samples[i]);
        }
        const Batch batch = stack_samples(chunk);
        Tape tape;
        ModelPass pass(tape, params);
        const Tensor logits = pass.classify(pass.extract_features(batch.images));
        const SoftmaxLoss sm = softmax_cross_entropy(tape, logits, batch.class_labels);
        loss_sum += sm.loss.item() * static_cast<double>(end - start);
        const std::size_t classes = params.config.num_classes;
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const double* row = logits.values.data() + b * classes;
            std::size_t best = 0;
            for (std::size_t k = 1; k < classes; ++k) {
                if (row[k] > row[best]) { // ties keep the lowest class index
                    best = k;
                }
            }
            if (static_cast<int>(best) == batch.class_labels[b]) {
                ++correct;
            }
        }
    }
    EvalLoss out;
    out.loss = loss_sum / static_cast<double>(samples.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    return out;
}

const char* metrics_csv_header() { return "epoch,tau,loss_c,loss_d,val_loss,val_acc"; }

std::string metrics_csv_row(const EpochMetrics& row) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g", row.epoch, row.tau, row.loss_c,
                  row.loss_d, row.val_loss, row.val_acc);
    return buf;
}

FitResult fit(const BackboneConfig& backbone, const TrainConfig& config, const FitDatasets& datasets,
              std::ostream* metrics_csv) {
    config.validate();
    backbone.validate();
    if (datasets.source_train.empty() || datasets.source_val.empty()) {
        throw DataError("fit: source train and val splits are required");
    }
    if (config.mode == TrainMode::SourceOnly && !datasets.target_shots.empty()) {
        throw DataError("fit: source_only mode takes no target shots");
    }

    ModelParams params = build_model(backbone, derive_seed(config.seed, 0x1417u));
    OptimizerState opt(params);

    BatchStream stream(datasets.source_train,
                       config.mode == TrainMode::SourceOnly ? std::vector<ImageSample>{}
                                                            : datasets.target_shots,
                       config.batch_size, derive_seed(config.seed, 0xba7cu));

    FitResult result;
    result.best_params = params;
    result.best_meta.config_hash = config_hash(backbone);
    double best_loss = std::numeric_limits<double>::infinity();

    if (metrics_csv) {
        *metrics_csv << metrics_csv_header() << "\n";
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const TauSchedule schedule{epoch, config.epochs};
        double sum_c = 0.0;
        double sum_d = 0.0;
        const auto batches = stream.epoch(epoch);
        for (const auto& batch_indices : batches) {
            std::vector<ImageSample> augmented;
            std::vector<const ImageSample*> view;
            view.reserve(batch_indices.size());
            if (config.augment_enabled) {
                augmented.reserve(batch_indices.size());
                for (const std::size_t idx : batch_indices) {
                    augmented.push_back(augment(stream.pool()[idx], config.augment_policy,
                                                derive_seed(config.seed, 0xa06u + epoch, idx)));
                }
                for (const ImageSample& s : augmented) {
                    view.push_back(&s);
                }
            } else {
                for (const std::size_t idx : batch_indices) {
                    view.push_back(&stream.pool()[idx]);
                }
            }
            const Batch batch = stack_samples(view);
            const LossBreakdown losses = train_step(params, batch, schedule, config, opt);
            sum_c += losses.loss_c;
            sum_d += losses.loss_d;
        }

        const EvalLoss val = evaluate_classification(params, datasets.source_val);
        EpochMetrics row;
        row.epoch = epoch;
        row.tau = schedule.value();
        row.loss_c = sum_c / static_cast<double>(batches.size());
        row.loss_d = sum_d / static_cast<double>(batches.size());
        row.val_loss = val.loss;
        row.val_acc = val.accuracy;
        result.log.push_back(row);
        if (metrics_csv) {
            *metrics_csv << metrics_csv_row(row) << "\n";
            metrics_csv->flush();
        }

        if (val.loss < best_loss) {
            best_loss = val.loss;
            result.best_params = params;
            result.best_meta.epoch = epoch;
            result.best_meta.validation_loss = val.loss;
            result.best_meta.validation_accuracy = val.accuracy;
            if (!config.checkpoint_path.empty()) {
                save_checkpoint(config.checkpoint_path, result.best_params, result.best_meta);
            }
        }
    }
    return result;
}

} // namespace dannkit
