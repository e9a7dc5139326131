#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dannkit/checkpoint.hpp"
#include "dannkit/data.hpp"
#include "dannkit/model.hpp"

namespace dannkit {

enum class TrainMode { SourceOnly, Dann, Mdann };

const char* train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
    TrainMode mode = TrainMode::SourceOnly;
    std::size_t epochs = 90;
    std::size_t batch_size = 6;
    double learning_rate = 0.001;
    double weight_decay = 0.001;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint_path; // empty: keep best in memory only
    bool augment_enabled = true;
    AugmentPolicy augment_policy;

    void validate() const;
};

// Eq.-style epoch ramp: tau(t_i, t) = 2/(1 + exp(-10 t_i / t)) - 1.
double tau(std::size_t current_epoch, std::size_t total_epochs);

struct TauSchedule {
    std::size_t current_epoch = 0;
    std::size_t total_epochs = 1;
    double value() const { return tau(current_epoch, total_epochs); }
};

struct LossBreakdown {
    double loss_c = 0.0;
    double loss_d = 0.0;
    double total = 0.0;
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Decoupled weight decay: p <- p*(1 - lr*wd) before the adaptive step.
class AdamWState {
public:
    explicit AdamWState(const ParamGroup& group, AdamWConfig config = {});

    // grads[i] pairs with group.params[i]. NaN gradients abort with the
    // parameter name.
    void step(ParamGroup& group, const std::vector<std::vector<double>>& grads, double lr,
              double weight_decay);

    std::uint64_t step_count() const { return step_count_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<Moments> moments_;
    std::uint64_t step_count_ = 0;
    AdamWConfig config_;
};

struct OptimizerState {
    AdamWState extractor, classifier, discriminator;

    explicit OptimizerState(const ModelParams& params, AdamWConfig config = {})
        : extractor(params.extractor, config),
          classifier(params.classifier, config),
          discriminator(params.discriminator, config) {}
};

// Forward + losses on the provided tape. In source-only mode the domain
// branch is not executed and loss_d is 0. Reported losses are the raw
// cross-entropies; lambda and tau act on gradients (GRL for theta_f,
// explicit lambda scaling of theta_d gradients in train_step).
LossBreakdown compute_losses(Tape& tape, ModelPass& pass, const Batch& batch,
                             const TauSchedule& schedule, const TrainConfig& config,
                             Tensor* total_out);

// One optimization step over one batch. Also refreshes each parameter's
// `grad` buffer with the gradient actually fed to the optimizer.
LossBreakdown train_step(ModelParams& params, const Batch& batch, const TauSchedule& schedule,
                         const TrainConfig& config, OptimizerState& opt);

struct EpochMetrics {
    std::size_t epoch = 0;
    double tau = 0.0;
    double loss_c = 0.0;
    double loss_d = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct FitDatasets {
    std::vector<ImageSample> source_train;
    std::vector<ImageSample> source_val;
    std::vector<ImageSample> target_shots; // domain labels >= 1 already set
};

struct FitResult {
    ModelParams best_params;
    CheckpointMeta best_meta;
    std::vector<EpochMetrics> log;
};

// Full training loop: per-epoch tau update, shuffled mixed batches,
// validation on the source val split, lowest-val-loss checkpoint retention
// (ties keep the earliest epoch). Writes a CSV row per epoch to metrics_csv
// when provided: epoch,tau,loss_c,loss_d,val_loss,val_acc at 9 significant
// digits.
FitResult fit(const BackboneConfig& backbone, const TrainConfig& config,
              const FitDatasets& datasets, std::ostream* metrics_csv = nullptr);

// Mean classification cross-entropy and accuracy over samples, without
// augmentation. Chunked forward passes; exact regardless of chunking.
struct EvalLoss {
    double loss = 0.0;
    double accuracy = 0.0;
};
EvalLoss evaluate_classification(const ModelParams& params, const std::vector<ImageSample>& samples);

const char* metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& row);

} // namespace dannkit
