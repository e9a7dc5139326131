#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dannkit/autodiff.hpp"
#include "dannkit/error.hpp"

namespace dannkit {

struct ImageSample {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels; // row-major, in [0,1]
    int class_label = 0;
    int domain_label = 0;
    std::string source_path; // stable identity: file path or synthetic id
};

// Morphology knobs for one synthetic species. The six built-in specs are
// mutually distinct so the classes are separable in principle.
struct SpeciesSpec {
    int species_id = 0;
    std::pair<int, int> blob_count_range{3, 6};
    std::pair<double, double> blob_radius_range{2.0, 4.0};     // canvas pixels
    std::pair<double, double> eccentricity_range{0.0, 0.3};    // [0,1)
    double cluster_spread = 6.0;                               // canvas pixels
    double intensity_contrast = 0.8;                           // (0,1]

    void validate(std::size_t image_size) const;
};

const std::array<SpeciesSpec, 6>& builtin_species();
// Lexicographically sorted abbreviations; index == class label.
const std::array<std::string, 6>& species_names();

// Domain-shift axes: identity (source conditions), contrast_reduce (squeeze
// intensities toward 0.5, low-contrast modality), downsample (s x s block
// mosaic, lower magnification), growth (larger blobs + extra placement
// jitter, longer incubation; carries an optional mosaic scale so the
// low-magnification + growth combination is a single transform).
struct DomainTransform {
    enum class Kind { Identity, ContrastReduce, Downsample, Growth };
    Kind kind = Kind::Identity;
    double contrast_factor = 1.0;
    int downsample_scale = 1;
    double growth_dilation = 0.0;
    double growth_jitter = 0.0;

    static DomainTransform identity();
    static DomainTransform contrast_reduce(double factor);
    static DomainTransform downsample(int scale);
    static DomainTransform growth(double dilation, double extra_jitter, int downsample_scale = 1);

    void validate() const;
    std::string kind_name() const;
};

// Generated image plus the binary mask of blob interiors (for localization
// checks against attention maps).
struct SynthImage {
    ImageSample sample;
    std::vector<std::uint8_t> blob_mask; // same size as sample.pixels
};

// Renders n images of one species under one domain transform. Deterministic
// per (spec, transform, n, seed); per-image seeds are derived from
// (seed, index) so results do not depend on evaluation order.
std::vector<SynthImage> synth_generate_masked(const SpeciesSpec& spec,
                                              const DomainTransform& transform, std::size_t n,
                                              std::size_t image_size, std::uint64_t seed,
                                              int domain_label = 0);
std::vector<ImageSample> synth_generate(const SpeciesSpec& spec, const DomainTransform& transform,
                                        std::size_t n, std::size_t image_size, std::uint64_t seed,
                                        int domain_label = 0);

// Layout: <root>/<species_name>/<zero-padded index>.png, 8-bit grayscale.
// `root` is one domain directory.
void write_image_folder(const std::vector<ImageSample>& samples, const std::filesystem::path& root);

// Loads every species subdirectory of `root`; class labels follow the sorted
// order of subdirectory names. Empty class directories warn on stderr.
std::vector<ImageSample> load_image_folder(const std::filesystem::path& root, int domain_label);

// raw/255 exactly.
double normalize_u8(std::uint8_t raw);

struct AugmentPolicy {
    double prob_hflip = 0.5;
    double prob_vflip = 0.5;
    double prob_rotate = 0.5;
    double max_rotation_deg = 15.0;
    double prob_brightness_contrast = 0.5;
    double brightness = 0.1; // shift drawn from +-brightness
    double contrast = 0.1;   // gain drawn from 1 +- contrast

    static AugmentPolicy disabled();
};

// Coin-flip flips, rotation with edge-reflection fill, brightness shift and
// contrast gain, clamped to [0,1]. Labels pass through untouched.
ImageSample augment(const ImageSample& image, const AugmentPolicy& policy, std::uint64_t seed);

struct SplitSpec {
    double test_fraction = 0.15;
    double train_fraction = 0.7; // of the non-test remainder
    std::uint64_t seed = 0;
};

struct SplitResult {
    std::vector<ImageSample> train, val, test;
};

// Per-class stratified: test = floor(test_fraction * n_c) (min 1), then the
// remainder splits train/val with val = nearest(0.3 * remainder).
SplitResult split_source(const std::vector<ImageSample>& samples, const SplitSpec& spec);

struct TargetSplit {
    std::vector<ImageSample> shot_pool; // labeled candidates for few-shot training
    std::vector<ImageSample> test;      // everything else
};

// Holds out `pool_per_class` images per class as the shot-candidate pool.
TargetSplit split_target(const std::vector<ImageSample>& samples, std::size_t pool_per_class,
                         std::uint64_t seed);

// Exactly k per class, drawn without replacement from `target` minus
// `target_test` (matched by source_path), deterministic per seed.
std::vector<ImageSample> sample_few_shot(const std::vector<ImageSample>& target,
                                         const std::vector<ImageSample>& target_test, std::size_t k,
                                         std::uint64_t seed);

// Epoch-indexed shuffled batches over source train + few-shot target pool.
// Deterministic per (seed, epoch index); the last partial batch is kept.
class BatchStream {
public:
    BatchStream(std::vector<ImageSample> source_train, std::vector<ImageSample> target_shots,
                std::size_t batch_size, std::uint64_t seed);

    std::size_t pool_size() const { return pool_.size(); }
    std::size_t batches_per_epoch() const;
    // Batches of indices into pool().
    std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;
    const std::vector<ImageSample>& pool() const { return pool_; }

private:
    std::vector<ImageSample> pool_;
    std::size_t batch_size_;
    std::uint64_t seed_;
};

// Stacks samples into a [B, 1, H, W] tensor plus label vectors.
struct Batch {
    Tensor images;
    std::vector<int> class_labels;
    std::vector<int> domain_labels;
};
Batch stack_samples(const std::vector<const ImageSample*>& samples);

// Bilinear resize (half-pixel centers); integer-factor downscale averages
// boxes exactly.
std::vector<double> resize_image(const std::vector<double>& src, std::size_t src_w,
                                 std::size_t src_h, std::size_t dst_w, std::size_t dst_h);

} // namespace dannkit
