#include "dannkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "dannkit/image_io.hpp"
#include "dannkit/rng.hpp"

namespace dannkit {

namespace {

constexpr std::size_t kCanvas = 64;
constexpr double kBackgroundLevel = 0.15;
constexpr double kBackgroundNoiseSigma = 0.05;

struct Blob {
    double cx, cy;
    double radius;
    double ecc;
    double theta;
    double peak;
};

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// OpenCV-style BORDER_REFLECT_101 index folding.
std::size_t reflect101(long i, std::size_t n) {
    if (n == 1) {
        return 0;
    }
    const long period = 2 * (static_cast<long>(n) - 1);
    long t = i % period;
    if (t < 0) {
        t += period;
    }
    if (t >= static_cast<long>(n)) {
        t = period - t;
    }
    return static_cast<std::size_t>(t);
}

std::vector<double> mosaic(const std::vector<double>& src, std::size_t w, std::size_t h,
                           std::size_t block) {
    std::vector<double> out(src.size());
    for (std::size_t by = 0; by < h; by += block) {
        const std::size_t y1 = std::min(by + block, h);
        for (std::size_t bx = 0; bx < w; bx += block) {
            const std::size_t x1 = std::min(bx + block, w);
            double acc = 0.0;
            for (std::size_t y = by; y < y1; ++y) {
                for (std::size_t x = bx; x < x1; ++x) {
                    acc += src[y * w + x];
                }
            }
            const double mean = acc / static_cast<double>((y1 - by) * (x1 - bx));
            for (std::size_t y = by; y < y1; ++y) {
                for (std::size_t x = bx; x < x1; ++x) {
                    out[y * w + x] = mean;
                }
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> resize_mask_nearest(const std::vector<std::uint8_t>& src, std::size_t sw,
                                              std::size_t sh, std::size_t dw, std::size_t dh) {
    std::vector<std::uint8_t> out(dw * dh);
    for (std::size_t y = 0; y < dh; ++y) {
        const std::size_t sy = std::min(sh - 1, static_cast<std::size_t>(
            (static_cast<double>(y) + 0.5) * static_cast<double>(sh) / static_cast<double>(dh)));
        for (std::size_t x = 0; x < dw; ++x) {
            const std::size_t sx = std::min(sw - 1, static_cast<std::size_t>(
                (static_cast<double>(x) + 0.5) * static_cast<double>(sw) / static_cast<double>(dw)));
            out[y * dw + x] = src[sy * sw + sx];
        }
    }
    return out;
}

std::string species_name_for(int class_label) {
    if (class_label >= 0 && class_label < 6) {
        return species_names()[static_cast<std::size_t>(class_label)];
    }
    return "class" + std::to_string(class_label);
}

} // namespace

void SpeciesSpec::validate(std::size_t image_size) const {
    if (blob_count_range.first < 1 || blob_count_range.second < blob_count_range.first) {
        throw ConfigError("species: blob_count_range must be ordered and positive");
    }
    if (!(blob_radius_range.first > 0.0) || blob_radius_range.second < blob_radius_range.first) {
        throw ConfigError("species: blob_radius_range must be ordered and positive");
    }
    if (eccentricity_range.first < 0.0 || eccentricity_range.second >= 1.0 ||
        eccentricity_range.second < eccentricity_range.first) {
        throw ConfigError("species: eccentricity_range must lie in [0,1) and be ordered");
    }
    if (!(intensity_contrast > 0.0 && intensity_contrast <= 1.0)) {
        throw ConfigError("species: intensity_contrast must lie in (0,1]");
    }
    if (2.0 * blob_radius_range.second >= static_cast<double>(image_size)) {
        throw ConfigError("species " + std::to_string(species_id) +
                          ": image too small for blob radius");
    }
}

const std::array<SpeciesSpec, 6>& builtin_species() {
    // Index == class label == sorted species-name order (Bc,Bs,Ec,Li,SE,ST).
    static const std::array<SpeciesSpec, 6> specs = {{
        {0, {4, 7}, {3.5, 5.0}, {0.0, 0.2}, 7.0, 0.85},   // Bc: few large round colonies
        {1, {6, 10}, {2.5, 3.5}, {0.7, 0.9}, 9.0, 0.75},  // Bs: elongated chains
        {2, {12, 18}, {1.5, 2.5}, {0.3, 0.5}, 12.0, 0.7}, // Ec: many small scattered
        {3, {3, 5}, {1.8, 2.6}, {0.1, 0.3}, 4.0, 0.9},    // Li: tight bright cluster
        {4, {8, 12}, {2.2, 3.2}, {0.45, 0.6}, 8.0, 0.65}, // SE
        {5, {8, 12}, {2.8, 3.8}, {0.5, 0.65}, 14.0, 0.6}, // ST: like SE, wider spread
    }};
    return specs;
}

const std::array<std::string, 6>& species_names() {
    static const std::array<std::string, 6> names = {"Bc", "Bs", "Ec", "Li", "SE", "ST"};
    return names;
}

DomainTransform DomainTransform::identity() { return {}; }

DomainTransform DomainTransform::contrast_reduce(double factor) {
    DomainTransform t;
    t.kind = Kind::ContrastReduce;
    t.contrast_factor = factor;
    t.validate();
    return t;
}

DomainTransform DomainTransform::downsample(int scale) {
    DomainTransform t;
    t.kind = Kind::Downsample;
    t.downsample_scale = scale;
    t.validate();
    return t;
}

DomainTransform DomainTransform::growth(double dilation, double extra_jitter, int downsample_scale) {
    DomainTransform t;
    t.kind = Kind::Growth;
    t.growth_dilation = dilation;
    t.growth_jitter = extra_jitter;
    t.downsample_scale = downsample_scale;
    t.validate();
    return t;
}

void DomainTransform::validate() const {
    if (!(contrast_factor > 0.0 && contrast_factor <= 1.0)) {
        throw ConfigError("domain transform: contrast factor must lie in (0,1]");
    }
    if (downsample_scale < 1) {
        throw ConfigError("domain transform: downsample scale must be >= 1");
    }
    if (growth_dilation < 0.0 || growth_jitter < 0.0) {
        throw ConfigError("domain transform: growth parameters must be nonnegative");
    }
}

std::string DomainTransform::kind_name() const {
    switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::ContrastReduce: return "contrast_reduce";
    case Kind::Downsample: return "downsample";
    case Kind::Growth: return "growth";
    }
    return "identity";
}

std::vector<SynthImage> synth_generate_masked(const SpeciesSpec& spec,
                                              const DomainTransform& transform, std::size_t n,
                                              std::size_t image_size, std::uint64_t seed,
                                              int domain_label) {
    if (n < 1) {
        throw DataError("synth_generate: n must be >= 1");
    }
    if (image_size < 8) {
        throw ConfigError("synth_generate: image_size must be >= 8");
    }
    transform.validate();
    spec.validate(image_size);

    const std::size_t canvas = std::max(kCanvas, image_size);
    const double dilation = transform.kind == DomainTransform::Kind::Growth ? transform.growth_dilation : 0.0;
    const double jitter = transform.kind == DomainTransform::Kind::Growth ? transform.growth_jitter : 0.0;

    std::vector<SynthImage> out;
    out.reserve(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        Rng rng(derive_seed(seed, idx));

        // All stochastic choices happen up front; rendering is then pure.
        const double ccx = rng.uniform(0.3, 0.7) * static_cast<double>(canvas);
        const double ccy = rng.uniform(0.3, 0.7) * static_cast<double>(canvas);
        const std::size_t count = static_cast<std::size_t>(spec.blob_count_range.first) +
            rng.index(static_cast<std::uint64_t>(spec.blob_count_range.second -
                                                 spec.blob_count_range.first + 1));
        std::vector<Blob> blobs(count);
        for (Blob& b : blobs) {
            b.cx = ccx + rng.normal(0.0, spec.cluster_spread + jitter);
            b.cy = ccy + rng.normal(0.0, spec.cluster_spread + jitter);
            b.radius = rng.uniform(spec.blob_radius_range.first, spec.blob_radius_range.second) + dilation;
            b.ecc = rng.uniform(spec.eccentricity_range.first, spec.eccentricity_range.second);
            b.theta = rng.uniform(0.0, 3.141592653589793);
            b.peak = spec.intensity_contrast * rng.uniform(0.75, 1.0);
        }

        std::vector<double> img(canvas * canvas);
        for (double& p : img) {
            p = kBackgroundLevel + rng.normal(0.0, kBackgroundNoiseSigma);
        }
        std::vector<std::uint8_t> mask(canvas * canvas, 0);

        for (const Blob& b : blobs) {
            const double minor = b.radius * std::sqrt(1.0 - b.ecc * b.ecc);
            const double reach = 2.5 * b.radius;
            const long x0 = std::max(0L, static_cast<long>(std::floor(b.cx - reach)));
            const long x1 = std::min(static_cast<long>(canvas) - 1, static_cast<long>(std::ceil(b.cx + reach)));
            const long y0 = std::max(0L, static_cast<long>(std::floor(b.cy - reach)));
            const long y1 = std::min(static_cast<long>(canvas) - 1, static_cast<long>(std::ceil(b.cy + reach)));
            const double ct = std::cos(b.theta);
            const double st = std::sin(b.theta);
            for (long y = y0; y <= y1; ++y) {
                for (long x = x0; x <= x1; ++x) {
                    const double dx = static_cast<double>(x) - b.cx;
                    const double dy = static_cast<double>(y) - b.cy;
                    const double u = (dx * ct + dy * st) / b.radius;
                    const double v = (-dx * st + dy * ct) / minor;
                    const double d2 = u * u + v * v;
                    if (d2 > 6.25) {
                        continue;
                    }
                    img[static_cast<std::size_t>(y) * canvas + static_cast<std::size_t>(x)] +=
                        b.peak * std::exp(-2.0 * d2);
                    if (d2 <= 1.0) {
                        mask[static_cast<std::size_t>(y) * canvas + static_cast<std::size_t>(x)] = 1;
                    }
                }
            }
        }
        for (double& p : img) {
            p = clamp01(p);
        }

        switch (transform.kind) {
        case DomainTransform::Kind::Identity:
            break;
        case DomainTransform::Kind::ContrastReduce:
            for (double& p : img) {
                p = 0.5 + transform.contrast_factor * (p - 0.5);
            }
            break;
        case DomainTransform::Kind::Downsample:
        case DomainTransform::Kind::Growth:
            if (transform.downsample_scale > 1) {
                img = mosaic(img, canvas, canvas, static_cast<std::size_t>(transform.downsample_scale));
            }
            break;
        }

        SynthImage synth;
        synth.sample.width = image_size;
        synth.sample.height = image_size;
        if (image_size == canvas) {
            synth.sample.pixels = std::move(img);
            synth.blob_mask = std::move(mask);
        } else {
            synth.sample.pixels = resize_image(img, canvas, canvas, image_size, image_size);
            for (double& p : synth.sample.pixels) {
                p = clamp01(p);
            }
            synth.blob_mask = resize_mask_nearest(mask, canvas, canvas, image_size, image_size);
        }
        synth.sample.class_label = spec.species_id;
        synth.sample.domain_label = domain_label;
        char id[96];
        std::snprintf(id, sizeof id, "synth:%d:%s:%s:%zu", domain_label,
                      transform.kind_name().c_str(), species_name_for(spec.species_id).c_str(), idx);
        synth.sample.source_path = id;
        out.push_back(std::move(synth));
    }
    return out;
}

std::vector<ImageSample> synth_generate(const SpeciesSpec& spec, const DomainTransform& transform,
                                        std::size_t n, std::size_t image_size, std::uint64_t seed,
                                        int domain_label) {
    std::vector<SynthImage> masked = synth_generate_masked(spec, transform, n, image_size, seed, domain_label);
    std::vector<ImageSample> out;
    out.reserve(masked.size());
    for (SynthImage& m : masked) {
        out.push_back(std::move(m.sample));
    }
    return out;
}

void write_image_folder(const std::vector<ImageSample>& samples, const std::filesystem::path& root) {
    if (samples.empty()) {
        throw DataError("write_image_folder: no samples");
    }
    std::map<int, std::size_t> next_index;
    std::filesystem::create_directories(root);
    for (const ImageSample& s : samples) {
        const std::filesystem::path dir = root / species_name_for(s.class_label);
        std::filesystem::create_directories(dir);
        GrayImage img;
        img.width = s.width;
        img.height = s.height;
        img.pixels.resize(s.pixels.size());
        for (std::size_t i = 0; i < s.pixels.size(); ++i) {
            const double q = std::round(clamp01(s.pixels[i]) * 255.0);
            img.pixels[i] = static_cast<std::uint8_t>(q);
        }
        char name[16];
        std::snprintf(name, sizeof name, "%04zu.png", next_index[s.class_label]++);
        write_png_gray8(dir / name, img);
    }
}

std::vector<ImageSample> load_image_folder(const std::filesystem::path& root, int domain_label) {
    if (!std::filesystem::is_directory(root)) {
        throw IoError("image folder does not exist: " + root.string());
    }
    std::vector<std::string> class_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) {
            class_dirs.push_back(entry.path().filename().string());
        }
    }
    if (class_dirs.empty()) {
        throw DataError("no species directories under " + root.string());
    }
    std::sort(class_dirs.begin(), class_dirs.end());

    std::vector<ImageSample> out;
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
        const std::filesystem::path dir = root / class_dirs[c];
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) {
                continue;
            }
            const std::string ext = entry.path().extension().string();
            if (ext == ".png" || ext == ".pgm") {
                files.push_back(entry.path());
            }
        }
        if (files.empty()) {
            std::cerr << "warning: empty class directory " << dir.string() << "\n";
            continue;
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const GrayImage raw = read_gray_image(file);
            ImageSample s;
            s.width = raw.width;
            s.height = raw.height;
            s.pixels.resize(raw.pixels.size());
            for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
                s.pixels[i] = normalize_u8(raw.pixels[i]);
            }
            s.class_label = static_cast<int>(c);
            s.domain_label = domain_label;
            s.source_path = file.string();
            out.push_back(std::move(s));
        }
    }
    return out;
}

double normalize_u8(std::uint8_t raw) { return static_cast<double>(raw) / 255.0; }

AugmentPolicy AugmentPolicy::disabled() {
    AugmentPolicy p;
    p.prob_hflip = p.prob_vflip = p.prob_rotate = p.prob_brightness_contrast = 0.0;
    return p;
}

ImageSample augment(const ImageSample& image, const AugmentPolicy& policy, std::uint64_t seed) {
    Rng rng(seed);
    ImageSample out = image;
    const std::size_t w = image.width;
    const std::size_t h = image.height;

    if (rng.coin(policy.prob_hflip)) {
        for (std::size_t y = 0; y < h; ++y) {
            std::reverse(out.pixels.begin() + static_cast<long>(y * w),
                         out.pixels.begin() + static_cast<long>((y + 1) * w));
        }
    }
    if (rng.coin(policy.prob_vflip)) {
        for (std::size_t y = 0; y < h / 2; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                std::swap(out.pixels[y * w + x], out.pixels[(h - 1 - y) * w + x]);
            }
        }
    }
    if (rng.coin(policy.prob_rotate) && policy.max_rotation_deg > 0.0) {
        const double deg = rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg);
        const double rad = deg * 3.141592653589793 / 180.0;
        const double ct = std::cos(rad);
        const double st = std::sin(rad);
        const double cx = (static_cast<double>(w) - 1.0) / 2.0;
        const double cy = (static_cast<double>(h) - 1.0) / 2.0;
        std::vector<double> rotated(out.pixels.size());
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                // Inverse map into the source image; reflect at the edges.
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                const double sx = cx + ct * dx + st * dy;
                const double sy = cy - st * dx + ct * dy;
                const long fx = static_cast<long>(std::floor(sx));
                const long fy = static_cast<long>(std::floor(sy));
                const double ax = sx - static_cast<double>(fx);
                const double ay = sy - static_cast<double>(fy);
                const std::size_t x0 = reflect101(fx, w);
                const std::size_t x1 = reflect101(fx + 1, w);
                const std::size_t y0 = reflect101(fy, h);
                const std::size_t y1 = reflect101(fy + 1, h);
                rotated[y * w + x] = (1.0 - ay) * ((1.0 - ax) * out.pixels[y0 * w + x0] +
                                                   ax * out.pixels[y0 * w + x1]) +
                                     ay * ((1.0 - ax) * out.pixels[y1 * w + x0] +
                                           ax * out.pixels[y1 * w + x1]);
            }
        }
        out.pixels = std::move(rotated);
    }
    if (rng.coin(policy.prob_brightness_contrast)) {
        const double shift = rng.uniform(-policy.brightness, policy.brightness);
        const double gain = rng.uniform(1.0 - policy.contrast, 1.0 + policy.contrast);
        for (double& p : out.pixels) {
            p = clamp01(p * gain + shift);
        }
    }
    return out;
}

namespace {

std::map<int, std::vector<std::size_t>> indices_by_class(const std::vector<ImageSample>& samples) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        by_class[samples[i].class_label].push_back(i);
    }
    return by_class;
}

} // namespace

SplitResult split_source(const std::vector<ImageSample>& samples, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
        !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ConfigError("split: fractions must lie in (0,1)");
    }
    SplitResult result;
    for (auto& [class_label, idx] : indices_by_class(samples)) {
        const std::size_t n = idx.size();
        if (n < 7) {
            throw DataError("split_source: class " + std::to_string(class_label) + " has only " +
                            std::to_string(n) + " samples (minimum 7)");
        }
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(class_label)));
        rng.shuffle(idx);
        const std::size_t test_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(n))));
        const std::size_t rest = n - test_n;
        const std::size_t val_n = static_cast<std::size_t>(
            std::llround((1.0 - spec.train_fraction) * static_cast<double>(rest)));
        for (std::size_t i = 0; i < n; ++i) {
            const ImageSample& s = samples[idx[i]];
            if (i < test_n) {
                result.test.push_back(s);
            } else if (i < test_n + val_n) {
                result.val.push_back(s);
            } else {
                result.train.push_back(s);
            }
        }
    }
    return result;
}

TargetSplit split_target(const std::vector<ImageSample>& samples, std::size_t pool_per_class,
                         std::uint64_t seed) {
    TargetSplit result;
    for (auto& [class_label, idx] : indices_by_class(samples)) {
        if (idx.size() <= pool_per_class) {
            throw DataError("split_target: class " + std::to_string(class_label) +
                            " needs more than " + std::to_string(pool_per_class) + " samples");
        }
        Rng rng(derive_seed(seed, 0x7a17u, static_cast<std::uint64_t>(class_label)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < pool_per_class ? result.shot_pool : result.test).push_back(samples[idx[i]]);
        }
    }
    return result;
}

std::vector<ImageSample> sample_few_shot(const std::vector<ImageSample>& target,
                                         const std::vector<ImageSample>& target_test, std::size_t k,
                                         std::uint64_t seed) {
    if (k == 0) {
        throw ConfigError("sample_few_shot: k must be positive");
    }
    std::set<std::string> test_ids;
    for (const ImageSample& s : target_test) {
        if (!s.source_path.empty()) {
            test_ids.insert(s.source_path);
        }
    }
    std::map<int, std::vector<std::size_t>> candidates;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i].source_path.empty() || !test_ids.count(target[i].source_path)) {
            candidates[target[i].class_label].push_back(i);
        }
    }
    std::vector<ImageSample> shots;
    for (auto& [class_label, idx] : candidates) {
        if (idx.size() < k) {
            throw DataError("sample_few_shot: class " + std::to_string(class_label) + " has only " +
                            std::to_string(idx.size()) + " samples outside the test set, need " +
                            std::to_string(k));
        }
        Rng rng(derive_seed(seed, 0xf5b0u, static_cast<std::uint64_t>(class_label)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < k; ++i) {
            shots.push_back(target[idx[i]]);
        }
    }
    return shots;
}

BatchStream::BatchStream(std::vector<ImageSample> source_train, std::vector<ImageSample> target_shots,
                         std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed) {
    if (batch_size < 2) {
        throw ConfigError("make_batches: batch_size must be >= 2");
    }
    pool_ = std::move(source_train);
    pool_.insert(pool_.end(), std::make_move_iterator(target_shots.begin()),
                 std::make_move_iterator(target_shots.end()));
    if (pool_.empty()) {
        throw DataError("make_batches: empty sample pool");
    }
}

std::size_t BatchStream::batches_per_epoch() const {
    return (pool_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchStream::epoch(std::size_t epoch_index) const {
    std::vector<std::size_t> perm(pool_.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        perm[i] = i;
    }
    Rng rng(derive_seed(seed_, 0xba7cu, epoch_index));
    rng.shuffle(perm);
    std::vector<std::vector<std::size_t>> batches;
    batches.reserve(batches_per_epoch());
    for (std::size_t start = 0; start < perm.size(); start += batch_size_) {
        const std::size_t end = std::min(start + batch_size_, perm.size());
        batches.emplace_back(perm.begin() + static_cast<long>(start),
                             perm.begin() + static_cast<long>(end));
    }
    return batches;
}

Batch stack_samples(const std::vector<const ImageSample*>& samples) {
    if (samples.empty()) {
        throw DataError("stack_samples: empty batch");
    }
    const std::size_t w = samples[0]->width;
    const std::size_t h = samples[0]->height;
    Batch batch;
    batch.images = Tensor(Shape{samples.size(), 1, h, w}, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const ImageSample& s = *samples[i];
        if (s.width != w || s.height != h) {
            throw ShapeError("stack_samples: mixed image sizes in batch");
        }
        std::copy(s.pixels.begin(), s.pixels.end(),
                  batch.images.values.begin() + static_cast<long>(i * h * w));
        batch.class_labels.push_back(s.class_label);
        batch.domain_labels.push_back(s.domain_label);
    }
    return batch;
}

std::vector<double> resize_image(const std::vector<double>& src, std::size_t src_w,
                                 std::size_t src_h, std::size_t dst_w, std::size_t dst_h) {
    if (src_w == dst_w && src_h == dst_h) {
        return src;
    }
    std::vector<double> out(dst_w * dst_h);
    if (src_w % dst_w == 0 && src_h % dst_h == 0) {
        const std::size_t fx = src_w / dst_w;
        const std::size_t fy = src_h / dst_h;
        const double inv = 1.0 / static_cast<double>(fx * fy);
        for (std::size_t y = 0; y < dst_h; ++y) {
            for (std::size_t x = 0; x < dst_w; ++x) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < fy; ++dy) {
                    for (std::size_t dx = 0; dx < fx; ++dx) {
                        acc += src[(y * fy + dy) * src_w + x * fx + dx];
                    }
                }
                out[y * dst_w + x] = acc * inv;
            }
        }
        return out;
    }
    for (std::size_t y = 0; y < dst_h; ++y) {
        double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(src_h) /
                        static_cast<double>(dst_h) - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(src_h - 1));
        const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, src_h - 1);
        const double ay = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < dst_w; ++x) {
            double sx = (static_cast<double>(x) + 0.5) * static_cast<double>(src_w) /
                            static_cast<double>(dst_w) - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(src_w - 1));
            const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, src_w - 1);
            const double ax = sx - static_cast<double>(x0);
            out[y * dst_w + x] = (1.0 - ay) * ((1.0 - ax) * src[y0 * src_w + x0] +
                                               ax * src[y0 * src_w + x1]) +
                                 ay * ((1.0 - ax) * src[y1 * src_w + x0] +
                                       ax * src[y1 * src_w + x1]);
        }
    }
    return out;
}

} // namespace dannkit
