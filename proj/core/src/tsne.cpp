#include "dannkit/tsne.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "dannkit/rng.hpp"

namespace dannkit {

namespace {

std::vector<double> squared_distances(const std::vector<std::vector<double>>& points) {
    const std::size_t n = points.size();
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::vector<double>& a = points[i];
            const std::vector<double>& b = points[j];
            double s = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) {
                const double diff = a[d] - b[d];
                s += diff * diff;
            }
            dist[i * n + j] = s;
            dist[j * n + i] = s;
        }
    }
    return dist;
}

} // namespace

TsneAffinities tsne_affinities(const std::vector<std::vector<double>>& points, double perplexity) {
    const std::size_t n = points.size();
    if (n < 3) {
        throw DataError("tsne: need at least 3 points");
    }
    if (!(perplexity > 1.0)) {
        throw ConfigError("tsne: perplexity must exceed 1");
    }
    const std::vector<double> dist = squared_distances(points);
    const double target_entropy = std::log(perplexity);

    TsneAffinities out;
    out.n = n;
    out.conditional.assign(n * n, 0.0);
    out.achieved_entropy.assign(n, 0.0);

    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0;
        double beta_min = -std::numeric_limits<double>::max();
        double beta_max = std::numeric_limits<double>::max();
        double entropy = 0.0;
        double sum_p = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            sum_p = DBL_MIN;
            double sum_dp = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                row[j] = std::exp(-beta * dist[i * n + j]);
                sum_p += row[j];
                sum_dp += dist[i * n + j] * row[j];
            }
            entropy = std::log(sum_p) + beta * sum_dp / sum_p;
            const double diff = entropy - target_entropy;
            if (std::abs(diff) <= 1e-2) {
                break;
            }
            if (diff > 0.0) { // entropy too high: sharpen
                beta_min = beta;
                beta = beta_max == std::numeric_limits<double>::max() ? beta * 2.0
                                                                      : (beta + beta_max) / 2.0;
            } else {
                beta_max = beta;
                beta = beta_min == -std::numeric_limits<double>::max() ? beta / 2.0
                                                                       : (beta + beta_min) / 2.0;
            }
        }
        out.achieved_entropy[i] = entropy;
        const double inv = 1.0 / sum_p;
        for (std::size_t j = 0; j < n; ++j) {
            out.conditional[i * n + j] = row[j] * inv;
        }
    }

    out.joint.assign(n * n, 0.0);
    const double inv2n = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.joint[i * n + j] =
                (out.conditional[i * n + j] + out.conditional[j * n + i]) * inv2n;
        }
    }
    return out;
}

namespace {

// KL(P||Q) for the current layout; Q from Student-t kernel with 1 dof.
double kl_divergence(const std::vector<double>& joint, const std::vector<std::array<double, 2>>& y) {
    const std::size_t n = y.size();
    double sum_q = DBL_MIN;
    std::vector<double> qnum(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[i][0] - y[j][0];
            const double dy = y[i][1] - y[j][1];
            const double q = 1.0 / (1.0 + dx * dx + dy * dy);
            qnum[i * n + j] = q;
            qnum[j * n + i] = q;
            sum_q += 2.0 * q;
        }
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            const double p = joint[i * n + j];
            if (p <= 0.0) {
                continue;
            }
            const double q = std::max(qnum[i * n + j] / sum_q, DBL_MIN);
            kl += p * std::log(p / q);
        }
    }
    return kl;
}

} // namespace

TsneResult tsne(const std::vector<std::vector<double>>& points, const TsneConfig& config) {
    const std::size_t n = points.size();
    TsneAffinities aff = tsne_affinities(points, config.perplexity);

    TsneResult result;
    result.coords.assign(n, {0.0, 0.0});
    Rng rng(derive_seed(config.seed, 0x75beu));
    for (auto& c : result.coords) {
        c[0] = rng.normal(0.0, 1e-4);
        c[1] = rng.normal(0.0, 1e-4);
    }
    result.initial_kl = kl_divergence(aff.joint, result.coords);

    std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
    std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
    std::vector<std::array<double, 2>> grad(n, {0.0, 0.0});
    std::vector<double> qnum(n * n, 0.0);

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        const double exaggeration = iter < config.exaggeration_iters ? config.early_exaggeration : 1.0;
        const double momentum =
            iter < config.momentum_switch_iter ? config.momentum_initial : config.momentum_final;

        double sum_q = DBL_MIN;
        for (std::size_t i = 0; i < n; ++i) {
            qnum[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = result.coords[i][0] - result.coords[j][0];
                const double dy = result.coords[i][1] - result.coords[j][1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                qnum[i * n + j] = q;
                qnum[j * n + i] = q;
                sum_q += 2.0 * q;
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0.0;
            double gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                const double q = qnum[i * n + j];
                const double mult = (exaggeration * aff.joint[i * n + j] - q / sum_q) * q;
                gx += (result.coords[i][0] - result.coords[j][0]) * mult;
                gy += (result.coords[i][1] - result.coords[j][1]) * mult;
            }
            grad[i][0] = 4.0 * gx;
            grad[i][1] = 4.0 * gy;
        }

        double mean_x = 0.0;
        double mean_y = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < 2; ++d) {
                // van der Maaten's adaptive gains
                const bool same_sign = (grad[i][d] > 0.0) == (velocity[i][d] > 0.0);
                gains[i][d] = same_sign ? std::max(0.01, gains[i][d] * 0.8) : gains[i][d] + 0.2;
                velocity[i][d] =
                    momentum * velocity[i][d] - config.learning_rate * gains[i][d] * grad[i][d];
                result.coords[i][d] += velocity[i][d];
            }
            mean_x += result.coords[i][0];
            mean_y += result.coords[i][1];
        }
        mean_x /= static_cast<double>(n);
        mean_y /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            result.coords[i][0] -= mean_x;
            result.coords[i][1] -= mean_y;
        }
    }

    result.final_kl = kl_divergence(aff.joint, result.coords);
    return result;
}

} // namespace dannkit
