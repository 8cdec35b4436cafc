#include "steerlens/synthetic.hpp"

#include "steerlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

namespace steerlens::synthetic {

SparseDataset make_sparse_dataset(const SparseDatasetSpec& spec) {
    if (spec.num_directions == 0 || spec.num_directions > spec.dim) {
        throw Error(ErrorCode::InvalidConfig, "need 0 < num_directions <= dim for orthonormal directions");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t d = spec.dim;

    // Gram-Schmidt on Gaussian vectors; retry on (improbable) degeneracy.
    std::vector<double> dirs(spec.num_directions * d);
    for (std::size_t j = 0; j < spec.num_directions; ++j) {
        double* u = dirs.data() + j * d;
        for (;;) {
            for (std::size_t i = 0; i < d; ++i) {
                u[i] = gauss(rng);
            }
            for (std::size_t p = 0; p < j; ++p) {
                const double* q = dirs.data() + p * d;
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    dot += u[i] * q[i];
                }
                for (std::size_t i = 0; i < d; ++i) {
                    u[i] -= dot * q[i];
                }
            }
            double sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                sq += u[i] * u[i];
            }
            if (sq > 1e-6) {
                const double norm = std::sqrt(sq);
                for (std::size_t i = 0; i < d; ++i) {
                    u[i] /= norm;
                }
                break;
            }
        }
    }

    std::vector<float> vectors(spec.samples * d);
    std::vector<std::string> ids(spec.samples);
    std::vector<double> x(d);
    for (std::size_t n = 0; n < spec.samples; ++n) {
        std::fill(x.begin(), x.end(), 0.0);
        bool any = false;
        for (std::size_t j = 0; j < spec.num_directions; ++j) {
            if (unit(rng) >= spec.active_probability) {
                continue;
            }
            any = true;
            const double c = 0.5 + unit(rng);
            const double* u = dirs.data() + j * d;
            for (std::size_t i = 0; i < d; ++i) {
                x[i] += c * u[i];
            }
        }
        if (!any) {
            // Guarantee at least one active direction per sample.
            const auto j = static_cast<std::size_t>(unit(rng) * static_cast<double>(spec.num_directions)) %
                           spec.num_directions;
            const double c = 0.5 + unit(rng);
            for (std::size_t i = 0; i < d; ++i) {
                x[i] += c * dirs[j * d + i];
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            const double noisy = spec.noise > 0.0 ? x[i] + spec.noise * gauss(rng) : x[i];
            vectors[n * d + i] = static_cast<float>(noisy);
        }
        ids[n] = "s" + std::to_string(n);
    }
    return SparseDataset{EmbeddingCorpus(d, std::move(ids), std::move(vectors)), std::move(dirs),
                         spec.num_directions};
}

double recovery_score(const SaeModel& model, const std::vector<double>& directions,
                      std::size_t num_directions) {
    const std::size_t d = model.dim_in();
    if (directions.size() != num_directions * d) {
        throw Error(ErrorCode::DimMismatch, "ground-truth directions do not match model dimension");
    }
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(num_directions * model.dim_sae());
    for (std::size_t g = 0; g < num_directions; ++g) {
        const double* u = directions.data() + g * d;
        double un = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            un += u[i] * u[i];
        }
        for (std::size_t j = 0; j < model.dim_sae(); ++j) {
            const auto v = model.direction(j);
            double dot = 0.0;
            double vn = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                dot += u[i] * v[i];
                vn += static_cast<double>(v[i]) * v[i];
            }
            pairs.emplace_back(std::abs(dot) / std::sqrt(un * vn), g, j);
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    std::vector<bool> used_truth(num_directions, false);
    std::vector<bool> used_learned(model.dim_sae(), false);
    double total = 0.0;
    std::size_t matched = 0;
    for (const auto& [cos, g, j] : pairs) {
        if (used_truth[g] || used_learned[j]) {
            continue;
        }
        used_truth[g] = true;
        used_learned[j] = true;
        total += cos;
        if (++matched == num_directions) {
            break;
        }
    }
    // Unmatched truths (dim_sae < num_directions) contribute zero.
    return total / static_cast<double>(num_directions);
}

} // namespace steerlens::synthetic
