#pragma once

#include "steerlens/ingest.hpp"
#include "steerlens/sae.hpp"

#include <cstdint>
#include <vector>

namespace steerlens::synthetic {

struct SparseDataset {
    EmbeddingCorpus corpus;
    std::vector<double> directions; // num_directions x dim, orthonormal rows
    std::size_t num_directions;
};

struct SparseDatasetSpec {
    std::size_t dim = 64;
    std::size_t num_directions = 32;
    std::size_t samples = 10000;
    double active_probability = 0.08; // per-direction chance of being present
    double noise = 0.0;               // std-dev of isotropic Gaussian noise
    std::uint64_t seed = 0;
};

/// Samples x = sum_j c_j u_j with orthonormal ground-truth directions u_j and
/// sparse non-negative coefficients c_j ~ U(0.5, 1.5) when active.
SparseDataset make_sparse_dataset(const SparseDatasetSpec& spec);

/// Greedy one-to-one matching of ground-truth directions to decoder rows by
/// |cosine|, highest pairs first. Returns the mean matched |cosine| over the
/// ground-truth directions.
double recovery_score(const SaeModel& model, const std::vector<double>& directions,
                      std::size_t num_directions);

} // namespace steerlens::synthetic
