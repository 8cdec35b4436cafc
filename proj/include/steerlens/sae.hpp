#pragma once

#include "steerlens/ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace steerlens {

/// Single-hidden-layer sparse autoencoder.
///
///   a   = ReLU(W_enc (x - b_dec) + b_enc)
///   x   = sum_j a_j v_j + b_dec + residual
///
/// Rows of the decoder are the unit-norm component directions v_j. Parameters
/// are stored as float32 (the checkpoint precision); all evaluation runs in
/// double.
class SaeModel {
public:
    SaeModel(std::size_t dim_in, std::size_t dim_sae, std::vector<float> enc_weights,
             std::vector<float> enc_bias, std::vector<float> dec_directions,
             std::vector<float> dec_bias);

    std::size_t dim_in() const noexcept { return dim_in_; }
    std::size_t dim_sae() const noexcept { return dim_sae_; }

    std::span<const float> enc_row(std::size_t j) const {
        return {enc_weights_.data() + j * dim_in_, dim_in_};
    }
    std::span<const float> direction(std::size_t j) const {
        return {dec_directions_.data() + j * dim_in_, dim_in_};
    }

    const std::vector<float>& enc_weights() const noexcept { return enc_weights_; }
    const std::vector<float>& enc_bias() const noexcept { return enc_bias_; }
    const std::vector<float>& dec_directions() const noexcept { return dec_directions_; }
    const std::vector<float>& dec_bias() const noexcept { return dec_bias_; }

    friend bool operator==(const SaeModel&, const SaeModel&) = default;

private:
    std::size_t dim_in_;
    std::size_t dim_sae_;
    std::vector<float> enc_weights_;
    std::vector<float> enc_bias_;
    std::vector<float> dec_directions_;
    std::vector<float> dec_bias_;
};

inline constexpr double kUnitNormTolerance = 1e-6;

struct SaeCode {
    std::vector<double> activations; // non-negative, length dim_sae
    std::vector<double> residual;    // x - decode(activations), length dim_in
};

SaeCode encode(const SaeModel& model, std::span<const double> x);
SaeCode encode(const SaeModel& model, std::span<const float> x);

/// Activation of a single component; equals encode(model, x).activations[j].
double component_activation(const SaeModel& model, std::span<const float> x, std::size_t j);

/// sum_j a_j v_j + b_dec
std::vector<double> decode(const SaeModel& model, std::span<const double> activations);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    double sparsity_weight = 5e-3;
    std::size_t epochs = 20;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    // Reinitialise dead components from high-error samples every N epochs.
    std::optional<std::size_t> dead_resample_interval;
    Optimizer optimizer = Optimizer::Sgd;

    void validate() const;
};

struct TrainLog {
    std::vector<double> epoch_loss; // mean per-sample objective for each epoch
    std::size_t resampled = 0;      // total components reinitialised
};

/// Minimises mean ||x - decode(encode(x))||^2 + lambda * sum_j a_j with
/// decoder rows renormalised after every step. Deterministic for a fixed
/// (corpus, dim_sae, config).
SaeModel train(const EmbeddingCorpus& corpus, std::size_t dim_sae, const TrainConfig& cfg,
               TrainLog* log = nullptr);

/// Components whose activation is zero on every sample of `corpus`.
std::vector<std::size_t> dead_components(const SaeModel& model, const EmbeddingCorpus& corpus);

inline constexpr std::string_view kSaeMagic = "SAE1";

SaeModel load_sae(const std::filesystem::path& path);
void save_sae(const SaeModel& model, const std::filesystem::path& path);

} // namespace steerlens
