#pragma once

#include "steerlens/ingest.hpp"
#include "steerlens/sae.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace steerlens {

enum class ScoreMode { Cosine, Dot };

std::string_view to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view text);

/// How image-text scores become logits: logit_c = scale * sim(x, t_c).
struct ScoreOptions {
    ScoreMode mode = ScoreMode::Cosine;
    double logit_scale = 100.0;

    void validate() const;
};

/// Named set of >= 2 classes, each with a text embedding.
class ClassSet {
public:
    ClassSet(std::string name, std::vector<std::string> labels, std::size_t dim,
             std::vector<double> embeddings);

    const std::string& name() const noexcept { return name_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(std::size_t c) const { return labels_[c]; }
    std::span<const double> embedding(std::size_t c) const {
        return {embeddings_.data() + c * dim_, dim_};
    }
    std::optional<std::size_t> index_of(std::string_view label) const;

private:
    std::string name_;
    std::vector<std::string> labels_;
    std::size_t dim_;
    std::vector<double> embeddings_;
};

/// Class sets are stored as EMB1 corpora whose labels are the class names.
ClassSet class_set_from_corpus(std::string name, const EmbeddingCorpus& corpus);
ClassSet read_class_set(const std::filesystem::path& path, std::string name);

/// Sparse multiplicative steering: a'_j = a_j (1 + m_j), m_j in [-1, 1].
class SteeringConfig {
public:
    SteeringConfig() = default;

    /// Rejects duplicate indices and out-of-range or non-finite values.
    static SteeringConfig from_list(std::span<const std::pair<std::size_t, double>> entries);

    void set(std::size_t component, double m);
    bool empty() const noexcept { return mods_.empty(); }
    std::size_t size() const noexcept { return mods_.size(); }
    const std::map<std::size_t, double>& modifications() const noexcept { return mods_; }

    /// Throws InvalidSteering if any index is >= dim_sae.
    void check_components(std::size_t dim_sae) const;

    friend bool operator==(const SteeringConfig&, const SteeringConfig&) = default;

private:
    std::map<std::size_t, double> mods_;
};

struct Prediction {
    std::vector<std::string> labels;
    std::vector<double> logits;
    std::vector<double> probabilities;
    std::size_t predicted_index = 0;
    ScoreMode mode = ScoreMode::Cosine;
    double logit_scale = 0.0;

    const std::string& predicted() const { return labels[predicted_index]; }
};

/// Steered reconstruction of one input.
struct SteeredState {
    SaeCode code;                        // unsteered activations and residual
    std::vector<double> activations;     // a'
    std::vector<double> embedding;       // x' = decode(a') + residual
};

SteeredState apply_steering(const SaeModel& model, std::span<const float> x,
                            const SteeringConfig& steering);

/// Scores an embedding directly against the class set (no SAE involved).
Prediction score_embedding(std::span<const double> embedding, const ClassSet& classes,
                           const ScoreOptions& options);

Prediction predict(const SaeModel& model, std::span<const float> x, const ClassSet& classes,
                   const SteeringConfig& steering, const ScoreOptions& options);

struct AttributionResult {
    std::string target_class;
    std::size_t target_index = 0;
    double target_logit = 0.0;
    std::vector<double> activations; // a' at the steered state
    std::vector<double> gradients;   // dy/da'_j
    std::vector<double> relevance;   // R_j = a'_j dy/da'_j
    // Components active before steering, ordered by |R| descending, ties by index.
    std::vector<std::size_t> ranking;
};

/// Activation x Gradient attribution of the target class logit with respect
/// to each component, evaluated at the steered state. `target` defaults to
/// the predicted class at that state.
AttributionResult attribute(const SaeModel& model, std::span<const float> x,
                            const ClassSet& classes, const SteeringConfig& steering,
                            const std::optional<std::string>& target,
                            const ScoreOptions& options);

/// Gradient of logit = scale * sim(x, t) with respect to x.
std::vector<double> logit_gradient(std::span<const double> x, std::span<const double> t,
                                   const ScoreOptions& options);

struct DosePoint {
    double m;
    Prediction prediction;
};

/// `steps` uniformly spaced values from -1 to 1 inclusive; steps >= 2.
std::vector<double> steering_grid(std::size_t steps);

std::vector<DosePoint> dose_response(const SaeModel& model, std::span<const float> x,
                                     const ClassSet& classes, std::size_t component,
                                     std::span<const double> grid, const ScoreOptions& options);

struct ClassImpact {
    std::string label;
    std::size_t support = 0; // eval samples whose true label is this class
    double accuracy_before = 0.0;
    double accuracy_after = 0.0;
    double mean_prob_before = 0.0; // mean probability of this class over its samples
    double mean_prob_after = 0.0;
};

struct ImpactReport {
    std::size_t samples = 0;
    double accuracy_before = 0.0;
    double accuracy_after = 0.0;
    // Mean over (sample, class) pairs of |p_after - p_before|.
    double mean_abs_prob_shift = 0.0;
    std::vector<ClassImpact> per_class;
};

ImpactReport global_impact(const SaeModel& model, const EmbeddingCorpus& eval_set,
                           const ClassSet& classes, const SteeringConfig& steering,
                           const ScoreOptions& options);

} // namespace steerlens
