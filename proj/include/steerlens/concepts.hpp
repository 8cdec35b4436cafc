#pragma once

#include "steerlens/ingest.hpp"
#include "steerlens/sae.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace steerlens {

struct LabelScore {
    std::string label;
    double score; // cos(mean, t) - cos(mean, t_empty)

    friend bool operator==(const LabelScore&, const LabelScore&) = default;
};

/// Naming data for one component: its top-k exemplars from a reference
/// corpus, their mean embedding, and vocabulary labels ranked by alignment.
struct ConceptCard {
    std::size_t component = 0;
    bool dead = false;
    std::vector<LabelScore> top_labels;      // score descending, ties by vocabulary order
    std::vector<std::string> exemplar_ids;   // activation descending, ties by sample index
    std::vector<double> exemplar_activations;
    std::vector<double> mean_embedding;      // empty when dead

    friend bool operator==(const ConceptCard&, const ConceptCard&) = default;
};

inline constexpr std::size_t kDefaultExemplars = 16;

/// Alignment of a mean exemplar embedding with label t, baselined against
/// the empty prompt.
double alignment_score(std::span<const double> mean, std::span<const float> label,
                       std::span<const float> empty_prompt);

/// `label_limit` == 0 keeps every non-empty vocabulary entry.
ConceptCard build_concept_card(const SaeModel& model, const EmbeddingCorpus& reference,
                               const Vocabulary& vocab, std::size_t component,
                               std::size_t k = kDefaultExemplars, std::size_t label_limit = 0);

std::vector<ConceptCard> build_all_cards(const SaeModel& model, const EmbeddingCorpus& reference,
                                         const Vocabulary& vocab,
                                         std::size_t k = kDefaultExemplars,
                                         std::size_t label_limit = 0);

inline constexpr std::string_view kCardMagic = "CRD1";

std::vector<ConceptCard> read_cards(const std::filesystem::path& path);
void write_cards(const std::vector<ConceptCard>& cards, const std::filesystem::path& path);

} // namespace steerlens
